// Copyright 2026 The lexstat Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Dollar and wall-time accounting for LLM-only versus hybrid (LLM labeling
// plus a small trained extractor) pipelines as a function of corpus size.
//
//   manual  = n_human_labels * per_labeled_example_usd
//   api     = calls * (in/1000 * p_in + out/1000 * p_out)
//             calls = n_llm_labels            (hybrid)
//                   = n_llm_labels + N        (llm_only)
//   compute = (train_hours + N * per_doc_infer_seconds / 3600) * gpu_usd_per_hour
//
//   labeling  = n_llm_labels * seconds_per_call(labeling model)
//   training  = train_hours * 3600
//   inference = N * per_doc_seconds / inference_parallelism
//             per_doc_seconds = per_doc_infer_seconds (hybrid)
//                             = seconds_per_call(extraction model) (llm_only)

#ifndef LEXSTAT_COST_MODEL_HPP_
#define LEXSTAT_COST_MODEL_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lexstat/types.hpp"

namespace lexstat {

class TokenEstimator;

struct ModelPrice {
  double per_1k_input_tokens_usd = 0.0;
  double per_1k_output_tokens_usd = 0.0;
  double seconds_per_call = 0.0;
};

struct TokensPerDoc {
  double input = 0.0;
  double output = 0.0;
};

struct PricingConfig {
  std::string version;
  double per_labeled_example_usd = 0.0;
  std::map<std::string, ModelPrice> models;
  std::map<std::string, double> gpu_usd_per_hour;
  TokensPerDoc tokens_per_doc_estimate;

  /// Throws kValidation for negative constants.
  void validate() const;
  const ModelPrice& model(const std::string& model_id) const;
  double gpu_rate(const std::string& gpu_class) const;
};

void to_json(Json& j, const PricingConfig& p);
void from_json(const Json& j, PricingConfig& p);

/// The shipped `pricing.default.json`.
const PricingConfig& default_pricing();
PricingConfig load_pricing(const std::filesystem::path& file);

/// Prompt tokens for one few-shot call from corpus statistics: the
/// instruction overhead plus (n_shots + 1) mean-length documents and
/// n_shots answers of `output_tokens` each.
TokensPerDoc tokens_per_doc_from_corpus(const std::vector<Document>& docs, std::size_t n_shots,
                                        const TokenEstimator& estimator,
                                        double output_tokens = 100.0);

enum class PlanKind { kLlmOnly, kHybrid };

std::string_view to_string(PlanKind k);

struct PipelinePlan {
  std::string name;
  PlanKind kind = PlanKind::kHybrid;
  std::int64_t n_human_labels = 0;
  std::int64_t n_llm_labels = 0;
  std::string labeling_model;
  std::string extraction_model_or_backbone;  // llm_only: priced model id
  std::string gpu_class = "a6000";
  double train_hours = 0.0;
  double per_doc_infer_seconds = 0.0;
  std::optional<double> labeling_seconds_per_example;  // default: model's seconds_per_call
  int inference_parallelism = 1;
  std::optional<TokensPerDoc> tokens_per_call;  // default: pricing estimate

  void validate() const;
};

void to_json(Json& j, const PipelinePlan& p);
void from_json(const Json& j, PipelinePlan& p);

/// `{"plans": [...]}` or a bare array.
std::vector<PipelinePlan> load_plans(const std::filesystem::path& file);
std::vector<PipelinePlan> plans_from_json(const Json& j);
const std::vector<PipelinePlan>& default_plans();

struct CostEstimate {
  double manual_usd = 0.0;
  double api_usd = 0.0;
  double compute_usd = 0.0;
  double total_usd = 0.0;
  double wall_seconds = 0.0;
};

void to_json(Json& j, const CostEstimate& c);

struct TimeEstimate {
  double labeling_seconds = 0.0;
  double training_seconds = 0.0;
  double inference_seconds = 0.0;
  double total_seconds = 0.0;
};

void to_json(Json& j, const TimeEstimate& t);

/// Throws kInvalidArgument for negative N.
CostEstimate estimate_cost(const PipelinePlan& plan, const PricingConfig& pricing, double n_docs);
TimeEstimate estimate_time(const PipelinePlan& plan, const PricingConfig& pricing, double n_docs);

struct CurveRow {
  std::string plan;
  double n = 0.0;
  CostEstimate cost;
};

struct Crossover {
  std::string hybrid;
  std::string llm_only;
  /// Intersection of the two affine total-cost lines; 0 when the hybrid
  /// plan is already cheaper at N=0, nullopt when it never becomes cheaper.
  std::optional<double> analytic_n;
  /// Smallest grid N where the hybrid plan is strictly cheaper.
  std::optional<double> grid_n;
};

struct TradeoffCurve {
  std::vector<CurveRow> rows;  // plan-major, grid order
  std::vector<Crossover> crossovers;  // one per (hybrid, llm_only) pair
};

void to_json(Json& j, const TradeoffCurve& c);

/// Throws kInvalidArgument for an empty grid or plan list.
TradeoffCurve tradeoff_curve(const std::vector<PipelinePlan>& plans, const PricingConfig& pricing,
                             const std::vector<double>& n_grid);

/// `plan,N,total_usd,manual_usd,api_usd,compute_usd,wall_seconds`
void write_curve_csv(std::ostream& out, const TradeoffCurve& curve);

/// Vega-Lite line chart of `metric` ("total_usd" or "wall_seconds") over N,
/// one line per plan, log-scaled axes.
Json curve_chart_spec(const TradeoffCurve& curve, const std::string& metric = "total_usd");

/// Parses "1e3,1e4,1e5" style lists.
std::vector<double> parse_grid(std::string_view csv);

}  // namespace lexstat

#endif  // LEXSTAT_COST_MODEL_HPP_
