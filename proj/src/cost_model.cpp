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


#include "lexstat/cost_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>

#include "lexstat/error.hpp"
#include "lexstat/llm_gateway.hpp"
#include "lexstat/text.hpp"

namespace lexstat {

namespace detail {
extern const std::string_view kDefaultPricingJson;
extern const std::string_view kDefaultPlansJson;
}  // namespace detail

namespace {

void require_non_negative(double v, const std::string& what) {
  if (!(v >= 0.0) || !std::isfinite(v)) {
    throw Error(ErrorCode::kValidation, what + " must be a non-negative number", what);
  }
}

Json read_json_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::kNotFound, "cannot read " + file.string(), file.string());
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, "invalid JSON in " + file.string() + ": " + e.what(),
                file.string());
  }
}

void require_n(double n) {
  if (!(n >= 0.0) || !std::isfinite(n)) {
    throw Error(ErrorCode::kInvalidArgument, "corpus size must be >= 0");
  }
}

double call_usd(const ModelPrice& m, const TokensPerDoc& t) {
  return t.input / 1000.0 * m.per_1k_input_tokens_usd +
         t.output / 1000.0 * m.per_1k_output_tokens_usd;
}

}  // namespace

// -- pricing -------------------------------------------------------------------

void PricingConfig::validate() const {
  require_non_negative(per_labeled_example_usd, "per_labeled_example_usd");
  for (const auto& [id, m] : models) {
    require_non_negative(m.per_1k_input_tokens_usd, id + ".per_1k_input_tokens_usd");
    require_non_negative(m.per_1k_output_tokens_usd, id + ".per_1k_output_tokens_usd");
    require_non_negative(m.seconds_per_call, id + ".seconds_per_call");
  }
  for (const auto& [gpu, rate] : gpu_usd_per_hour) require_non_negative(rate, "gpu_usd_per_hour." + gpu);
  require_non_negative(tokens_per_doc_estimate.input, "tokens_per_doc_estimate.input");
  require_non_negative(tokens_per_doc_estimate.output, "tokens_per_doc_estimate.output");
}

const ModelPrice& PricingConfig::model(const std::string& model_id) const {
  auto it = models.find(model_id);
  if (it == models.end()) {
    throw Error(ErrorCode::kValidation, "no pricing for model '" + model_id + "'", model_id);
  }
  return it->second;
}

double PricingConfig::gpu_rate(const std::string& gpu_class) const {
  auto it = gpu_usd_per_hour.find(gpu_class);
  if (it == gpu_usd_per_hour.end()) {
    throw Error(ErrorCode::kValidation, "no pricing for GPU class '" + gpu_class + "'", gpu_class);
  }
  return it->second;
}

void to_json(Json& j, const PricingConfig& p) {
  Json models = Json::object();
  for (const auto& [id, m] : p.models) {
    models[id] = {{"per_1k_input_tokens_usd", m.per_1k_input_tokens_usd},
                  {"per_1k_output_tokens_usd", m.per_1k_output_tokens_usd},
                  {"seconds_per_call", m.seconds_per_call}};
  }
  j = Json{{"version", p.version},
           {"per_labeled_example_usd", p.per_labeled_example_usd},
           {"models", std::move(models)},
           {"gpu_usd_per_hour", p.gpu_usd_per_hour},
           {"tokens_per_doc_estimate",
            {{"input", p.tokens_per_doc_estimate.input},
             {"output", p.tokens_per_doc_estimate.output}}}};
}

void from_json(const Json& j, PricingConfig& p) {
  p = PricingConfig{};
  p.version = j.value("version", std::string{});
  p.per_labeled_example_usd = j.value("per_labeled_example_usd", 0.0);
  const Json models = j.value("models", Json::object());
  for (const auto& [id, m] : models.items()) {
    ModelPrice mp;
    mp.per_1k_input_tokens_usd = m.value("per_1k_input_tokens_usd", 0.0);
    mp.per_1k_output_tokens_usd = m.value("per_1k_output_tokens_usd", 0.0);
    mp.seconds_per_call = m.value("seconds_per_call", 0.0);
    p.models.emplace(id, mp);
  }
  p.gpu_usd_per_hour = j.value("gpu_usd_per_hour", std::map<std::string, double>{});
  const auto t = j.value("tokens_per_doc_estimate", Json::object());
  p.tokens_per_doc_estimate.input = t.value("input", 0.0);
  p.tokens_per_doc_estimate.output = t.value("output", 0.0);
  p.validate();
}

const PricingConfig& default_pricing() {
  static const PricingConfig p = Json::parse(detail::kDefaultPricingJson).get<PricingConfig>();
  return p;
}

PricingConfig load_pricing(const std::filesystem::path& file) {
  return read_json_file(file).get<PricingConfig>();
}

TokensPerDoc tokens_per_doc_from_corpus(const std::vector<Document>& docs, std::size_t n_shots,
                                        const TokenEstimator& estimator, double output_tokens) {
  constexpr double kInstructionTokens = 80.0;
  double mean = 0.0;
  for (const auto& d : docs) mean += static_cast<double>(estimator.estimate(d.body));
  if (!docs.empty()) mean /= static_cast<double>(docs.size());
  const double shots = static_cast<double>(n_shots);
  return TokensPerDoc{kInstructionTokens + (shots + 1.0) * mean + shots * output_tokens,
                      output_tokens};
}

// -- plans ---------------------------------------------------------------------

std::string_view to_string(PlanKind k) { return k == PlanKind::kLlmOnly ? "llm_only" : "hybrid"; }

void PipelinePlan::validate() const {
  if (name.empty()) throw Error(ErrorCode::kValidation, "plan needs a name");
  if (n_human_labels < 0 || n_llm_labels < 0) {
    throw Error(ErrorCode::kValidation, "plan '" + name + "': label counts must be >= 0", name);
  }
  require_non_negative(train_hours, name + ".train_hours");
  require_non_negative(per_doc_infer_seconds, name + ".per_doc_infer_seconds");
  if (labeling_seconds_per_example) {
    require_non_negative(*labeling_seconds_per_example, name + ".labeling_seconds_per_example");
  }
  if (kind == PlanKind::kLlmOnly && train_hours != 0.0) {
    throw Error(ErrorCode::kValidation, "plan '" + name + "': llm_only plans have train_hours = 0",
                name);
  }
  if (inference_parallelism < 1) {
    throw Error(ErrorCode::kValidation, "plan '" + name + "': inference_parallelism must be >= 1",
                name);
  }
}

void to_json(Json& j, const PipelinePlan& p) {
  j = Json{{"name", p.name},
           {"kind", to_string(p.kind)},
           {"n_human_labels", p.n_human_labels},
           {"n_llm_labels", p.n_llm_labels},
           {"labeling_model", p.labeling_model},
           {"extraction_model_or_backbone", p.extraction_model_or_backbone},
           {"gpu_class", p.gpu_class},
           {"train_hours", p.train_hours},
           {"per_doc_infer_seconds", p.per_doc_infer_seconds},
           {"inference_parallelism", p.inference_parallelism}};
  if (p.labeling_seconds_per_example) {
    j["labeling_seconds_per_example"] = *p.labeling_seconds_per_example;
  }
  if (p.tokens_per_call) {
    j["tokens_per_call"] = {{"input", p.tokens_per_call->input},
                            {"output", p.tokens_per_call->output}};
  }
}

void from_json(const Json& j, PipelinePlan& p) {
  p = PipelinePlan{};
  p.name = j.at("name").get<std::string>();
  const auto kind = j.value("kind", std::string("hybrid"));
  if (kind == "llm_only") {
    p.kind = PlanKind::kLlmOnly;
  } else if (kind == "hybrid") {
    p.kind = PlanKind::kHybrid;
  } else {
    throw Error(ErrorCode::kValidation, "plan kind must be llm_only or hybrid, got '" + kind + "'",
                kind);
  }
  p.n_human_labels = j.value("n_human_labels", std::int64_t{0});
  p.n_llm_labels = j.value("n_llm_labels", std::int64_t{0});
  p.labeling_model = j.value("labeling_model", std::string{});
  p.extraction_model_or_backbone = j.value("extraction_model_or_backbone", std::string{});
  p.gpu_class = j.value("gpu_class", p.gpu_class);
  p.train_hours = j.value("train_hours", 0.0);
  p.per_doc_infer_seconds = j.value("per_doc_infer_seconds", 0.0);
  p.inference_parallelism = j.value("inference_parallelism", 1);
  if (j.contains("labeling_seconds_per_example")) {
    p.labeling_seconds_per_example = j.at("labeling_seconds_per_example").get<double>();
  }
  if (j.contains("tokens_per_call")) {
    const auto& t = j.at("tokens_per_call");
    p.tokens_per_call = TokensPerDoc{t.value("input", 0.0), t.value("output", 0.0)};
  }
  p.validate();
}

std::vector<PipelinePlan> plans_from_json(const Json& j) {
  const Json& list = j.is_array() ? j : j.at("plans");
  return list.get<std::vector<PipelinePlan>>();
}

std::vector<PipelinePlan> load_plans(const std::filesystem::path& file) {
  return plans_from_json(read_json_file(file));
}

const std::vector<PipelinePlan>& default_plans() {
  static const auto plans = plans_from_json(Json::parse(detail::kDefaultPlansJson));
  return plans;
}

// -- estimates -----------------------------------------------------------------

void to_json(Json& j, const CostEstimate& c) {
  j = Json{{"manual_usd", c.manual_usd},   {"api_usd", c.api_usd},
           {"compute_usd", c.compute_usd}, {"total_usd", c.total_usd},
           {"wall_seconds", c.wall_seconds}};
}

void to_json(Json& j, const TimeEstimate& t) {
  j = Json{{"labeling_seconds", t.labeling_seconds},
           {"training_seconds", t.training_seconds},
           {"inference_seconds", t.inference_seconds},
           {"total_seconds", t.total_seconds}};
}

TimeEstimate estimate_time(const PipelinePlan& plan, const PricingConfig& pricing, double n_docs) {
  require_n(n_docs);
  plan.validate();
  TimeEstimate t;
  if (plan.n_llm_labels > 0) {
    const double per_label = plan.labeling_seconds_per_example
                                 ? *plan.labeling_seconds_per_example
                                 : pricing.model(plan.labeling_model).seconds_per_call;
    t.labeling_seconds = static_cast<double>(plan.n_llm_labels) * per_label;
  }
  t.training_seconds = plan.train_hours * 3600.0;
  const double per_doc = plan.kind == PlanKind::kHybrid
                             ? plan.per_doc_infer_seconds
                             : pricing.model(plan.extraction_model_or_backbone).seconds_per_call;
  t.inference_seconds = n_docs * per_doc / static_cast<double>(plan.inference_parallelism);
  t.total_seconds = t.labeling_seconds + t.training_seconds + t.inference_seconds;
  return t;
}

CostEstimate estimate_cost(const PipelinePlan& plan, const PricingConfig& pricing, double n_docs) {
  require_n(n_docs);
  plan.validate();
  const TokensPerDoc tokens = plan.tokens_per_call.value_or(pricing.tokens_per_doc_estimate);
  CostEstimate c;
  c.manual_usd = static_cast<double>(plan.n_human_labels) * pricing.per_labeled_example_usd;
  if (plan.n_llm_labels > 0) {
    c.api_usd = static_cast<double>(plan.n_llm_labels) *
                call_usd(pricing.model(plan.labeling_model), tokens);
  }
  if (plan.kind == PlanKind::kLlmOnly) {
    c.api_usd += n_docs * call_usd(pricing.model(plan.extraction_model_or_backbone), tokens);
  }
  const double gpu_hours = plan.train_hours + n_docs * plan.per_doc_infer_seconds / 3600.0;
  if (gpu_hours > 0.0) c.compute_usd = gpu_hours * pricing.gpu_rate(plan.gpu_class);
  c.total_usd = c.manual_usd + c.api_usd + c.compute_usd;
  c.wall_seconds = estimate_time(plan, pricing, n_docs).total_seconds;
  return c;
}

// -- curves --------------------------------------------------------------------

void to_json(Json& j, const TradeoffCurve& c) {
  Json rows = Json::array();
  for (const auto& r : c.rows) {
    Json row = r.cost;
    row["plan"] = r.plan;
    row["N"] = r.n;
    rows.push_back(std::move(row));
  }
  Json xs = Json::array();
  for (const auto& x : c.crossovers) {
    xs.push_back({{"hybrid", x.hybrid},
                  {"llm_only", x.llm_only},
                  {"analytic_n", x.analytic_n ? Json(*x.analytic_n) : Json(nullptr)},
                  {"grid_n", x.grid_n ? Json(*x.grid_n) : Json(nullptr)}});
  }
  j = Json{{"rows", std::move(rows)}, {"crossovers", std::move(xs)}};
}

TradeoffCurve tradeoff_curve(const std::vector<PipelinePlan>& plans, const PricingConfig& pricing,
                             const std::vector<double>& n_grid) {
  if (n_grid.empty()) throw Error(ErrorCode::kInvalidArgument, "the N grid is empty");
  if (plans.empty()) throw Error(ErrorCode::kInvalidArgument, "no plans given");
  pricing.validate();
  TradeoffCurve curve;
  for (const auto& p : plans) {
    for (double n : n_grid) curve.rows.push_back({p.name, n, estimate_cost(p, pricing, n)});
  }
  std::vector<double> grid = n_grid;
  std::sort(grid.begin(), grid.end());
  for (const auto& h : plans) {
    if (h.kind != PlanKind::kHybrid) continue;
    for (const auto& l : plans) {
      if (l.kind != PlanKind::kLlmOnly) continue;
      Crossover x{h.name, l.name, std::nullopt, std::nullopt};
      // Both totals are affine in N: fixed part at N=0, slope from N=1.
      const double fh = estimate_cost(h, pricing, 0).total_usd;
      const double fl = estimate_cost(l, pricing, 0).total_usd;
      const double mh = estimate_cost(h, pricing, 1).total_usd - fh;
      const double ml = estimate_cost(l, pricing, 1).total_usd - fl;
      if (fh < fl) {
        x.analytic_n = 0.0;
      } else if (mh < ml) {
        x.analytic_n = (fh - fl) / (ml - mh);
      }
      for (double n : grid) {
        if (estimate_cost(h, pricing, n).total_usd < estimate_cost(l, pricing, n).total_usd) {
          x.grid_n = n;
          break;
        }
      }
      curve.crossovers.push_back(std::move(x));
    }
  }
  return curve;
}

void write_curve_csv(std::ostream& out, const TradeoffCurve& curve) {
  out << "plan,N,total_usd,manual_usd,api_usd,compute_usd,wall_seconds\n";
  auto num = [](double v) { return Json(v).dump(); };
  for (const auto& r : curve.rows) {
    out << r.plan << ',' << num(r.n) << ',' << num(r.cost.total_usd) << ','
        << num(r.cost.manual_usd) << ',' << num(r.cost.api_usd) << ',' << num(r.cost.compute_usd)
        << ',' << num(r.cost.wall_seconds) << '\n';
  }
}

Json curve_chart_spec(const TradeoffCurve& curve, const std::string& metric) {
  if (metric != "total_usd" && metric != "wall_seconds") {
    throw Error(ErrorCode::kInvalidArgument, "metric must be total_usd or wall_seconds", metric);
  }
  Json values = Json::array();
  for (const auto& r : curve.rows) {
    values.push_back({{"plan", r.plan},
                      {"N", r.n},
                      {metric, metric == "total_usd" ? r.cost.total_usd : r.cost.wall_seconds}});
  }
  const bool log_y = std::all_of(curve.rows.begin(), curve.rows.end(), [&](const CurveRow& r) {
    return (metric == "total_usd" ? r.cost.total_usd : r.cost.wall_seconds) > 0.0;
  });
  Json y = {{"field", metric}, {"type", "quantitative"},
            {"title", metric == "total_usd" ? "total cost (USD)" : "wall time (s)"}};
  if (log_y) y["scale"] = {{"type", "log"}};
  return Json{{"$schema", "https://vega.github.io/schema/vega-lite/v5.json"},
              {"data", {{"values", std::move(values)}}},
              {"mark", {{"type", "line"}, {"point", true}}},
              {"encoding",
               {{"x", {{"field", "N"}, {"type", "quantitative"}, {"scale", {{"type", "log"}}},
                       {"title", "documents"}}},
                {"y", std::move(y)},
                {"color", {{"field", "plan"}, {"type", "nominal"}}}}}};
}

std::vector<double> parse_grid(std::string_view csv) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= csv.size()) {
    auto end = csv.find(',', start);
    if (end == std::string_view::npos) end = csv.size();
    const auto tok = std::string(text::trim(csv.substr(start, end - start)));
    if (!tok.empty()) {
      std::size_t used = 0;
      double v = 0;
      try {
        v = std::stod(tok, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != tok.size()) {
        throw Error(ErrorCode::kInvalidArgument, "bad grid value '" + tok + "'", tok);
      }
      require_n(v);
      out.push_back(v);
    }
    start = end + 1;
  }
  if (out.empty()) throw Error(ErrorCode::kInvalidArgument, "the N grid is empty");
  return out;
}

}  // namespace lexstat
