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

// Few-shot LLM labeling that grows a handful of human seed labels into a
// training set.

#ifndef LEXSTAT_AUTO_LABELER_HPP_
#define LEXSTAT_AUTO_LABELER_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "lexstat/types.hpp"

namespace lexstat {

class CorpusStore;
class LlmGateway;

struct AugmentationConfig {
  std::size_t n_target = 16;
  std::size_t n_seed_shots = 4;       // 8 for ruling-style tasks
  std::string labeling_model_id;      // empty: the gateway's labeling route
  std::size_t max_repair_attempts = 1;  // re-prompts after a failed repair
  std::uint64_t seed = 0;
  /// Called after each wave with (labels produced, labels needed).
  std::function<void(std::size_t, std::size_t)> on_progress;

  void validate() const;
};

void to_json(Json& j, const AugmentationConfig& c);
void from_json(const Json& j, AugmentationConfig& c);

struct LabelingReport {
  std::size_t requested = 0;  // documents attempted
  std::size_t produced = 0;
  std::size_t invalid_discarded = 0;
  std::size_t llm_calls = 0;  // including re-prompts and context shrinking
  std::int64_t total_input_tokens = 0;
  std::int64_t total_output_tokens = 0;
  double wall_ms = 0.0;
  double llm_latency_ms = 0.0;  // summed per-call latency
  bool zero_coverage = false;   // no seed covered every field
  bool aborted = false;
  std::string abort_message;
  std::vector<std::string> warnings;
};

void to_json(Json& j, const LabelingReport& r);

struct FewShotSelection {
  std::vector<LabeledExample> shots;  // complete-coverage examples first
  std::size_t complete_selected = 0;
  bool zero_coverage = false;
};

/// ceil(k/2) shots covering every ontology field (or all such seeds when
/// fewer exist), the remaining slots drawn uniformly without replacement
/// from the other seeds. Complete-coverage seeds only fill the remaining
/// slots when the other seeds run out.
FewShotSelection select_fewshot_examples(const std::vector<LabeledExample>& seeds,
                                         const Ontology& ontology, std::size_t k,
                                         std::mt19937_64& rng);

struct ParseOutcome {
  Parse parse;
  bool repaired = false;
  std::vector<std::string> warnings;
};

/// Strict JSON first; then repair (first balanced {...}, single to double
/// quotes, bare `FIELD: [...]` lists) and coercion (scalars wrapped in
/// lists, values to strings, unknown fields dropped). The result always
/// validates against `ontology`. Throws kParseFailure with the raw text as
/// detail when nothing can be recovered.
ParseOutcome parse_llm_output(std::string_view raw, const Ontology& ontology);

struct LabelingResult {
  std::vector<LabeledExample> labels;  // provenance llm, sorted by doc_id
  LabelingReport report;
};

/// Labels candidates in doc_id order until n_target minus the number of
/// human seeds have been produced. Produced labels are persisted. A hard
/// LLM failure stops the run; what was produced so far is returned with
/// `report.aborted` set.
LabelingResult label_documents(CorpusStore& store, LlmGateway& gateway,
                               const std::string& corpus_id, const Ontology& ontology,
                               const AugmentationConfig& cfg,
                               std::vector<std::string> candidate_doc_ids);

struct TrainingSet {
  std::string dataset_id;
  std::string corpus_id;
  std::filesystem::path dir;  // holds train.jsonl and manifest.json
  std::size_t n_human = 0;
  std::size_t n_llm = 0;
  bool shortfall = false;
  LabelingReport report;

  std::size_t size() const { return n_human + n_llm; }
  std::filesystem::path train_file() const { return dir / "train.jsonl"; }
};

void to_json(Json& j, const TrainingSet& t);

/// Human labels when they reach n_target (truncated in doc_id order),
/// otherwise human plus LLM labels up to n_target. Materialized under
/// `<data_dir>/datasets/<dataset_id>/`.
TrainingSet ensure_training_set(CorpusStore& store, LlmGateway& gateway,
                                const std::string& corpus_id, const AugmentationConfig& cfg);

/// Reads `manifest.json` of an existing dataset.
TrainingSet load_training_set(const CorpusStore& store, const std::string& dataset_id);

/// Unbiased index in [0, n).
std::size_t uniform_index(std::mt19937_64& rng, std::size_t n);

}  // namespace lexstat

#endif  // LEXSTAT_AUTO_LABELER_HPP_
