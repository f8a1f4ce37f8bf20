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


// Extractors (LLM few-shot, distilled model behind the trainer protocol,
// regex pattern table), training-job orchestration and batch structuring.

#ifndef LEXSTAT_IE_ENGINE_HPP_
#define LEXSTAT_IE_ENGINE_HPP_

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <string>
#include <thread>
#include <vector>

#include "lexstat/llm_gateway.hpp"
#include "lexstat/types.hpp"

namespace lexstat {

class CorpusStore;

enum class ExtractorKind { kLlmFewshot, kDistilled, kPatternTable };

std::string_view to_string(ExtractorKind k);
ExtractorKind extractor_kind_from_string(std::string_view s);

struct ExtractorSpec {
  ExtractorKind kind = ExtractorKind::kPatternTable;
  // llm_fewshot: model id (empty: labeling route); distilled: checkpoint
  // directory; pattern_table: rule-table file ("inline" for in-memory rules).
  std::string model_ref;
  std::int64_t ontology_version = 0;

  void validate() const;
};

void to_json(Json& j, const ExtractorSpec& s);
void from_json(const Json& j, ExtractorSpec& s);

struct StructuredRecord {
  std::string doc_id;
  Parse parse;
  ExtractorSpec extractor;
  std::optional<double> confidence;
  std::string error;  // non-empty: extraction failed, parse is empty
};

void to_json(Json& j, const StructuredRecord& r);

class Extractor {
 public:
  virtual ~Extractor() = default;
  virtual const ExtractorSpec& spec() const = 0;
  virtual const Ontology& ontology() const = 0;

  /// Throws on failure; batch callers turn that into an error record.
  virtual Parse extract(const Document& doc) = 0;

  /// One record per document, in input order. Never throws for per-document
  /// failures. The default runs `extract` on up to `workers` threads.
  virtual std::vector<StructuredRecord> extract_many(const std::vector<Document>& docs,
                                                     std::size_t workers);

  StructuredRecord extract_one(const Document& doc);

  /// LLM token usage so far.
  virtual Usage usage() const { return {}; }
};

struct PatternRule {
  std::string field;
  std::string pattern;
  std::size_t group = 0;
};

void from_json(const Json& j, PatternRule& r);
void to_json(Json& j, const PatternRule& r);

/// Every rule adds all its matches (capture `group`) to its field, in text
/// order, duplicates removed. Single-valued fields keep the first value.
class PatternTableExtractor final : public Extractor {
 public:
  PatternTableExtractor(Ontology ontology, std::vector<PatternRule> rules,
                        std::string model_ref = "inline");
  /// `{"rules": [{"field": "BAC", "pattern": "([0-9.]+)%", "group": 0}]}`
  static std::unique_ptr<PatternTableExtractor> from_file(const std::filesystem::path& file,
                                                          Ontology ontology);

  const ExtractorSpec& spec() const override { return spec_; }
  const Ontology& ontology() const override { return ontology_; }
  Parse extract(const Document& doc) override;

 private:
  struct Compiled {
    PatternRule rule;
    std::regex regex;
  };
  Ontology ontology_;
  ExtractorSpec spec_;
  std::vector<Compiled> rules_;
};

/// build_ie_prompt -> complete -> parse_llm_output, with shots chosen per
/// document by the half-complete selection policy.
class LlmFewshotExtractor final : public Extractor {
 public:
  /// Throws kPrecondition when `seeds` is empty.
  LlmFewshotExtractor(LlmGateway& gateway, Ontology ontology, std::vector<LabeledExample> seeds,
                      std::vector<Document> seed_docs, std::size_t n_shots = 4,
                      std::uint64_t seed = 0, std::string model_id = {});

  const ExtractorSpec& spec() const override { return spec_; }
  const Ontology& ontology() const override { return ontology_; }
  Parse extract(const Document& doc) override;
  Usage usage() const override;

 private:
  LlmGateway& gateway_;
  Ontology ontology_;
  ExtractorSpec spec_;
  std::vector<LabeledExample> seeds_;
  std::map<std::string, Document> seed_docs_;
  std::size_t n_shots_;
  std::uint64_t seed_;
  std::atomic<std::int64_t> input_tokens_{0};
  std::atomic<std::int64_t> output_tokens_{0};
};

/// Runs `<shim> infer <jobdir>` where jobdir is the checkpoint's parent:
/// writes `infer.jsonl` (`{"doc_id","input"}`), reads `pred.jsonl`
/// (`{"doc_id","target"}`). Predictions go through parse_llm_output.
class DistilledExtractor final : public Extractor {
 public:
  /// Throws kPrecondition when the checkpoint directory is missing.
  DistilledExtractor(Ontology ontology, std::filesystem::path checkpoint,
                     std::filesystem::path shim,
                     std::map<std::string, std::string> shim_env = {});

  const ExtractorSpec& spec() const override { return spec_; }
  const Ontology& ontology() const override { return ontology_; }
  Parse extract(const Document& doc) override;
  std::vector<StructuredRecord> extract_many(const std::vector<Document>& docs,
                                             std::size_t workers) override;

  /// Predictions that needed repair or dropped unknown fields.
  std::size_t violations() const { return violations_.load(); }

 private:
  Ontology ontology_;
  ExtractorSpec spec_;
  std::filesystem::path job_dir_;
  std::filesystem::path shim_;
  std::map<std::string, std::string> shim_env_;
  std::atomic<std::size_t> violations_{0};
};

struct ExtractorContext {
  CorpusStore* store = nullptr;
  LlmGateway* gateway = nullptr;  // llm_fewshot only
  std::string corpus_id;
  std::filesystem::path shim;  // distilled only
  std::map<std::string, std::string> shim_env;
  std::size_t n_shots = 4;
  std::uint64_t seed = 0;
  std::vector<PatternRule> inline_rules;  // pattern_table with model_ref "inline"
};

/// Builds the extractor named by `spec` against the corpus's current
/// ontology. llm_fewshot draws its seeds from the corpus's human labels.
std::unique_ptr<Extractor> make_extractor(const ExtractorSpec& spec, const ExtractorContext& ctx);

// -- structured tables ----------------------------------------------------

struct TableRow {
  std::string doc_id;
  Parse values;  // normalized by field kind
  Parse raw;     // as extracted
  std::string error;
};

struct StructuredTable {
  std::string table_id;
  std::string corpus_id;
  Ontology ontology;
  ExtractorSpec extractor;
  std::vector<TableRow> rows;  // sorted by doc_id

  const TableRow* find(std::string_view doc_id) const;
};

/// `<data_dir>/tables/<table_id>/` with `manifest.json` and `table.jsonl`
/// (`{"doc_id","values","raw","error"?}` per line).
void save_table(const StructuredTable& table, const std::filesystem::path& dir);
StructuredTable load_table(const std::filesystem::path& dir);
StructuredTable load_table(const CorpusStore& store, const std::string& table_id);
std::filesystem::path table_dir(const CorpusStore& store, const std::string& table_id);

struct DocFilter {
  std::vector<std::string> doc_ids;          // empty: all documents
  std::map<std::string, std::string> meta;   // exact-match metadata
  std::vector<std::string> terms;            // BM25 match on any term

  bool empty() const { return doc_ids.empty() && meta.empty() && terms.empty(); }
};

void from_json(const Json& j, DocFilter& f);

struct BatchReport {
  std::string table_id;
  std::size_t docs = 0;
  std::size_t failures = 0;
  double wall_ms = 0.0;
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
  ExtractorSpec extractor;
  std::vector<std::pair<std::string, std::string>> failed;  // doc_id, error
};

void to_json(Json& j, const BatchReport& r);

/// One record per matching document, assembled in doc_id order, persisted
/// as a structured table. Per-document failures become error rows. Throws
/// kNotFound when nothing matches and kInternal when every document failed.
BatchReport extract_batch(Extractor& extractor, CorpusStore& store, const std::string& corpus_id,
                          const DocFilter& filter = {}, std::size_t workers = 4);

// -- training jobs --------------------------------------------------------

enum class JobState { kQueued, kRunning, kRetrying, kDone, kFailed, kFailedDiverged };

std::string_view to_string(JobState s);
JobState job_state_from_string(std::string_view s);
bool is_terminal(JobState s);

struct TrainingHyperparams {
  int batch_size = 12;
  double lr = 4e-4;
  double fallback_lr = 3e-4;
  int epochs = 60;
  int adapter_rank = 8;
  std::uint64_t seed = 0;
  std::string base_model = "t5-small";

  void validate() const;
};

void to_json(Json& j, const TrainingHyperparams& h);
void from_json(const Json& j, TrainingHyperparams& h);

/// The shim's `config.json`, keys in protocol order.
std::string trainer_config_json(const TrainingHyperparams& h, double lr);

struct JobTransition {
  JobState state;
  std::string at;
  std::string message;
};

struct TrainingJob {
  std::string job_id;
  std::string dataset_id;
  TrainingHyperparams hyperparams;
  JobState state = JobState::kQueued;
  int attempt = 0;            // 1 normally, 2 after the lr fallback
  double current_lr = 0.0;
  int epoch = 0;              // last epoch reported by the shim
  std::vector<double> loss;   // per-epoch loss of the current attempt; NaN for non-finite
  std::string checkpoint_path;
  std::string message;
  std::string created_at;
  std::string finished_at;
  std::vector<JobTransition> history;
};

void to_json(Json& j, const TrainingJob& job);
TrainingJob training_job_from_json(const Json& j);

struct TrainingManagerConfig {
  std::filesystem::path shim;
  std::map<std::string, std::string> shim_env;
  std::chrono::milliseconds poll_interval{50};
  std::chrono::seconds attempt_timeout{6 * 3600};
};

/// Jobs live in `<data_dir>/jobs/<job_id>/` next to the shim's files:
/// `train.jsonl`, `config.json`, `status.json`, `checkpoint/`, `shim.log`,
/// and the engine's own `job.json`. Jobs interrupted by a restart are
/// marked failed when the manager starts.
class TrainingManager {
 public:
  TrainingManager(CorpusStore& store, TrainingManagerConfig cfg);
  ~TrainingManager();
  TrainingManager(const TrainingManager&) = delete;
  TrainingManager& operator=(const TrainingManager&) = delete;

  /// Queues a job and runs it on a background thread. Throws kNotFound for
  /// an unknown dataset, kPrecondition for an empty one, kConflict while
  /// another job for the same dataset is active.
  std::string submit_training_job(const std::string& dataset_id,
                                  const TrainingHyperparams& hyperparams = {});

  TrainingJob job(const std::string& job_id) const;
  std::vector<TrainingJob> jobs() const;

  /// Blocks until the job is terminal or `timeout` passes; returns its view.
  TrainingJob wait(const std::string& job_id,
                   std::chrono::milliseconds timeout = std::chrono::hours(24)) const;

  std::filesystem::path job_dir(const std::string& job_id) const;

 private:
  void run(const std::string& job_id);
  bool run_attempt(TrainingJob& job);
  void persist(const TrainingJob& job);
  void transition(TrainingJob& job, JobState to, std::string message = {});

  CorpusStore& store_;
  TrainingManagerConfig cfg_;
  std::filesystem::path root_;
  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  std::map<std::string, TrainingJob> jobs_;
  std::vector<std::thread> workers_;
  std::atomic<bool> stopping_{false};
};

}  // namespace lexstat

#endif  // LEXSTAT_IE_ENGINE_HPP_
