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

// JSON-in, JSON-out operations shared by the HTTP server and the CLI. Both
// front ends call the same methods, so their outputs agree byte for byte.

#ifndef LEXSTAT_SERVICE_HPP_
#define LEXSTAT_SERVICE_HPP_

#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "lexstat/error.hpp"
#include "lexstat/types.hpp"

namespace lexstat {

class CorpusStore;
class LlmGateway;
class TrainingManager;
struct AnalysisSession;

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path data_dir = "lexstat-data";
  /// "mock" or "http". Empty picks "http" when an API key is in the
  /// environment, "mock" otherwise.
  std::string llm_backend;
  std::filesystem::path mock_rules;  // rule table for the mock backend
  std::size_t parallelism = 4;       // concurrent LLM calls and extract workers
  std::size_t job_workers = 2;       // async jobs running at once
  std::filesystem::path pricing;     // empty: shipped defaults
  std::filesystem::path plans;       // empty: shipped defaults
  std::filesystem::path shim;        // trainer shim executable
  std::map<std::string, std::string> shim_env;

  /// Keys as above; unknown keys are rejected.
  static ServiceConfig from_json(const Json& j);
  static ServiceConfig from_file(const std::filesystem::path& file);

  /// LEXSTAT_DATA_DIR, LEXSTAT_LLM_BACKEND, LEXSTAT_MOCK_RULES,
  /// LEXSTAT_TRAINER_SHIM, LEXSTAT_PRICING, LEXSTAT_PARALLELISM override
  /// unset fields.
  void apply_env();
};

void to_json(Json& j, const ServiceConfig& c);

/// `{"code","message","detail"}`.
Json error_json(const Error& e);
int http_status(ErrorCode code);

/// Runs `fn`, converting JSON type errors and missing keys into
/// kInvalidArgument.
Json guarded(const std::function<Json()>& fn);

class Service {
 public:
  explicit Service(ServiceConfig cfg);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  const ServiceConfig& config() const { return cfg_; }
  CorpusStore& store() { return *store_; }
  LlmGateway& gateway() { return *gateway_; }

  // -- corpus and labels --------------------------------------------------
  Json ingest(std::istream& jsonl, const std::string& corpus_id = {});
  Json list_corpora() const;
  Json get_ontology(const std::string& corpus_id) const;
  /// A whole ontology, or `{"op": ...}` for a single edit.
  Json put_ontology(const std::string& corpus_id, const Json& body);
  /// `{"query"?, "terms"?, "filters"?, "top_k"?}`; a query string goes
  /// through search-term extraction.
  Json search(const std::string& corpus_id, const Json& body);
  /// Body, metadata and current labels of one document.
  Json get_document(const std::string& corpus_id, const std::string& doc_id) const;
  /// `{"parse": {...}, "provenance"?: "human", "labeler"?: "..."}`.
  Json put_label(const std::string& corpus_id, const std::string& doc_id, const Json& body);
  Json get_labels(const std::string& corpus_id, const Json& query = Json::object()) const;

  // -- long operations ----------------------------------------------------
  // With `wait` false these return a job view right away; with `wait` true
  // they block and return the finished job view.

  /// AugmentationConfig fields. The result is the training set manifest.
  Json augment(const std::string& corpus_id, const Json& body, bool wait);
  /// `{"dataset_id", "hyperparams"?}`.
  Json train(const Json& body, bool wait);
  /// `{"extractor": ExtractorSpec, "filter"?, "n_shots"?, "seed"?, "rules"?}`.
  Json extract(const std::string& corpus_id, const Json& body, bool wait);
  Json job(const std::string& job_id) const;
  Json wait_job(const std::string& job_id) const;
  Json jobs() const;

  // -- evaluation, analysis, cost -----------------------------------------
  /// `{"pred": source, "gold": source, "ontology"?, "exclude"?,
  ///   "restrict_to_gold"?: true, "mode"?: "field"|"classification",
  ///   "field"?}` where a source is `{"table_id"}`, `{"path"}`,
  /// `{"corpus_id", "provenance"?}` or `{"parses": {doc_id: parse}}`.
  Json eval(const Json& body);
  /// `{"corpus_id", "table_id"?, "session_id"?, "message"}` routes through
  /// the chat model; `"tool": {"name","arguments"}` in place of the
  /// message runs the tool directly.
  Json chat(const Json& body);
  /// `{"grid", "plans"?, "pricing"?, "metric"?}`.
  Json cost_curve(const Json& body) const;
  Json tools() const;
  static Json schema();

 private:
  struct Task;

  Json submit_task(const std::string& kind, const std::string& corpus_id,
                   std::function<Json(Task&)> work, bool wait);
  Json task_view(const Task& t) const;
  void persist_task(const Task& t) const;
  void recover_tasks();
  Json training_view(const std::string& job_id) const;
  AnalysisSession& session_for(const Json& body, std::string& session_id);

  ServiceConfig cfg_;
  std::unique_ptr<CorpusStore> store_;
  std::unique_ptr<LlmGateway> gateway_;
  std::unique_ptr<TrainingManager> trainer_;

  mutable std::mutex tasks_mu_;
  mutable std::condition_variable tasks_cv_;
  std::map<std::string, std::shared_ptr<Task>> tasks_;
  std::size_t running_ = 0;
  std::vector<std::thread> threads_;

  std::mutex sessions_mu_;
  std::map<std::string, std::unique_ptr<AnalysisSession>> sessions_;
};

/// The store-independent halves of `Service::eval` and `Service::cost_curve`;
/// `store` may be null when every source is a file or inline.
Json eval_request(const Json& body, const CorpusStore* store);
Json cost_curve_request(const Json& body, const ServiceConfig& cfg);

/// Blocks serving the API until `stop_serving` is called. `on_ready`
/// receives the bound port (useful with port 0).
void serve(Service& service, const std::string& host, int port,
           const std::function<void(int)>& on_ready = {});
void stop_serving();

}  // namespace lexstat

#endif  // LEXSTAT_SERVICE_HPP_
