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


#include "lexstat/service.hpp"

#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "fsutil.hpp"
#include "lexstat/analysis.hpp"
#include "lexstat/auto_labeler.hpp"
#include "lexstat/corpus_store.hpp"
#include "lexstat/cost_model.hpp"
#include "lexstat/evaluator.hpp"
#include "lexstat/ie_engine.hpp"
#include "lexstat/llm_gateway.hpp"
#include "lexstat/search_index.hpp"

namespace lexstat {

namespace fs = std::filesystem;

namespace {

std::string env_or(const char* name, std::string fallback = {}) {
  const char* v = std::getenv(name);
  return v != nullptr && *v != '\0' ? std::string(v) : fallback;
}

// Resolves a bare program name through PATH.
fs::path resolve_executable(const fs::path& p) {
  if (p.empty() || p.has_parent_path()) return p;
  std::stringstream path(env_or("PATH"));
  std::string dir;
  while (std::getline(path, dir, ':')) {
    if (dir.empty()) continue;
    const fs::path candidate = fs::path(dir) / p;
    if (detail::is_executable(candidate)) return candidate;
  }
  return p;
}

std::shared_ptr<ChatBackend> make_backend(const ServiceConfig& cfg) {
  std::string kind = cfg.llm_backend;
  if (kind.empty()) {
    const bool has_key = !env_or("LEXSTAT_API_KEY").empty() || !env_or("OPENAI_API_KEY").empty();
    kind = cfg.mock_rules.empty() && has_key ? "http" : "mock";
  }
  if (kind == "mock") {
    if (cfg.mock_rules.empty()) return std::make_shared<MockBackend>();
    return MockBackend::from_file(cfg.mock_rules);
  }
  if (kind == "http") return make_http_backend(HttpBackendConfig::from_env());
  throw Error(ErrorCode::kInvalidArgument, "unknown llm_backend '" + kind + "' (mock or http)");
}

const Json& require(const Json& body, const char* key) {
  auto it = body.find(key);
  if (it == body.end() || it->is_null()) {
    throw Error(ErrorCode::kInvalidArgument, std::string("missing required field '") + key + "'",
                key);
  }
  return *it;
}

void require_object(const Json& body) {
  if (!body.is_object()) throw Error(ErrorCode::kInvalidArgument, "request body must be a JSON object");
}

std::string json_string(const Json& j, const char* key, std::string fallback = {}) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  if (!it->is_string()) {
    throw Error(ErrorCode::kInvalidArgument, std::string("'") + key + "' must be a string", key);
  }
  return it->get<std::string>();
}

}  // namespace

// -- config ---------------------------------------------------------------

ServiceConfig ServiceConfig::from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kInvalidArgument, "config must be a JSON object");
  ServiceConfig c;
  for (const auto& [k, v] : j.items()) {
    if (k == "host") c.host = v.get<std::string>();
    else if (k == "port") c.port = v.get<int>();
    else if (k == "data_dir") c.data_dir = v.get<std::string>();
    else if (k == "llm_backend") c.llm_backend = v.get<std::string>();
    else if (k == "mock_rules") c.mock_rules = v.get<std::string>();
    else if (k == "parallelism") c.parallelism = v.get<std::size_t>();
    else if (k == "job_workers") c.job_workers = v.get<std::size_t>();
    else if (k == "pricing") c.pricing = v.get<std::string>();
    else if (k == "plans") c.plans = v.get<std::string>();
    else if (k == "shim") c.shim = v.get<std::string>();
    else if (k == "shim_env") c.shim_env = v.get<std::map<std::string, std::string>>();
    else throw Error(ErrorCode::kInvalidArgument, "unknown config key '" + k + "'", k);
  }
  if (c.port < 0 || c.port > 65535) throw Error(ErrorCode::kInvalidArgument, "port out of range");
  if (c.parallelism == 0 || c.job_workers == 0) {
    throw Error(ErrorCode::kInvalidArgument, "parallelism and job_workers must be positive");
  }
  return c;
}

ServiceConfig ServiceConfig::from_file(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::kNotFound, "cannot read config " + file.string(), file.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, "config is not valid JSON", e.what());
  }
  ServiceConfig c = from_json(j);
  // Relative paths are taken relative to the config file.
  const fs::path base = file.parent_path();
  for (fs::path* p : {&c.data_dir, &c.mock_rules, &c.pricing, &c.plans}) {
    if (!p->empty() && p->is_relative()) *p = base / *p;
  }
  if (c.shim.has_parent_path() && c.shim.is_relative()) c.shim = base / c.shim;
  return c;
}

void ServiceConfig::apply_env() {
  if (auto v = env_or("LEXSTAT_DATA_DIR"); !v.empty()) data_dir = v;
  if (llm_backend.empty()) llm_backend = env_or("LEXSTAT_LLM_BACKEND");
  if (mock_rules.empty()) mock_rules = env_or("LEXSTAT_MOCK_RULES");
  if (shim.empty()) shim = env_or("LEXSTAT_TRAINER_SHIM");
  if (pricing.empty()) pricing = env_or("LEXSTAT_PRICING");
  if (auto v = env_or("LEXSTAT_PARALLELISM"); !v.empty()) {
    try {
      parallelism = std::max<std::size_t>(1, std::stoul(v));
    } catch (const std::exception&) {
      throw Error(ErrorCode::kInvalidArgument, "LEXSTAT_PARALLELISM must be a positive integer", v);
    }
  }
}

void to_json(Json& j, const ServiceConfig& c) {
  j = Json{{"host", c.host},
           {"port", c.port},
           {"data_dir", c.data_dir.string()},
           {"llm_backend", c.llm_backend},
           {"mock_rules", c.mock_rules.string()},
           {"parallelism", c.parallelism},
           {"job_workers", c.job_workers},
           {"pricing", c.pricing.string()},
           {"plans", c.plans.string()},
           {"shim", c.shim.string()},
           {"shim_env", c.shim_env}};
}

// -- errors ---------------------------------------------------------------

Json error_json(const Error& e) {
  return Json{{"code", to_string(e.code())}, {"message", e.what()}, {"detail", e.detail()}};
}

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return 400;
    case ErrorCode::kContextLength: return 400;
    case ErrorCode::kValidation: return 422;
    case ErrorCode::kToolRouting: return 422;
    case ErrorCode::kNotFound: return 404;
    case ErrorCode::kConflict: return 409;
    case ErrorCode::kPrecondition: return 409;
    case ErrorCode::kAuth: return 502;
    case ErrorCode::kParseFailure: return 502;
    case ErrorCode::kTransient: return 503;
    case ErrorCode::kTimeout: return 504;
    case ErrorCode::kInternal: return 500;
  }
  return 500;
}

Json guarded(const std::function<Json()>& fn) {
  try {
    return fn();
  } catch (const Error&) {
    throw;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, "malformed request", e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    throw Error(ErrorCode::kInternal, "file system error", e.what());
  }
}

// -- tasks ----------------------------------------------------------------

struct Service::Task {
  std::string id;
  std::string kind;  // augment | extract
  std::string corpus_id;
  std::string state = "queued";
  std::size_t done = 0;
  std::size_t total = 0;
  std::string created_at;
  std::string started_at;
  std::string finished_at;
  std::string message;
  Json result;
  std::function<Json(Task&)> work;
};

namespace {

bool task_terminal(const std::string& state) { return state == "done" || state == "failed"; }

fs::path tasks_root(const CorpusStore& store) { return store.data_dir() / "tasks"; }

}  // namespace

Service::Service(ServiceConfig cfg) : cfg_(std::move(cfg)) {
  fs::create_directories(cfg_.data_dir);
  store_ = std::make_unique<CorpusStore>(cfg_.data_dir);
  GatewayConfig gw = GatewayConfig::from_env();
  gw.parallelism = cfg_.parallelism;
  gateway_ = std::make_unique<LlmGateway>(make_backend(cfg_), gw);
  if (cfg_.shim.empty()) cfg_.shim = "lexstat-trainer-shim";
  cfg_.shim = resolve_executable(cfg_.shim);
  TrainingManagerConfig tm;
  tm.shim = cfg_.shim;
  tm.shim_env = cfg_.shim_env;
  trainer_ = std::make_unique<TrainingManager>(*store_, tm);
  recover_tasks();
}

Service::~Service() {
  std::vector<std::thread> threads;
  {
    std::lock_guard lock(tasks_mu_);
    threads.swap(threads_);
  }
  for (auto& t : threads) {
    if (t.joinable()) t.join();
  }
}

void Service::recover_tasks() {
  const fs::path root = tasks_root(*store_);
  if (!fs::exists(root)) return;
  for (const auto& entry : fs::directory_iterator(root)) {
    auto j = detail::read_json_lenient(entry.path() / "task.json");
    if (!j || !j->is_object()) continue;
    auto t = std::make_shared<Task>();
    t->id = j->value("job_id", entry.path().filename().string());
    t->kind = j->value("kind", std::string{});
    t->corpus_id = j->value("corpus_id", std::string{});
    t->state = j->value("state", std::string("failed"));
    if (auto p = j->find("progress"); p != j->end() && p->is_object()) {
      t->done = p->value("done", std::size_t{0});
      t->total = p->value("total", std::size_t{0});
    }
    t->created_at = j->value("created_at", std::string{});
    t->started_at = j->value("started_at", std::string{});
    t->finished_at = j->value("finished_at", std::string{});
    t->message = j->value("message", std::string{});
    t->result = j->value("result", Json());
    if (!task_terminal(t->state)) {
      t->state = "failed";
      t->message = "interrupted by a service restart; resubmit the job";
      t->finished_at = now_iso8601();
      persist_task(*t);
    }
    tasks_[t->id] = t;
  }
}

Json Service::task_view(const Task& t) const {
  Json j{{"job_id", t.id},
         {"kind", t.kind},
         {"corpus_id", t.corpus_id},
         {"state", t.state},
         {"progress", {{"done", t.done}, {"total", t.total}}},
         {"created_at", t.created_at},
         {"started_at", t.started_at},
         {"finished_at", t.finished_at},
         {"message", t.message}};
  j["result"] = t.result;
  return j;
}

void Service::persist_task(const Task& t) const {
  const fs::path dir = tasks_root(*store_) / t.id;
  fs::create_directories(dir);
  detail::write_file_atomic(dir / "task.json", task_view(t).dump(2));
}

Json Service::submit_task(const std::string& kind, const std::string& corpus_id,
                          std::function<Json(Task&)> work, bool wait) {
  auto task = std::make_shared<Task>();
  task->id = store_->next_id("task");
  task->kind = kind;
  task->corpus_id = corpus_id;
  task->created_at = now_iso8601();
  task->work = std::move(work);
  {
    std::lock_guard lock(tasks_mu_);
    tasks_[task->id] = task;
    persist_task(*task);
  }
  std::thread runner([this, task] {
    {
      std::unique_lock lock(tasks_mu_);
      tasks_cv_.wait(lock, [&] { return running_ < cfg_.job_workers; });
      ++running_;
      task->state = "running";
      task->started_at = now_iso8601();
      persist_task(*task);
    }
    Json result;
    std::string failure;
    try {
      result = guarded([&] { return task->work(*task); });
    } catch (const Error& e) {
      failure = error_json(e).dump();
    } catch (const std::exception& e) {
      failure = error_json(Error(ErrorCode::kInternal, e.what())).dump();
    }
    std::lock_guard lock(tasks_mu_);
    --running_;
    task->finished_at = now_iso8601();
    if (failure.empty()) {
      task->state = "done";
      task->result = std::move(result);
    } else {
      task->state = "failed";
      const Json err = Json::parse(failure);
      task->message = err.value("message", std::string{});
      task->result = Json{{"error", err}};
    }
    task->work = nullptr;
    persist_task(*task);
    tasks_cv_.notify_all();
  });
  {
    std::lock_guard lock(tasks_mu_);
    threads_.push_back(std::move(runner));
  }
  if (wait) return wait_job(task->id);
  std::lock_guard lock(tasks_mu_);
  return task_view(*task);
}

Json Service::training_view(const std::string& job_id) const {
  Json j = trainer_->job(job_id);
  j["kind"] = "train";
  return j;
}

Json Service::job(const std::string& job_id) const {
  {
    std::lock_guard lock(tasks_mu_);
    if (auto it = tasks_.find(job_id); it != tasks_.end()) return task_view(*it->second);
  }
  return training_view(job_id);
}

Json Service::wait_job(const std::string& job_id) const {
  {
    std::unique_lock lock(tasks_mu_);
    if (auto it = tasks_.find(job_id); it != tasks_.end()) {
      auto task = it->second;
      tasks_cv_.wait(lock, [&] { return task_terminal(task->state); });
      return task_view(*task);
    }
  }
  trainer_->wait(job_id);
  return training_view(job_id);
}

Json Service::jobs() const {
  Json out = Json::array();
  {
    std::lock_guard lock(tasks_mu_);
    for (const auto& [id, t] : tasks_) out.push_back(task_view(*t));
  }
  for (const auto& j : trainer_->jobs()) {
    Json v = j;
    v["kind"] = "train";
    out.push_back(std::move(v));
  }
  return out;
}

// -- corpus and labels ----------------------------------------------------

Json Service::ingest(std::istream& jsonl, const std::string& corpus_id) {
  return store_->ingest_corpus(jsonl, corpus_id);
}

Json Service::list_corpora() const {
  Json out = Json::array();
  for (const auto& id : store_->list_corpora()) {
    const auto onto = store_->find_ontology(id);
    out.push_back({{"corpus_id", id},
                   {"documents", store_->document_count(id)},
                   {"corpus_version", store_->corpus_version(id)},
                   {"ontology_version", onto ? Json(onto->version) : Json(nullptr)}});
  }
  return Json{{"corpora", std::move(out)}};
}

Json Service::get_ontology(const std::string& corpus_id) const {
  if (!store_->has_corpus(corpus_id)) {
    throw Error(ErrorCode::kNotFound, "corpus not found: " + corpus_id, corpus_id);
  }
  return store_->ontology(corpus_id);
}

Json Service::put_ontology(const std::string& corpus_id, const Json& body) {
  return guarded([&]() -> Json {
    require_object(body);
    if (body.contains("op")) {
      const auto update = store_->modify_ontology(corpus_id, ontology_edit_from_json(body));
      return Json{{"ontology", update.ontology}, {"stale_labels", update.stale_labels}};
    }
    Ontology o = body.get<Ontology>();
    o = store_->set_ontology(corpus_id, std::move(o));
    std::size_t stale = 0;
    for (const auto& l : store_->labels(corpus_id)) stale += l.stale ? 1 : 0;
    return Json{{"ontology", o}, {"stale_labels", stale}};
  });
}

Json Service::search(const std::string& corpus_id, const Json& body) {
  return guarded([&]() -> Json {
    require_object(body);
    if (!store_->has_corpus(corpus_id)) {
      throw Error(ErrorCode::kNotFound, "corpus not found: " + corpus_id, corpus_id);
    }
    SearchQuery q;
    Json qj = body;
    const std::string query = json_string(body, "query");
    qj.erase("query");
    if (!qj.contains("terms")) qj["terms"] = Json::array();
    q = qj.get<SearchQuery>();
    if (!query.empty()) {
      for (auto& t : extract_search_terms(gateway_.get(), query)) q.terms.push_back(t);
    }
    if (q.terms.empty() && q.filters.empty()) {
      // Plain listing.
      Json docs = Json::array();
      for (const auto& d : store_->documents(corpus_id)) {
        docs.push_back({{"doc_id", d.doc_id}, {"meta", d.meta}});
      }
      return Json{{"terms", Json::array()}, {"documents", std::move(docs)}};
    }
    const auto index = open_index(*store_, corpus_id);
    return Json{{"terms", q.terms}, {"hits", index->search(q)}};
  });
}

Json Service::get_document(const std::string& corpus_id, const std::string& doc_id) const {
  const Document d = store_->document(corpus_id, doc_id);
  Json labels = Json::object();
  for (Provenance p : {Provenance::kHuman, Provenance::kLlm}) {
    if (auto l = store_->find_label(corpus_id, doc_id, p)) labels[std::string(to_string(p))] = *l;
  }
  Json j = d;
  j["labels"] = std::move(labels);
  return j;
}

Json Service::put_label(const std::string& corpus_id, const std::string& doc_id,
                        const Json& body) {
  return guarded([&]() -> Json {
    require_object(body);
    Parse parse = require(body, "parse").get<Parse>();
    const Provenance prov = provenance_from_string(json_string(body, "provenance", "human"));
    return store_->upsert_label(corpus_id, doc_id, std::move(parse), prov,
                                json_string(body, "labeler"));
  });
}

Json Service::get_labels(const std::string& corpus_id, const Json& query) const {
  return guarded([&]() -> Json {
    std::optional<Provenance> prov;
    if (auto p = json_string(query, "provenance"); !p.empty()) prov = provenance_from_string(p);
    const bool include_stale = query.value("include_stale", true);
    Json out = Json::array();
    for (const auto& l : store_->labels(corpus_id, prov, include_stale)) out.push_back(l);
    return Json{{"labels", std::move(out)}};
  });
}

// -- long operations ------------------------------------------------------

Json Service::augment(const std::string& corpus_id, const Json& body, bool wait) {
  return guarded([&]() -> Json {
    require_object(body);
    AugmentationConfig cfg = body.get<AugmentationConfig>();
    cfg.validate();
    if (!store_->has_corpus(corpus_id)) {
      throw Error(ErrorCode::kNotFound, "corpus not found: " + corpus_id, corpus_id);
    }
    store_->ontology(corpus_id);
    if (store_->labels(corpus_id, Provenance::kHuman, false).empty()) {
      throw Error(ErrorCode::kPrecondition,
                  "augmentation needs human seed labels; label at least one document first",
                  "missing seeds");
    }
    return submit_task(
        "augment", corpus_id,
        [this, corpus_id, cfg](Task& task) mutable -> Json {
          cfg.on_progress = [this, &task](std::size_t done, std::size_t total) {
            std::lock_guard lock(tasks_mu_);
            task.done = std::max(task.done, done);
            task.total = total;
            persist_task(task);
          };
          const TrainingSet ts = ensure_training_set(*store_, *gateway_, corpus_id, cfg);
          std::lock_guard lock(tasks_mu_);
          task.done = std::max(task.done, ts.n_llm);
          task.total = std::max(task.done, task.total);
          if (ts.shortfall) task.message = "shortfall: corpus exhausted before n_target";
          return Json(ts);
        },
        wait);
  });
}

Json Service::train(const Json& body, bool wait) {
  return guarded([&]() -> Json {
    require_object(body);
    const std::string dataset_id = require(body, "dataset_id").get<std::string>();
    TrainingHyperparams h;
    if (auto it = body.find("hyperparams"); it != body.end() && !it->is_null()) {
      h = it->get<TrainingHyperparams>();
    }
    h.validate();
    const std::string id = trainer_->submit_training_job(dataset_id, h);
    if (wait) trainer_->wait(id);
    return training_view(id);
  });
}

Json Service::extract(const std::string& corpus_id, const Json& body, bool wait) {
  return guarded([&]() -> Json {
    require_object(body);
    ExtractorSpec spec = require(body, "extractor").get<ExtractorSpec>();
    spec.validate();
    ExtractorContext ctx;
    ctx.store = store_.get();
    ctx.gateway = gateway_.get();
    ctx.corpus_id = corpus_id;
    ctx.shim = cfg_.shim;
    ctx.shim_env = cfg_.shim_env;
    ctx.n_shots = body.value("n_shots", ctx.n_shots);
    ctx.seed = body.value("seed", ctx.seed);
    if (auto it = body.find("rules"); it != body.end()) {
      const Json& rules = it->is_object() ? it->at("rules") : *it;
      ctx.inline_rules = rules.get<std::vector<PatternRule>>();
    }
    DocFilter filter;
    if (auto it = body.find("filter"); it != body.end() && !it->is_null()) {
      filter = it->get<DocFilter>();
    }
    // Built up front so bad specs fail the request rather than the job.
    std::shared_ptr<Extractor> extractor = make_extractor(spec, ctx);
    const std::size_t workers = cfg_.parallelism;
    return submit_task(
        "extract", corpus_id,
        [this, corpus_id, extractor, filter, workers](Task& task) -> Json {
          const BatchReport r = extract_batch(*extractor, *store_, corpus_id, filter, workers);
          std::lock_guard lock(tasks_mu_);
          task.done = r.docs;
          task.total = r.docs;
          if (r.failures > 0) task.message = std::to_string(r.failures) + " documents failed";
          return Json(r);
        },
        wait);
  });
}

// -- evaluation -----------------------------------------------------------

namespace {

struct EvalSource {
  ParseMap parses;
  std::optional<Ontology> ontology;
  std::string corpus_id;
};

EvalSource load_source(const CorpusStore* store, const Json& src, const char* role) {
  if (!src.is_object()) {
    throw Error(ErrorCode::kInvalidArgument, std::string("'") + role + "' must be an object", role);
  }
  EvalSource out;
  auto need_store = [&]() -> const CorpusStore& {
    if (store == nullptr) {
      throw Error(ErrorCode::kPrecondition, "table and corpus sources need a data directory", role);
    }
    return *store;
  };
  if (auto t = json_string(src, "table_id"); !t.empty()) {
    const StructuredTable table = load_table(need_store(), t);
    for (const auto& row : table.rows) out.parses[row.doc_id] = row.values;
    out.ontology = table.ontology;
    out.corpus_id = table.corpus_id;
  } else if (auto p = json_string(src, "path"); !p.empty()) {
    std::ifstream in(p);
    if (!in) throw Error(ErrorCode::kNotFound, "cannot read " + p, p);
    out.parses = load_parses_jsonl(in);
  } else if (auto c = json_string(src, "corpus_id"); !c.empty()) {
    const Provenance prov = provenance_from_string(json_string(src, "provenance", "human"));
    for (const auto& l : need_store().labels(c, prov, false)) out.parses[l.doc_id] = l.parse;
    out.corpus_id = c;
  } else if (auto it = src.find("parses"); it != src.end() && it->is_object()) {
    for (const auto& [doc, parse] : it->items()) out.parses[doc] = parse.get<Parse>();
  } else {
    throw Error(ErrorCode::kInvalidArgument,
                std::string("'") + role + "' needs one of table_id, path, corpus_id, parses", role);
  }
  return out;
}

}  // namespace

Json eval_request(const Json& body, const CorpusStore* store) {
  return guarded([&]() -> Json {
    require_object(body);
    EvalSource pred = load_source(store, require(body, "pred"), "pred");
    EvalSource gold = load_source(store, require(body, "gold"), "gold");
    if (body.value("restrict_to_gold", true)) {
      std::erase_if(pred.parses, [&](const auto& kv) { return gold.parses.count(kv.first) == 0; });
    }
    const std::string mode = json_string(body, "mode", "field");
    if (mode == "classification") {
      const std::string field = require(body, "field").get<std::string>();
      LabelSetMap p, g;
      for (const auto& [d, parse] : pred.parses) {
        const auto& v = parse.get(field);
        p[d] = {v.begin(), v.end()};
      }
      for (const auto& [d, parse] : gold.parses) {
        const auto& v = parse.get(field);
        g[d] = {v.begin(), v.end()};
      }
      return classification_report(p, g);
    }
    if (mode != "field") {
      throw Error(ErrorCode::kInvalidArgument, "mode must be 'field' or 'classification'", mode);
    }
    Ontology ontology;
    if (auto it = body.find("ontology"); it != body.end() && !it->is_null()) {
      if (it->is_string()) {
        // A corpus id, or a path to an ontology JSON file.
        const std::string ref = it->get<std::string>();
        if (store != nullptr && store->has_corpus(ref)) {
          ontology = store->ontology(ref);
        } else {
          std::ifstream in(ref);
          if (!in) throw Error(ErrorCode::kNotFound, "no corpus or ontology file " + ref, ref);
          ontology = Json::parse(in).get<Ontology>();
        }
      } else {
        ontology = it->get<Ontology>();
      }
    } else if (pred.ontology) {
      ontology = *pred.ontology;
    } else if (gold.ontology) {
      ontology = *gold.ontology;
    } else if (auto c = !gold.corpus_id.empty() ? gold.corpus_id : pred.corpus_id;
               store != nullptr && !c.empty() && store->find_ontology(c)) {
      ontology = store->ontology(c);
    } else {
      ontology = infer_ontology({&pred.parses, &gold.parses});
    }
    std::set<std::string> exclude;
    if (auto it = body.find("exclude"); it != body.end() && !it->is_null()) {
      exclude = it->get<std::set<std::string>>();
    }
    return field_f1_report(pred.parses, gold.parses, ontology, exclude);
  });
}

Json Service::eval(const Json& body) { return eval_request(body, store_.get()); }

// -- analysis -------------------------------------------------------------

AnalysisSession& Service::session_for(const Json& body, std::string& session_id) {
  const std::string corpus_id = require(body, "corpus_id").get<std::string>();
  const std::string table_id = json_string(body, "table_id");
  std::lock_guard lock(sessions_mu_);
  session_id = json_string(body, "session_id");
  if (session_id.empty()) session_id = store_->next_id("session");
  auto& slot = sessions_[session_id];
  if (!slot) {
    slot = std::make_unique<AnalysisSession>();
    slot->store = store_.get();
    slot->gateway = gateway_.get();
    slot->log_file = cfg_.data_dir / "chat" / (session_id + ".jsonl");
    fs::create_directories(slot->log_file.parent_path());
  }
  if (!store_->has_corpus(corpus_id)) {
    throw Error(ErrorCode::kNotFound, "corpus not found: " + corpus_id, corpus_id);
  }
  slot->corpus_id = corpus_id;
  if (!table_id.empty() && (!slot->table || slot->table->table_id != table_id)) {
    StructuredTable t = load_table(*store_, table_id);
    if (t.corpus_id != corpus_id) {
      throw Error(ErrorCode::kConflict,
                  "table " + table_id + " belongs to corpus " + t.corpus_id, table_id);
    }
    slot->table = std::move(t);
  }
  return *slot;
}

Json Service::chat(const Json& body) {
  return guarded([&]() -> Json {
    require_object(body);
    std::string session_id;
    AnalysisSession& session = session_for(body, session_id);
    ChatTurn turn;
    if (auto it = body.find("tool"); it != body.end() && !it->is_null()) {
      std::lock_guard turn_lock(session.turn_mu);
      const ToolCall call = it->get<ToolCall>();
      validate_tool_call(session, call);
      turn.call = call;
      turn.result = execute_tool(session, call);
      turn.rendering = render_tool_result(call, turn.result);
    } else {
      const std::string message = require(body, "message").get<std::string>();
      turn = route_tool_call(session, message);
    }
    Json j = turn;
    j["session_id"] = session_id;
    return j;
  });
}

Json Service::tools() const { return analysis_tools_json(); }

// -- cost -----------------------------------------------------------------

Json Service::cost_curve(const Json& body) const { return cost_curve_request(body, cfg_); }

Json cost_curve_request(const Json& body, const ServiceConfig& cfg) {
  return guarded([&]() -> Json {
    require_object(body);
    const Json& g = require(body, "grid");
    const std::vector<double> grid =
        g.is_string() ? parse_grid(g.get<std::string>()) : g.get<std::vector<double>>();
    PricingConfig pricing;
    if (auto it = body.find("pricing"); it != body.end() && !it->is_null()) {
      pricing = it->is_string() ? load_pricing(it->get<std::string>()) : it->get<PricingConfig>();
    } else {
      pricing = cfg.pricing.empty() ? default_pricing() : load_pricing(cfg.pricing);
    }
    pricing.validate();
    std::vector<PipelinePlan> plans;
    if (auto it = body.find("plans"); it != body.end() && !it->is_null()) {
      plans = it->is_string() ? load_plans(it->get<std::string>()) : plans_from_json(*it);
    } else {
      plans = cfg.plans.empty() ? default_plans() : load_plans(cfg.plans);
    }
    const TradeoffCurve curve = tradeoff_curve(plans, pricing, grid);
    Json j = curve;
    std::ostringstream csv;
    write_curve_csv(csv, curve);
    j["csv"] = csv.str();
    j["chart"] = curve_chart_spec(curve, json_string(body, "metric", "total_usd"));
    return j;
  });
}

// -- schema ---------------------------------------------------------------

namespace {

Json op(std::string summary, Json request = nullptr, Json response = "object") {
  Json j{{"summary", std::move(summary)}, {"response", std::move(response)}};
  if (!request.is_null()) j["request"] = std::move(request);
  return j;
}

}  // namespace

Json Service::schema() {
  const Json error{{"code", "string"}, {"message", "string"}, {"detail", "string"}};
  const Json source{{"oneOf",
                     {{{"table_id", "string"}},
                      {{"path", "string"}},
                      {{"corpus_id", "string"}, {"provenance", "human|llm"}},
                      {{"parses", "object doc_id -> parse"}}}}};
  const Json job_view{{"job_id", "string"},
                      {"kind", "augment|extract|train"},
                      {"state", "string"},
                      {"progress", "object"},
                      {"started_at", "string"},
                      {"message", "string"}};
  Json paths;
  paths["/corpora"]["get"] = op("List corpora", nullptr, {{"corpora", "array"}});
  paths["/corpora"]["post"] =
      op("Ingest documents (?corpus_id=)",
         {{"oneOf", {"JSONL text", {{"corpus_id", "string"}, {"documents", "Document[]"}}}}},
         {{"corpus_id", "string"}, {"count", "int"}, {"issues", "array"}});
  paths["/corpora/{id}/ontology"]["get"] = op("Current ontology", nullptr, "Ontology");
  paths["/corpora/{id}/ontology"]["put"] =
      op("Replace the ontology or apply one edit",
         {{"oneOf",
           {"Ontology", {{"op", "add_field|remove_field|edit_description"}, {"field", "object|string"}}}}},
         {{"ontology", "Ontology"}, {"stale_labels", "int"}});
  paths["/corpora/{id}/documents"]["get"] =
      op("Search (?query=, ?terms=a,b, ?top_k=, ?filter.<key>=) or list documents", nullptr,
         {{"terms", "string[]"}, {"hits", "SearchHit[]"}});
  paths["/corpora/{id}/documents/{doc_id}"]["get"] = op("One document with its labels");
  paths["/corpora/{id}/labels"]["get"] =
      op("Labels (?provenance=, ?include_stale=)", nullptr, {{"labels", "LabeledExample[]"}});
  paths["/corpora/{id}/labels/{doc_id}"]["put"] =
      op("Upsert a label", {{"parse", "object"}, {"provenance", "human|llm"}, {"labeler", "string"}},
         "LabeledExample");
  paths["/corpora/{id}/augment"]["post"] =
      op("Start auto-labeling (?wait=1 blocks)",
         {{"n_target", "int"}, {"n_seed_shots", "int"}, {"labeling_model_id", "string"},
          {"max_repair_attempts", "int"}, {"seed", "int"}},
         job_view);
  paths["/corpora/{id}/extract"]["post"] =
      op("Start batch extraction (?wait=1 blocks)",
         {{"extractor", {{"kind", "llm_fewshot|distilled|pattern_table"},
                         {"model_ref", "string"},
                         {"ontology_version", "int"}}},
          {"filter", {{"doc_ids", "string[]"}, {"meta", "object"}, {"terms", "string[]"}}},
          {"rules", "PatternRule[]"},
          {"n_shots", "int"},
          {"seed", "int"}},
         job_view);
  paths["/jobs"]["get"] = op("All jobs", nullptr, "JobStatusView[]");
  paths["/jobs/train"]["post"] =
      op("Start fine-tuning (?wait=1 blocks)",
         {{"dataset_id", "string"},
          {"hyperparams", {{"batch_size", "int"}, {"lr", "number"}, {"fallback_lr", "number"},
                           {"epochs", "int"}, {"adapter_rank", "int"}, {"seed", "int"},
                           {"base_model", "string"}}}},
         job_view);
  paths["/jobs/{id}"]["get"] = op("Poll a job (?wait=1 blocks)", nullptr, job_view);
  paths["/eval"]["post"] =
      op("Field-level or classification scores",
         {{"pred", source}, {"gold", source}, {"ontology", "Ontology|corpus_id"},
          {"exclude", "string[]"}, {"restrict_to_gold", "bool"},
          {"mode", "field|classification"}, {"field", "string"}},
         {{"per_field", "object"}, {"average_f1", "number"}});
  paths["/analysis/chat"]["post"] =
      op("One analysis turn",
         {{"corpus_id", "string"}, {"table_id", "string"}, {"session_id", "string"},
          {"message", "string"}, {"tool", {{"name", "string"}, {"arguments", "object"}}}},
         {{"session_id", "string"}, {"call", "ToolCall|null"}, {"result", "object"},
          {"rendering", "string"}});
  paths["/cost/curve"]["post"] =
      op("Cost and time trade-off curve",
         {{"grid", "number[]|string"}, {"plans", "PipelinePlan[]|path"},
          {"pricing", "PricingConfig|path"}, {"metric", "string"}},
         {{"rows", "array"}, {"crossovers", "array"}, {"csv", "string"}, {"chart", "object"}});
  paths["/tools"]["get"] = op("Analysis tool schemas", nullptr, "function[]");
  paths["/schema"]["get"] = op("This document");
  paths["/health"]["get"] = op("Liveness", nullptr, {{"ok", "bool"}});
  return Json{{"openapi", "3.0-style"},
              {"info", {{"title", "lexstat"}, {"version", "1"}}},
              {"paths", std::move(paths)},
              {"components", {{"Error", error}, {"JobStatusView", job_view}}}};
}

}  // namespace lexstat
