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


#include "lexstat/ie_engine.hpp"

#include <signal.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "fsutil.hpp"
#include "lexstat/auto_labeler.hpp"
#include "lexstat/corpus_store.hpp"
#include "lexstat/error.hpp"
#include "lexstat/evaluator.hpp"
#include "lexstat/parallel.hpp"
#include "lexstat/search_index.hpp"
#include "lexstat/text.hpp"

namespace lexstat {

namespace fs = std::filesystem;

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void push_unique(std::vector<std::string>& dst, std::string v) {
  if (std::find(dst.begin(), dst.end(), v) == dst.end()) dst.push_back(std::move(v));
}

}  // namespace

// -- specs ---------------------------------------------------------------------

std::string_view to_string(ExtractorKind k) {
  switch (k) {
    case ExtractorKind::kLlmFewshot: return "llm_fewshot";
    case ExtractorKind::kDistilled: return "distilled";
    case ExtractorKind::kPatternTable: return "pattern_table";
  }
  return "pattern_table";
}

ExtractorKind extractor_kind_from_string(std::string_view s) {
  if (s == "llm_fewshot") return ExtractorKind::kLlmFewshot;
  if (s == "distilled") return ExtractorKind::kDistilled;
  if (s == "pattern_table") return ExtractorKind::kPatternTable;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown extractor kind '" + std::string(s) +
                  "' (expected llm_fewshot, distilled or pattern_table)",
              std::string(s));
}

void ExtractorSpec::validate() const {
  if (kind != ExtractorKind::kLlmFewshot && model_ref.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string(to_string(kind)) + " extractor needs a model_ref");
  }
}

void to_json(Json& j, const ExtractorSpec& s) {
  j = Json{{"kind", to_string(s.kind)},
           {"model_ref", s.model_ref},
           {"ontology_version", s.ontology_version}};
}

void from_json(const Json& j, ExtractorSpec& s) {
  s = ExtractorSpec{};
  s.kind = extractor_kind_from_string(j.at("kind").get<std::string>());
  s.model_ref = j.value("model_ref", std::string{});
  s.ontology_version = j.value("ontology_version", std::int64_t{0});
}

void to_json(Json& j, const StructuredRecord& r) {
  j = Json{{"doc_id", r.doc_id}, {"parse", r.parse}, {"extractor", r.extractor}};
  if (r.confidence) j["confidence"] = *r.confidence;
  if (!r.error.empty()) j["error"] = r.error;
}

// -- extractor base --------------------------------------------------------

StructuredRecord Extractor::extract_one(const Document& doc) {
  StructuredRecord rec;
  rec.doc_id = doc.doc_id;
  rec.extractor = spec();
  try {
    rec.parse = extract(doc);
  } catch (const std::exception& e) {
    rec.parse = Parse{};
    rec.error = e.what();
  }
  return rec;
}

std::vector<StructuredRecord> Extractor::extract_many(const std::vector<Document>& docs,
                                                      std::size_t workers) {
  std::vector<StructuredRecord> out(docs.size());
  parallel_for(docs.size(), workers, [&](std::size_t i) { out[i] = extract_one(docs[i]); });
  return out;
}

// -- pattern table -----------------------------------------------------------

void from_json(const Json& j, PatternRule& r) {
  r.field = j.at("field").get<std::string>();
  r.pattern = j.at("pattern").get<std::string>();
  r.group = j.value("group", std::size_t{0});
}

void to_json(Json& j, const PatternRule& r) {
  j = Json{{"field", r.field}, {"pattern", r.pattern}, {"group", r.group}};
}

PatternTableExtractor::PatternTableExtractor(Ontology ontology, std::vector<PatternRule> rules,
                                             std::string model_ref)
    : ontology_(std::move(ontology)) {
  spec_.kind = ExtractorKind::kPatternTable;
  spec_.model_ref = std::move(model_ref);
  spec_.ontology_version = ontology_.version;
  for (auto& r : rules) {
    if (!ontology_.has(r.field)) {
      throw Error(ErrorCode::kValidation, "pattern rule names unknown field '" + r.field + "'",
                  r.field);
    }
    std::regex re;
    try {
      re = std::regex(r.pattern, std::regex::ECMAScript);
    } catch (const std::regex_error& e) {
      throw Error(ErrorCode::kInvalidArgument,
                  "bad pattern for field '" + r.field + "': " + e.what(), r.pattern);
    }
    if (r.group > re.mark_count()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "pattern for field '" + r.field + "' has no group " + std::to_string(r.group),
                  r.pattern);
    }
    rules_.push_back({std::move(r), std::move(re)});
  }
}

std::unique_ptr<PatternTableExtractor> PatternTableExtractor::from_file(const fs::path& file,
                                                                        Ontology ontology) {
  const auto j = detail::read_json_lenient(file);
  if (!j) throw Error(ErrorCode::kNotFound, "cannot read rule table " + file.string(), file.string());
  const Json& list = j->is_array() ? *j : j->at("rules");
  return std::make_unique<PatternTableExtractor>(std::move(ontology),
                                                 list.get<std::vector<PatternRule>>(),
                                                 file.string());
}

Parse PatternTableExtractor::extract(const Document& doc) {
  Parse p;
  for (const auto& c : rules_) {
    auto& dst = p.values[c.rule.field];
    for (std::sregex_iterator it(doc.body.begin(), doc.body.end(), c.regex), end; it != end; ++it) {
      auto v = text::collapse_whitespace((*it)[static_cast<int>(c.rule.group)].str());
      if (!v.empty()) push_unique(dst, std::move(v));
    }
  }
  for (const auto& f : ontology_.fields) {
    auto& vals = p.values[f.name];
    if (!f.multi_valued && vals.size() > 1) vals.resize(1);
  }
  p.canonicalize(ontology_);
  return p;
}

// -- LLM few-shot ----------------------------------------------------------------

LlmFewshotExtractor::LlmFewshotExtractor(LlmGateway& gateway, Ontology ontology,
                                         std::vector<LabeledExample> seeds,
                                         std::vector<Document> seed_docs, std::size_t n_shots,
                                         std::uint64_t seed, std::string model_id)
    : gateway_(gateway),
      ontology_(std::move(ontology)),
      seeds_(std::move(seeds)),
      n_shots_(n_shots),
      seed_(seed) {
  if (seeds_.empty()) {
    throw Error(ErrorCode::kPrecondition,
                "llm_fewshot extraction needs at least one seed example; label a few documents first");
  }
  if (n_shots_ == 0) throw Error(ErrorCode::kInvalidArgument, "n_shots must be >= 1");
  for (auto& d : seed_docs) seed_docs_.emplace(d.doc_id, std::move(d));
  for (const auto& s : seeds_) {
    if (seed_docs_.count(s.doc_id) == 0) {
      throw Error(ErrorCode::kInvalidArgument, "no document for seed " + s.doc_id, s.doc_id);
    }
  }
  spec_.kind = ExtractorKind::kLlmFewshot;
  spec_.model_ref = model_id.empty() ? gateway_.config().routing.labeling : std::move(model_id);
  spec_.ontology_version = ontology_.version;
}

Parse LlmFewshotExtractor::extract(const Document& doc) {
  // A seed never serves as its own shot.
  std::vector<LabeledExample> pool;
  for (const auto& s : seeds_) {
    if (s.doc_id != doc.doc_id || seeds_.size() == 1) pool.push_back(s);
  }
  std::mt19937_64 rng(seed_ ^ fnv1a(doc.doc_id));
  std::size_t k = std::min(n_shots_, pool.size());
  const auto window = gateway_.config().context_window(spec_.model_ref);
  bool remind = false;
  std::string last_raw;
  int parse_attempts = 0;
  while (k > 0) {
    std::mt19937_64 pick = rng;
    const auto sel = select_fewshot_examples(pool, ontology_, k, pick);
    std::vector<Document> docs;
    for (const auto& s : sel.shots) docs.push_back(seed_docs_.at(s.doc_id));
    ChatRequest req;
    try {
      req = build_ie_prompt(ontology_, sel.shots, docs, doc, spec_.model_ref, gateway_.estimator(),
                            window);
      if (remind) req.messages.back().content += format_reminder(ontology_);
      const auto resp = gateway_.complete(req);
      input_tokens_ += resp.usage.input_tokens;
      output_tokens_ += resp.usage.output_tokens;
      last_raw = resp.content;
      ++parse_attempts;
      auto parsed = parse_llm_output(resp.content, ontology_);
      validate_parse(parsed.parse, ontology_);
      return std::move(parsed.parse);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kContextLength) {
        --k;
        continue;
      }
      if (e.code() != ErrorCode::kParseFailure && e.code() != ErrorCode::kValidation) throw;
      if (parse_attempts >= 2) break;
      remind = true;
    }
  }
  if (k == 0) {
    throw Error(ErrorCode::kContextLength,
                "document " + doc.doc_id + " does not fit the context window even without shots",
                doc.doc_id);
  }
  throw Error(ErrorCode::kParseFailure, "unparseable LLM output for " + doc.doc_id, last_raw);
}

Usage LlmFewshotExtractor::usage() const {
  return Usage{input_tokens_.load(), output_tokens_.load()};
}

// -- distilled -------------------------------------------------------------------

namespace {

std::mutex& job_dir_mutex(const fs::path& dir) {
  static std::mutex guard;
  static std::map<std::string, std::unique_ptr<std::mutex>> locks;
  std::lock_guard lock(guard);
  auto& m = locks[fs::weakly_canonical(dir).string()];
  if (!m) m = std::make_unique<std::mutex>();
  return *m;
}

std::string log_tail(const fs::path& log, std::size_t max_bytes = 400) {
  std::error_code ec;
  if (!fs::exists(log, ec)) return {};
  auto s = detail::read_file(log);
  if (s.size() > max_bytes) s = s.substr(s.size() - max_bytes);
  return std::string(text::trim(s));
}

}  // namespace

DistilledExtractor::DistilledExtractor(Ontology ontology, fs::path checkpoint, fs::path shim,
                                       std::map<std::string, std::string> shim_env)
    : ontology_(std::move(ontology)), shim_(std::move(shim)), shim_env_(std::move(shim_env)) {
  std::error_code ec;
  if (!fs::is_directory(checkpoint, ec)) {
    throw Error(ErrorCode::kPrecondition,
                "no trained checkpoint at " + checkpoint.string() +
                    "; run a training job to completion first",
                checkpoint.string());
  }
  if (!detail::is_executable(shim_)) {
    throw Error(ErrorCode::kPrecondition,
                "trainer shim '" + shim_.string() + "' is missing or not executable",
                shim_.string());
  }
  job_dir_ = checkpoint.parent_path();
  spec_.kind = ExtractorKind::kDistilled;
  spec_.model_ref = checkpoint.string();
  spec_.ontology_version = ontology_.version;
}

Parse DistilledExtractor::extract(const Document& doc) {
  auto recs = extract_many({doc}, 1);
  if (!recs.front().error.empty()) {
    throw Error(ErrorCode::kParseFailure, recs.front().error, doc.doc_id);
  }
  return std::move(recs.front().parse);
}

std::vector<StructuredRecord> DistilledExtractor::extract_many(const std::vector<Document>& docs,
                                                               std::size_t /*workers*/) {
  std::vector<StructuredRecord> out(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    out[i].doc_id = docs[i].doc_id;
    out[i].extractor = spec_;
  }
  if (docs.empty()) return out;

  std::lock_guard lock(job_dir_mutex(job_dir_));
  {
    std::string body;
    for (const auto& d : docs) body += Json{{"doc_id", d.doc_id}, {"input", d.body}}.dump() + '\n';
    detail::write_file_atomic(job_dir_ / "infer.jsonl", body);
  }
  std::error_code ec;
  fs::remove(job_dir_ / "pred.jsonl", ec);
  const auto log = job_dir_ / "shim.log";
  const int pid = detail::spawn_process({shim_.string(), "infer", job_dir_.string()}, log, shim_env_);
  const auto rc = detail::poll_process(pid, true).value_or(-1);

  std::map<std::string, std::string> preds;
  if (rc == 0) {
    std::ifstream in(job_dir_ / "pred.jsonl");
    std::string line;
    while (std::getline(in, line)) {
      if (text::trim(line).empty()) continue;
      try {
        const auto j = Json::parse(line);
        const auto& t = j.at("target");
        preds[j.at("doc_id").get<std::string>()] = t.is_string() ? t.get<std::string>() : t.dump();
      } catch (const Json::exception&) {
        violations_++;
      }
    }
  }
  for (auto& rec : out) {
    if (rc != 0) {
      rec.error = "trainer shim infer exited with status " + std::to_string(rc);
      if (auto tail = log_tail(log); !tail.empty()) rec.error += ": " + tail;
      continue;
    }
    auto it = preds.find(rec.doc_id);
    if (it == preds.end()) {
      rec.error = "no prediction for " + rec.doc_id;
      continue;
    }
    try {
      auto parsed = parse_llm_output(it->second, ontology_);
      validate_parse(parsed.parse, ontology_);
      if (parsed.repaired || !parsed.warnings.empty()) violations_++;
      rec.parse = std::move(parsed.parse);
    } catch (const Error& e) {
      violations_++;
      rec.error = e.what();
    }
  }
  return out;
}

// -- factory ---------------------------------------------------------------------

std::unique_ptr<Extractor> make_extractor(const ExtractorSpec& spec, const ExtractorContext& ctx) {
  spec.validate();
  if (ctx.store == nullptr) throw Error(ErrorCode::kInvalidArgument, "extractor context needs a store");
  Ontology ontology = ctx.store->ontology(ctx.corpus_id);
  if (spec.ontology_version != 0 && spec.ontology_version != ontology.version) {
    throw Error(ErrorCode::kConflict,
                "extractor was built for ontology version " +
                    std::to_string(spec.ontology_version) + " but the corpus is at version " +
                    std::to_string(ontology.version));
  }
  switch (spec.kind) {
    case ExtractorKind::kPatternTable:
      if (spec.model_ref == "inline") {
        return std::make_unique<PatternTableExtractor>(std::move(ontology), ctx.inline_rules);
      }
      return PatternTableExtractor::from_file(spec.model_ref, std::move(ontology));
    case ExtractorKind::kLlmFewshot: {
      if (ctx.gateway == nullptr) {
        throw Error(ErrorCode::kPrecondition, "llm_fewshot extraction needs an LLM gateway");
      }
      auto seeds = ctx.store->labels(ctx.corpus_id, Provenance::kHuman, false);
      std::vector<Document> docs;
      for (const auto& s : seeds) docs.push_back(ctx.store->document(ctx.corpus_id, s.doc_id));
      return std::make_unique<LlmFewshotExtractor>(*ctx.gateway, std::move(ontology),
                                                   std::move(seeds), std::move(docs), ctx.n_shots,
                                                   ctx.seed, spec.model_ref);
    }
    case ExtractorKind::kDistilled: {
      fs::path ckpt = spec.model_ref;
      std::error_code ec;
      if (!fs::exists(ckpt, ec)) {
        // A bare job id resolves to that job's checkpoint.
        const auto by_job = ctx.store->data_dir() / "jobs" / spec.model_ref / "checkpoint";
        if (fs::exists(by_job, ec)) ckpt = by_job;
      }
      return std::make_unique<DistilledExtractor>(std::move(ontology), ckpt, ctx.shim, ctx.shim_env);
    }
  }
  throw Error(ErrorCode::kInternal, "unreachable extractor kind");
}

// -- structured tables -------------------------------------------------------------

const TableRow* StructuredTable::find(std::string_view doc_id) const {
  auto it = std::lower_bound(rows.begin(), rows.end(), doc_id,
                             [](const TableRow& r, std::string_view id) { return r.doc_id < id; });
  return it != rows.end() && it->doc_id == doc_id ? &*it : nullptr;
}

fs::path table_dir(const CorpusStore& store, const std::string& table_id) {
  return store.data_dir() / "tables" / table_id;
}

void save_table(const StructuredTable& table, const fs::path& dir) {
  fs::create_directories(dir);
  std::string body;
  for (const auto& r : table.rows) {
    Json j = {{"doc_id", r.doc_id}, {"values", r.values}, {"raw", r.raw}};
    if (!r.error.empty()) j["error"] = r.error;
    body += j.dump() + '\n';
  }
  detail::write_file_atomic(dir / "table.jsonl", body);
  Json manifest = {{"table_id", table.table_id},
                   {"corpus_id", table.corpus_id},
                   {"ontology", table.ontology},
                   {"extractor", table.extractor},
                   {"rows", table.rows.size()}};
  detail::write_file_atomic(dir / "manifest.json", manifest.dump(2) + '\n');
}

StructuredTable load_table(const fs::path& dir) {
  const auto manifest = detail::read_json_lenient(dir / "manifest.json");
  if (!manifest) {
    throw Error(ErrorCode::kNotFound, "structured table not found: " + dir.filename().string(),
                dir.filename().string());
  }
  StructuredTable t;
  t.table_id = manifest->value("table_id", dir.filename().string());
  t.corpus_id = manifest->value("corpus_id", std::string{});
  t.ontology = manifest->at("ontology").get<Ontology>();
  t.extractor = manifest->at("extractor").get<ExtractorSpec>();
  std::ifstream in(dir / "table.jsonl");
  std::string line;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    const auto j = Json::parse(line);
    TableRow r;
    r.doc_id = j.at("doc_id").get<std::string>();
    r.values = j.at("values").get<Parse>();
    r.raw = j.value("raw", Json::object()).get<Parse>();
    r.error = j.value("error", std::string{});
    t.rows.push_back(std::move(r));
  }
  std::sort(t.rows.begin(), t.rows.end(),
            [](const TableRow& a, const TableRow& b) { return a.doc_id < b.doc_id; });
  return t;
}

StructuredTable load_table(const CorpusStore& store, const std::string& table_id) {
  return load_table(table_dir(store, table_id));
}

void from_json(const Json& j, DocFilter& f) {
  f = DocFilter{};
  if (j.is_null()) return;
  f.doc_ids = j.value("doc_ids", std::vector<std::string>{});
  f.meta = j.value("meta", std::map<std::string, std::string>{});
  f.terms = j.value("terms", std::vector<std::string>{});
}

void to_json(Json& j, const BatchReport& r) {
  Json failed = Json::array();
  for (const auto& [id, err] : r.failed) failed.push_back({{"doc_id", id}, {"error", err}});
  j = Json{{"table_id", r.table_id},       {"docs", r.docs},
           {"failures", r.failures},       {"wall_ms", r.wall_ms},
           {"input_tokens", r.input_tokens}, {"output_tokens", r.output_tokens},
           {"extractor", r.extractor},     {"failed", std::move(failed)}};
}

BatchReport extract_batch(Extractor& extractor, CorpusStore& store, const std::string& corpus_id,
                          const DocFilter& filter, std::size_t workers) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto usage0 = extractor.usage();

  auto docs = store.documents(corpus_id);
  if (!filter.doc_ids.empty()) {
    const std::set<std::string> wanted(filter.doc_ids.begin(), filter.doc_ids.end());
    std::erase_if(docs, [&](const Document& d) { return wanted.count(d.doc_id) == 0; });
  }
  if (!filter.meta.empty()) {
    std::erase_if(docs, [&](const Document& d) {
      for (const auto& [k, v] : filter.meta) {
        auto it = d.meta.find(k);
        if (it == d.meta.end() || it->second != v) return true;
      }
      return false;
    });
  }
  if (!filter.terms.empty() && !docs.empty()) {
    const auto index = open_index(store, corpus_id);
    SearchQuery q;
    q.terms = filter.terms;
    q.top_k = index->doc_count();
    std::set<std::string> hit_ids;
    for (const auto& h : index->search(q)) hit_ids.insert(h.doc_id);
    std::erase_if(docs, [&](const Document& d) { return hit_ids.count(d.doc_id) == 0; });
  }

  if (docs.empty()) {
    throw Error(ErrorCode::kNotFound, "no documents in corpus '" + corpus_id + "' match the filter",
                corpus_id);
  }
  auto records = extractor.extract_many(docs, workers);

  StructuredTable table;
  table.corpus_id = corpus_id;
  table.ontology = extractor.ontology();
  table.extractor = extractor.spec();
  BatchReport report;
  report.docs = docs.size();
  report.extractor = extractor.spec();
  for (auto& rec : records) {
    TableRow row;
    row.doc_id = rec.doc_id;
    if (!rec.error.empty()) {
      ++report.failures;
      report.failed.emplace_back(rec.doc_id, rec.error);
      row.error = rec.error;
    } else {
      row.values = normalize_parse(rec.parse, table.ontology);
      row.raw = std::move(rec.parse);
    }
    table.rows.push_back(std::move(row));
  }
  std::sort(table.rows.begin(), table.rows.end(),
            [](const TableRow& a, const TableRow& b) { return a.doc_id < b.doc_id; });
  if (report.docs > 0 && report.failures == report.docs) {
    throw Error(ErrorCode::kInternal,
                "extraction failed for all " + std::to_string(report.docs) +
                    " documents; first error: " + report.failed.front().second,
                report.failed.front().first);
  }
  table.table_id = store.next_id("t");
  save_table(table, table_dir(store, table.table_id));

  const auto usage1 = extractor.usage();
  report.table_id = table.table_id;
  report.input_tokens = usage1.input_tokens - usage0.input_tokens;
  report.output_tokens = usage1.output_tokens - usage0.output_tokens;
  report.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

// -- training jobs ------------------------------------------------------------------

std::string_view to_string(JobState s) {
  switch (s) {
    case JobState::kQueued: return "queued";
    case JobState::kRunning: return "running";
    case JobState::kRetrying: return "retrying";
    case JobState::kDone: return "done";
    case JobState::kFailed: return "failed";
    case JobState::kFailedDiverged: return "failed_diverged";
  }
  return "failed";
}

JobState job_state_from_string(std::string_view s) {
  for (auto st : {JobState::kQueued, JobState::kRunning, JobState::kRetrying, JobState::kDone,
                  JobState::kFailed, JobState::kFailedDiverged}) {
    if (to_string(st) == s) return st;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown job state '" + std::string(s) + "'");
}

bool is_terminal(JobState s) {
  return s == JobState::kDone || s == JobState::kFailed || s == JobState::kFailedDiverged;
}

void TrainingHyperparams::validate() const {
  auto bad = [](const std::string& what) { throw Error(ErrorCode::kInvalidArgument, what); };
  if (batch_size < 1) bad("batch_size must be >= 1");
  if (!(lr > 0) || !std::isfinite(lr)) bad("lr must be a positive number");
  if (!(fallback_lr > 0) || !std::isfinite(fallback_lr)) bad("fallback_lr must be a positive number");
  if (epochs < 1) bad("epochs must be >= 1");
  if (adapter_rank < 1) bad("adapter_rank must be >= 1");
  if (base_model.empty()) bad("base_model must not be empty");
}

void to_json(Json& j, const TrainingHyperparams& h) {
  j = Json{{"batch_size", h.batch_size},     {"lr", h.lr},
           {"fallback_lr", h.fallback_lr},   {"epochs", h.epochs},
           {"adapter_rank", h.adapter_rank}, {"seed", h.seed},
           {"base_model", h.base_model}};
}

void from_json(const Json& j, TrainingHyperparams& h) {
  h = TrainingHyperparams{};
  h.batch_size = j.value("batch_size", h.batch_size);
  h.lr = j.value("lr", h.lr);
  h.fallback_lr = j.value("fallback_lr", h.fallback_lr);
  h.epochs = j.value("epochs", h.epochs);
  h.adapter_rank = j.value("adapter_rank", h.adapter_rank);
  h.seed = j.value("seed", h.seed);
  h.base_model = j.value("base_model", h.base_model);
}

std::string trainer_config_json(const TrainingHyperparams& h, double lr) {
  OrderedJson j;
  j["batch_size"] = h.batch_size;
  j["lr"] = lr;
  j["epochs"] = h.epochs;
  j["adapter_rank"] = h.adapter_rank;
  j["seed"] = h.seed;
  j["base_model"] = h.base_model;
  return j.dump();
}

void to_json(Json& j, const TrainingJob& job) {
  Json history = Json::array();
  for (const auto& t : job.history) {
    history.push_back({{"state", to_string(t.state)}, {"at", t.at}, {"message", t.message}});
  }
  Json loss = Json::array();
  for (double l : job.loss) loss.push_back(std::isfinite(l) ? Json(l) : Json(nullptr));
  j = Json{{"job_id", job.job_id},
           {"dataset_id", job.dataset_id},
           {"hyperparams", job.hyperparams},
           {"state", to_string(job.state)},
           {"attempt", job.attempt},
           {"current_lr", job.current_lr},
           {"epoch", job.epoch},
           {"progress", {{"attempt", job.attempt}, {"epoch", job.epoch},
                         {"epochs", job.hyperparams.epochs}}},
           {"loss", std::move(loss)},
           {"checkpoint_path", job.checkpoint_path},
           {"message", job.message},
           {"created_at", job.created_at},
           {"started_at", job.history.size() > 1 ? job.history[1].at : std::string{}},
           {"finished_at", job.finished_at},
           {"history", std::move(history)}};
}

TrainingJob training_job_from_json(const Json& j) {
  TrainingJob job;
  job.job_id = j.at("job_id").get<std::string>();
  job.dataset_id = j.value("dataset_id", std::string{});
  job.hyperparams = j.value("hyperparams", Json::object()).get<TrainingHyperparams>();
  job.state = job_state_from_string(j.value("state", std::string("queued")));
  job.attempt = j.value("attempt", 0);
  job.current_lr = j.value("current_lr", 0.0);
  job.epoch = j.value("epoch", 0);
  for (const auto& l : j.value("loss", Json::array())) {
    job.loss.push_back(l.is_number() ? l.get<double>() : std::nan(""));
  }
  job.checkpoint_path = j.value("checkpoint_path", std::string{});
  job.message = j.value("message", std::string{});
  job.created_at = j.value("created_at", std::string{});
  job.finished_at = j.value("finished_at", std::string{});
  for (const auto& t : j.value("history", Json::array())) {
    job.history.push_back({job_state_from_string(t.at("state").get<std::string>()),
                           t.value("at", std::string{}), t.value("message", std::string{})});
  }
  return job;
}

TrainingManager::TrainingManager(CorpusStore& store, TrainingManagerConfig cfg)
    : store_(store), cfg_(std::move(cfg)), root_(store.data_dir() / "jobs") {
  fs::create_directories(root_);
  for (const auto& entry : fs::directory_iterator(root_)) {
    if (!entry.is_directory()) continue;
    const auto j = detail::read_json_lenient(entry.path() / "job.json");
    if (!j) continue;
    TrainingJob job;
    try {
      job = training_job_from_json(*j);
    } catch (const std::exception&) {
      continue;
    }
    if (!is_terminal(job.state)) {
      transition(job, JobState::kFailed, "interrupted by a service restart; resubmit the job");
    }
    jobs_.emplace(job.job_id, std::move(job));
  }
}

TrainingManager::~TrainingManager() {
  stopping_ = true;
  for (auto& t : workers_) {
    if (t.joinable()) t.join();
  }
}

fs::path TrainingManager::job_dir(const std::string& job_id) const { return root_ / job_id; }

void TrainingManager::persist(const TrainingJob& job) {
  detail::write_file_atomic(job_dir(job.job_id) / "job.json", Json(job).dump(2) + '\n');
}

void TrainingManager::transition(TrainingJob& job, JobState to, std::string message) {
  job.state = to;
  job.message = message;
  job.history.push_back({to, now_iso8601(), std::move(message)});
  if (is_terminal(to)) job.finished_at = job.history.back().at;
  persist(job);
  jobs_[job.job_id] = job;
  cv_.notify_all();
}

std::string TrainingManager::submit_training_job(const std::string& dataset_id,
                                                 const TrainingHyperparams& hyperparams) {
  hyperparams.validate();
  const auto ds = load_training_set(store_, dataset_id);
  if (ds.size() == 0) {
    throw Error(ErrorCode::kPrecondition, "dataset " + dataset_id + " has no examples", dataset_id);
  }
  std::unique_lock lock(mu_);
  for (const auto& [id, j] : jobs_) {
    if (j.dataset_id == dataset_id && !is_terminal(j.state)) {
      throw Error(ErrorCode::kConflict,
                  "dataset " + dataset_id + " already has an active training job " + id, id);
    }
  }
  TrainingJob job;
  job.job_id = store_.next_id("job");
  job.dataset_id = dataset_id;
  job.hyperparams = hyperparams;
  job.created_at = now_iso8601();
  const auto dir = job_dir(job.job_id);
  fs::create_directories(dir);
  fs::copy_file(ds.train_file(), dir / "train.jsonl", fs::copy_options::overwrite_existing);
  transition(job, JobState::kQueued);
  if (!detail::is_executable(cfg_.shim)) {
    transition(job, JobState::kFailed,
               "trainer shim '" + cfg_.shim.string() +
                   "' is missing or not executable; install it or point the service at it "
                   "(--shim or LEXSTAT_TRAINER_SHIM)");
    jobs_.emplace(job.job_id, job);
    return job.job_id;
  }
  jobs_.emplace(job.job_id, job);
  workers_.emplace_back([this, id = job.job_id] { run(id); });
  return job.job_id;
}

TrainingJob TrainingManager::job(const std::string& job_id) const {
  std::lock_guard lock(mu_);
  auto it = jobs_.find(job_id);
  if (it == jobs_.end()) throw Error(ErrorCode::kNotFound, "job not found: " + job_id, job_id);
  return it->second;
}

std::vector<TrainingJob> TrainingManager::jobs() const {
  std::lock_guard lock(mu_);
  std::vector<TrainingJob> out;
  for (const auto& [id, j] : jobs_) out.push_back(j);
  return out;
}

TrainingJob TrainingManager::wait(const std::string& job_id, std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mu_);
  auto it = jobs_.find(job_id);
  if (it == jobs_.end()) throw Error(ErrorCode::kNotFound, "job not found: " + job_id, job_id);
  cv_.wait_for(lock, timeout, [&] { return is_terminal(jobs_.at(job_id).state); });
  return jobs_.at(job_id);
}

void TrainingManager::run(const std::string& job_id) {
  TrainingJob job;
  {
    std::lock_guard lock(mu_);
    job = jobs_.at(job_id);
  }
  for (int attempt = 1; attempt <= 2; ++attempt) {
    job.attempt = attempt;
    job.current_lr = attempt == 1 ? job.hyperparams.lr : job.hyperparams.fallback_lr;
    job.epoch = 0;
    job.loss.clear();
    {
      std::lock_guard lock(mu_);
      transition(job, JobState::kRunning,
                 "attempt " + std::to_string(attempt) + " with lr=" + Json(job.current_lr).dump());
      jobs_[job_id] = job;
    }
    const bool diverged = run_attempt(job);
    std::lock_guard lock(mu_);
    if (!diverged) {
      jobs_[job_id] = job;
      return;
    }
    if (attempt == 1) {
      transition(job, JobState::kRetrying,
                 "loss diverged at epoch " + std::to_string(job.epoch) + "; retrying with lr=" +
                     Json(job.hyperparams.fallback_lr).dump());
    } else {
      transition(job, JobState::kFailedDiverged,
                 "loss diverged again at epoch " + std::to_string(job.epoch) +
                     " after the learning-rate fallback");
    }
    jobs_[job_id] = job;
  }
}

// Returns true on divergence; otherwise leaves the job done or failed.
bool TrainingManager::run_attempt(TrainingJob& job) {
  const auto dir = job_dir(job.job_id);
  std::error_code ec;
  fs::remove(dir / "status.json", ec);
  fs::remove_all(dir / "checkpoint", ec);
  detail::write_file_atomic(dir / "config.json", trainer_config_json(job.hyperparams, job.current_lr));

  auto absorb_status = [&](const Json& st) {
    const int epoch = st.value("epoch", 0);
    std::vector<double> loss;
    if (auto it = st.find("loss"); it != st.end() && it->is_array()) {
      for (const auto& l : *it) loss.push_back(l.is_number() ? l.get<double>() : std::nan(""));
    }
    std::lock_guard lock(mu_);
    if (epoch >= job.epoch) {
      job.epoch = epoch;
      job.loss = std::move(loss);
    }
    auto& live = jobs_[job.job_id];
    live.epoch = job.epoch;
    live.loss = job.loss;
  };

  int pid = 0;
  try {
    pid = detail::spawn_process({cfg_.shim.string(), "train", dir.string()}, dir / "shim.log",
                                cfg_.shim_env);
  } catch (const Error& e) {
    std::lock_guard lock(mu_);
    transition(job, JobState::kFailed, e.what());
    return false;
  }
  const auto deadline = std::chrono::steady_clock::now() + cfg_.attempt_timeout;
  std::optional<int> rc;
  std::string abort_reason;
  while (!(rc = detail::poll_process(pid, false))) {
    if (auto st = detail::read_json_lenient(dir / "status.json")) absorb_status(*st);
    if (stopping_) abort_reason = "service stopped while training";
    if (std::chrono::steady_clock::now() > deadline) abort_reason = "training attempt timed out";
    if (!abort_reason.empty()) {
      ::kill(pid, SIGTERM);
      rc = detail::poll_process(pid, true);
      break;
    }
    std::this_thread::sleep_for(cfg_.poll_interval);
  }
  const auto st = detail::read_json_lenient(dir / "status.json");
  if (st) absorb_status(*st);

  std::lock_guard lock(mu_);
  if (!abort_reason.empty()) {
    transition(job, JobState::kFailed, abort_reason);
    return false;
  }
  const std::string state = st ? st->value("state", std::string{}) : std::string{};
  const bool non_finite =
      std::any_of(job.loss.begin(), job.loss.end(), [](double l) { return !std::isfinite(l); });
  if (state == "diverged" || (non_finite && state != "failed")) return true;
  if (state == "done" && rc == 0 && fs::is_directory(dir / "checkpoint", ec)) {
    job.checkpoint_path = (dir / "checkpoint").string();
    transition(job, JobState::kDone, "trained " + std::to_string(job.epoch) + " epochs");
    return false;
  }
  std::string why = "trainer shim exited with status " + std::to_string(rc.value_or(-1));
  if (state == "done") why = "trainer shim reported done without a checkpoint/ directory";
  else if (!state.empty()) why += " (state " + state + ")";
  if (auto tail = log_tail(dir / "shim.log"); !tail.empty()) why += ": " + tail;
  transition(job, JobState::kFailed, why);
  return false;
}

}  // namespace lexstat
