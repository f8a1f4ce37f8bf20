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

#include "lexstat/auto_labeler.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <map>
#include <optional>
#include <set>

#include "lexstat/corpus_store.hpp"
#include "lexstat/error.hpp"
#include "lexstat/llm_gateway.hpp"
#include "lexstat/parallel.hpp"
#include "lexstat/text.hpp"

namespace lexstat {

void AugmentationConfig::validate() const {
  if (n_target == 0) throw Error(ErrorCode::kInvalidArgument, "n_target must be >= 1");
  if (n_seed_shots == 0) throw Error(ErrorCode::kInvalidArgument, "n_seed_shots must be >= 1");
}

void to_json(Json& j, const AugmentationConfig& c) {
  j = Json{{"n_target", c.n_target},
           {"n_seed_shots", c.n_seed_shots},
           {"labeling_model_id", c.labeling_model_id},
           {"max_repair_attempts", c.max_repair_attempts},
           {"seed", c.seed}};
}

void from_json(const Json& j, AugmentationConfig& c) {
  c = AugmentationConfig{};
  c.n_target = j.value("n_target", c.n_target);
  c.n_seed_shots = j.value("n_seed_shots", c.n_seed_shots);
  c.labeling_model_id = j.value("labeling_model_id", c.labeling_model_id);
  c.max_repair_attempts = j.value("max_repair_attempts", c.max_repair_attempts);
  c.seed = j.value("seed", c.seed);
}

void to_json(Json& j, const LabelingReport& r) {
  j = Json{{"requested", r.requested},
           {"produced", r.produced},
           {"invalid_discarded", r.invalid_discarded},
           {"llm_calls", r.llm_calls},
           {"total_input_tokens", r.total_input_tokens},
           {"total_output_tokens", r.total_output_tokens},
           {"wall_ms", r.wall_ms},
           {"llm_latency_ms", r.llm_latency_ms},
           {"zero_coverage", r.zero_coverage},
           {"aborted", r.aborted},
           {"abort_message", r.abort_message},
           {"warnings", r.warnings}};
}

void to_json(Json& j, const TrainingSet& t) {
  j = Json{{"dataset_id", t.dataset_id},
           {"corpus_id", t.corpus_id},
           {"dir", t.dir.string()},
           {"n_human", t.n_human},
           {"n_llm", t.n_llm},
           {"size", t.size()},
           {"shortfall", t.shortfall},
           {"report", t.report}};
}

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  const std::uint64_t bound = n;
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return static_cast<std::size_t>(x % bound);
}

namespace {

// Partial Fisher-Yates: `m` items drawn without replacement, in draw order.
template <typename T>
std::vector<T> sample(std::vector<T> pool, std::size_t m, std::mt19937_64& rng) {
  m = std::min(m, pool.size());
  for (std::size_t i = 0; i < m; ++i) {
    std::swap(pool[i], pool[i + uniform_index(rng, pool.size() - i)]);
  }
  pool.resize(m);
  return pool;
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

FewShotSelection select_fewshot_examples(const std::vector<LabeledExample>& seeds,
                                         const Ontology& ontology, std::size_t k,
                                         std::mt19937_64& rng) {
  if (k == 0) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1");
  if (k > seeds.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "k=" + std::to_string(k) + " exceeds the " + std::to_string(seeds.size()) +
                    " available seeds");
  }
  std::vector<std::size_t> complete;
  std::vector<std::size_t> partial;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    (covers_all_fields(seeds[i].parse, ontology) ? complete : partial).push_back(i);
  }
  FewShotSelection sel;
  sel.zero_coverage = complete.empty();

  const std::size_t quota = (k + 1) / 2;
  auto picked_complete = sample(complete, quota, rng);
  const std::size_t rest = k - picked_complete.size();
  auto picked_partial = sample(partial, rest, rng);
  if (picked_partial.size() < rest) {
    std::vector<std::size_t> leftover;
    for (auto i : complete) {
      if (std::find(picked_complete.begin(), picked_complete.end(), i) == picked_complete.end()) {
        leftover.push_back(i);
      }
    }
    for (auto i : sample(leftover, rest - picked_partial.size(), rng)) picked_complete.push_back(i);
  }
  for (auto i : picked_complete) sel.shots.push_back(seeds[i]);
  for (auto i : picked_partial) sel.shots.push_back(seeds[i]);
  sel.complete_selected = picked_complete.size();
  return sel;
}

// -- output parsing ----------------------------------------------------------

namespace {

std::string strip_code_fence(std::string_view s) {
  s = text::trim(s);
  if (s.rfind("```", 0) == 0) {
    auto nl = s.find('\n');
    s = nl == std::string_view::npos ? s.substr(3) : s.substr(nl + 1);
    if (auto end = s.rfind("```"); end != std::string_view::npos) s = s.substr(0, end);
  }
  return std::string(text::trim(s));
}

// First balanced {...}, ignoring braces inside single- or double-quoted strings.
std::optional<std::string> first_object(std::string_view s) {
  const auto start = s.find('{');
  if (start == std::string_view::npos) return std::nullopt;
  int depth = 0;
  char quote = 0;
  for (std::size_t i = start; i < s.size(); ++i) {
    const char c = s[i];
    if (quote != 0) {
      if (c == '\\') {
        ++i;
      } else if (c == quote) {
        quote = 0;
      }
      continue;
    }
    if (c == '"' || c == '\'') {
      // An apostrophe inside a word is not a quote.
      const bool word_before = i > 0 && std::isalnum(static_cast<unsigned char>(s[i - 1]));
      if (c == '"' || !word_before) quote = c;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return std::string(s.substr(start, i - start + 1));
    }
  }
  return std::nullopt;
}

// Python-style literal to JSON: single-quoted strings become double-quoted.
std::string single_to_double_quotes(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  char quote = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (quote == 0) {
      if (c == '\'') {
        quote = '\'';
        out.push_back('"');
      } else {
        if (c == '"') quote = '"';
        out.push_back(c);
      }
      continue;
    }
    if (c == '\\' && i + 1 < s.size()) {
      if (quote == '\'' && s[i + 1] == '\'') {
        out.push_back('\'');
      } else {
        out.push_back(c);
        out.push_back(s[i + 1]);
      }
      ++i;
      continue;
    }
    if (c == quote) {
      out.push_back('"');
      quote = 0;
    } else if (quote == '\'' && c == '"') {
      out += "\\\"";
    } else {
      out.push_back(c);
    }
  }
  if (quote != 0) out.push_back('"');
  return out;
}

std::optional<Json> try_object(const std::string& s) {
  try {
    Json j = Json::parse(s);
    if (j.is_object()) return j;
  } catch (const Json::exception&) {
  }
  return std::nullopt;
}

std::string unquote(std::string_view v) {
  v = text::trim(v);
  if (v.size() >= 2 && (v.front() == '"' || v.front() == '\'') && v.back() == v.front()) {
    v = v.substr(1, v.size() - 2);
  }
  return std::string(text::trim(v));
}

// `FIELD: [v1, v2], FIELD2: [v]` or `FIELD: v` with bare keys, as the
// instruction line itself is written.
std::optional<Json> scan_field_lists(std::string_view s, const Ontology& o) {
  struct Hit {
    std::size_t key_pos;
    std::size_t value_pos;
    const FieldSpec* field;
  };
  std::vector<Hit> hits;
  const std::string folded = text::fold_case(s);
  if (folded.size() != s.size()) return std::nullopt;
  for (const auto& f : o.fields) {
    const std::string key = text::fold_case(f.name);
    for (std::size_t pos = folded.find(key); pos != std::string::npos;
         pos = folded.find(key, pos + 1)) {
      const bool left_ok = pos == 0 || !std::isalnum(static_cast<unsigned char>(folded[pos - 1]));
      std::size_t j = pos + key.size();
      if (j < folded.size() && (folded[j] == '"' || folded[j] == '\'')) ++j;
      while (j < folded.size() && folded[j] == ' ') ++j;
      if (!left_ok || j >= folded.size() || folded[j] != ':') continue;
      hits.push_back({pos, j + 1, &f});
      break;
    }
  }
  if (hits.empty()) return std::nullopt;
  std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) { return a.key_pos < b.key_pos; });
  Json out = Json::object();
  for (std::size_t h = 0; h < hits.size(); ++h) {
    std::size_t end = h + 1 < hits.size() ? hits[h + 1].key_pos : s.size();
    std::string_view chunk = text::trim(s.substr(hits[h].value_pos, end - hits[h].value_pos));
    while (!chunk.empty() && (chunk.back() == ',' || chunk.back() == '\'' || chunk.back() == '"' ||
                              chunk.back() == '}' || chunk.back() == ';')) {
      chunk.remove_suffix(1);
      chunk = text::trim(chunk);
    }
    Json vals = Json::array();
    if (!chunk.empty() && chunk.front() == '[') {
      auto close = chunk.rfind(']');
      std::string_view inner = chunk.substr(1, close == std::string_view::npos ? chunk.size() - 1 : close - 1);
      std::string cur;
      char quote = 0;
      for (char c : inner) {
        if (quote == 0 && c == ',') {
          if (auto v = unquote(cur); !v.empty()) vals.push_back(v);
          cur.clear();
          continue;
        }
        if (c == '"' || c == '\'') quote = quote == c ? 0 : (quote == 0 ? c : quote);
        cur.push_back(c);
      }
      if (auto v = unquote(cur); !v.empty()) vals.push_back(v);
    } else if (auto v = unquote(chunk); !v.empty()) {
      vals.push_back(v);
    }
    out[hits[h].field->name] = std::move(vals);
  }
  return out;
}

bool is_filler(std::string_view v) {
  const auto f = text::fold_case(text::trim(v));
  return f.empty() || f == "null" || f == "none" || f == "n/a" || f == "na" || f == "-";
}

ParseOutcome coerce(const Json& obj, const Ontology& ontology, bool repaired) {
  ParseOutcome out;
  out.repaired = repaired;
  for (const auto& [key, value] : obj.items()) {
    const FieldSpec* spec = ontology.find(key);
    if (spec == nullptr) {
      const auto folded = text::fold_case(key);
      for (const auto& f : ontology.fields) {
        if (text::fold_case(f.name) == folded) spec = &f;
      }
    }
    if (spec == nullptr) {
      out.warnings.push_back("dropped unknown field '" + key + "'");
      continue;
    }
    auto& dst = out.parse.values[spec->name];
    auto push = [&](const Json& x) {
      std::string s;
      if (x.is_null()) return;
      s = x.is_string() ? x.get<std::string>() : x.dump();
      s = text::collapse_whitespace(s);
      if (!is_filler(s)) dst.push_back(std::move(s));
    };
    if (value.is_array()) {
      for (const auto& x : value) push(x);
    } else {
      push(value);
    }
    if (!spec->multi_valued && dst.size() > 1) {
      out.warnings.push_back("kept the first of " + std::to_string(dst.size()) +
                             " values for single-valued field '" + spec->name + "'");
      dst.resize(1);
    }
  }
  out.parse.canonicalize(ontology);
  return out;
}

}  // namespace

ParseOutcome parse_llm_output(std::string_view raw, const Ontology& ontology) {
  const std::string cleaned = strip_code_fence(raw);
  if (auto j = try_object(cleaned)) return coerce(*j, ontology, false);

  const auto obj = first_object(cleaned);
  if (obj) {
    if (auto j = try_object(*obj)) return coerce(*j, ontology, true);
    if (auto j = try_object(single_to_double_quotes(*obj))) return coerce(*j, ontology, true);
  }
  if (auto j = try_object("{" + single_to_double_quotes(cleaned) + "}")) {
    return coerce(*j, ontology, true);
  }
  if (auto j = scan_field_lists(obj ? std::string_view(*obj) : std::string_view(cleaned), ontology)) {
    return coerce(*j, ontology, true);
  }
  // "{}" style empty answers are valid (nothing found).
  throw Error(ErrorCode::kParseFailure, "could not parse LLM output as a field map",
              std::string(raw));
}

// -- labeling ----------------------------------------------------------------

namespace {

struct DocOutcome {
  enum class Kind { kProduced, kDiscarded, kAborted } kind = Kind::kDiscarded;
  Parse parse;
  std::size_t calls = 0;
  Usage usage;
  double latency_ms = 0;
  std::vector<std::string> warnings;
  std::string error;
};

DocOutcome label_one(LlmGateway& gateway, const Ontology& ontology, const Document& target,
                     const std::vector<LabeledExample>& seeds,
                     const std::map<std::string, Document>& seed_docs,
                     const AugmentationConfig& cfg, const std::string& model_id) {
  DocOutcome out;
  std::mt19937_64 rng(cfg.seed ^ fnv1a(target.doc_id));
  std::size_t k = std::min(cfg.n_seed_shots, seeds.size());
  const auto window = gateway.config().context_window(model_id);
  std::size_t reprompts_left = cfg.max_repair_attempts;
  bool remind = false;

  while (k > 0) {
    std::mt19937_64 pick = rng;
    const auto sel = select_fewshot_examples(seeds, ontology, k, pick);
    std::vector<Document> docs;
    for (const auto& s : sel.shots) docs.push_back(seed_docs.at(s.doc_id));
    ChatRequest req;
    try {
      req = build_ie_prompt(ontology, sel.shots, docs, target, model_id, gateway.estimator(), window);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kContextLength) throw;
      --k;
      out.warnings.push_back(target.doc_id + ": prompt too long, shrinking to " +
                             std::to_string(k) + " shots");
      continue;
    }
    if (remind) req.messages.back().content += format_reminder(ontology);

    ChatResponse resp;
    try {
      ++out.calls;
      resp = gateway.complete(req);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kContextLength) {
        --k;
        continue;
      }
      out.kind = DocOutcome::Kind::kAborted;
      out.error = e.what();
      return out;
    }
    out.usage.input_tokens += resp.usage.input_tokens;
    out.usage.output_tokens += resp.usage.output_tokens;
    out.latency_ms += resp.latency_ms;

    if (!resp.is_tool_call()) {
      try {
        auto parsed = parse_llm_output(resp.content, ontology);
        validate_parse(parsed.parse, ontology);
        for (auto& w : parsed.warnings) out.warnings.push_back(target.doc_id + ": " + w);
        out.parse = std::move(parsed.parse);
        out.kind = DocOutcome::Kind::kProduced;
        return out;
      } catch (const Error&) {
      }
    }
    if (reprompts_left == 0) break;
    --reprompts_left;
    remind = true;
  }
  out.kind = DocOutcome::Kind::kDiscarded;
  out.warnings.push_back(target.doc_id + ": discarded unparseable LLM output");
  return out;
}

std::size_t workers_for(const LlmGateway& gw) {
  return std::max<std::size_t>(1, gw.config().parallelism);
}

}  // namespace

LabelingResult label_documents(CorpusStore& store, LlmGateway& gateway,
                               const std::string& corpus_id, const Ontology& ontology,
                               const AugmentationConfig& cfg,
                               std::vector<std::string> candidate_doc_ids) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  LabelingResult result;
  auto& report = result.report;

  const auto seeds = store.labels(corpus_id, Provenance::kHuman, /*include_stale=*/false);
  if (seeds.empty()) {
    throw Error(ErrorCode::kPrecondition,
                "auto-labeling needs at least one human seed label in corpus " + corpus_id,
                corpus_id);
  }
  {
    std::mt19937_64 probe(cfg.seed);
    report.zero_coverage =
        select_fewshot_examples(seeds, ontology, std::min(cfg.n_seed_shots, seeds.size()), probe)
            .zero_coverage;
  }
  std::map<std::string, Document> seed_docs;
  std::set<std::string> labeled;
  for (const auto& s : seeds) {
    seed_docs.emplace(s.doc_id, store.document(corpus_id, s.doc_id));
    labeled.insert(s.doc_id);
  }

  std::sort(candidate_doc_ids.begin(), candidate_doc_ids.end());
  candidate_doc_ids.erase(std::unique(candidate_doc_ids.begin(), candidate_doc_ids.end()),
                          candidate_doc_ids.end());
  std::erase_if(candidate_doc_ids, [&](const std::string& d) { return labeled.count(d) != 0; });

  const std::size_t needed = cfg.n_target > seeds.size() ? cfg.n_target - seeds.size() : 0;
  const std::string model_id =
      cfg.labeling_model_id.empty() ? gateway.config().routing.labeling : cfg.labeling_model_id;

  std::size_t next = 0;
  while (report.produced < needed && next < candidate_doc_ids.size() && !report.aborted) {
    const std::size_t wave = std::min(needed - report.produced, candidate_doc_ids.size() - next);
    std::vector<Document> targets;
    for (std::size_t i = 0; i < wave; ++i) {
      targets.push_back(store.document(corpus_id, candidate_doc_ids[next + i]));
    }
    next += wave;
    std::vector<DocOutcome> outcomes(wave);
    parallel_for(wave, workers_for(gateway), [&](std::size_t i) {
      try {
        outcomes[i] = label_one(gateway, ontology, targets[i], seeds, seed_docs, cfg, model_id);
      } catch (const std::exception& e) {
        outcomes[i].kind = DocOutcome::Kind::kAborted;
        outcomes[i].error = e.what();
      }
    });
    for (std::size_t i = 0; i < wave; ++i) {
      auto& o = outcomes[i];
      report.llm_calls += o.calls;
      report.total_input_tokens += o.usage.input_tokens;
      report.total_output_tokens += o.usage.output_tokens;
      report.llm_latency_ms += o.latency_ms;
      for (auto& w : o.warnings) report.warnings.push_back(std::move(w));
      switch (o.kind) {
        case DocOutcome::Kind::kProduced:
          ++report.requested;
          ++report.produced;
          result.labels.push_back(store.upsert_label(corpus_id, targets[i].doc_id,
                                                     std::move(o.parse), Provenance::kLlm,
                                                     model_id));
          break;
        case DocOutcome::Kind::kDiscarded:
          ++report.requested;
          ++report.invalid_discarded;
          break;
        case DocOutcome::Kind::kAborted:
          if (!report.aborted) {
            report.aborted = true;
            report.abort_message = targets[i].doc_id + ": " + o.error;
          }
          break;
      }
    }
    if (cfg.on_progress) cfg.on_progress(report.produced, needed);
  }
  report.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

// -- training sets -----------------------------------------------------------

namespace {

void write_training_set(const CorpusStore& store, const std::string& corpus_id,
                        const Ontology& ontology, const std::vector<LabeledExample>& rows,
                        const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto tmp = dir / "train.jsonl.tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    for (const auto& l : rows) {
      const auto doc = store.document(corpus_id, l.doc_id);
      Json line = {{"doc_id", l.doc_id},
                   {"input", doc.body},
                   {"target", canonical_parse_json(l.parse, ontology)},
                   {"provenance", to_string(l.provenance)}};
      out << line.dump() << '\n';
    }
    if (!out) throw Error(ErrorCode::kInternal, "cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, dir / "train.jsonl");
}

}  // namespace

TrainingSet ensure_training_set(CorpusStore& store, LlmGateway& gateway,
                                const std::string& corpus_id, const AugmentationConfig& cfg) {
  cfg.validate();
  const Ontology ontology = store.ontology(corpus_id);
  auto human = store.labels(corpus_id, Provenance::kHuman, /*include_stale=*/false);
  if (human.empty()) {
    throw Error(ErrorCode::kPrecondition,
                "augmentation needs at least one human seed label in corpus " + corpus_id,
                corpus_id);
  }
  TrainingSet ts;
  ts.corpus_id = corpus_id;
  std::vector<LabeledExample> rows;
  if (human.size() >= cfg.n_target) {
    human.resize(cfg.n_target);
    rows = human;
    ts.n_human = rows.size();
  } else {
    rows = human;
    ts.n_human = human.size();
    std::set<std::string> human_docs;
    for (const auto& h : human) human_docs.insert(h.doc_id);
    std::size_t needed = cfg.n_target - human.size();

    // Reuse valid LLM labels from earlier runs first.
    std::set<std::string> any_label;
    for (const auto& l : store.labels(corpus_id)) any_label.insert(l.doc_id);
    for (const auto& l : store.labels(corpus_id, Provenance::kLlm, /*include_stale=*/false)) {
      if (needed == 0) break;
      if (human_docs.count(l.doc_id) != 0) continue;
      rows.push_back(l);
      --needed;
    }
    if (needed > 0) {
      std::vector<std::string> candidates;
      for (const auto& d : store.documents(corpus_id)) {
        if (any_label.count(d.doc_id) == 0) candidates.push_back(d.doc_id);
      }
      AugmentationConfig sub = cfg;
      sub.n_target = human.size() + needed;
      auto labeled = label_documents(store, gateway, corpus_id, ontology, sub, candidates);
      ts.report = labeled.report;
      for (auto& l : labeled.labels) rows.push_back(std::move(l));
    }
    ts.n_llm = rows.size() - ts.n_human;
  }
  std::sort(rows.begin(), rows.end(), [](const LabeledExample& a, const LabeledExample& b) {
    return a.doc_id < b.doc_id;
  });
  ts.shortfall = rows.size() < cfg.n_target;
  ts.dataset_id = store.next_id(corpus_id + "-ds");
  ts.dir = store.data_dir() / "datasets" / ts.dataset_id;
  write_training_set(store, corpus_id, ontology, rows, ts.dir);

  Json manifest = ts;
  manifest["ontology_version"] = ontology.version;
  manifest["ontology"] = ontology;
  manifest["config"] = cfg;
  manifest["n_target"] = cfg.n_target;
  manifest["created_at"] = now_iso8601();
  std::ofstream(ts.dir / "manifest.json") << manifest.dump(2) << '\n';
  return ts;
}

TrainingSet load_training_set(const CorpusStore& store, const std::string& dataset_id) {
  const auto dir = store.data_dir() / "datasets" / dataset_id;
  std::ifstream in(dir / "manifest.json");
  if (!in) throw Error(ErrorCode::kNotFound, "dataset not found: " + dataset_id, dataset_id);
  const Json m = Json::parse(in);
  TrainingSet ts;
  ts.dataset_id = dataset_id;
  ts.corpus_id = m.value("corpus_id", std::string{});
  ts.dir = dir;
  ts.n_human = m.value("n_human", std::size_t{0});
  ts.n_llm = m.value("n_llm", std::size_t{0});
  ts.shortfall = m.value("shortfall", false);
  if (auto r = m.find("report"); r != m.end()) {
    ts.report.requested = r->value("requested", std::size_t{0});
    ts.report.produced = r->value("produced", std::size_t{0});
    ts.report.invalid_discarded = r->value("invalid_discarded", std::size_t{0});
    ts.report.llm_calls = r->value("llm_calls", std::size_t{0});
    ts.report.total_input_tokens = r->value("total_input_tokens", std::int64_t{0});
    ts.report.total_output_tokens = r->value("total_output_tokens", std::int64_t{0});
    ts.report.wall_ms = r->value("wall_ms", 0.0);
  }
  return ts;
}

}  // namespace lexstat
