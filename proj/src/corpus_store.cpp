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

#include "lexstat/corpus_store.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <mutex>
#include <ostream>

#include "lexstat/error.hpp"
#include "lexstat/text.hpp"
#include "sqlite_db.hpp"

namespace lexstat {

namespace {

constexpr std::string_view kSchema = R"sql(
CREATE TABLE IF NOT EXISTS counters(key TEXT PRIMARY KEY, value INTEGER NOT NULL);
CREATE TABLE IF NOT EXISTS corpora(
  id TEXT PRIMARY KEY, version INTEGER NOT NULL, created_at TEXT NOT NULL);
CREATE TABLE IF NOT EXISTS documents(
  corpus_id TEXT NOT NULL, doc_id TEXT NOT NULL, body TEXT NOT NULL, meta TEXT NOT NULL,
  PRIMARY KEY(corpus_id, doc_id));
CREATE TABLE IF NOT EXISTS ontologies(
  corpus_id TEXT NOT NULL, version INTEGER NOT NULL, body TEXT NOT NULL,
  created_at TEXT NOT NULL, PRIMARY KEY(corpus_id, version));
CREATE TABLE IF NOT EXISTS labels(
  corpus_id TEXT NOT NULL, doc_id TEXT NOT NULL, provenance TEXT NOT NULL,
  version INTEGER NOT NULL, ontology_version INTEGER NOT NULL, parse TEXT NOT NULL,
  labeler_meta TEXT NOT NULL, created_at TEXT NOT NULL, stale INTEGER NOT NULL,
  PRIMARY KEY(corpus_id, doc_id, provenance, version));
)sql";

constexpr std::string_view kLabelColumns =
    "doc_id, provenance, version, ontology_version, parse, labeler_meta, created_at, stale";

LabeledExample read_label(const detail::Statement& st) {
  LabeledExample e;
  e.doc_id = st.text(0);
  e.provenance = provenance_from_string(st.text(1));
  e.version = st.integer(2);
  e.ontology_version = st.integer(3);
  e.parse = Json::parse(st.text(4)).get<Parse>();
  e.labeler_meta = st.text(5);
  e.created_at = st.text(6);
  e.stale = st.integer(7) != 0;
  return e;
}

Document read_document(const detail::Statement& st) {
  Document d;
  d.doc_id = st.text(0);
  d.body = st.text(1);
  d.meta = Json::parse(st.text(2)).get<std::map<std::string, std::string>>();
  return d;
}

bool validates(const Parse& parse, const Ontology& ontology) {
  try {
    validate_parse(parse, ontology);
    return true;
  } catch (const Error&) {
    return false;
  }
}

}  // namespace

void to_json(Json& j, const IngestReport& r) {
  Json issues = Json::array();
  for (const auto& i : r.issues) issues.push_back({{"line", i.line}, {"message", i.message}});
  j = Json{{"corpus_id", r.corpus_id},
           {"count", r.count},
           {"replaced", r.replaced},
           {"corpus_version", r.corpus_version},
           {"issues", issues}};
}

OntologyEdit ontology_edit_from_json(const Json& j) {
  const auto op = j.value("op", std::string{});
  if (op == "add_field") return ontology_edit::AddField{j.at("field").get<FieldSpec>()};
  if (op == "remove_field") return ontology_edit::RemoveField{j.at("name").get<std::string>()};
  if (op == "edit_description") {
    return ontology_edit::EditDescription{j.value("field", std::string{}),
                                          j.at("description").get<std::string>()};
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown ontology edit op: '" + op + "'");
}

std::string content_doc_id(std::string_view body) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : body) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Json label_export_json(const LabeledExample& e) {
  return Json{{"doc_id", e.doc_id}, {"provenance", to_string(e.provenance)}, {"parse", e.parse}};
}

CorpusStore::CorpusStore(std::filesystem::path data_dir) : data_dir_(std::move(data_dir)) {
  std::filesystem::create_directories(data_dir_);
  db_ = std::make_unique<detail::Database>(data_dir_ / "lexstat.db");
  db_->exec(kSchema);
}

CorpusStore::~CorpusStore() = default;

std::filesystem::path CorpusStore::corpus_dir(const std::string& corpus_id) const {
  return data_dir_ / "corpora" / corpus_id;
}

std::int64_t CorpusStore::next_counter(const std::string& key) {
  auto st = db_->prepare(
      "INSERT INTO counters(key, value) VALUES(?1, 1) "
      "ON CONFLICT(key) DO UPDATE SET value = value + 1 RETURNING value");
  st.bind(1, key);
  if (!st.step()) throw Error(ErrorCode::kInternal, "counter update returned no row");
  const auto v = st.integer(0);
  st.run();
  return v;
}

std::string CorpusStore::next_id(const std::string& prefix) {
  std::unique_lock lock(mu_);
  detail::Transaction tx(*db_);
  const auto n = next_counter("id:" + prefix);
  tx.commit();
  return prefix + std::to_string(n);
}

IngestReport CorpusStore::ingest_corpus(std::istream& in, const std::string& corpus_id,
                                        std::string_view format) {
  if (format != "jsonl") {
    throw Error(ErrorCode::kInvalidArgument, "unsupported corpus format: " + std::string(format));
  }
  std::vector<Document> docs;
  IngestReport report;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (text::trim(line).empty()) continue;
    try {
      const Json j = Json::parse(line);
      if (!j.is_object()) throw Error(ErrorCode::kInvalidArgument, "line is not a JSON object");
      auto body = j.find("body");
      if (body == j.end() || !body->is_string()) {
        throw Error(ErrorCode::kInvalidArgument, "missing string field 'body'");
      }
      Document d = j.get<Document>();
      if (text::trim(d.body).empty()) {
        throw Error(ErrorCode::kInvalidArgument, "empty body");
      }
      if (d.doc_id.empty()) d.doc_id = content_doc_id(d.body);
      docs.push_back(std::move(d));
    } catch (const std::exception& e) {
      report.issues.push_back({lineno, e.what()});
    }
  }
  if (docs.empty()) {
    Json detail = report;
    throw Error(ErrorCode::kInvalidArgument, "ingest produced zero valid documents",
                detail["issues"].dump());
  }

  std::unique_lock lock(mu_);
  detail::Transaction tx(*db_);
  std::string id = corpus_id;
  if (id.empty()) id = "c" + std::to_string(next_counter("id:corpus"));
  {
    auto st = db_->prepare(
        "INSERT INTO corpora(id, version, created_at) VALUES(?1, 1, ?2) "
        "ON CONFLICT(id) DO UPDATE SET version = version + 1 RETURNING version");
    st.bind(1, id).bind(2, now_iso8601());
    st.step();
    report.corpus_version = st.integer(0);
    st.run();
  }
  for (const auto& d : docs) {
    auto exists = db_->prepare("SELECT 1 FROM documents WHERE corpus_id = ?1 AND doc_id = ?2");
    exists.bind(1, id).bind(2, d.doc_id);
    if (exists.step()) ++report.replaced;
    auto st = db_->prepare(
        "INSERT INTO documents(corpus_id, doc_id, body, meta) VALUES(?1, ?2, ?3, ?4) "
        "ON CONFLICT(corpus_id, doc_id) DO UPDATE SET body = excluded.body, meta = excluded.meta");
    st.bind(1, id).bind(2, d.doc_id).bind(3, d.body).bind(4, Json(d.meta).dump());
    st.run();
  }
  tx.commit();
  report.corpus_id = id;
  report.count = docs.size();
  std::filesystem::create_directories(corpus_dir(id));
  return report;
}

bool CorpusStore::has_corpus(const std::string& corpus_id) const {
  std::shared_lock lock(mu_);
  auto st = db_->prepare("SELECT 1 FROM corpora WHERE id = ?1");
  st.bind(1, corpus_id);
  return st.step();
}

void CorpusStore::require_corpus(const std::string& corpus_id) const {
  auto st = db_->prepare("SELECT 1 FROM corpora WHERE id = ?1");
  st.bind(1, corpus_id);
  if (!st.step()) {
    throw Error(ErrorCode::kNotFound, "corpus not found: " + corpus_id, corpus_id);
  }
}

std::vector<std::string> CorpusStore::list_corpora() const {
  std::shared_lock lock(mu_);
  std::vector<std::string> out;
  auto st = db_->prepare("SELECT id FROM corpora ORDER BY id");
  while (st.step()) out.push_back(st.text(0));
  return out;
}

std::int64_t CorpusStore::corpus_version(const std::string& corpus_id) const {
  std::shared_lock lock(mu_);
  auto st = db_->prepare("SELECT version FROM corpora WHERE id = ?1");
  st.bind(1, corpus_id);
  if (!st.step()) throw Error(ErrorCode::kNotFound, "corpus not found: " + corpus_id, corpus_id);
  return st.integer(0);
}

std::size_t CorpusStore::document_count(const std::string& corpus_id) const {
  std::shared_lock lock(mu_);
  require_corpus(corpus_id);
  auto st = db_->prepare("SELECT COUNT(*) FROM documents WHERE corpus_id = ?1");
  st.bind(1, corpus_id);
  st.step();
  return static_cast<std::size_t>(st.integer(0));
}

std::vector<Document> CorpusStore::documents(const std::string& corpus_id) const {
  std::shared_lock lock(mu_);
  require_corpus(corpus_id);
  std::vector<Document> out;
  auto st = db_->prepare(
      "SELECT doc_id, body, meta FROM documents WHERE corpus_id = ?1 ORDER BY doc_id");
  st.bind(1, corpus_id);
  while (st.step()) out.push_back(read_document(st));
  return out;
}

std::optional<Document> CorpusStore::find_document(const std::string& corpus_id,
                                                   const std::string& doc_id) const {
  std::shared_lock lock(mu_);
  auto st = db_->prepare(
      "SELECT doc_id, body, meta FROM documents WHERE corpus_id = ?1 AND doc_id = ?2");
  st.bind(1, corpus_id).bind(2, doc_id);
  if (!st.step()) return std::nullopt;
  return read_document(st);
}

Document CorpusStore::document(const std::string& corpus_id, const std::string& doc_id) const {
  auto d = find_document(corpus_id, doc_id);
  if (!d) throw Error(ErrorCode::kNotFound, "document not found: " + doc_id, doc_id);
  return *std::move(d);
}

Ontology CorpusStore::set_ontology(const std::string& corpus_id, Ontology ontology) {
  ontology.validate();
  std::unique_lock lock(mu_);
  require_corpus(corpus_id);
  detail::Transaction tx(*db_);
  auto cur = db_->prepare("SELECT COALESCE(MAX(version), 0) FROM ontologies WHERE corpus_id = ?1");
  cur.bind(1, corpus_id);
  cur.step();
  ontology.version = cur.integer(0) + 1;
  auto st = db_->prepare(
      "INSERT INTO ontologies(corpus_id, version, body, created_at) VALUES(?1, ?2, ?3, ?4)");
  st.bind(1, corpus_id).bind(2, ontology.version).bind(3, Json(ontology).dump()).bind(4, now_iso8601());
  st.run();
  revalidate_labels(corpus_id, ontology);
  tx.commit();
  return ontology;
}

std::optional<Ontology> CorpusStore::find_ontology(const std::string& corpus_id) const {
  std::shared_lock lock(mu_);
  auto st = db_->prepare(
      "SELECT body FROM ontologies WHERE corpus_id = ?1 ORDER BY version DESC LIMIT 1");
  st.bind(1, corpus_id);
  if (!st.step()) return std::nullopt;
  return Json::parse(st.text(0)).get<Ontology>();
}

Ontology CorpusStore::ontology(const std::string& corpus_id) const {
  auto o = find_ontology(corpus_id);
  if (!o) {
    if (!has_corpus(corpus_id)) {
      throw Error(ErrorCode::kNotFound, "corpus not found: " + corpus_id, corpus_id);
    }
    throw Error(ErrorCode::kPrecondition, "corpus has no ontology: " + corpus_id, corpus_id);
  }
  return *std::move(o);
}

std::optional<Ontology> CorpusStore::ontology_at(const std::string& corpus_id,
                                                 std::int64_t version) const {
  std::shared_lock lock(mu_);
  auto st = db_->prepare("SELECT body FROM ontologies WHERE corpus_id = ?1 AND version = ?2");
  st.bind(1, corpus_id).bind(2, version);
  if (!st.step()) return std::nullopt;
  return Json::parse(st.text(0)).get<Ontology>();
}

OntologyUpdate CorpusStore::modify_ontology(const std::string& corpus_id,
                                            const OntologyEdit& edit) {
  Ontology next = ontology(corpus_id);
  struct Apply {
    Ontology& o;
    void operator()(const ontology_edit::AddField& e) const {
      FieldSpec f = e.field;
      f.name = canonical_field_name(f.name);
      if (o.has(f.name)) {
        throw Error(ErrorCode::kConflict, "field already exists: " + f.name, f.name);
      }
      o.fields.push_back(std::move(f));
    }
    void operator()(const ontology_edit::RemoveField& e) const {
      auto it = std::find_if(o.fields.begin(), o.fields.end(),
                             [&](const FieldSpec& f) { return f.name == e.name; });
      if (it == o.fields.end()) {
        throw Error(ErrorCode::kNotFound, "no such field: " + e.name, e.name);
      }
      if (o.fields.size() == 1) {
        throw Error(ErrorCode::kValidation, "cannot remove the last field: " + e.name, e.name);
      }
      o.fields.erase(it);
    }
    void operator()(const ontology_edit::EditDescription& e) const {
      if (e.field.empty()) {
        o.task_description = e.description;
        return;
      }
      for (auto& f : o.fields) {
        if (f.name == e.field) {
          f.description = e.description;
          return;
        }
      }
      throw Error(ErrorCode::kNotFound, "no such field: " + e.field, e.field);
    }
  };
  std::visit(Apply{next}, edit);
  next = set_ontology(corpus_id, std::move(next));
  std::size_t stale = 0;
  for (const auto& l : labels(corpus_id)) stale += l.stale ? 1 : 0;
  return {std::move(next), stale};
}

std::size_t CorpusStore::revalidate_labels(const std::string& corpus_id,
                                           const Ontology& ontology) {
  std::vector<LabeledExample> latest;
  {
    auto st = db_->prepare(
        "SELECT " + std::string(kLabelColumns) +
        " FROM labels l WHERE corpus_id = ?1 AND version = (SELECT MAX(version) FROM labels m"
        " WHERE m.corpus_id = l.corpus_id AND m.doc_id = l.doc_id"
        " AND m.provenance = l.provenance)");
    st.bind(1, corpus_id);
    while (st.step()) latest.push_back(read_label(st));
  }
  std::size_t stale = 0;
  for (const auto& l : latest) {
    const bool now_stale = !validates(l.parse, ontology);
    stale += now_stale ? 1 : 0;
    if (now_stale == l.stale) continue;
    auto up = db_->prepare(
        "UPDATE labels SET stale = ?1 WHERE corpus_id = ?2 AND doc_id = ?3 "
        "AND provenance = ?4 AND version = ?5");
    up.bind(1, std::int64_t{now_stale}).bind(2, corpus_id).bind(3, l.doc_id);
    up.bind(4, to_string(l.provenance)).bind(5, l.version);
    up.run();
  }
  return stale;
}

LabeledExample CorpusStore::upsert_label(const std::string& corpus_id, const std::string& doc_id,
                                         Parse parse, Provenance provenance,
                                         const std::string& labeler_meta) {
  const Ontology onto = ontology(corpus_id);
  if (!find_document(corpus_id, doc_id)) {
    throw Error(ErrorCode::kNotFound, "document not found: " + doc_id, doc_id);
  }
  validate_parse(parse, onto);
  parse.canonicalize(onto);

  std::unique_lock lock(mu_);
  detail::Transaction tx(*db_);
  auto cur = db_->prepare(
      "SELECT COALESCE(MAX(version), 0) FROM labels WHERE corpus_id = ?1 AND doc_id = ?2 "
      "AND provenance = ?3");
  cur.bind(1, corpus_id).bind(2, doc_id).bind(3, to_string(provenance));
  cur.step();
  LabeledExample e;
  e.doc_id = doc_id;
  e.parse = std::move(parse);
  e.provenance = provenance;
  e.labeler_meta = labeler_meta;
  e.created_at = now_iso8601();
  e.version = cur.integer(0) + 1;
  e.ontology_version = onto.version;
  auto st = db_->prepare(
      "INSERT INTO labels(corpus_id, doc_id, provenance, version, ontology_version, parse, "
      "labeler_meta, created_at, stale) VALUES(?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, 0)");
  st.bind(1, corpus_id).bind(2, doc_id).bind(3, to_string(provenance)).bind(4, e.version);
  st.bind(5, e.ontology_version).bind(6, Json(e.parse).dump()).bind(7, labeler_meta);
  st.bind(8, e.created_at);
  st.run();
  tx.commit();
  // Empty fields are not serialized; hand back what a reader will see.
  Parse stored = Json(e.parse).get<Parse>();
  stored.canonicalize(onto);
  e.parse = std::move(stored);
  return e;
}

std::vector<LabeledExample> CorpusStore::labels(const std::string& corpus_id,
                                                std::optional<Provenance> provenance,
                                                bool include_stale) const {
  std::shared_lock lock(mu_);
  require_corpus(corpus_id);
  std::string sql = "SELECT " + std::string(kLabelColumns) +
                    " FROM labels l WHERE corpus_id = ?1 AND version = (SELECT MAX(version)"
                    " FROM labels m WHERE m.corpus_id = l.corpus_id AND m.doc_id = l.doc_id"
                    " AND m.provenance = l.provenance)";
  if (provenance) sql += " AND provenance = ?2";
  if (!include_stale) sql += " AND stale = 0";
  sql += " ORDER BY doc_id, provenance";
  auto st = db_->prepare(sql);
  st.bind(1, corpus_id);
  if (provenance) st.bind(2, to_string(*provenance));
  std::vector<LabeledExample> out;
  while (st.step()) out.push_back(read_label(st));
  return out;
}

std::optional<LabeledExample> CorpusStore::find_label(const std::string& corpus_id,
                                                      const std::string& doc_id,
                                                      Provenance provenance) const {
  auto h = label_history(corpus_id, doc_id, provenance);
  if (h.empty()) return std::nullopt;
  return std::move(h.back());
}

std::vector<LabeledExample> CorpusStore::label_history(const std::string& corpus_id,
                                                       const std::string& doc_id,
                                                       Provenance provenance) const {
  std::shared_lock lock(mu_);
  auto st = db_->prepare("SELECT " + std::string(kLabelColumns) +
                         " FROM labels WHERE corpus_id = ?1 AND doc_id = ?2 AND provenance = ?3"
                         " ORDER BY version");
  st.bind(1, corpus_id).bind(2, doc_id).bind(3, to_string(provenance));
  std::vector<LabeledExample> out;
  while (st.step()) out.push_back(read_label(st));
  return out;
}

std::size_t CorpusStore::import_labels(const std::string& corpus_id, std::istream& in) {
  std::string line;
  std::size_t n = 0;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (text::trim(line).empty()) continue;
    try {
      const Json j = Json::parse(line);
      upsert_label(corpus_id, j.at("doc_id").get<std::string>(), j.at("parse").get<Parse>(),
                   provenance_from_string(j.value("provenance", std::string("human"))),
                   j.value("labeler_meta", std::string("import")));
      ++n;
    } catch (const Error& e) {
      throw Error(e.code(), "labels line " + std::to_string(lineno) + ": " + e.what(),
                  e.detail());
    } catch (const std::exception& e) {
      throw Error(ErrorCode::kInvalidArgument,
                  "labels line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return n;
}

void CorpusStore::export_labels(const std::string& corpus_id, std::ostream& out,
                                std::optional<Provenance> provenance) const {
  for (const auto& l : labels(corpus_id, provenance)) {
    out << label_export_json(l).dump() << '\n';
  }
}

}  // namespace lexstat
