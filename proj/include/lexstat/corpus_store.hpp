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

// Durable storage for corpora, ontologies and labels.
//
// Everything lives in one embedded database file under the data directory;
// derived artifacts (index snapshots, training sets, job directories) live in
// plain files next to it. Every mutating call is committed before it
// returns, so a crash after `upsert_label` never loses the label.

#ifndef LEXSTAT_CORPUS_STORE_HPP_
#define LEXSTAT_CORPUS_STORE_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <variant>
#include <vector>

#include "lexstat/types.hpp"

namespace lexstat {

namespace detail {
class Database;
}

struct IngestIssue {
  std::size_t line = 0;  // 1-based
  std::string message;
};

struct IngestReport {
  std::string corpus_id;
  std::size_t count = 0;     // valid lines stored
  std::size_t replaced = 0;  // of which replaced an existing doc_id
  std::int64_t corpus_version = 0;
  std::vector<IngestIssue> issues;
};

void to_json(Json& j, const IngestReport& r);

namespace ontology_edit {
struct AddField {
  FieldSpec field;
};
struct RemoveField {
  std::string name;
};
/// Edits a field description, or the task description when `field` is empty.
struct EditDescription {
  std::string field;
  std::string description;
};
}  // namespace ontology_edit

using OntologyEdit = std::variant<ontology_edit::AddField, ontology_edit::RemoveField,
                                  ontology_edit::EditDescription>;

/// Parses `{"op": "add_field" | "remove_field" | "edit_description", ...}`.
OntologyEdit ontology_edit_from_json(const Json& j);

struct OntologyUpdate {
  Ontology ontology;
  std::size_t stale_labels = 0;  // latest labels that no longer validate
};

/// First 16 hex digits of a 64-bit FNV-1a hash of the body.
std::string content_doc_id(std::string_view body);

class CorpusStore {
 public:
  explicit CorpusStore(std::filesystem::path data_dir);
  ~CorpusStore();
  CorpusStore(const CorpusStore&) = delete;
  CorpusStore& operator=(const CorpusStore&) = delete;

  const std::filesystem::path& data_dir() const { return data_dir_; }
  std::filesystem::path corpus_dir(const std::string& corpus_id) const;

  /// Ingests JSONL into `corpus_id` (created when absent; a fresh id is
  /// allocated when empty). Malformed lines are reported, not fatal.
  IngestReport ingest_corpus(std::istream& in, const std::string& corpus_id = {},
                             std::string_view format = "jsonl");

  bool has_corpus(const std::string& corpus_id) const;
  std::vector<std::string> list_corpora() const;
  std::int64_t corpus_version(const std::string& corpus_id) const;
  std::size_t document_count(const std::string& corpus_id) const;

  /// All documents sorted by doc_id.
  std::vector<Document> documents(const std::string& corpus_id) const;
  std::optional<Document> find_document(const std::string& corpus_id,
                                        const std::string& doc_id) const;
  Document document(const std::string& corpus_id, const std::string& doc_id) const;

  /// Stores a whole ontology as the next version.
  Ontology set_ontology(const std::string& corpus_id, Ontology ontology);
  std::optional<Ontology> find_ontology(const std::string& corpus_id) const;
  /// Latest version; throws kPrecondition when none is set.
  Ontology ontology(const std::string& corpus_id) const;
  std::optional<Ontology> ontology_at(const std::string& corpus_id,
                                      std::int64_t version) const;
  OntologyUpdate modify_ontology(const std::string& corpus_id, const OntologyEdit& edit);

  LabeledExample upsert_label(const std::string& corpus_id, const std::string& doc_id,
                              Parse parse, Provenance provenance,
                              const std::string& labeler_meta = {});

  /// Latest label per (doc_id, provenance), sorted by doc_id.
  std::vector<LabeledExample> labels(const std::string& corpus_id,
                                     std::optional<Provenance> provenance = {},
                                     bool include_stale = true) const;
  std::optional<LabeledExample> find_label(const std::string& corpus_id,
                                           const std::string& doc_id,
                                           Provenance provenance) const;
  /// All versions, oldest first.
  std::vector<LabeledExample> label_history(const std::string& corpus_id,
                                            const std::string& doc_id,
                                            Provenance provenance) const;

  /// Labels-export JSONL in, one `{"doc_id","provenance","parse"}` per line.
  std::size_t import_labels(const std::string& corpus_id, std::istream& in);
  void export_labels(const std::string& corpus_id, std::ostream& out,
                     std::optional<Provenance> provenance = {}) const;

  /// Monotone id allocator shared by datasets, jobs and tables.
  std::string next_id(const std::string& prefix);

 private:
  void require_corpus(const std::string& corpus_id) const;
  std::size_t revalidate_labels(const std::string& corpus_id, const Ontology& ontology);
  std::int64_t next_counter(const std::string& key);

  std::filesystem::path data_dir_;
  std::unique_ptr<detail::Database> db_;
  mutable std::shared_mutex mu_;
};

/// One labels-export line.
Json label_export_json(const LabeledExample& e);

}  // namespace lexstat

#endif  // LEXSTAT_CORPUS_STORE_HPP_
