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

// Embedded BM25 full-text index.
//
// An IndexSnapshot is immutable once built. Rebuilding a corpus produces a
// new snapshot; holders of the old shared_ptr keep querying it undisturbed.
//
// Scoring, for query term t in document d:
//
//   idf(t)   = ln(1 + (N - df(t) + 0.5) / (df(t) + 0.5))
//   s(t, d)  = idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * |d| / avgdl))
//
// Query terms are analyzed with the index analyzer and deduplicated; a
// document's score is the sum over distinct query terms it contains.

#ifndef LEXSTAT_SEARCH_INDEX_HPP_
#define LEXSTAT_SEARCH_INDEX_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lexstat/types.hpp"

namespace lexstat {

class CorpusStore;

struct Token {
  std::string term;
  std::size_t offset = 0;  // byte offset into the analyzed text
  std::size_t length = 0;  // byte length of the surface form
};

class Analyzer {
 public:
  virtual ~Analyzer() = default;
  virtual std::string name() const = 0;
  virtual std::vector<Token> tokenize(std::string_view text) const = 0;

  std::vector<std::string> terms(std::string_view text) const;
};

/// Unicode word runs, case folded, no stemming. Works for Hangul and Latin
/// scripts alike.
class UnicodeWordAnalyzer final : public Analyzer {
 public:
  std::string name() const override { return "unicode-word-v1"; }
  std::vector<Token> tokenize(std::string_view text) const override;
};

std::shared_ptr<const Analyzer> default_analyzer();

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

struct SearchQuery {
  std::vector<std::string> terms;
  std::map<std::string, std::string> filters;  // meta key -> required value
  std::size_t top_k = 10;

  /// Throws kInvalidArgument when top_k == 0 or both terms and filters are empty.
  void validate() const;
};

struct SearchHit {
  std::string doc_id;
  double score = 0.0;
  std::string snippet;
};

void to_json(Json& j, const SearchHit& h);
void from_json(const Json& j, SearchQuery& q);

class IndexSnapshot {
 public:
  struct Posting {
    std::uint32_t doc = 0;
    std::uint32_t tf = 0;
  };

  static std::shared_ptr<const IndexSnapshot> build(
      std::vector<Document> docs, std::int64_t corpus_version = 0,
      std::shared_ptr<const Analyzer> analyzer = default_analyzer(), Bm25Params params = {});

  /// Hits sorted by (score desc, doc_id asc).
  std::vector<SearchHit> search(const SearchQuery& q) const;

  std::size_t doc_count() const { return docs_.size(); }
  std::int64_t corpus_version() const { return corpus_version_; }
  double average_length() const { return avgdl_; }
  const Bm25Params& params() const { return params_; }
  const Analyzer& analyzer() const { return *analyzer_; }

  /// Sorted, distinct.
  std::vector<std::string> vocabulary() const;
  std::size_t document_frequency(const std::string& term) const;
  double idf(const std::string& term) const;

  /// Versioned binary file. `load` rejects unknown magic/format versions and
  /// snapshots built by a different analyzer.
  void save(const std::filesystem::path& file) const;
  static std::shared_ptr<const IndexSnapshot> load(
      const std::filesystem::path& file,
      std::shared_ptr<const Analyzer> analyzer = default_analyzer());

 private:
  IndexSnapshot() = default;
  void finalize();
  std::string snippet(std::size_t doc, const std::vector<std::string>& terms) const;

  std::vector<Document> docs_;
  std::vector<std::uint32_t> lengths_;
  std::unordered_map<std::string, std::vector<Posting>> postings_;
  std::int64_t corpus_version_ = 0;
  double avgdl_ = 0.0;
  Bm25Params params_;
  std::shared_ptr<const Analyzer> analyzer_;
};

using IndexHandle = std::shared_ptr<const IndexSnapshot>;

/// Builds a snapshot of the corpus at its current version and persists it as
/// `<corpus_dir>/index.v<version>.bin`. Throws kPrecondition on an empty corpus.
IndexHandle build_index(const CorpusStore& store, const std::string& corpus_id,
                        std::shared_ptr<const Analyzer> analyzer = default_analyzer());

/// Loads the persisted snapshot for the current corpus version, building it
/// when missing.
IndexHandle open_index(const CorpusStore& store, const std::string& corpus_id,
                       std::shared_ptr<const Analyzer> analyzer = default_analyzer());

}  // namespace lexstat

#endif  // LEXSTAT_SEARCH_INDEX_HPP_
