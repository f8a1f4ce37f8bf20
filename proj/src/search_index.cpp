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

#include "lexstat/search_index.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "lexstat/corpus_store.hpp"
#include "lexstat/error.hpp"
#include "lexstat/text.hpp"

namespace lexstat {

namespace {

constexpr char kMagic[8] = {'L', 'X', 'I', 'D', 'X', '\0', '\0', '\0'};
constexpr std::uint32_t kFormatVersion = 1;
constexpr std::size_t kSnippetRadius = 40;

// Byte offset of the position `n` code points before/after `pos`.
std::size_t back_code_points(std::string_view s, std::size_t pos, std::size_t n) {
  while (n > 0 && pos > 0) {
    --pos;
    while (pos > 0 && (static_cast<unsigned char>(s[pos]) & 0xC0) == 0x80) --pos;
    --n;
  }
  return pos;
}

std::size_t forward_code_points(std::string_view s, std::size_t pos, std::size_t n) {
  while (n > 0 && pos < s.size()) {
    text::next_code_point(s, pos);
    --n;
  }
  return pos;
}

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  template <typename T>
  void pod(T v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(v));
  }
  void str(std::string_view s) {
    pod(static_cast<std::uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}
  template <typename T>
  T pod() {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof(v));
    check();
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint32_t>();
    std::string s(n, '\0');
    in_.read(s.data(), n);
    check();
    return s;
  }

 private:
  void check() {
    if (!in_) throw Error(ErrorCode::kInvalidArgument, "truncated index file");
  }
  std::istream& in_;
};

}  // namespace

std::vector<std::string> Analyzer::terms(std::string_view text) const {
  std::vector<std::string> out;
  for (auto& t : tokenize(text)) out.push_back(std::move(t.term));
  return out;
}

std::vector<Token> UnicodeWordAnalyzer::tokenize(std::string_view s) const {
  std::vector<Token> out;
  std::size_t run_start = std::string_view::npos;
  auto flush = [&](std::size_t end) {
    out.push_back({text::fold_case(s.substr(run_start, end - run_start)), run_start,
                   end - run_start});
    run_start = std::string_view::npos;
  };
  for (std::size_t pos = 0; pos < s.size();) {
    const auto start = pos;
    const char32_t cp = text::next_code_point(s, pos);
    if (text::is_word_char(cp)) {
      if (run_start == std::string_view::npos) run_start = start;
    } else if (run_start != std::string_view::npos) {
      flush(start);
    }
  }
  if (run_start != std::string_view::npos) flush(s.size());
  return out;
}

std::shared_ptr<const Analyzer> default_analyzer() {
  static const auto kAnalyzer = std::make_shared<const UnicodeWordAnalyzer>();
  return kAnalyzer;
}

void SearchQuery::validate() const {
  if (top_k == 0) throw Error(ErrorCode::kInvalidArgument, "top_k must be >= 1");
  if (terms.empty() && filters.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "query needs terms or filters");
  }
}

void to_json(Json& j, const SearchHit& h) {
  j = Json{{"doc_id", h.doc_id}, {"score", h.score}, {"snippet", h.snippet}};
}

void from_json(const Json& j, SearchQuery& q) {
  q.terms.clear();
  if (auto it = j.find("terms"); it != j.end()) {
    if (it->is_string()) {
      q.terms.push_back(it->get<std::string>());
    } else {
      q.terms = it->get<std::vector<std::string>>();
    }
  }
  q.filters = j.value("filters", std::map<std::string, std::string>{});
  q.top_k = j.value("top_k", std::size_t{10});
}

std::shared_ptr<const IndexSnapshot> IndexSnapshot::build(
    std::vector<Document> docs, std::int64_t corpus_version,
    std::shared_ptr<const Analyzer> analyzer, Bm25Params params) {
  std::shared_ptr<IndexSnapshot> idx(new IndexSnapshot());
  std::sort(docs.begin(), docs.end(),
            [](const Document& a, const Document& b) { return a.doc_id < b.doc_id; });
  idx->docs_ = std::move(docs);
  idx->corpus_version_ = corpus_version;
  idx->params_ = params;
  idx->analyzer_ = std::move(analyzer);
  idx->lengths_.reserve(idx->docs_.size());
  for (std::uint32_t i = 0; i < idx->docs_.size(); ++i) {
    std::map<std::string, std::uint32_t> tf;
    const auto toks = idx->analyzer_->tokenize(idx->docs_[i].body);
    for (const auto& t : toks) ++tf[t.term];
    idx->lengths_.push_back(static_cast<std::uint32_t>(toks.size()));
    for (const auto& [term, n] : tf) idx->postings_[term].push_back({i, n});
  }
  idx->finalize();
  return idx;
}

void IndexSnapshot::finalize() {
  double total = 0;
  for (auto n : lengths_) total += n;
  avgdl_ = docs_.empty() ? 0.0 : total / static_cast<double>(docs_.size());
}

std::vector<std::string> IndexSnapshot::vocabulary() const {
  std::vector<std::string> out;
  out.reserve(postings_.size());
  for (const auto& [term, _] : postings_) out.push_back(term);
  std::sort(out.begin(), out.end());
  return out;
}

std::size_t IndexSnapshot::document_frequency(const std::string& term) const {
  auto it = postings_.find(term);
  return it == postings_.end() ? 0 : it->second.size();
}

double IndexSnapshot::idf(const std::string& term) const {
  const double n = static_cast<double>(docs_.size());
  const double df = static_cast<double>(document_frequency(term));
  return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

std::string IndexSnapshot::snippet(std::size_t doc, const std::vector<std::string>& terms) const {
  const std::string_view body = docs_[doc].body;
  for (const auto& t : analyzer_->tokenize(body)) {
    if (std::binary_search(terms.begin(), terms.end(), t.term)) {
      const auto lo = back_code_points(body, t.offset, kSnippetRadius);
      const auto hi = forward_code_points(body, t.offset + t.length, kSnippetRadius);
      return std::string(body.substr(lo, hi - lo));
    }
  }
  return std::string(body.substr(0, forward_code_points(body, 0, 2 * kSnippetRadius)));
}

std::vector<SearchHit> IndexSnapshot::search(const SearchQuery& q) const {
  q.validate();
  std::set<std::string> term_set;
  for (const auto& raw : q.terms) {
    for (auto& t : analyzer_->terms(raw)) term_set.insert(std::move(t));
  }
  const std::vector<std::string> terms(term_set.begin(), term_set.end());

  auto passes = [&](std::size_t d) {
    for (const auto& [k, v] : q.filters) {
      auto it = docs_[d].meta.find(k);
      if (it == docs_[d].meta.end() || it->second != v) return false;
    }
    return true;
  };

  std::vector<double> score(docs_.size(), 0.0);
  std::vector<char> matched(docs_.size(), 0);
  if (terms.empty()) {
    std::fill(matched.begin(), matched.end(), 1);
  }
  const double k1 = params_.k1;
  const double b = params_.b;
  for (const auto& term : terms) {
    auto it = postings_.find(term);
    if (it == postings_.end()) continue;
    const double w = idf(term);
    for (const auto& p : it->second) {
      const double tf = p.tf;
      const double norm = k1 * (1.0 - b + b * lengths_[p.doc] / avgdl_);
      score[p.doc] += w * tf * (k1 + 1.0) / (tf + norm);
      matched[p.doc] = 1;
    }
  }

  std::vector<std::size_t> cand;
  for (std::size_t d = 0; d < docs_.size(); ++d) {
    if (matched[d] && passes(d)) cand.push_back(d);
  }
  auto better = [&](std::size_t a, std::size_t c) {
    if (score[a] != score[c]) return score[a] > score[c];
    return docs_[a].doc_id < docs_[c].doc_id;
  };
  const std::size_t k = std::min(q.top_k, cand.size());
  std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end(),
                    better);
  std::vector<SearchHit> hits;
  hits.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    hits.push_back({docs_[cand[i]].doc_id, score[cand[i]], snippet(cand[i], terms)});
  }
  return hits;
}

void IndexSnapshot::save(const std::filesystem::path& file) const {
  const auto tmp = file.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kInternal, "cannot write " + tmp);
    Writer w(out);
    out.write(kMagic, sizeof(kMagic));
    w.pod(kFormatVersion);
    w.pod(corpus_version_);
    w.pod(params_.k1);
    w.pod(params_.b);
    w.str(analyzer_->name());
    w.pod(static_cast<std::uint64_t>(docs_.size()));
    for (std::size_t i = 0; i < docs_.size(); ++i) {
      w.str(docs_[i].doc_id);
      w.str(docs_[i].body);
      w.pod(static_cast<std::uint32_t>(docs_[i].meta.size()));
      for (const auto& [k, v] : docs_[i].meta) {
        w.str(k);
        w.str(v);
      }
      w.pod(lengths_[i]);
    }
    const auto vocab = vocabulary();
    w.pod(static_cast<std::uint64_t>(vocab.size()));
    for (const auto& term : vocab) {
      const auto& plist = postings_.at(term);
      w.str(term);
      w.pod(static_cast<std::uint32_t>(plist.size()));
      for (const auto& p : plist) {
        w.pod(p.doc);
        w.pod(p.tf);
      }
    }
    if (!out) throw Error(ErrorCode::kInternal, "short write " + tmp);
  }
  std::filesystem::rename(tmp, file);
}

std::shared_ptr<const IndexSnapshot> IndexSnapshot::load(
    const std::filesystem::path& file, std::shared_ptr<const Analyzer> analyzer) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::kNotFound, "index file not found: " + file.string());
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || !std::equal(magic, magic + sizeof(magic), kMagic)) {
    throw Error(ErrorCode::kInvalidArgument, "not an index file: " + file.string());
  }
  Reader r(in);
  const auto version = r.pod<std::uint32_t>();
  if (version != kFormatVersion) {
    throw Error(ErrorCode::kInvalidArgument,
                "unsupported index format version " + std::to_string(version));
  }
  std::shared_ptr<IndexSnapshot> idx(new IndexSnapshot());
  idx->corpus_version_ = r.pod<std::int64_t>();
  idx->params_.k1 = r.pod<double>();
  idx->params_.b = r.pod<double>();
  if (r.str() != analyzer->name()) {
    throw Error(ErrorCode::kInvalidArgument, "index was built with a different analyzer");
  }
  idx->analyzer_ = std::move(analyzer);
  const auto ndocs = r.pod<std::uint64_t>();
  for (std::uint64_t i = 0; i < ndocs; ++i) {
    Document d;
    d.doc_id = r.str();
    d.body = r.str();
    const auto nmeta = r.pod<std::uint32_t>();
    for (std::uint32_t m = 0; m < nmeta; ++m) {
      auto k = r.str();
      d.meta[k] = r.str();
    }
    idx->docs_.push_back(std::move(d));
    idx->lengths_.push_back(r.pod<std::uint32_t>());
  }
  const auto nterms = r.pod<std::uint64_t>();
  for (std::uint64_t t = 0; t < nterms; ++t) {
    auto term = r.str();
    const auto np = r.pod<std::uint32_t>();
    auto& plist = idx->postings_[term];
    plist.reserve(np);
    for (std::uint32_t p = 0; p < np; ++p) {
      Posting post;
      post.doc = r.pod<std::uint32_t>();
      post.tf = r.pod<std::uint32_t>();
      if (post.doc >= ndocs) throw Error(ErrorCode::kInvalidArgument, "corrupt posting");
      plist.push_back(post);
    }
  }
  idx->finalize();
  return idx;
}

IndexHandle build_index(const CorpusStore& store, const std::string& corpus_id,
                        std::shared_ptr<const Analyzer> analyzer) {
  const auto version = store.corpus_version(corpus_id);
  auto docs = store.documents(corpus_id);
  if (docs.empty()) {
    throw Error(ErrorCode::kPrecondition, "cannot index an empty corpus: " + corpus_id, corpus_id);
  }
  auto idx = IndexSnapshot::build(std::move(docs), version, std::move(analyzer));
  const auto dir = store.corpus_dir(corpus_id);
  std::filesystem::create_directories(dir);
  idx->save(dir / ("index.v" + std::to_string(version) + ".bin"));
  return idx;
}

IndexHandle open_index(const CorpusStore& store, const std::string& corpus_id,
                       std::shared_ptr<const Analyzer> analyzer) {
  const auto version = store.corpus_version(corpus_id);
  const auto file = store.corpus_dir(corpus_id) / ("index.v" + std::to_string(version) + ".bin");
  if (std::filesystem::exists(file)) {
    try {
      return IndexSnapshot::load(file, analyzer);
    } catch (const Error&) {
      // fall through and rebuild
    }
  }
  return build_index(store, corpus_id, std::move(analyzer));
}

}  // namespace lexstat
