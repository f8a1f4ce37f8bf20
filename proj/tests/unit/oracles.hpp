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


// Independent reference computations used as test oracles. Each one is the
// naive definition, written without the library's data structures.

#ifndef LEXSTAT_TESTS_ORACLES_HPP_
#define LEXSTAT_TESTS_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lexstat/evaluator.hpp"
#include "lexstat/search_index.hpp"
#include "lexstat/types.hpp"

namespace lexstat::testing {

inline std::vector<std::string> split_spaces(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

struct OracleHit {
  std::string doc_id;
  double score = 0.0;
};

/// Exhaustive BM25 over space-separated lowercase documents. Only documents
/// containing at least one query term are hits; sorted by (score desc, id).
inline std::vector<OracleHit> bm25_oracle(const std::vector<Document>& docs,
                                          const std::vector<std::string>& query,
                                          const std::map<std::string, std::string>& filters,
                                          double k1 = 1.2, double b = 0.75) {
  const double n = static_cast<double>(docs.size());
  std::vector<std::vector<std::string>> toks;
  double total = 0;
  for (const auto& d : docs) {
    toks.push_back(split_spaces(d.body));
    total += static_cast<double>(toks.back().size());
  }
  const double avgdl = total / n;
  const std::set<std::string> terms(query.begin(), query.end());
  std::vector<OracleHit> hits;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    bool pass = true;
    for (const auto& [k, v] : filters) {
      auto it = docs[i].meta.find(k);
      pass = pass && it != docs[i].meta.end() && it->second == v;
    }
    if (!pass) continue;
    double score = 0;
    bool any = false;
    for (const auto& t : terms) {
      const double tf = static_cast<double>(std::count(toks[i].begin(), toks[i].end(), t));
      if (tf == 0) continue;
      any = true;
      double df = 0;
      for (const auto& tk : toks) df += std::find(tk.begin(), tk.end(), t) != tk.end() ? 1 : 0;
      const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
      const double len = static_cast<double>(toks[i].size());
      score += idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len / avgdl));
    }
    if (any) hits.push_back({docs[i].doc_id, score});
  }
  std::sort(hits.begin(), hits.end(), [](const OracleHit& x, const OracleHit& y) {
    if (x.score != y.score) return x.score > y.score;
    return x.doc_id < y.doc_id;
  });
  return hits;
}

/// Checks `got` against the exhaustive ranking: every returned score matches
/// the oracle's score for that doc, the list is the oracle's top-k up to
/// ties within `tol`, and the order is nonincreasing.
inline bool bm25_matches(const std::vector<SearchHit>& got, const std::vector<OracleHit>& want,
                         std::size_t k, double tol, std::string* why = nullptr) {
  auto fail = [&](const std::string& m) {
    if (why) *why = m;
    return false;
  };
  const std::size_t expect = std::min(k, want.size());
  if (got.size() != expect) return fail("size " + std::to_string(got.size()) + " vs " + std::to_string(expect));
  std::map<std::string, double> oracle;
  for (const auto& h : want) oracle[h.doc_id] = h.score;
  for (std::size_t i = 0; i < got.size(); ++i) {
    auto it = oracle.find(got[i].doc_id);
    if (it == oracle.end()) return fail("unexpected doc " + got[i].doc_id);
    if (std::abs(it->second - got[i].score) > tol) return fail("score of " + got[i].doc_id);
    if (std::abs(want[i].score - got[i].score) > tol) return fail("rank " + std::to_string(i));
    if (i > 0 && got[i].score > got[i - 1].score + tol) return fail("order");
  }
  return true;
}

struct Counts {
  std::size_t tp = 0, fp = 0, fn = 0;
};

/// TP/FP/FN per field by explicit matching: each predicted value consumes
/// one equal, still unmatched gold value.
inline std::map<std::string, Counts> brute_force_counts(const ParseMap& pred, const ParseMap& gold,
                                                        const Ontology& o) {
  std::set<std::string> docs;
  for (const auto& [d, _] : pred) docs.insert(d);
  for (const auto& [d, _] : gold) docs.insert(d);
  std::map<std::string, Counts> out;
  for (const auto& f : o.fields) {
    Counts c;
    for (const auto& d : docs) {
      std::vector<std::string> p, g;
      if (auto it = pred.find(d); it != pred.end()) {
        for (const auto& v : it->second.get(f.name)) p.push_back(normalize_value(v, f.kind));
      }
      if (auto it = gold.find(d); it != gold.end()) {
        for (const auto& v : it->second.get(f.name)) g.push_back(normalize_value(v, f.kind));
      }
      std::vector<bool> used(g.size(), false);
      for (const auto& v : p) {
        bool hit = false;
        for (std::size_t j = 0; j < g.size() && !hit; ++j) {
          if (!used[j] && g[j] == v) used[j] = hit = true;
        }
        if (hit) ++c.tp; else ++c.fp;
      }
      for (bool u : used) c.fn += u ? 0 : 1;
    }
    out[f.name] = c;
  }
  return out;
}

inline double f1_of(const Counts& c) {
  const double p = c.tp + c.fp == 0 ? 0.0 : double(c.tp) / double(c.tp + c.fp);
  const double r = c.tp + c.fn == 0 ? 0.0 : double(c.tp) / double(c.tp + c.fn);
  return p + r == 0 ? 0.0 : 2 * p * r / (p + r);
}

/// Random IE instance: up to `max_docs` docs, up to 3 fields, values drawn
/// from a 5-letter alphabet.
struct IeInstance {
  Ontology ontology;
  ParseMap pred, gold;
};

inline IeInstance random_ie_instance(std::mt19937_64& rng, std::size_t max_docs = 10) {
  IeInstance inst;
  const std::size_t nf = 1 + rng() % 3;
  for (std::size_t f = 0; f < nf; ++f) {
    inst.ontology.fields.push_back({"F" + std::to_string(f), FieldKind::kCategorical, true, ""});
  }
  const char* alphabet[] = {"a", "b", "c", "d", "e"};
  auto random_parse = [&] {
    Parse p;
    for (const auto& f : inst.ontology.fields) {
      const std::size_t nv = rng() % 4;
      for (std::size_t i = 0; i < nv; ++i) p.values[f.name].push_back(alphabet[rng() % 5]);
    }
    return p;
  };
  const std::size_t nd = 1 + rng() % max_docs;
  for (std::size_t d = 0; d < nd; ++d) {
    const std::string id = "d" + std::to_string(d);
    if (rng() % 6 != 0) inst.pred[id] = random_parse();
    if (rng() % 6 != 0) inst.gold[id] = random_parse();
  }
  return inst;
}

/// Random corpus of space-separated words from a small vocabulary.
inline std::vector<Document> random_word_corpus(std::mt19937_64& rng, std::size_t n_docs) {
  static const char* kVocab[] = {"drunk", "driving", "fine", "court", "bac", "license",
                                 "truck", "car", "prison", "appeal", "fraud", "theft"};
  std::vector<Document> docs;
  for (std::size_t i = 0; i < n_docs; ++i) {
    Document d;
    char id[32];
    std::snprintf(id, sizeof(id), "r%04zu", i);
    d.doc_id = id;
    const std::size_t len = 1 + rng() % 30;
    for (std::size_t w = 0; w < len; ++w) {
      if (w) d.body += ' ';
      // Skewed draw so document frequencies vary.
      const std::size_t a = rng() % 12, c = rng() % 12;
      d.body += kVocab[std::min(a, c)];
    }
    d.meta["case_type"] = rng() % 3 == 0 ? "fraud" : "drunk driving";
    docs.push_back(std::move(d));
  }
  return docs;
}

}  // namespace lexstat::testing

#endif  // LEXSTAT_TESTS_ORACLES_HPP_
