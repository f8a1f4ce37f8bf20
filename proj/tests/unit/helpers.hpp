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


#ifndef LEXSTAT_TESTS_HELPERS_HPP_
#define LEXSTAT_TESTS_HELPERS_HPP_

#include <stdlib.h>

#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include "lexstat/corpus_store.hpp"
#include "lexstat/llm_gateway.hpp"
#include "lexstat/synthetic.hpp"

namespace lexstat::testing {

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "lexstat-test-XXXXXX").string();
    if (::mkdtemp(tmpl.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& p) const { return path_ / p; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& p, const std::string& s) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream(p, std::ios::trunc) << s;
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Planted corpus ingested as corpus "c", its ontology set and the first
/// `n_seeds` documents labeled by hand.
inline PlantedCorpus seed_planted(CorpusStore& store, std::size_t n_docs, std::size_t n_seeds,
                                  std::uint64_t seed = 7) {
  auto pc = make_planted_corpus(n_docs, seed);
  std::istringstream in(pc.to_jsonl());
  store.ingest_corpus(in, "c");
  pc.ontology = store.set_ontology("c", pc.ontology);
  std::size_t i = 0;
  for (const auto& [id, p] : pc.gold) {
    if (i++ >= n_seeds) break;
    store.upsert_label("c", id, p, Provenance::kHuman, "annotator-1");
  }
  return pc;
}

inline std::shared_ptr<MockBackend> planted_mock(const PlantedCorpus& pc) {
  return std::make_shared<MockBackend>(pc.mock_rules);
}

/// Mock rule table that routes plain-English analysis requests to tools.
inline Json chat_routing_rules() {
  return Json::parse(R"json({"rules": [
    {"pattern": "rejected: aggregate", "requires_tools": true,
     "tool_call": {"name": "aggregate", "arguments": {"target": "Fine", "stat": "mean"}}},
    {"pattern": "explode", "requires_tools": true,
     "tool_call": {"name": "explode", "arguments": {}}},
    {"pattern": "wrong args", "requires_tools": true,
     "tool_call": {"name": "aggregate", "arguments": {"target": "Fine", "stat": "average"}}},
    {"pattern": "(count|mean|median|sum|min|max) of (\\w+) by (\\w+)", "requires_tools": true,
     "tool_call": {"name": "aggregate", "arguments": {"target": "$2", "stat": "$1", "group_by": "$3"}}},
    {"pattern": "(count|mean|median|sum|min|max) of (\\w+)", "requires_tools": true,
     "tool_call": {"name": "aggregate", "arguments": {"target": "$2", "stat": "$1"}}},
    {"pattern": "histogram of (\\w+)", "requires_tools": true,
     "tool_call": {"name": "histogram", "arguments": {"field": "$1", "bins": 4}}},
    {"pattern": "show document (\\w+)", "requires_tools": true,
     "tool_call": {"name": "get_document", "arguments": {"doc_id": "$1"}}},
    {"pattern": "documents where (\\w+) is (\\w+)", "requires_tools": true,
     "tool_call": {"name": "filter", "arguments": {"where": [{"field": "$1", "op": "eq", "value": "$2"}]}}},
    {"pattern": "search for (.+)", "requires_tools": true,
     "tool_call": {"name": "search_corpus", "arguments": {"terms": ["$1"], "top_k": 5}}}],
   "fallback": {"content": "I can only answer questions about the table."}})json");
}

inline std::filesystem::path stub_shim() { return LEXSTAT_STUB_SHIM; }

}  // namespace lexstat::testing

#endif  // LEXSTAT_TESTS_HELPERS_HPP_
