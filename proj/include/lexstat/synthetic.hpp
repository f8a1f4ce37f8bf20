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


// Synthetic drunk-driving style corpus with planted field values. Used as
// the offline end-to-end fixture: the gold parses are known, a mock rule
// table reproduces them as "LLM" labels, and a pattern table extracts them.

#ifndef LEXSTAT_SYNTHETIC_HPP_
#define LEXSTAT_SYNTHETIC_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lexstat/ie_engine.hpp"
#include "lexstat/types.hpp"

namespace lexstat {

struct PlantedCorpus {
  Ontology ontology;  // BAC, Dist, Vehicle, Imp, Fine, Susp
  std::vector<Document> docs;           // sorted by doc_id
  std::map<std::string, Parse> gold;    // surface values as planted
  Json mock_rules;                      // MockBackend table answering the IE prompt
  std::vector<PatternRule> pattern_rules;

  std::string to_jsonl() const;
  /// labels-export JSONL of the gold parses (provenance human).
  std::string gold_jsonl() const;
};

/// Deterministic in `seed`. Doc ids are "d0000", "d0001", ...; document i
/// uses sentence template i % 3 and carries a Susp value when i % 2 == 0.
PlantedCorpus make_planted_corpus(std::size_t n_docs, std::uint64_t seed = 7);

Ontology planted_ontology();

}  // namespace lexstat

#endif  // LEXSTAT_SYNTHETIC_HPP_
