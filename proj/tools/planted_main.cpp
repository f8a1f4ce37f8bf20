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


// Writes the synthetic planted-field corpus and its companions:
// corpus.jsonl, gold.jsonl, ontology.json, mock_rules.json, rules.json.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "lexstat/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate the planted-field fixture corpus", "lexstat-planted"};
  std::size_t n = 200;
  std::uint64_t seed = 7;
  std::string out_dir;
  app.add_option("out_dir", out_dir)->required();
  app.add_option("-n,--docs", n, "Number of documents");
  app.add_option("--seed", seed);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  namespace fs = std::filesystem;
  const auto pc = lexstat::make_planted_corpus(n, seed);
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  std::ofstream(dir / "corpus.jsonl") << pc.to_jsonl();
  std::ofstream(dir / "gold.jsonl") << pc.gold_jsonl();
  std::ofstream(dir / "ontology.json") << lexstat::Json(pc.ontology).dump(2) << '\n';
  std::ofstream(dir / "mock_rules.json") << pc.mock_rules.dump(2) << '\n';
  std::ofstream(dir / "rules.json") << lexstat::Json{{"rules", pc.pattern_rules}}.dump(2) << '\n';
  std::cout << "wrote " << n << " documents to " << out_dir << '\n';
  return 0;
}
