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


#include <doctest.h>

#include <random>
#include <set>

#include "helpers.hpp"
#include "lexstat/auto_labeler.hpp"
#include "lexstat/error.hpp"
#include "lexstat/llm_gateway.hpp"

using namespace lexstat;
using namespace lexstat::testing;

namespace {

std::string regex_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (std::string_view("\\^$.|?*+()[]{}").find(c) != std::string_view::npos) out += '\\';
    out += c;
  }
  return out;
}

/// Planted mock with one extra leading rule answering garbage for `doc`.
std::shared_ptr<MockBackend> mock_poisoning(const PlantedCorpus& pc, const Document& doc) {
  Json table = pc.mock_rules;
  Json rules = Json::array();
  rules.push_back({{"pattern", regex_escape(doc.body)},
                   {"content", "I cannot help with that."}});
  for (const auto& r : table["rules"]) rules.push_back(r);
  table["rules"] = rules;
  return std::make_shared<MockBackend>(table);
}

LabeledExample seed(const std::string& id, std::vector<std::string> fields) {
  LabeledExample e;
  e.doc_id = id;
  for (auto& f : fields) e.parse.values[f] = {"v"};
  return e;
}

std::vector<std::string> all_ids(const CorpusStore& store) {
  std::vector<std::string> ids;
  for (const auto& d : store.documents("c")) ids.push_back(d.doc_id);
  return ids;
}

Ontology abc() {
  Ontology o;
  for (const char* n : {"A", "B", "C"}) o.fields.push_back({n, FieldKind::kCategorical, true, ""});
  return o;
}

AugmentationConfig target(std::size_t n) {
  AugmentationConfig c;
  c.n_target = n;
  return c;
}

}  // namespace

TEST_SUITE("auto_labeler") {
  TEST_CASE("selection: half the shots cover every field") {
    std::vector<LabeledExample> seeds = {seed("c1", {"A", "B", "C"}), seed("c2", {"A", "B", "C"}),
                                         seed("c3", {"A", "B", "C"}), seed("p1", {"A"}),
                                         seed("p2", {"B"}),           seed("p3", {})};
    std::mt19937_64 rng(1);
    const auto s = select_fewshot_examples(seeds, abc(), 4, rng);
    CHECK(s.shots.size() == 4);
    CHECK(s.complete_selected == 2);
    CHECK_FALSE(s.zero_coverage);
    CHECK(s.shots[0].doc_id[0] == 'c');
    CHECK(s.shots[1].doc_id[0] == 'c');
    CHECK(s.shots[2].doc_id[0] == 'p');

    const auto odd = select_fewshot_examples(seeds, abc(), 3, rng);
    CHECK(odd.complete_selected == 2);
  }

  TEST_CASE("selection: complete seeds fill in when partial ones run out") {
    std::vector<LabeledExample> seeds = {seed("c1", {"A", "B", "C"}), seed("c2", {"A", "B", "C"}),
                                         seed("c3", {"A", "B", "C"}), seed("p1", {"A"})};
    std::mt19937_64 rng(2);
    const auto s = select_fewshot_examples(seeds, abc(), 4, rng);
    CHECK(s.complete_selected == 3);
    CHECK(s.shots.size() == 4);
  }

  TEST_CASE("selection: zero coverage is reported") {
    std::vector<LabeledExample> seeds = {seed("p1", {"A"}), seed("p2", {"B"})};
    std::mt19937_64 rng(3);
    const auto s = select_fewshot_examples(seeds, abc(), 2, rng);
    CHECK(s.zero_coverage);
    CHECK(s.complete_selected == 0);
    CHECK(s.shots.size() == 2);
    CHECK_THROWS_AS(select_fewshot_examples(seeds, abc(), 3, rng), Error);
    CHECK_THROWS_AS(select_fewshot_examples(seeds, abc(), 0, rng), Error);
  }

  TEST_CASE("property: selection size, distinctness and coverage quota") {
    std::mt19937_64 gen(99);
    for (int trial = 0; trial < 500; ++trial) {
      const std::size_t n = 1 + gen() % 12;
      std::vector<LabeledExample> seeds;
      std::size_t n_complete = 0;
      for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::string> f;
        for (const char* name : {"A", "B", "C"}) {
          if (gen() % 3 != 0) f.push_back(name);
        }
        n_complete += f.size() == 3 ? 1 : 0;
        seeds.push_back(seed("s" + std::to_string(i), f));
      }
      const std::size_t k = 1 + gen() % n;
      std::mt19937_64 rng(gen());
      const auto s = select_fewshot_examples(seeds, abc(), k, rng);
      REQUIRE(s.shots.size() == k);
      std::set<std::string> ids;
      std::size_t complete = 0;
      for (const auto& e : s.shots) {
        ids.insert(e.doc_id);
        complete += e.parse.get("A").size() && e.parse.get("B").size() && e.parse.get("C").size();
      }
      CHECK(ids.size() == k);
      const std::size_t n_partial = n - n_complete;
      const std::size_t want = std::min(n_complete, std::max((k + 1) / 2, k > n_partial ? k - n_partial : 0));
      CHECK(complete == want);
      CHECK(s.complete_selected == want);
      CHECK(s.zero_coverage == (n_complete == 0));
    }
  }

  TEST_CASE("uniform_index stays in range and hits every slot") {
    std::mt19937_64 rng(4);
    std::set<std::size_t> seen;
    for (int i = 0; i < 2000; ++i) {
      const auto x = uniform_index(rng, 7);
      REQUIRE(x < 7);
      seen.insert(x);
    }
    CHECK(seen.size() == 7);
  }

  TEST_CASE("parsing LLM output: strict, repaired and coerced") {
    Ontology o;
    o.fields = {{"BAC", FieldKind::kNumeric, true, ""},
                {"Fine", FieldKind::kMoney, false, ""},
                {"Dist", FieldKind::kNumeric, true, ""}};
    const auto strict = parse_llm_output(R"({"BAC": ["0.12%"], "Fine": []})", o);
    CHECK_FALSE(strict.repaired);
    CHECK(strict.parse.get("BAC") == std::vector<std::string>{"0.12%"});

    const auto fenced = parse_llm_output("```json\n{\"BAC\": [\"0.1%\"]}\n```", o);
    CHECK(fenced.parse.get("BAC") == std::vector<std::string>{"0.1%"});

    const auto prose = parse_llm_output("Sure! Here it is: {'BAC': ['0.2%'], 'Dist': '3km'} Hope it helps", o);
    CHECK(prose.repaired);
    CHECK(prose.parse.get("BAC") == std::vector<std::string>{"0.2%"});
    CHECK(prose.parse.get("Dist") == std::vector<std::string>{"3km"});

    const auto bare = parse_llm_output("BAC: [0.15%], Dist: [1.2km, 2km]", o);
    CHECK(bare.repaired);
    CHECK(bare.parse.get("Dist") == std::vector<std::string>{"1.2km", "2km"});

    const auto coerced = parse_llm_output(R"({"bac": 0.1, "Fine": ["1 won", "2 won"], "Other": ["x"], "Dist": [null, "n/a"]})", o);
    CHECK(coerced.parse.get("BAC") == std::vector<std::string>{"0.1"});
    CHECK(coerced.parse.get("Fine") == std::vector<std::string>{"1 won"});
    CHECK(coerced.parse.get("Dist").empty());
    CHECK(coerced.warnings.size() == 2);
    CHECK_NOTHROW(validate_parse(coerced.parse, o));

    CHECK(parse_llm_output("{}", o).parse.empty());
    try {
      parse_llm_output("I cannot help with that.", o);
      FAIL("expected parse failure");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kParseFailure);
      CHECK(e.detail() == "I cannot help with that.");
    }
  }

  TEST_CASE("labeling stops at the candidate pool") {
    TempDir tmp;
    CorpusStore store(tmp.path());
    const auto pc = seed_planted(store, 10, 4);
    LlmGateway gw(planted_mock(pc));
    const auto ts = ensure_training_set(store, gw, "c", target(14));
    CHECK(ts.n_human == 4);
    CHECK(ts.n_llm == 6);
    CHECK(ts.size() == 10);
    CHECK(ts.shortfall);
    CHECK(store.labels("c", Provenance::kLlm).size() == 6);
  }

  TEST_CASE("an unrecoverable answer is discarded and counted") {
    TempDir tmp;
    CorpusStore store(tmp.path());
    const auto pc = seed_planted(store, 14, 4);
    LlmGateway gw(mock_poisoning(pc, pc.docs[7]));
    const auto candidates = all_ids(store);
    const auto res = label_documents(store, gw, "c", pc.ontology, target(14), candidates);
    CHECK(res.report.produced == 9);
    CHECK(res.report.invalid_discarded == 1);
    CHECK(res.report.requested == 10);
    CHECK(res.labels.size() == 9);
    // One re-prompt for the poisoned document.
    CHECK(res.report.llm_calls == 11);
    for (const auto& l : res.labels) CHECK(l.doc_id != pc.docs[7].doc_id);
  }

  TEST_CASE("a discarded answer is replaced from the remaining pool") {
    TempDir tmp;
    CorpusStore store(tmp.path());
    const auto pc = seed_planted(store, 30, 4);
    LlmGateway gw(mock_poisoning(pc, pc.docs[5]));
    const auto res = label_documents(store, gw, "c", pc.ontology, target(14), all_ids(store));
    CHECK(res.report.produced == 10);
    CHECK(res.report.invalid_discarded == 1);
  }

  TEST_CASE("enough human labels means no LLM calls") {
    TempDir tmp;
    CorpusStore store(tmp.path());
    const auto pc = seed_planted(store, 30, 20);
    LlmGateway gw(planted_mock(pc));
    auto ts = ensure_training_set(store, gw, "c", target(20));
    CHECK(ts.n_human == 20);
    CHECK(ts.n_llm == 0);
    CHECK_FALSE(ts.shortfall);
    CHECK(gw.backend_calls() == 0);
    ts = ensure_training_set(store, gw, "c", target(16));
    CHECK(ts.size() == 16);
    CHECK(ts.n_llm == 0);
    CHECK(gw.backend_calls() == 0);
    const auto lines = read_text(ts.train_file());
    CHECK(std::count(lines.begin(), lines.end(), '\n') == 16);
  }

  TEST_CASE("shortfall on a small corpus") {
    TempDir tmp;
    CorpusStore store(tmp.path());
    const auto pc = seed_planted(store, 50, 4);
    LlmGateway gw(planted_mock(pc));
    const auto ts = ensure_training_set(store, gw, "c", target(196));
    CHECK(ts.n_llm == 46);
    CHECK(ts.shortfall);
    const auto back = load_training_set(store, ts.dataset_id);
    CHECK(back.shortfall);
    CHECK(back.n_llm == 46);
  }

  TEST_CASE("four seeds grow to 196 and LLM labels match the planted values") {
    TempDir tmp;
    CorpusStore store(tmp.path());
    const auto pc = seed_planted(store, 200, 4);
    LlmGateway gw(planted_mock(pc));
    std::vector<std::size_t> progress;
    AugmentationConfig cfg = target(196);
    cfg.on_progress = [&](std::size_t done, std::size_t) { progress.push_back(done); };
    const auto ts = ensure_training_set(store, gw, "c", cfg);
    CHECK(ts.n_human == 4);
    CHECK(ts.n_llm == 192);
    CHECK_FALSE(ts.shortfall);
    CHECK(ts.report.llm_calls == 192);
    REQUIRE_FALSE(progress.empty());
    CHECK(progress.back() == 192);
    for (const auto& l : store.labels("c", Provenance::kLlm)) {
      CHECK(l.parse.equivalent(pc.gold.at(l.doc_id)));
      CHECK(l.labeler_meta == "gpt-3.5-turbo-16k-0613");
    }
    const Json manifest = Json::parse(read_text(ts.dir / "manifest.json"));
    CHECK(manifest["n_target"] == 196);
  }

  TEST_CASE("earlier LLM labels are reused") {
    TempDir tmp;
    CorpusStore store(tmp.path());
    const auto pc = seed_planted(store, 40, 4);
    LlmGateway gw(planted_mock(pc));
    ensure_training_set(store, gw, "c", target(16));
    const auto calls = gw.backend_calls();
    const auto again = ensure_training_set(store, gw, "c", target(16));
    CHECK(again.n_llm == 12);
    CHECK(gw.backend_calls() == calls);
    CHECK(again.dataset_id != "c-ds1");
  }

  TEST_CASE("same seed, same training set") {
    std::string first;
    for (int run = 0; run < 2; ++run) {
      TempDir tmp;
      CorpusStore store(tmp.path());
      const auto pc = seed_planted(store, 60, 6);
      LlmGateway gw(planted_mock(pc));
      AugmentationConfig cfg = target(30);
      cfg.seed = 42;
      const auto text = read_text(ensure_training_set(store, gw, "c", cfg).train_file());
      if (run == 0) first = text;
      else CHECK(text == first);
    }
  }

  TEST_CASE("no human seeds is a precondition failure") {
    TempDir tmp;
    CorpusStore store(tmp.path());
    const auto pc = seed_planted(store, 10, 0);
    LlmGateway gw(planted_mock(pc));
    try {
      ensure_training_set(store, gw, "c", target(8));
      FAIL("expected precondition");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kPrecondition);
    }
    CHECK(gw.backend_calls() == 0);
  }

  TEST_CASE("config validation and JSON") {
    AugmentationConfig c;
    c.n_target = 0;
    CHECK_THROWS_AS(c.validate(), Error);
    c = target(10);
    c.n_seed_shots = 8;
    const Json j = c;
    const auto back = j.get<AugmentationConfig>();
    CHECK(back.n_target == 10);
    CHECK(back.n_seed_shots == 8);
  }
}
