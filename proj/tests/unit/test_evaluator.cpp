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

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

#include "lexstat/error.hpp"
#include "lexstat/evaluator.hpp"
#include "oracles.hpp"

using namespace lexstat;
using namespace lexstat::testing;

namespace {

Parse parse_of(std::initializer_list<std::pair<const char*, std::vector<std::string>>> items) {
  Parse p;
  for (const auto& [k, v] : items) p.values[k] = v;
  return p;
}

Ontology one_field(const char* name, FieldKind kind = FieldKind::kCategorical) {
  Ontology o;
  o.fields.push_back({name, kind, true, ""});
  return o;
}

}  // namespace

TEST_SUITE("evaluator") {
  TEST_CASE("normalization by kind") {
    CHECK(normalize_value("5,000,000 won", FieldKind::kMoney) == "5000000");
    CHECK(normalize_value("₩3,000,000", FieldKind::kMoney) == "3000000");
    CHECK(normalize_value("2 years", FieldKind::kDuration) == "24");
    CHECK(normalize_value("1 year 6 months", FieldKind::kDuration) == "18");
    CHECK(normalize_value("45 days", FieldKind::kDuration) == "45d");
    CHECK(normalize_value("0.120%", FieldKind::kNumeric) == "0.12%");
    CHECK(normalize_value(" 12.0 km ", FieldKind::kNumeric) == "12km");
    CHECK(normalize_value("  Drunk   Driving ", FieldKind::kCategorical) == "drunk driving");
    const auto unknown = normalize("about a while", FieldKind::kDuration);
    CHECK(unknown.flagged);
    CHECK(unknown.value == "about a while");
  }

  TEST_CASE("property: normalization is idempotent") {
    const char* samples[] = {"5,000,000 won", "2 years", "45 days", "0.120%", "1.50 km", "  A  b ",
                             "3 months 10 days", "징역 2년", "벌금 500만원", "x", "", "007", "-1.0"};
    for (auto kind : {FieldKind::kMoney, FieldKind::kDuration, FieldKind::kNumeric,
                      FieldKind::kCategorical, FieldKind::kFreeText, FieldKind::kLabelSet}) {
      for (const char* s : samples) {
        const auto once = normalize_value(s, kind);
        CHECK_MESSAGE(normalize_value(once, kind) == once, s << " / " << to_string(kind));
      }
    }
  }

  TEST_CASE("hand example: one hit, one miss on each side") {
    const auto o = one_field("F");
    ParseMap pred{{"d", parse_of({{"F", {"a", "b"}}})}};
    ParseMap gold{{"d", parse_of({{"F", {"a", "c"}}})}};
    const auto r = field_f1_report(pred, gold, o);
    const auto& s = r.field("F");
    CHECK(s.tp == 1);
    CHECK(s.fp == 1);
    CHECK(s.fn == 1);
    CHECK(s.precision == doctest::Approx(0.5));
    CHECK(s.recall == doctest::Approx(0.5));
    CHECK(s.f1 == doctest::Approx(0.5));
    CHECK(r.average_f1 == doctest::Approx(0.5));
  }

  TEST_CASE("duplicates count as a multiset") {
    const auto o = one_field("F");
    ParseMap pred{{"d", parse_of({{"F", {"a", "a", "a"}}})}};
    ParseMap gold{{"d", parse_of({{"F", {"a", "a"}}})}};
    const auto& s = field_f1_report(pred, gold, o).field("F");
    CHECK(s.tp == 2);
    CHECK(s.fp == 1);
    CHECK(s.fn == 0);
  }

  TEST_CASE("empty sides and excluded fields") {
    Ontology o = one_field("A");
    o.fields.push_back({"B", FieldKind::kCategorical, true, ""});
    ParseMap pred{{"d1", parse_of({{"A", {"x"}}})}};
    ParseMap gold{{"d2", parse_of({{"A", {"x"}}, {"B", {"y"}}})}};
    const auto r = field_f1_report(pred, gold, o);
    CHECK(r.documents == 2);
    CHECK(r.field("A").fp == 1);
    CHECK(r.field("A").fn == 1);
    CHECK(r.field("A").f1 == 0.0);
    CHECK(r.field("B").precision == 0.0);
    const auto ex = field_f1_report(pred, pred, o, {"B"});
    CHECK(ex.average_f1 == doctest::Approx(1.0));
    CHECK(ex.excluded_fields == std::vector<std::string>{"B"});
    CHECK_THROWS_AS(field_f1_report({{"d", parse_of({{"Z", {"x"}}})}}, {}, o), Error);
  }

  TEST_CASE("normalized values match across surface forms") {
    const auto o = one_field("Fine", FieldKind::kMoney);
    ParseMap pred{{"d", parse_of({{"Fine", {"5,000,000 won"}}})}};
    ParseMap gold{{"d", parse_of({{"Fine", {"5000000"}}})}};
    CHECK(field_f1_report(pred, gold, o).field("Fine").f1 == doctest::Approx(1.0));
  }

  TEST_CASE("oracle: explicit matching on random instances") {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 300; ++trial) {
      const auto inst = random_ie_instance(rng);
      const auto r = field_f1_report(inst.pred, inst.gold, inst.ontology);
      const auto want = brute_force_counts(inst.pred, inst.gold, inst.ontology);
      double sum = 0;
      for (const auto& f : inst.ontology.fields) {
        const auto& got = r.field(f.name);
        const auto& w = want.at(f.name);
        CHECK(got.tp == w.tp);
        CHECK(got.fp == w.fp);
        CHECK(got.fn == w.fn);
        CHECK(got.f1 == doctest::Approx(f1_of(w)).epsilon(1e-12));
        sum += f1_of(w);
      }
      CHECK(r.average_f1 == doctest::Approx(sum / inst.ontology.fields.size()).epsilon(1e-12));
    }
  }

  TEST_CASE("property: swapping pred and gold swaps P and R, keeps F1") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 200; ++trial) {
      const auto inst = random_ie_instance(rng);
      const auto a = field_f1_report(inst.pred, inst.gold, inst.ontology);
      const auto b = field_f1_report(inst.gold, inst.pred, inst.ontology);
      for (const auto& f : inst.ontology.fields) {
        CHECK(a.field(f.name).precision == doctest::Approx(b.field(f.name).recall));
        CHECK(a.field(f.name).f1 == doctest::Approx(b.field(f.name).f1));
      }
    }
  }

  TEST_CASE("property: adding a correct prediction never lowers TP or recall") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
      auto inst = random_ie_instance(rng);
      if (inst.gold.empty()) continue;
      const auto before = field_f1_report(inst.pred, inst.gold, inst.ontology);
      auto it = inst.gold.begin();
      std::advance(it, static_cast<long>(rng() % inst.gold.size()));
      const auto& field = inst.ontology.fields[rng() % inst.ontology.fields.size()].name;
      const auto& gold_vals = it->second.get(field);
      if (gold_vals.empty()) continue;
      inst.pred[it->first].values[field].push_back(gold_vals[0]);
      const auto after = field_f1_report(inst.pred, inst.gold, inst.ontology);
      CHECK(after.field(field).tp >= before.field(field).tp);
      CHECK(after.field(field).recall >= before.field(field).recall - 1e-12);
    }
  }

  TEST_CASE("classification hand example") {
    LabelSetMap pred{{"d1", {"x"}}, {"d2", {"y"}}};
    LabelSetMap gold{{"d1", {"x"}}, {"d2", {"z"}}};
    const auto r = classification_report(pred, gold);
    CHECK(r.micro_precision == doctest::Approx(0.5));
    CHECK(r.micro_recall == doctest::Approx(0.5));
    CHECK(r.micro_f1 == doctest::Approx(0.5));
    CHECK(r.macro_f1 == doctest::Approx(1.0 / 3.0));
    CHECK(r.per_label.size() == 3);
    CHECK(r.per_label.at("y").fp == 1);
    CHECK(r.per_label.at("z").fn == 1);
  }

  TEST_CASE("property: classification is invariant to document order and renaming") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 100; ++trial) {
      LabelSetMap pred, gold;
      const std::size_t n = 1 + rng() % 12;
      for (std::size_t d = 0; d < n; ++d) {
        for (int l = 0; l < 4; ++l) {
          if (rng() % 2) pred["d" + std::to_string(d)].insert("L" + std::to_string(l));
          if (rng() % 2) gold["d" + std::to_string(d)].insert("L" + std::to_string(l));
        }
      }
      const auto a = classification_report(pred, gold);
      // Renaming docs through a permutation changes map order only.
      std::vector<std::size_t> perm(n);
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      LabelSetMap p2, g2;
      for (std::size_t d = 0; d < n; ++d) {
        const auto from = "d" + std::to_string(d), to = "z" + std::to_string(perm[d]);
        if (pred.count(from)) p2[to] = pred[from];
        if (gold.count(from)) g2[to] = gold[from];
      }
      const auto b = classification_report(p2, g2);
      CHECK(a.micro_f1 == doctest::Approx(b.micro_f1));
      CHECK(a.macro_f1 == doctest::Approx(b.macro_f1));
    }
  }

  TEST_CASE("JSONL loading accepts the three shapes, later lines win") {
    std::istringstream in(R"({"doc_id":"a","parse":{"F":["1"]}}
{"doc_id":"b","target":{"F":["2"]}}
{"doc_id":"c","values":{"F":["3"]}}
{"doc_id":"a","parse":{"F":["9"]}}
)");
    const auto m = load_parses_jsonl(in);
    REQUIRE(m.size() == 3);
    CHECK(m.at("a").get("F") == std::vector<std::string>{"9"});
    CHECK(m.at("c").get("F") == std::vector<std::string>{"3"});
    const auto o = infer_ontology({&m});
    CHECK(o.field_names() == std::vector<std::string>{"F"});
  }

  TEST_CASE("report serializes to JSON and CSV") {
    const auto o = one_field("F");
    ParseMap p{{"d", parse_of({{"F", {"a"}}})}};
    const auto r = field_f1_report(p, p, o);
    const Json j = r;
    CHECK(j["average_f1"] == 1.0);
    std::ostringstream csv;
    write_csv(csv, r);
    CHECK(csv.str().rfind("field,", 0) == 0);
    CHECK(csv.str().find("\nF,") != std::string::npos);
  }
}
