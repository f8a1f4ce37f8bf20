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


#include "lexstat/synthetic.hpp"

#include <cstdio>
#include <random>

#include "lexstat/auto_labeler.hpp"

namespace lexstat {

namespace {

const char* const kVehicles[] = {"car", "truck", "motorcycle", "van", "bus", "scooter"};
const char* const kCourts[] = {"Seoul Central", "Busan", "Daegu", "Incheon"};
const char* const kFiller[] = {
    "The prosecution presented testimony from the arresting officers.",
    "The defendant admitted the facts and expressed remorse.",
    "A breath test was administered at the scene.",
    "The court considered the circumstances of the offense.",
    "No injuries were reported by the police.",
    "The defendant had been drinking with colleagues earlier that evening.",
    "Witnesses described erratic driving on the main road.",
};

struct Template {
  // Placeholders: Vehicle, Dist, BAC, Imp, Fine; then Susp in `susp`.
  const char* head;
  const char* susp;
  const char* pattern;  // mock rule regex; groups 1..6 = Vehicle Dist BAC Imp Fine Susp
};

std::string fmt(const char* f, const std::vector<std::string>& args) {
  std::string out;
  std::size_t a = 0;
  for (const char* p = f; *p != '\0'; ++p) {
    if (p[0] == '{' && p[1] == '}') {
      out += args.at(a++);
      ++p;
    } else {
      out.push_back(*p);
    }
  }
  return out;
}

}  // namespace

Ontology planted_ontology() {
  Ontology o;
  o.task_description = "Extract facts and sentencing details from drunk driving judgments.";
  o.fields = {
      {"BAC", FieldKind::kNumeric, false, "blood alcohol concentration"},
      {"Dist", FieldKind::kNumeric, false, "distance driven"},
      {"Vehicle", FieldKind::kCategorical, false, "type of vehicle"},
      {"Imp", FieldKind::kDuration, false, "imprisonment period"},
      {"Fine", FieldKind::kMoney, false, "fine amount"},
      {"Susp", FieldKind::kDuration, false, "execution suspension period"},
  };
  return o;
}

PlantedCorpus make_planted_corpus(std::size_t n_docs, std::uint64_t seed) {
  // Values: Vehicle (\w+), Dist ([0-9.]+k?m), BAC ([0-9.]+%), Imp ([0-9]+ months),
  // Fine ([0-9,]+ won), Susp ([0-9]+ years?).
  static const Template kTemplates[] = {
      {"The defendant drove a {} for about {} with a blood alcohol content of {}. The court "
       "sentenced the defendant to {} of imprisonment and a fine of {}.",
       " Execution was suspended for {}.",
       "drove a (\\w+) for about ([0-9.]+k?m) with a blood alcohol content of ([0-9.]+%)\\. The "
       "court sentenced the defendant to ([0-9]+ months) of imprisonment and a fine of ([0-9,]+ "
       "won)\\.(?: Execution was suspended for ([0-9]+ years?)\\.)?"},
      {"On the night in question the accused operated a {} over a distance of {} while "
       "intoxicated (BAC {}). Sentence: imprisonment of {}, fine {}.",
       " The sentence is suspended for {}.",
       "operated a (\\w+) over a distance of ([0-9.]+k?m) while intoxicated \\(BAC ([0-9.]+%)\\)\\. "
       "Sentence: imprisonment of ([0-9]+ months), fine ([0-9,]+ won)\\.(?: The sentence is "
       "suspended for ([0-9]+ years?)\\.)?"},
      {"Driving a {}, the defendant travelled {} at a blood alcohol level of {}. A penalty of "
       "{} of imprisonment and a fine of {} was imposed.",
       " Suspended for {}.",
       "Driving a (\\w+), the defendant travelled ([0-9.]+k?m) at a blood alcohol level of "
       "([0-9.]+%)\\. A penalty of ([0-9]+ months) of imprisonment and a fine of ([0-9,]+ won) was "
       "imposed\\.(?: Suspended for ([0-9]+ years?)\\.)?"},
  };

  PlantedCorpus pc;
  pc.ontology = planted_ontology();
  std::mt19937_64 rng(seed);
  auto pick = [&](std::size_t n) { return uniform_index(rng, n); };

  for (std::size_t i = 0; i < n_docs; ++i) {
    const auto& t = kTemplates[i % 3];
    char buf[64];
    const std::string vehicle = kVehicles[pick(std::size(kVehicles))];
    std::string dist;
    if (pick(4) == 0) {
      std::snprintf(buf, sizeof(buf), "%zu.%zukm", 1 + pick(9), pick(10));
    } else {
      std::snprintf(buf, sizeof(buf), "%zum", 50 * (1 + pick(40)));
    }
    dist = buf;
    std::snprintf(buf, sizeof(buf), "0.%03zu%%", 30 + pick(220));
    const std::string bac = buf;
    const std::string imp = std::to_string(4 + pick(21)) + " months";
    const std::string fine = std::to_string(1 + pick(20)) + ",000,000 won";
    const bool has_susp = i % 2 == 0;
    const std::size_t years = 1 + pick(3);
    const std::string susp = std::to_string(years) + (years == 1 ? " year" : " years");

    std::string body;
    const std::size_t before = pick(3);
    const std::size_t after = pick(3);
    for (std::size_t k = 0; k < before; ++k) body += std::string(kFiller[pick(std::size(kFiller))]) + " ";
    body += fmt(t.head, {vehicle, dist, bac, imp, fine});
    if (has_susp) body += fmt(t.susp, {susp});
    for (std::size_t k = 0; k < after; ++k) body += " " + std::string(kFiller[pick(std::size(kFiller))]);

    std::snprintf(buf, sizeof(buf), "d%04zu", i);
    Document d;
    d.doc_id = buf;
    d.body = body;
    d.meta = {{"case_type", "drunk driving"},
              {"court", kCourts[pick(std::size(kCourts))]},
              {"year", std::to_string(2018 + pick(6))}};
    pc.docs.push_back(d);

    Parse p;
    p.values["BAC"] = {bac};
    p.values["Dist"] = {dist};
    p.values["Vehicle"] = {vehicle};
    p.values["Imp"] = {imp};
    p.values["Fine"] = {fine};
    p.values["Susp"] = has_susp ? std::vector<std::string>{susp} : std::vector<std::string>{};
    p.canonicalize(pc.ontology);
    pc.gold.emplace(d.doc_id, std::move(p));
  }

  Json rules = Json::array();
  for (const auto& t : kTemplates) {
    rules.push_back({{"pattern", t.pattern},
                     {"content",
                      "{\"BAC\": [\"$3\"], \"Dist\": [\"$2\"], \"Vehicle\": [\"$1\"], \"Imp\": "
                      "[\"$4\"], \"Fine\": [\"$5\"], \"Susp\": [\"$6\"]}"}});
  }
  pc.mock_rules = Json{{"rules", std::move(rules)}, {"fallback", {{"content", "{}"}}}};

  pc.pattern_rules = {
      {"BAC", "[0-9.]+%", 0},
      {"Dist", "([0-9.]+k?m)\\b", 1},
      {"Vehicle", "(?:drove a|operated a|Driving a) (\\w+)", 1},
      {"Imp", "[0-9]+ months", 0},
      {"Fine", "[0-9,]+ won", 0},
      {"Susp", "[0-9]+ years?", 0},
  };
  return pc;
}

std::string PlantedCorpus::to_jsonl() const {
  std::string out;
  for (const auto& d : docs) {
    out += Json{{"doc_id", d.doc_id}, {"body", d.body}, {"meta", d.meta}}.dump() + '\n';
  }
  return out;
}

std::string PlantedCorpus::gold_jsonl() const {
  std::string out;
  for (const auto& [id, p] : gold) {
    out += Json{{"doc_id", id}, {"provenance", "human"}, {"parse", p}}.dump() + '\n';
  }
  return out;
}

}  // namespace lexstat
