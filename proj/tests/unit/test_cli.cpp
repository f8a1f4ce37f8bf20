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

#include <sys/wait.h>

#include <cstdio>
#include <sstream>

#include "helpers.hpp"
#include "lexstat/cli.hpp"
#include "lexstat/service.hpp"

using namespace lexstat;
using namespace lexstat::testing;

namespace {

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

CliResult run(std::vector<std::string> args) {
  args.insert(args.begin(), "lexstat");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  CliResult r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string trimmed(std::string s) {
  while (!s.empty() && s.back() == '\n') s.pop_back();
  return s;
}

struct Fixture {
  TempDir tmp;
  PlantedCorpus pc = make_planted_corpus(40);
  std::string data, corpus, gold, onto, mock, rules;
  Fixture() {
    data = (tmp / "data").string();
    corpus = (tmp / "corpus.jsonl").string();
    gold = (tmp / "gold.jsonl").string();
    onto = (tmp / "ontology.json").string();
    mock = (tmp / "mock.json").string();
    rules = (tmp / "rules.json").string();
    write_text(corpus, pc.to_jsonl());
    write_text(gold, pc.gold_jsonl());
    write_text(onto, Json(pc.ontology).dump());
    write_text(mock, pc.mock_rules.dump());
    write_text(rules, Json{{"rules", pc.pattern_rules}}.dump());
  }
  std::vector<std::string> base() const {
    return {"--data-dir", data, "--llm-backend", "mock", "--mock-rules", mock, "--shim", stub_shim().string()};
  }
  CliResult cmd(std::vector<std::string> args) const {
    auto all = base();
    all.insert(all.end(), args.begin(), args.end());
    return run(all);
  }
};

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("usage errors exit 2, help exits 0") {
    CHECK(run({}).code == 2);
    CHECK(run({"frobnicate"}).code == 2);
    CHECK(run({"cost", "curve", "--grid"}).code == 2);
    const auto help = run({"--help"});
    CHECK(help.code == 0);
    CHECK(help.out.find("ingest") != std::string::npos);
  }

  TEST_CASE("cost curve --json matches the request handler") {
    const auto r = run({"cost", "curve", "--grid", "1e3,1e4,1e5,1e6", "--json"});
    REQUIRE(r.code == 0);
    const auto j = Json::parse(r.out);
    CHECK(j["rows"].size() == 12);
    CHECK(j["crossovers"].size() == 2);
    CHECK(trimmed(r.out) == cost_curve_request({{"grid", "1e3,1e4,1e5,1e6"}}, ServiceConfig{}).dump());
    TempDir tmp;
    const std::string csv_path = (tmp / "curve.csv").string();
    const auto text = run({"cost", "curve", "--grid", "1e3", "--csv", csv_path});
    CHECK(text.code == 0);
    CHECK(text.out.rfind("plan,N,total_usd", 0) == 0);
    CHECK(read_text(csv_path).rfind("plan,N,total_usd", 0) == 0);
  }

  TEST_CASE("eval of a file against itself scores 1") {
    Fixture fx;
    const auto r = run({"eval", "--pred", fx.gold, "--gold", fx.gold, "--ontology", fx.onto, "--json"});
    REQUIRE(r.code == 0);
    CHECK(Json::parse(r.out)["average_f1"] == 1.0);
    const auto text = run({"eval", "--pred", fx.gold, "--gold", fx.gold});
    CHECK(text.code == 0);
    CHECK(text.out.find("1.0000") != std::string::npos);
  }

  TEST_CASE("library errors exit 1 with the error on stderr and JSON on stdout") {
    Fixture fx;
    const auto r = fx.cmd({"ontology", "show", "nope", "--json"});
    CHECK(r.code == 1);
    CHECK(r.err.find("not_found") != std::string::npos);
    CHECK(Json::parse(r.out)["code"] == "not_found");
  }

  TEST_CASE("headless workflow: ingest, label, augment, train, extract, eval") {
    Fixture fx;
    REQUIRE(fx.cmd({"ingest", fx.corpus, "--corpus-id", "c"}).code == 0);
    REQUIRE(fx.cmd({"ontology", "set", "c", fx.onto}).code == 0);
    std::string seeds;
    std::istringstream gold(fx.pc.gold_jsonl());
    for (int i = 0; i < 4; ++i) {
      std::string line;
      std::getline(gold, line);
      seeds += line + "\n";
    }
    write_text(fx.tmp / "seeds.jsonl", seeds);
    REQUIRE(fx.cmd({"label", "import", "c", (fx.tmp / "seeds.jsonl").string()}).code == 0);

    auto aug = fx.cmd({"augment", "c", "--n-target", "12", "--json"});
    REQUIRE(aug.code == 0);
    const auto aj = Json::parse(aug.out);
    CHECK(aj["state"] == "done");
    const std::string ds = aj["result"]["dataset_id"];

    auto tr = fx.cmd({"train", ds, "--epochs", "3", "--json"});
    REQUIRE(tr.code == 0);
    const auto tj = Json::parse(tr.out);
    CHECK(tj["state"] == "done");

    auto ex = fx.cmd({"extract", "c", "--kind", "distilled", "--model-ref", tj["job_id"], "--json"});
    REQUIRE(ex.code == 0);
    const std::string table = Json::parse(ex.out)["result"]["table_id"];

    auto ev = fx.cmd({"eval", "--pred-table", table, "--gold", fx.gold, "--json"});
    REQUIRE(ev.code == 0);
    CHECK(Json::parse(ev.out)["average_f1"] == doctest::Approx(1.0));

    auto an = fx.cmd({"analyze", "c", "--table", table, "--tool", "histogram", "--args",
                      R"({"field":"BAC","bins":3})", "--json"});
    REQUIRE(an.code == 0);
    CHECK(Json::parse(an.out)["result"]["n"] == 40);

    auto pat = fx.cmd({"extract", "c", "--rules", fx.rules, "--json"});
    REQUIRE(pat.code == 0);

    auto jobs = fx.cmd({"jobs", "--json"});
    CHECK(Json::parse(jobs.out).size() == 4);
  }

  TEST_CASE("parity: CLI JSON equals the service result") {
    Fixture fx;
    REQUIRE(fx.cmd({"ingest", fx.corpus, "--corpus-id", "c"}).code == 0);
    REQUIRE(fx.cmd({"ontology", "set", "c", fx.onto}).code == 0);
    const auto search = fx.cmd({"search", "c", "--terms", "BAC,won", "--top-k", "4", "--json"});
    const auto tools = fx.cmd({"tools", "--json"});
    const auto show = fx.cmd({"ontology", "show", "c", "--json"});
    ServiceConfig cfg;
    cfg.data_dir = fx.data;
    cfg.llm_backend = "mock";
    Service svc(cfg);
    CHECK(trimmed(search.out) == svc.search("c", {{"terms", {"BAC", "won"}}, {"top_k", 4}}).dump());
    CHECK(trimmed(tools.out) == svc.tools().dump());
    CHECK(trimmed(show.out) == svc.get_ontology("c").dump());
  }

  TEST_CASE("installed binary: exit codes") {
    const std::string bin = LEXSTAT_CLI;
    auto status = [](const std::string& cmd) {
      const int s = std::system((cmd + " >/dev/null 2>&1").c_str());
      return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
    };
    CHECK(status(bin + " --help") == 0);
    CHECK(status(bin + " nosuchcommand") == 2);
    CHECK(status(bin + " --data-dir /tmp/lexstat-cli-none ontology show nope") == 1);
    CHECK(status(bin + " cost curve --grid 1e3 --json") == 0);
  }
}
