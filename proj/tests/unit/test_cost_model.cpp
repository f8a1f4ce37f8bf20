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
#include <sstream>

#include "helpers.hpp"
#include "lexstat/cost_model.hpp"
#include "lexstat/error.hpp"
#include "lexstat/llm_gateway.hpp"

using namespace lexstat;
using namespace lexstat::testing;

namespace {

const PipelinePlan& plan_named(const std::string& name) {
  for (const auto& p : default_plans()) {
    if (p.name == name) return p;
  }
  throw std::runtime_error("no plan " + name);
}

// Hand-written affine formulas over the shipped constants, read straight
// from the JSON files.
struct HandModel {
  Json pricing, plans;
  HandModel() {
    pricing = Json::parse(read_text(std::filesystem::path(LEXSTAT_SOURCE_DIR) / "data/pricing.default.json"));
    plans = Json::parse(read_text(std::filesystem::path(LEXSTAT_SOURCE_DIR) / "data/plans.default.json"));
  }
  const Json& plan(const std::string& name) const {
    for (const auto& p : plans["plans"]) {
      if (p["name"] == name) return p;
    }
    throw std::runtime_error(name);
  }
  double per_call(const std::string& model) const {
    const auto& m = pricing["models"][model];
    const auto& t = pricing["tokens_per_doc_estimate"];
    return t["input"].get<double>() / 1000 * m["per_1k_input_tokens_usd"].get<double>() +
           t["output"].get<double>() / 1000 * m["per_1k_output_tokens_usd"].get<double>();
  }
  double total(const std::string& name, double n) const {
    const auto& p = plan(name);
    double usd = p["n_human_labels"].get<double>() * pricing["per_labeled_example_usd"].get<double>();
    usd += p["n_llm_labels"].get<double>() * per_call(p["labeling_model"]);
    if (p["kind"] == "llm_only") usd += n * per_call(p["extraction_model_or_backbone"]);
    const double gpu_hours = p["train_hours"].get<double>() + n * p["per_doc_infer_seconds"].get<double>() / 3600;
    if (gpu_hours > 0) usd += gpu_hours * pricing["gpu_usd_per_hour"][p.value("gpu_class", "a6000")].get<double>();
    return usd;
  }
  double seconds(const std::string& name, double n) const {
    const auto& p = plan(name);
    const auto& models = pricing["models"];
    double s = p["n_llm_labels"].get<double>() * models[p["labeling_model"].get<std::string>()]["seconds_per_call"].get<double>();
    s += p["train_hours"].get<double>() * 3600;
    const double per_doc = p["kind"] == "hybrid"
                               ? p["per_doc_infer_seconds"].get<double>()
                               : models[p["extraction_model_or_backbone"].get<std::string>()]["seconds_per_call"].get<double>();
    return s + n * per_doc / p["inference_parallelism"].get<double>();
  }
};

}  // namespace

TEST_SUITE("cost_model") {
  TEST_CASE("estimates match the hand-computed formulas") {
    HandModel hand;
    for (const auto& p : default_plans()) {
      for (double n : {0.0, 1.0, 1e3, 1e4, 1e5, 1e6}) {
        const auto c = estimate_cost(p, default_pricing(), n);
        CHECK(c.total_usd == doctest::Approx(hand.total(p.name, n)).epsilon(1e-12));
        CHECK(c.wall_seconds == doctest::Approx(hand.seconds(p.name, n)).epsilon(1e-12));
        CHECK(c.total_usd == doctest::Approx(c.manual_usd + c.api_usd + c.compute_usd));
      }
    }
    CHECK(estimate_cost(plan_named("hybrid-1.2B"), default_pricing(), 1e4).total_usd ==
          doctest::Approx(12.3079).epsilon(1e-6));
    CHECK(estimate_cost(plan_named("llm_only-gpt-3.5"), default_pricing(), 1e4).total_usd ==
          doctest::Approx(235.0));
  }

  TEST_CASE("default constants fall in the published bands") {
    const auto& pr = default_pricing();
    const auto& h = plan_named("hybrid-1.2B");
    const auto& l = plan_named("llm_only-gpt-3.5");
    const double r4 = estimate_cost(h, pr, 1e4).total_usd / estimate_cost(l, pr, 1e4).total_usd;
    const double r6 = estimate_cost(h, pr, 1e6).total_usd / estimate_cost(l, pr, 1e6).total_usd;
    CHECK(r4 >= 0.01);
    CHECK(r4 <= 0.10);
    CHECK(r6 >= 0.001);
    CHECK(r6 <= 0.02);
    const double t6 = estimate_time(h, pr, 1e6).total_seconds / estimate_time(l, pr, 1e6).total_seconds;
    CHECK(t6 >= 0.10);
    CHECK(t6 <= 0.25);
  }

  TEST_CASE("labeling time scales with the number of LLM labels") {
    auto p = plan_named("hybrid-1.2B");
    p.n_llm_labels = 92;
    const double t92 = estimate_time(p, default_pricing(), 0).labeling_seconds;
    p.n_llm_labels = 192;
    const double t192 = estimate_time(p, default_pricing(), 0).labeling_seconds;
    CHECK(t92 == doctest::Approx(304.75));
    CHECK(t192 == doctest::Approx(636.0));
  }

  TEST_CASE("N = 0 boundaries") {
    const auto& pr = default_pricing();
    const auto& h = plan_named("hybrid-1.2B");
    const auto c = estimate_cost(h, pr, 0);
    CHECK(c.manual_usd == doctest::Approx(6.0));
    CHECK(c.compute_usd == doctest::Approx(0.8));
    CHECK(c.api_usd == doctest::Approx(192 * 0.0229));
    CHECK(estimate_time(h, pr, 0).inference_seconds == 0.0);
    CHECK(estimate_time(plan_named("llm_only-gpt-4"), pr, 0).total_seconds == 0.0);
    CHECK_THROWS_AS(estimate_cost(h, pr, -1), Error);
    CHECK_THROWS_AS(estimate_time(h, pr, -1), Error);
  }

  TEST_CASE("doubling parallelism halves inference time exactly") {
    for (const auto& base : default_plans()) {
      auto p = base;
      for (double n : {1.0, 777.0, 1e6}) {
        p.inference_parallelism = 3;
        const double a = estimate_time(p, default_pricing(), n).inference_seconds;
        p.inference_parallelism = 6;
        CHECK(estimate_time(p, default_pricing(), n).inference_seconds == a / 2);
      }
    }
  }

  TEST_CASE("property: llm_only is affine, hybrid api is constant, totals are monotone") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0, 1e6);
    const auto& pr = default_pricing();
    for (int i = 0; i < 200; ++i) {
      const double n = u(rng);
      for (const auto& p : default_plans()) {
        const auto c1 = estimate_cost(p, pr, n), c2 = estimate_cost(p, pr, 2 * n),
                   c3 = estimate_cost(p, pr, 3 * n);
        CHECK(c2.total_usd - c1.total_usd == doctest::Approx(c3.total_usd - c2.total_usd).epsilon(1e-9));
        CHECK(c2.total_usd >= c1.total_usd);
        if (p.kind == PlanKind::kHybrid) CHECK(c1.api_usd == c3.api_usd);
        if (p.kind == PlanKind::kLlmOnly) {
          CHECK(c2.api_usd - c1.api_usd == doctest::Approx(c3.api_usd - c2.api_usd).epsilon(1e-9));
        }
      }
    }
  }

  TEST_CASE("curve: rows, crossover at the analytic intersection") {
    const std::vector<PipelinePlan> plans = {plan_named("hybrid-1.2B"), plan_named("llm_only-gpt-3.5")};
    const auto curve = tradeoff_curve(plans, default_pricing(), {1e3, 1e4, 1e5, 1e6});
    CHECK(curve.rows.size() == 8);
    REQUIRE(curve.crossovers.size() == 1);
    const auto& x = curve.crossovers[0];
    // fixed: 6 + 4.3968 + 0.8 vs 6; slopes: 0.8*0.5/3600 vs 0.0229
    const double analytic = (4.3968 + 0.8) / (0.0229 - 0.8 * 0.5 / 3600);
    REQUIRE(x.analytic_n.has_value());
    CHECK(*x.analytic_n == doctest::Approx(analytic).epsilon(1e-9));
    CHECK(*x.analytic_n == doctest::Approx(228.04).epsilon(1e-3));
    REQUIRE(x.grid_n.has_value());
    CHECK(*x.grid_n == 1e3);

    // Fine grid: the first cheaper grid point lies within one step of the intersection.
    std::vector<double> fine;
    for (double n = 0; n <= 1000; n += 10) fine.push_back(n);
    const auto c2 = tradeoff_curve(plans, default_pricing(), fine);
    CHECK(*c2.crossovers[0].grid_n >= analytic);
    CHECK(*c2.crossovers[0].grid_n - analytic <= 10.0);

    const auto c4 = tradeoff_curve({plan_named("hybrid-1.2B"), plan_named("llm_only-gpt-4")},
                                   default_pricing(), {1, 10, 100});
    CHECK(*c4.crossovers[0].analytic_n == doctest::Approx(22.51).epsilon(1e-3));
    CHECK(*c4.crossovers[0].grid_n == 100);
  }

  TEST_CASE("curve: degenerate cases") {
    const auto one = tradeoff_curve({plan_named("hybrid-1.2B")}, default_pricing(), {1, 2});
    CHECK(one.rows.size() == 2);
    CHECK(one.crossovers.empty());

    PricingConfig zero;
    zero.models = {{"gpt-3.5-turbo-16k-0613", {}}, {"mt5-large", {}}};
    zero.gpu_usd_per_hour = {{"a6000", 0.0}};
    const auto z = tradeoff_curve({plan_named("hybrid-1.2B"), plan_named("llm_only-gpt-3.5")}, zero,
                                  {1e3, 1e6});
    for (const auto& r : z.rows) CHECK(r.cost.total_usd == 0.0);
    REQUIRE(z.crossovers.size() == 1);
    CHECK_FALSE(z.crossovers[0].grid_n.has_value());
    CHECK_FALSE(z.crossovers[0].analytic_n.has_value());

    CHECK_THROWS_AS(tradeoff_curve({}, default_pricing(), {1}), Error);
    CHECK_THROWS_AS(tradeoff_curve(default_plans(), default_pricing(), {}), Error);
  }

  TEST_CASE("curve output: CSV, chart spec, JSON") {
    const auto curve = tradeoff_curve(default_plans(), default_pricing(), {1e3, 1e4});
    std::ostringstream csv;
    write_curve_csv(csv, curve);
    const auto s = csv.str();
    CHECK(s.rfind("plan,N,total_usd,manual_usd,api_usd,compute_usd,wall_seconds\n", 0) == 0);
    CHECK(std::count(s.begin(), s.end(), '\n') == 7);
    const auto chart = curve_chart_spec(curve);
    CHECK(chart["data"]["values"].size() == 6);
    CHECK(chart.contains("mark"));
    CHECK_THROWS_AS(curve_chart_spec(curve, "bogus"), Error);
    const Json j = curve;
    CHECK(j["rows"].size() == 6);
    CHECK(j["crossovers"].size() == 2);
  }

  TEST_CASE("grid parsing") {
    CHECK(parse_grid("1e3, 1e4,1e5") == std::vector<double>{1e3, 1e4, 1e5});
    CHECK_THROWS_AS(parse_grid("1e3,abc"), Error);
    CHECK_THROWS_AS(parse_grid("-5"), Error);
  }

  TEST_CASE("pricing and plan validation") {
    PricingConfig p = default_pricing();
    p.per_labeled_example_usd = -1;
    CHECK_THROWS_AS(p.validate(), Error);
    CHECK_THROWS_AS(default_pricing().model("no-such-model"), Error);
    PipelinePlan bad = plan_named("hybrid-1.2B");
    bad.inference_parallelism = 0;
    CHECK_THROWS_AS(bad.validate(), Error);
    const auto back = plans_from_json(Json(default_plans()));
    CHECK(back.size() == default_plans().size());
    const Json pj = default_pricing();
    CHECK(pj.get<PricingConfig>().models.size() == default_pricing().models.size());
  }

  TEST_CASE("tokens per call from corpus statistics") {
    std::vector<Document> docs = {{"a", std::string(400, 'x'), {}}, {"b", std::string(800, 'x'), {}}};
    TokenEstimator est;
    const auto t4 = tokens_per_doc_from_corpus(docs, 4, est);
    const auto t8 = tokens_per_doc_from_corpus(docs, 8, est);
    CHECK(t4.output == 100.0);
    CHECK(t8.input > t4.input);
    // 4 more shots add 4 * (150 doc tokens + 100 answer tokens).
    CHECK(t8.input - t4.input == doctest::Approx(1000.0));
  }
}
