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

#include <thread>

#include "helpers.hpp"
#include "lexstat/auto_labeler.hpp"
#include "lexstat/error.hpp"
#include "lexstat/evaluator.hpp"
#include "lexstat/ie_engine.hpp"

using namespace lexstat;
using namespace lexstat::testing;
using namespace std::chrono_literals;

namespace {

TrainingManagerConfig shim_config(std::string mode = "ok", std::string epoch_ms = "0") {
  TrainingManagerConfig cfg;
  cfg.shim = stub_shim();
  cfg.shim_env = {{"STUB_SHIM_MODE", std::move(mode)}, {"STUB_SHIM_EPOCH_MS", std::move(epoch_ms)}};
  cfg.poll_interval = 5ms;
  return cfg;
}

TrainingHyperparams quick(int epochs = 3) {
  TrainingHyperparams h;
  h.epochs = epochs;
  return h;
}

/// Pattern extractor that throws for one document.
class Poisoned final : public Extractor {
 public:
  Poisoned(Ontology o, std::vector<PatternRule> rules, std::string bad)
      : inner_(std::move(o), std::move(rules)), bad_(std::move(bad)) {}
  const ExtractorSpec& spec() const override { return inner_.spec(); }
  const Ontology& ontology() const override { return inner_.ontology(); }
  Parse extract(const Document& doc) override {
    if (doc.doc_id == bad_) throw Error(ErrorCode::kInternal, "poisoned");
    return inner_.extract(doc);
  }

 private:
  PatternTableExtractor inner_;
  std::string bad_;
};

/// A planted corpus with 16 human labels and a materialized dataset.
struct Fixture {
  TempDir tmp;
  CorpusStore store{tmp.path()};
  PlantedCorpus pc;
  TrainingSet ts;
  explicit Fixture(std::size_t n_docs = 40) {
    pc = seed_planted(store, n_docs, 16);
    LlmGateway gw(planted_mock(pc));
    AugmentationConfig cfg;
    cfg.n_target = 16;
    ts = ensure_training_set(store, gw, "c", cfg);
  }
};

}  // namespace

TEST_SUITE("ie_engine") {
  TEST_CASE("pattern table extracts the matched span") {
    Ontology o;
    o.fields = {{"BAC", FieldKind::kNumeric, true, ""}, {"Fine", FieldKind::kMoney, false, ""}};
    PatternTableExtractor ex(o, {{"BAC", "[0-9.]+%", 0}, {"Fine", "([0-9,]+) won", 1}});
    const auto p = ex.extract({"d", "BAC was 0.12%, later 0.12% and 0.2%. Fine 300 won or 500 won.", {}});
    CHECK(p.get("BAC") == std::vector<std::string>{"0.12%", "0.2%"});
    CHECK(p.get("Fine") == std::vector<std::string>{"300"});
    CHECK(ex.spec().kind == ExtractorKind::kPatternTable);
    CHECK_THROWS_AS(PatternTableExtractor(o, {{"Nope", "x", 0}}), Error);
    CHECK_THROWS_AS(PatternTableExtractor(o, {{"BAC", "(", 0}}), Error);
    CHECK_THROWS_AS(PatternTableExtractor(o, {{"BAC", "x", 2}}), Error);
  }

  TEST_CASE("pattern table over the planted corpus recovers the gold parses") {
    const auto pc = make_planted_corpus(60);
    PatternTableExtractor ex(pc.ontology, pc.pattern_rules);
    ParseMap pred;
    for (const auto& d : pc.docs) pred[d.doc_id] = ex.extract(d);
    CHECK(field_f1_report(pred, pc.gold, pc.ontology).average_f1 == doctest::Approx(1.0));
  }

  TEST_CASE("llm_fewshot needs seeds and parses the mock answer") {
    const auto pc = make_planted_corpus(20);
    LlmGateway gw(planted_mock(pc));
    CHECK_THROWS_AS(LlmFewshotExtractor(gw, pc.ontology, {}, {}), Error);
    std::vector<LabeledExample> seeds;
    std::vector<Document> seed_docs;
    for (int i = 0; i < 4; ++i) {
      seeds.push_back({pc.docs[i].doc_id, pc.gold.at(pc.docs[i].doc_id)});
      seed_docs.push_back(pc.docs[i]);
    }
    LlmFewshotExtractor ex(gw, pc.ontology, seeds, seed_docs, 2);
    for (std::size_t i = 4; i < 20; ++i) {
      CHECK(ex.extract(pc.docs[i]).equivalent(pc.gold.at(pc.docs[i].doc_id)));
    }
    CHECK(ex.usage().input_tokens > 0);
    CHECK(gw.backend_calls() == 16);
  }

  TEST_CASE("make_extractor: llm_fewshot without human labels is a precondition failure") {
    TempDir tmp;
    CorpusStore store(tmp.path());
    const auto pc = seed_planted(store, 10, 0);
    LlmGateway gw(planted_mock(pc));
    ExtractorContext ctx;
    ctx.store = &store;
    ctx.gateway = &gw;
    ctx.corpus_id = "c";
    ExtractorSpec spec;
    spec.kind = ExtractorKind::kLlmFewshot;
    try {
      make_extractor(spec, ctx);
      FAIL("expected precondition");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kPrecondition);
    }
    spec.kind = ExtractorKind::kDistilled;
    spec.model_ref = (tmp / "missing").string();
    ctx.shim = stub_shim();
    CHECK_THROWS_AS(make_extractor(spec, ctx), Error);
  }

  TEST_CASE("batch: one poisoned document becomes an error row") {
    TempDir tmp;
    CorpusStore store(tmp.path());
    const auto pc = seed_planted(store, 100, 0);
    Poisoned ex(pc.ontology, pc.pattern_rules, "d0042");
    const auto report = extract_batch(ex, store, "c");
    CHECK(report.docs == 100);
    CHECK(report.failures == 1);
    REQUIRE(report.failed.size() == 1);
    CHECK(report.failed[0].first == "d0042");
    const auto table = load_table(store, report.table_id);
    REQUIRE(table.rows.size() == 100);
    std::size_t ok = 0;
    for (const auto& r : table.rows) ok += r.error.empty() ? 1 : 0;
    CHECK(ok == 99);
    CHECK(table.find("d0042")->error.find("poisoned") != std::string::npos);
    CHECK(table.find("d0042")->values.empty());
    CHECK(std::is_sorted(table.rows.begin(), table.rows.end(),
                         [](const TableRow& a, const TableRow& b) { return a.doc_id < b.doc_id; }));
  }

  TEST_CASE("batch: filters and normalized values") {
    TempDir tmp;
    CorpusStore store(tmp.path());
    const auto pc = seed_planted(store, 30, 0);
    PatternTableExtractor ex(pc.ontology, pc.pattern_rules);
    DocFilter f;
    f.doc_ids = {"d0001", "d0003", "d0005"};
    const auto r = extract_batch(ex, store, "c", f);
    CHECK(r.docs == 3);
    const auto t = load_table(store, r.table_id);
    const auto* row = t.find("d0003");
    REQUIRE(row != nullptr);
    const auto& fine_raw = row->raw.get("Fine");
    REQUIRE(fine_raw.size() == 1);
    CHECK(row->values.get("Fine")[0] == normalize_value(fine_raw[0], FieldKind::kMoney));
    DocFilter none;
    none.doc_ids = {"nope"};
    CHECK_THROWS_AS(extract_batch(ex, store, "c", none), Error);
  }

  TEST_CASE("batch: every document failing is an error") {
    TempDir tmp;
    CorpusStore store(tmp.path());
    const auto pc = seed_planted(store, 1, 0);
    Poisoned ex(pc.ontology, pc.pattern_rules, "d0000");
    CHECK_THROWS_AS(extract_batch(ex, store, "c"), Error);
  }

  TEST_CASE("trainer config keeps protocol key order") {
    TrainingHyperparams h;
    CHECK(trainer_config_json(h, 4e-4) ==
          R"({"batch_size":12,"lr":0.0004,"epochs":60,"adapter_rank":8,"seed":0,"base_model":"t5-small"})");
    h.epochs = 0;
    CHECK_THROWS_AS(h.validate(), Error);
  }

  TEST_CASE("training: happy path, then the distilled model echoes the training targets") {
    Fixture fx;
    TrainingManager mgr(fx.store, shim_config());
    const auto id = mgr.submit_training_job(fx.ts.dataset_id, quick(5));
    CHECK(id == "job1");
    const auto job = mgr.wait(id, 30s);
    REQUIRE(job.state == JobState::kDone);
    CHECK(job.attempt == 1);
    CHECK(job.epoch == 5);
    CHECK(job.loss.size() == 5);
    CHECK(std::filesystem::is_directory(job.checkpoint_path));
    CHECK(read_text(mgr.job_dir(id) / "config.json").rfind(R"({"batch_size":12,"lr":0.0004,)", 0) == 0);

    DistilledExtractor ex(fx.pc.ontology, job.checkpoint_path, stub_shim());
    ParseMap pred;
    for (const auto& r : ex.extract_many(fx.store.documents("c"), 2)) {
      CHECK(r.error.empty());
      pred[r.doc_id] = r.parse;
    }
    CHECK(field_f1_report(pred, fx.pc.gold, fx.pc.ontology).average_f1 == doctest::Approx(1.0));
  }

  TEST_CASE("training: divergence triggers one retry at the fallback rate") {
    Fixture fx;
    TrainingManager mgr(fx.store, shim_config("diverge_once"));
    const auto job = mgr.wait(mgr.submit_training_job(fx.ts.dataset_id, quick(4)), 30s);
    CHECK(job.state == JobState::kDone);
    CHECK(job.attempt == 2);
    CHECK(job.current_lr == doctest::Approx(3e-4));
    bool saw_retrying = false;
    for (const auto& t : job.history) saw_retrying |= t.state == JobState::kRetrying;
    CHECK(saw_retrying);
    CHECK(read_text(mgr.job_dir(job.job_id) / "config.json").find(R"("lr":0.0003)") != std::string::npos);
  }

  TEST_CASE("training: divergence at both rates fails as diverged") {
    Fixture fx;
    TrainingManager mgr(fx.store, shim_config("diverge_always"));
    const auto job = mgr.wait(mgr.submit_training_job(fx.ts.dataset_id, quick(4)), 30s);
    CHECK(job.state == JobState::kFailedDiverged);
    CHECK(job.attempt == 2);
    CHECK(job.checkpoint_path.empty());
  }

  TEST_CASE("training: shim failures") {
    Fixture fx;
    for (const char* mode : {"fail", "no_status", "no_checkpoint"}) {
      TrainingManager mgr(fx.store, shim_config(mode));
      const auto job = mgr.wait(mgr.submit_training_job(fx.ts.dataset_id, quick(2)), 30s);
      CHECK_MESSAGE(job.state == JobState::kFailed, mode);
      CHECK_FALSE(job.message.empty());
    }
    auto cfg = shim_config();
    cfg.shim = fx.tmp / "no-such-shim";
    TrainingManager mgr(fx.store, cfg);
    const auto job = mgr.wait(mgr.submit_training_job(fx.ts.dataset_id, quick(2)), 30s);
    CHECK(job.state == JobState::kFailed);
  }

  TEST_CASE("training: submission errors") {
    Fixture fx;
    TrainingManager mgr(fx.store, shim_config("ok", "40"));
    CHECK_THROWS_AS(mgr.submit_training_job("c-ds99"), Error);
    const auto id = mgr.submit_training_job(fx.ts.dataset_id, quick(10));
    try {
      mgr.submit_training_job(fx.ts.dataset_id, quick(2));
      FAIL("expected conflict");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kConflict);
    }
    CHECK_THROWS_AS(mgr.job("job404"), Error);
    mgr.wait(id, 30s);
  }

  TEST_CASE("training: epoch progress is monotone") {
    Fixture fx;
    TrainingManager mgr(fx.store, shim_config("ok", "25"));
    const auto id = mgr.submit_training_job(fx.ts.dataset_id, quick(8));
    int last = 0;
    std::size_t distinct = 0;
    for (;;) {
      const auto j = mgr.job(id);
      CHECK(j.epoch >= last);
      if (j.epoch > last) ++distinct;
      last = j.epoch;
      if (is_terminal(j.state)) break;
      std::this_thread::sleep_for(5ms);
    }
    CHECK(last == 8);
    CHECK(distinct >= 2);
  }

  TEST_CASE("training: a restart marks unfinished jobs failed") {
    Fixture fx;
    TrainingJob stuck;
    stuck.job_id = "job7";
    stuck.dataset_id = fx.ts.dataset_id;
    stuck.state = JobState::kRunning;
    stuck.epoch = 3;
    write_text(fx.tmp / "jobs" / "job7" / "job.json", Json(stuck).dump());
    TrainingManager mgr(fx.store, shim_config());
    const auto j = mgr.job("job7");
    CHECK(j.state == JobState::kFailed);
    CHECK(j.message.find("restart") != std::string::npos);
    const auto on_disk = training_job_from_json(Json::parse(read_text(fx.tmp / "jobs" / "job7" / "job.json")));
    CHECK(on_disk.state == JobState::kFailed);
  }

  TEST_CASE("training: destroying the manager stops a running job") {
    Fixture fx;
    std::string id;
    {
      TrainingManager mgr(fx.store, shim_config("ok", "200"));
      id = mgr.submit_training_job(fx.ts.dataset_id, quick(50));
      std::this_thread::sleep_for(100ms);
    }
    TrainingManager again(fx.store, shim_config());
    CHECK(again.job(id).state == JobState::kFailed);
  }

  TEST_CASE("job JSON round trip") {
    TrainingJob j;
    j.job_id = "job1";
    j.dataset_id = "c-ds1";
    j.state = JobState::kRetrying;
    j.loss = {1.0, std::nan("")};
    const Json js = j;
    CHECK(js["state"] == "retrying");
    CHECK(js["loss"][1].is_null());
    const auto back = training_job_from_json(js);
    CHECK(back.state == JobState::kRetrying);
    CHECK(std::isnan(back.loss[1]));
    for (auto s : {JobState::kQueued, JobState::kRunning, JobState::kRetrying, JobState::kDone,
                   JobState::kFailed, JobState::kFailedDiverged}) {
      CHECK(job_state_from_string(to_string(s)) == s);
    }
    CHECK(is_terminal(JobState::kFailedDiverged));
    CHECK_FALSE(is_terminal(JobState::kRetrying));
  }
}
