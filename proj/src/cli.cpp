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


#include "lexstat/cli.hpp"

#include <pthread.h>
#include <signal.h>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "lexstat/corpus_store.hpp"
#include "lexstat/service.hpp"

namespace lexstat {

namespace {

struct Globals {
  std::string config;
  std::string data_dir;
  std::string llm_backend;
  std::string mock_rules;
  std::string shim;
  std::size_t parallelism = 0;
  bool json = false;
};

ServiceConfig make_config(const Globals& g) {
  ServiceConfig c = g.config.empty() ? ServiceConfig{} : ServiceConfig::from_file(g.config);
  c.apply_env();
  if (!g.data_dir.empty()) c.data_dir = g.data_dir;
  if (!g.llm_backend.empty()) c.llm_backend = g.llm_backend;
  if (!g.mock_rules.empty()) c.mock_rules = g.mock_rules;
  if (!g.shim.empty()) c.shim = g.shim;
  if (g.parallelism > 0) c.parallelism = g.parallelism;
  return c;
}

std::string slurp(std::istream& in) {
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string read_path(const std::string& path) {
  if (path == "-") return slurp(std::cin);
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kNotFound, "cannot read " + path, path);
  return slurp(in);
}

void write_path(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kInvalidArgument, "cannot write " + path, path);
  out << content;
}

// Inline JSON, `@file`, `-` for stdin, or a path.
Json json_arg(const std::string& s) {
  std::string text;
  if (!s.empty() && s[0] == '@') {
    text = read_path(s.substr(1));
  } else if (s == "-") {
    text = slurp(std::cin);
  } else if (!s.empty() && (s[0] == '{' || s[0] == '[')) {
    text = s;
  } else {
    text = read_path(s);
  }
  try {
    return Json::parse(text);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, "not valid JSON: " + s, e.what());
  }
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

Json key_values(const std::vector<std::string>& pairs) {
  Json out = Json::object();
  for (const auto& p : pairs) {
    const auto eq = p.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw Error(ErrorCode::kInvalidArgument, "expected key=value, got '" + p + "'", p);
    }
    out[p.substr(0, eq)] = p.substr(eq + 1);
  }
  return out;
}

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(4);
  ss << std::fixed << v;
  return ss.str();
}

void print_eval(std::ostream& out, const Json& r) {
  if (r.contains("micro_f1")) {
    out << "micro P/R/F1 " << fmt(r.at("micro_precision").get<double>()) << ' '
        << fmt(r.at("micro_recall").get<double>()) << ' ' << fmt(r.at("micro_f1").get<double>())
        << "\nmacro F1 " << fmt(r.at("macro_f1").get<double>()) << '\n';
    return;
  }
  out << "field\tP\tR\tF1\tsupport\n";
  for (const auto& f : r.at("per_field")) {
    out << f.at("field").get<std::string>() << '\t' << fmt(f.at("precision").get<double>())
        << '\t' << fmt(f.at("recall").get<double>()) << '\t' << fmt(f.at("f1").get<double>())
        << '\t' << f.at("support") << '\n';
  }
  out << "average_f1\t" << fmt(r.at("average_f1").get<double>()) << '\n';
}

std::string eval_csv(const Json& r) {
  std::ostringstream out;
  out << "field,precision,recall,f1,support,tp,fp,fn\n";
  for (const auto& f : r.at("per_field")) {
    out << f.at("field").get<std::string>() << ',' << f.at("precision").dump() << ','
        << f.at("recall").dump() << ',' << f.at("f1").dump() << ',' << f.at("support") << ','
        << f.at("tp") << ',' << f.at("fp") << ',' << f.at("fn") << '\n';
  }
  return out.str();
}

std::string cell(const Json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

// Tabular form of a tool result.
std::string tool_csv(const Json& result) {
  std::ostringstream out;
  if (result.contains("bins")) {
    out << "lo,hi,count\n";
    for (const auto& b : result.at("bins")) {
      out << cell(b.at("lo")) << ',' << cell(b.at("hi")) << ',' << cell(b.at("count")) << '\n';
    }
  } else if (result.contains("stat")) {
    out << "group,value,n\n";
    for (const auto& r : result.at("rows")) {
      out << (r.at("group").is_null() ? "" : cell(r.at("group"))) << ','
          << (r.at("value").is_null() ? "" : cell(r.at("value"))) << ',' << cell(r.at("n")) << '\n';
    }
  } else if (result.contains("doc_ids")) {
    out << "doc_id\n";
    for (const auto& d : result.at("doc_ids")) out << cell(d) << '\n';
  } else if (result.contains("hits")) {
    out << "doc_id,score\n";
    for (const auto& h : result.at("hits")) out << cell(h.at("doc_id")) << ',' << cell(h.at("score")) << '\n';
  } else {
    throw Error(ErrorCode::kInvalidArgument, "this tool result has no tabular form");
  }
  return out.str();
}

void print_job(std::ostream& out, const Json& j) {
  out << j.value("job_id", std::string{}) << ' ' << j.value("kind", std::string{}) << ' '
      << j.value("state", std::string{});
  if (auto p = j.find("progress"); p != j.end()) out << ' ' << p->dump();
  if (auto m = j.value("message", std::string{}); !m.empty()) out << " - " << m;
  out << '\n';
  if (auto r = j.find("result"); r != j.end() && !r->is_null()) out << r->dump(2) << '\n';
}

int serve_blocking(Service& svc, const std::string& host, int port, bool json,
                   std::ostream& out) {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  std::atomic<bool> signalled{false};
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&set, &sig);
    signalled = true;
    stop_serving();
  });
  auto stop_waiter = [&] {
    if (!signalled) pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
  };
  try {
    serve(svc, host, port, [&](int bound) {
      const std::string url = "http://" + host + ":" + std::to_string(bound);
      if (json) {
        out << Json{{"listening", url}, {"port", bound}}.dump() << std::endl;
      } else {
        out << "lexstat listening on " << url << std::endl;
      }
    });
  } catch (...) {
    stop_waiter();
    throw;
  }
  stop_waiter();
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"lexstat: legal document information extraction and statistics", "lexstat"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "Service config file (JSON)");
  app.add_option("--data-dir", g.data_dir, "Data directory");
  app.add_option("--llm-backend", g.llm_backend, "mock or http");
  app.add_option("--mock-rules", g.mock_rules, "Rule table for the mock LLM backend");
  app.add_option("--shim", g.shim, "Trainer shim executable");
  app.add_option("--parallelism", g.parallelism, "Concurrent LLM calls");
  app.add_flag("--json", g.json, "Machine-readable output");

  std::optional<Service> svc_storage;
  auto svc = [&]() -> Service& {
    if (!svc_storage) svc_storage.emplace(make_config(g));
    return *svc_storage;
  };
  std::function<int()> action;
  auto emit = [&](const Json& j, const std::function<void(const Json&)>& human = {}) {
    if (g.json || !human) {
      out << (g.json ? j.dump() : j.dump(2)) << '\n';
    } else {
      human(j);
    }
    return 0;
  };

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Ingest a JSONL corpus");
  std::string ingest_file, ingest_corpus;
  ingest->add_option("file", ingest_file, "JSONL file, - for stdin")->required();
  ingest->add_option("--corpus-id", ingest_corpus, "Target corpus (default: new id)");
  ingest->callback([&] {
    action = [&] {
      std::istringstream in(read_path(ingest_file));
      return emit(svc().ingest(in, ingest_corpus), [&](const Json& r) {
        out << "corpus " << r.at("corpus_id").get<std::string>() << ": " << r.at("count")
            << " documents (" << r.at("replaced") << " replaced, " << r.at("issues").size()
            << " issues)\n";
        for (const auto& i : r.at("issues")) {
          out << "  line " << i.at("line") << ": " << i.at("message").get<std::string>() << '\n';
        }
      });
    };
  });

  // ontology
  auto* onto = app.add_subcommand("ontology", "Show or change a corpus ontology");
  onto->require_subcommand(1);
  std::string onto_corpus, onto_file, onto_field, onto_kind = "free-text", onto_desc;
  bool onto_single = false;
  auto* onto_show = onto->add_subcommand("show", "Print the current ontology");
  onto_show->add_option("corpus", onto_corpus)->required();
  onto_show->callback([&] { action = [&] { return emit(svc().get_ontology(onto_corpus)); }; });
  auto* onto_set = onto->add_subcommand("set", "Replace the ontology");
  onto_set->add_option("corpus", onto_corpus)->required();
  onto_set->add_option("ontology", onto_file, "Ontology JSON (inline, @file or path)")->required();
  onto_set->callback([&] {
    action = [&] { return emit(svc().put_ontology(onto_corpus, json_arg(onto_file))); };
  });
  auto* onto_add = onto->add_subcommand("add-field", "Add a field");
  onto_add->add_option("corpus", onto_corpus)->required();
  onto_add->add_option("name", onto_field)->required();
  onto_add->add_option("--kind", onto_kind, "numeric, money, duration, categorical, free-text, label-set");
  onto_add->add_flag("--single", onto_single, "Single-valued field");
  onto_add->add_option("--description", onto_desc);
  onto_add->callback([&] {
    action = [&] {
      const Json body{{"op", "add_field"},
                      {"field", {{"name", onto_field},
                                 {"kind", onto_kind},
                                 {"multi_valued", !onto_single},
                                 {"description", onto_desc}}}};
      return emit(svc().put_ontology(onto_corpus, body));
    };
  });
  auto* onto_rm = onto->add_subcommand("remove-field", "Remove a field");
  onto_rm->add_option("corpus", onto_corpus)->required();
  onto_rm->add_option("name", onto_field)->required();
  onto_rm->callback([&] {
    action = [&] {
      return emit(svc().put_ontology(onto_corpus, {{"op", "remove_field"}, {"name", onto_field}}));
    };
  });
  auto* onto_describe = onto->add_subcommand("describe", "Edit a field or task description");
  onto_describe->add_option("corpus", onto_corpus)->required();
  onto_describe->add_option("description", onto_desc)->required();
  onto_describe->add_option("--field", onto_field, "Field (default: the task description)");
  onto_describe->callback([&] {
    action = [&] {
      return emit(svc().put_ontology(
          onto_corpus, {{"op", "edit_description"}, {"field", onto_field}, {"description", onto_desc}}));
    };
  });

  // label
  auto* label = app.add_subcommand("label", "Write, list, import or export labels");
  label->require_subcommand(1);
  std::string label_corpus, label_doc, label_parse, label_prov, label_by, label_file;
  auto* label_put = label->add_subcommand("put", "Upsert one label");
  label_put->add_option("corpus", label_corpus)->required();
  label_put->add_option("doc_id", label_doc)->required();
  label_put->add_option("parse", label_parse, "Parse JSON (inline, @file or path)")->required();
  label_put->add_option("--provenance", label_prov, "human (default) or llm");
  label_put->add_option("--labeler", label_by);
  label_put->callback([&] {
    action = [&] {
      Json body{{"parse", json_arg(label_parse)}, {"labeler", label_by}};
      if (!label_prov.empty()) body["provenance"] = label_prov;
      return emit(svc().put_label(label_corpus, label_doc, body));
    };
  });
  auto* label_list = label->add_subcommand("list", "List current labels");
  label_list->add_option("corpus", label_corpus)->required();
  label_list->add_option("--provenance", label_prov);
  label_list->callback([&] {
    action = [&] {
      Json q = Json::object();
      if (!label_prov.empty()) q["provenance"] = label_prov;
      return emit(svc().get_labels(label_corpus, q));
    };
  });
  auto* label_import = label->add_subcommand("import", "Import labels-export JSONL");
  label_import->add_option("corpus", label_corpus)->required();
  label_import->add_option("file", label_file)->required();
  label_import->callback([&] {
    action = [&] {
      std::istringstream in(read_path(label_file));
      const auto n = svc().store().import_labels(label_corpus, in);
      return emit(Json{{"imported", n}});
    };
  });
  auto* label_export = label->add_subcommand("export", "Write labels as JSONL to stdout");
  label_export->add_option("corpus", label_corpus)->required();
  label_export->add_option("--provenance", label_prov);
  label_export->callback([&] {
    action = [&] {
      std::optional<Provenance> p;
      if (!label_prov.empty()) p = provenance_from_string(label_prov);
      svc().store().export_labels(label_corpus, out, p);
      return 0;
    };
  });

  // search
  auto* search = app.add_subcommand("search", "Search or list documents");
  std::string search_corpus, search_query, search_terms, search_doc;
  std::vector<std::string> search_filters;
  std::size_t search_top_k = 10;
  search->add_option("corpus", search_corpus)->required();
  search->add_option("--query", search_query, "Free-text query (terms extracted by the LLM)");
  search->add_option("--terms", search_terms, "Comma-separated search terms");
  search->add_option("--filter", search_filters, "Metadata key=value (repeatable)");
  search->add_option("--top-k", search_top_k);
  search->add_option("--doc-id", search_doc, "Show one document with its labels");
  search->callback([&] {
    action = [&] {
      if (!search_doc.empty()) return emit(svc().get_document(search_corpus, search_doc));
      Json q{{"top_k", search_top_k}};
      if (!search_query.empty()) q["query"] = search_query;
      if (!search_terms.empty()) q["terms"] = split_csv(search_terms);
      if (!search_filters.empty()) q["filters"] = key_values(search_filters);
      return emit(svc().search(search_corpus, q), [&](const Json& r) {
        if (r.contains("documents")) {
          for (const auto& d : r.at("documents")) out << d.at("doc_id").get<std::string>() << '\n';
          return;
        }
        out << "terms: " << r.at("terms").dump() << '\n';
        for (const auto& h : r.at("hits")) {
          out << h.at("doc_id").get<std::string>() << '\t' << fmt(h.at("score").get<double>())
              << '\t' << h.at("snippet").get<std::string>() << '\n';
        }
      });
    };
  });

  // augment
  auto* augment = app.add_subcommand("augment", "Grow human seed labels into a training set");
  std::string aug_corpus, aug_model;
  std::size_t aug_target = 16, aug_shots = 4;
  std::uint64_t aug_seed = 0;
  bool aug_no_wait = false;
  augment->add_option("corpus", aug_corpus)->required();
  augment->add_option("--n-target", aug_target, "Training set size");
  augment->add_option("--shots", aug_shots, "Few-shot examples per prompt");
  augment->add_option("--seed", aug_seed);
  augment->add_option("--model", aug_model, "Labeling model id");
  augment->add_flag("--no-wait", aug_no_wait, "Return the job id right away");
  augment->callback([&] {
    action = [&] {
      const Json body{{"n_target", aug_target},
                      {"n_seed_shots", aug_shots},
                      {"seed", aug_seed},
                      {"labeling_model_id", aug_model}};
      const Json j = svc().augment(aug_corpus, body, !aug_no_wait);
      emit(j, [&](const Json& v) { print_job(out, v); });
      return j.value("state", std::string{}) == "failed" ? 1 : 0;
    };
  });

  // train
  auto* train = app.add_subcommand("train", "Fine-tune an extractor on a dataset");
  std::string train_dataset, train_base;
  Json train_h = Json::object();
  int tr_epochs = 0, tr_batch = 0, tr_rank = 0;
  double tr_lr = 0, tr_fallback = 0;
  std::optional<std::uint64_t> tr_seed;
  bool train_no_wait = false;
  train->add_option("dataset_id", train_dataset)->required();
  train->add_option("--epochs", tr_epochs);
  train->add_option("--batch-size", tr_batch);
  train->add_option("--lr", tr_lr);
  train->add_option("--fallback-lr", tr_fallback);
  train->add_option("--adapter-rank", tr_rank);
  train->add_option("--seed", tr_seed);
  train->add_option("--base-model", train_base);
  train->add_flag("--no-wait", train_no_wait, "Return the job id right away");
  train->callback([&] {
    action = [&] {
      if (tr_epochs) train_h["epochs"] = tr_epochs;
      if (tr_batch) train_h["batch_size"] = tr_batch;
      if (tr_lr) train_h["lr"] = tr_lr;
      if (tr_fallback) train_h["fallback_lr"] = tr_fallback;
      if (tr_rank) train_h["adapter_rank"] = tr_rank;
      if (tr_seed) train_h["seed"] = *tr_seed;
      if (!train_base.empty()) train_h["base_model"] = train_base;
      const Json j = svc().train({{"dataset_id", train_dataset}, {"hyperparams", train_h}},
                                 !train_no_wait);
      emit(j, [&](const Json& v) { print_job(out, v); });
      const auto state = j.value("state", std::string{});
      return state == "failed" || state == "failed_diverged" ? 1 : 0;
    };
  });

  // jobs
  auto* jobs = app.add_subcommand("jobs", "Show jobs");
  std::string jobs_id;
  bool jobs_wait = false;
  jobs->add_option("job_id", jobs_id, "One job (default: all)");
  jobs->add_flag("--wait", jobs_wait, "Block until the job finishes");
  jobs->callback([&] {
    action = [&] {
      if (jobs_id.empty()) {
        return emit(svc().jobs(), [&](const Json& all) {
          for (const auto& j : all) {
            out << j.value("job_id", std::string{}) << '\t' << j.value("kind", std::string{})
                << '\t' << j.value("state", std::string{}) << '\n';
          }
        });
      }
      return emit(jobs_wait ? svc().wait_job(jobs_id) : svc().job(jobs_id),
                  [&](const Json& v) { print_job(out, v); });
    };
  });

  // extract
  auto* extract = app.add_subcommand("extract", "Run an extractor over a corpus");
  std::string ex_corpus, ex_kind = "pattern_table", ex_ref, ex_rules, ex_doc_ids, ex_terms;
  std::vector<std::string> ex_meta;
  std::optional<std::int64_t> ex_onto_version;
  std::size_t ex_shots = 4;
  std::uint64_t ex_seed = 0;
  bool ex_no_wait = false;
  extract->add_option("corpus", ex_corpus)->required();
  extract->add_option("--kind", ex_kind, "llm_fewshot, distilled or pattern_table");
  extract->add_option("--model-ref", ex_ref, "Model id, checkpoint or job id, or rules file");
  extract->add_option("--rules", ex_rules, "Pattern rules JSON (sets model-ref to inline)");
  extract->add_option("--ontology-version", ex_onto_version);
  extract->add_option("--doc-ids", ex_doc_ids, "Comma-separated document ids");
  extract->add_option("--terms", ex_terms, "Only documents matching any of these terms");
  extract->add_option("--meta", ex_meta, "Metadata key=value (repeatable)");
  extract->add_option("--shots", ex_shots);
  extract->add_option("--seed", ex_seed);
  extract->add_flag("--no-wait", ex_no_wait, "Return the job id right away");
  extract->callback([&] {
    action = [&] {
      Json spec{{"kind", ex_kind}, {"model_ref", ex_rules.empty() ? ex_ref : "inline"}};
      if (ex_onto_version) spec["ontology_version"] = *ex_onto_version;
      Json body{{"extractor", spec}, {"n_shots", ex_shots}, {"seed", ex_seed}};
      if (!ex_rules.empty()) body["rules"] = json_arg(ex_rules);
      Json filter = Json::object();
      if (!ex_doc_ids.empty()) filter["doc_ids"] = split_csv(ex_doc_ids);
      if (!ex_terms.empty()) filter["terms"] = split_csv(ex_terms);
      if (!ex_meta.empty()) filter["meta"] = key_values(ex_meta);
      if (!filter.empty()) body["filter"] = filter;
      const Json j = svc().extract(ex_corpus, body, !ex_no_wait);
      emit(j, [&](const Json& v) { print_job(out, v); });
      return j.value("state", std::string{}) == "failed" ? 1 : 0;
    };
  });

  // eval
  auto* eval = app.add_subcommand("eval", "Score predictions against gold labels");
  std::string ev_pred, ev_gold, ev_pred_table, ev_gold_corpus, ev_onto, ev_mode = "field",
                                                                         ev_field, ev_csv;
  std::vector<std::string> ev_exclude;
  bool ev_all_docs = false;
  eval->add_option("--pred", ev_pred, "Predictions JSONL");
  eval->add_option("--pred-table", ev_pred_table, "Predictions from a structured table");
  eval->add_option("--gold", ev_gold, "Gold JSONL");
  eval->add_option("--gold-corpus", ev_gold_corpus, "Gold from a corpus's human labels");
  eval->add_option("--ontology", ev_onto, "Ontology file or corpus id");
  eval->add_option("--exclude", ev_exclude, "Field left out of the average (repeatable)");
  eval->add_option("--mode", ev_mode, "field or classification");
  eval->add_option("--field", ev_field, "Label-set field for classification mode");
  eval->add_option("--csv", ev_csv, "Also write per-field scores as CSV");
  eval->add_flag("--all-docs", ev_all_docs, "Score predicted documents missing from gold too");
  eval->callback([&] {
    action = [&] {
      if (ev_pred.empty() == ev_pred_table.empty() || ev_gold.empty() == ev_gold_corpus.empty()) {
        throw CLI::ValidationError("eval", "give exactly one of --pred/--pred-table and one of --gold/--gold-corpus");
      }
      Json body{{"pred", ev_pred.empty() ? Json{{"table_id", ev_pred_table}} : Json{{"path", ev_pred}}},
                {"gold", ev_gold.empty() ? Json{{"corpus_id", ev_gold_corpus}} : Json{{"path", ev_gold}}},
                {"exclude", ev_exclude},
                {"restrict_to_gold", !ev_all_docs},
                {"mode", ev_mode}};
      if (!ev_onto.empty()) body["ontology"] = ev_onto;
      if (!ev_field.empty()) body["field"] = ev_field;
      const bool needs_store = !ev_pred_table.empty() || !ev_gold_corpus.empty() ||
                               (!ev_onto.empty() && !std::filesystem::exists(ev_onto));
      const Json r = needs_store ? svc().eval(body) : eval_request(body, nullptr);
      if (!ev_csv.empty() && r.contains("per_field")) write_path(ev_csv, eval_csv(r));
      return emit(r, [&](const Json& v) { print_eval(out, v); });
    };
  });

  // analyze
  auto* analyze = app.add_subcommand("analyze", "Ask a question about a structured table");
  std::string an_corpus, an_table, an_session, an_message, an_tool, an_args = "{}", an_chart,
                                                                          an_csv;
  analyze->add_option("corpus", an_corpus)->required();
  analyze->add_option("--table", an_table, "Structured table id");
  analyze->add_option("--session", an_session);
  analyze->add_option("--message", an_message, "Natural-language question");
  analyze->add_option("--tool", an_tool, "Run this tool directly");
  analyze->add_option("--args", an_args, "Tool arguments JSON");
  analyze->add_option("--chart", an_chart, "Write the chart spec here");
  analyze->add_option("--csv", an_csv, "Write the result rows here");
  analyze->callback([&] {
    action = [&] {
      if (an_message.empty() == an_tool.empty()) {
        throw CLI::ValidationError("analyze", "give exactly one of --message and --tool");
      }
      Json body{{"corpus_id", an_corpus}};
      if (!an_table.empty()) body["table_id"] = an_table;
      if (!an_session.empty()) body["session_id"] = an_session;
      if (!an_message.empty()) body["message"] = an_message;
      if (!an_tool.empty()) body["tool"] = {{"name", an_tool}, {"arguments", json_arg(an_args)}};
      const Json r = svc().chat(body);
      const Json& result = r.at("result");
      if (!an_chart.empty()) {
        if (!result.is_object() || !result.contains("chart")) {
          throw Error(ErrorCode::kInvalidArgument, "this answer has no chart");
        }
        write_path(an_chart, result.at("chart").dump(2) + "\n");
      }
      if (!an_csv.empty()) write_path(an_csv, tool_csv(result));
      return emit(r, [&](const Json& v) {
        out << v.at("rendering").get<std::string>() << '\n';
        if (!v.at("call").is_null()) out << "[tool call] " << v.at("call").dump() << '\n';
      });
    };
  });

  // cost
  auto* cost = app.add_subcommand("cost", "Cost and time model");
  cost->require_subcommand(1);
  auto* curve = cost->add_subcommand("curve", "Cost/time trade-off over a grid of corpus sizes");
  std::string cost_plans, cost_pricing, cost_grid = "1e3,1e4,1e5,1e6", cost_csv, cost_chart,
                                        cost_metric = "total_usd";
  curve->add_option("--plans", cost_plans, "Pipeline plans JSON");
  curve->add_option("--pricing", cost_pricing, "Pricing JSON");
  curve->add_option("--grid", cost_grid, "Comma-separated N values");
  curve->add_option("--csv", cost_csv, "Write the CSV here");
  curve->add_option("--chart", cost_chart, "Write the chart spec here");
  curve->add_option("--metric", cost_metric, "total_usd or wall_seconds");
  curve->callback([&] {
    action = [&] {
      Json body{{"grid", cost_grid}, {"metric", cost_metric}};
      if (!cost_plans.empty()) body["plans"] = json_arg(cost_plans);
      if (!cost_pricing.empty()) body["pricing"] = json_arg(cost_pricing);
      ServiceConfig cfg = g.config.empty() ? ServiceConfig{} : ServiceConfig::from_file(g.config);
      cfg.apply_env();
      const Json r = cost_curve_request(body, cfg);
      if (!cost_csv.empty()) write_path(cost_csv, r.at("csv").get<std::string>());
      if (!cost_chart.empty()) write_path(cost_chart, r.at("chart").dump(2) + "\n");
      return emit(r, [&](const Json& v) {
        out << v.at("csv").get<std::string>();
        for (const auto& x : v.at("crossovers")) {
          out << "crossover " << x.at("hybrid").get<std::string>() << " vs "
              << x.at("llm_only").get<std::string>() << ": analytic N="
              << (x.at("analytic_n").is_null() ? "none" : fmt(x.at("analytic_n").get<double>()))
              << ", first grid N=" << (x.at("grid_n").is_null() ? "none" : x.at("grid_n").dump())
              << '\n';
        }
      });
    };
  });

  // tools, schema
  auto* tools = app.add_subcommand("tools", "Print the analysis tool schemas");
  tools->callback([&] { action = [&] { out << svc().tools().dump(g.json ? -1 : 2) << '\n'; return 0; }; });
  auto* schema = app.add_subcommand("schema", "Print the HTTP API schema");
  schema->callback([&] { action = [&] { out << Service::schema().dump(g.json ? -1 : 2) << '\n'; return 0; }; });

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
  std::string serve_host;
  std::optional<int> serve_port;
  serve_cmd->add_option("--host", serve_host);
  serve_cmd->add_option("--port", serve_port, "0 picks a free port");
  serve_cmd->callback([&] {
    action = [&] {
      Service& s = svc();
      const std::string host = serve_host.empty() ? s.config().host : serve_host;
      return serve_blocking(s, host, serve_port.value_or(s.config().port), g.json, out);
    };
  });

  try {
    app.parse(argc, argv);
    if (!action) return 2;
    return action();
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  } catch (const Error& e) {
    if (g.json) out << error_json(e).dump() << '\n';
    err << "error: " << to_string(e.code()) << ": " << e.what();
    if (!e.detail().empty() && e.detail() != e.what()) err << " (" << e.detail() << ")";
    err << '\n';
    return 1;
  } catch (const Json::exception& e) {
    err << "error: invalid_argument: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: internal: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace lexstat
