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


// HTTP binding of the service API.

#include <atomic>
#include <sstream>

#include <httplib.h>

#include "lexstat/service.hpp"
#include "lexstat/text.hpp"

namespace lexstat {

namespace {

std::atomic<httplib::Server*> g_server{nullptr};

void send_json(httplib::Response& res, const Json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

Json parse_body(const httplib::Request& req) {
  if (text::trim(req.body).empty()) return Json::object();
  try {
    return Json::parse(req.body);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, "request body is not valid JSON", e.what());
  }
}

bool wants_wait(const httplib::Request& req) {
  if (!req.has_param("wait")) return false;
  const auto v = req.get_param_value("wait");
  return v != "0" && v != "false";
}

using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

// Maps library errors onto `{code,message,detail}` bodies.
Handler wrap(std::function<void(const httplib::Request&, httplib::Response&)> fn) {
  return [fn = std::move(fn)](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const Error& e) {
      send_json(res, error_json(e), http_status(e.code()));
    } catch (const Json::exception& e) {
      send_json(res, error_json(Error(ErrorCode::kInvalidArgument, "malformed request", e.what())),
                400);
    } catch (const std::exception& e) {
      send_json(res, error_json(Error(ErrorCode::kInternal, e.what())), 500);
    }
  };
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (auto t = text::trim(item); !t.empty()) out.emplace_back(t);
  }
  return out;
}

void install_routes(httplib::Server& srv, Service& svc) {
  srv.Get("/health", wrap([](const auto&, auto& res) { send_json(res, {{"ok", true}}); }));
  srv.Get("/schema", wrap([](const auto&, auto& res) { send_json(res, Service::schema()); }));
  srv.Get("/tools", wrap([&svc](const auto&, auto& res) { send_json(res, svc.tools()); }));

  srv.Get("/corpora", wrap([&svc](const auto&, auto& res) { send_json(res, svc.list_corpora()); }));
  srv.Post("/corpora", wrap([&svc](const httplib::Request& req, auto& res) {
             std::string corpus_id = req.get_param_value("corpus_id");
             std::string jsonl = req.body;
             // A JSON object with a documents array, or raw JSONL.
             try {
               const Json j = Json::parse(req.body);
               if (j.is_object() && j.contains("documents")) {
                 if (corpus_id.empty()) corpus_id = j.value("corpus_id", std::string{});
                 jsonl.clear();
                 for (const auto& d : j.at("documents")) jsonl += d.dump() + "\n";
               }
             } catch (const Json::exception&) {
             }
             std::istringstream in(jsonl);
             send_json(res, svc.ingest(in, corpus_id), 201);
           }));

  srv.Get(R"(/corpora/([^/]+)/ontology)", wrap([&svc](const httplib::Request& req, auto& res) {
            send_json(res, svc.get_ontology(req.matches[1]));
          }));
  srv.Put(R"(/corpora/([^/]+)/ontology)", wrap([&svc](const httplib::Request& req, auto& res) {
            send_json(res, svc.put_ontology(req.matches[1], parse_body(req)));
          }));

  srv.Get(R"(/corpora/([^/]+)/documents)", wrap([&svc](const httplib::Request& req, auto& res) {
            Json q = Json::object();
            if (req.has_param("query")) q["query"] = req.get_param_value("query");
            if (req.has_param("terms")) q["terms"] = split_csv(req.get_param_value("terms"));
            if (req.has_param("top_k")) {
              try {
                q["top_k"] = std::stoul(req.get_param_value("top_k"));
              } catch (const std::exception&) {
                throw Error(ErrorCode::kInvalidArgument, "top_k must be a positive integer");
              }
            }
            Json filters = Json::object();
            for (const auto& [k, v] : req.params) {
              if (k.rfind("filter.", 0) == 0) filters[k.substr(7)] = v;
            }
            if (!filters.empty()) q["filters"] = std::move(filters);
            send_json(res, svc.search(req.matches[1], q));
          }));
  srv.Get(R"(/corpora/([^/]+)/documents/([^/]+))",
          wrap([&svc](const httplib::Request& req, auto& res) {
            send_json(res, svc.get_document(req.matches[1], req.matches[2]));
          }));

  srv.Get(R"(/corpora/([^/]+)/labels)", wrap([&svc](const httplib::Request& req, auto& res) {
            Json q = Json::object();
            if (req.has_param("provenance")) q["provenance"] = req.get_param_value("provenance");
            if (req.has_param("include_stale")) {
              q["include_stale"] = req.get_param_value("include_stale") != "false";
            }
            send_json(res, svc.get_labels(req.matches[1], q));
          }));
  srv.Put(R"(/corpora/([^/]+)/labels/([^/]+))",
          wrap([&svc](const httplib::Request& req, auto& res) {
            send_json(res, svc.put_label(req.matches[1], req.matches[2], parse_body(req)));
          }));

  srv.Post(R"(/corpora/([^/]+)/augment)", wrap([&svc](const httplib::Request& req, auto& res) {
             const bool wait = wants_wait(req);
             send_json(res, svc.augment(req.matches[1], parse_body(req), wait), wait ? 200 : 202);
           }));
  srv.Post(R"(/corpora/([^/]+)/extract)", wrap([&svc](const httplib::Request& req, auto& res) {
             const bool wait = wants_wait(req);
             send_json(res, svc.extract(req.matches[1], parse_body(req), wait), wait ? 200 : 202);
           }));

  srv.Get("/jobs", wrap([&svc](const auto&, auto& res) { send_json(res, svc.jobs()); }));
  srv.Post("/jobs/train", wrap([&svc](const httplib::Request& req, auto& res) {
             const bool wait = wants_wait(req);
             send_json(res, svc.train(parse_body(req), wait), wait ? 200 : 202);
           }));
  srv.Get(R"(/jobs/([^/]+))", wrap([&svc](const httplib::Request& req, auto& res) {
            send_json(res, wants_wait(req) ? svc.wait_job(req.matches[1]) : svc.job(req.matches[1]));
          }));

  srv.Post("/eval", wrap([&svc](const httplib::Request& req, auto& res) {
             send_json(res, svc.eval(parse_body(req)));
           }));
  srv.Post("/analysis/chat", wrap([&svc](const httplib::Request& req, auto& res) {
             send_json(res, svc.chat(parse_body(req)));
           }));
  srv.Post("/cost/curve", wrap([&svc](const httplib::Request& req, auto& res) {
             send_json(res, svc.cost_curve(parse_body(req)));
           }));

  srv.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return;
    const Error e = res.status == 404
                        ? Error(ErrorCode::kNotFound, "no route for " + req.method + " " + req.path)
                        : Error(ErrorCode::kInvalidArgument, "bad request");
    res.set_content(error_json(e).dump(), "application/json");
  });
}

}  // namespace

void serve(Service& service, const std::string& host, int port,
           const std::function<void(int)>& on_ready) {
  httplib::Server srv;
  install_routes(srv, service);
  const int bound = port == 0 ? srv.bind_to_any_port(host) : (srv.bind_to_port(host, port) ? port : -1);
  if (bound < 0) {
    throw Error(ErrorCode::kPrecondition,
                "cannot listen on " + host + ":" + std::to_string(port), "address in use?");
  }
  g_server.store(&srv);
  if (on_ready) on_ready(bound);
  srv.listen_after_bind();
  g_server.store(nullptr);
}

void stop_serving() {
  if (auto* s = g_server.load()) s->stop();
}

}  // namespace lexstat
