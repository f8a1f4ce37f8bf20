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


#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>
#include <string>
#include <vector>

#include "lexstat/cli.hpp"
#include "lexstat/error.hpp"
#include "lexstat/evaluator.hpp"
#include "lexstat/service.hpp"

namespace py = pybind11;
using lexstat::Json;

namespace {

// Set from Python so the package owns the exception type.
py::object& error_class() {
  static py::object cls;
  return cls;
}

Json parse_arg(const std::string& s) { return s.empty() ? Json::object() : Json::parse(s); }

// Every call crosses the boundary as JSON text; the GIL is released while
// the core runs.
template <typename Fn>
std::string call(Fn&& fn) {
  Json out;
  {
    py::gil_scoped_release nogil;
    out = lexstat::guarded(std::forward<Fn>(fn));
  }
  return out.dump();
}

class PyService {
 public:
  explicit PyService(const std::string& config_json) {
    auto cfg = lexstat::ServiceConfig::from_json(parse_arg(config_json));
    cfg.apply_env();
    svc_ = std::make_unique<lexstat::Service>(std::move(cfg));
  }

  std::string config() const { return Json(svc_->config()).dump(); }
  std::string ingest(const std::string& jsonl, const std::string& corpus_id) {
    return call([&] {
      std::istringstream in(jsonl);
      return svc_->ingest(in, corpus_id);
    });
  }
  std::string list_corpora() { return call([&] { return svc_->list_corpora(); }); }
  std::string get_ontology(const std::string& c) { return call([&] { return svc_->get_ontology(c); }); }
  std::string put_ontology(const std::string& c, const std::string& body) {
    return call([&] { return svc_->put_ontology(c, parse_arg(body)); });
  }
  std::string search(const std::string& c, const std::string& body) {
    return call([&] { return svc_->search(c, parse_arg(body)); });
  }
  std::string get_document(const std::string& c, const std::string& d) {
    return call([&] { return svc_->get_document(c, d); });
  }
  std::string put_label(const std::string& c, const std::string& d, const std::string& body) {
    return call([&] { return svc_->put_label(c, d, parse_arg(body)); });
  }
  std::string get_labels(const std::string& c, const std::string& q) {
    return call([&] { return svc_->get_labels(c, parse_arg(q)); });
  }
  std::string augment(const std::string& c, const std::string& body, bool wait) {
    return call([&] { return svc_->augment(c, parse_arg(body), wait); });
  }
  std::string train(const std::string& body, bool wait) {
    return call([&] { return svc_->train(parse_arg(body), wait); });
  }
  std::string extract(const std::string& c, const std::string& body, bool wait) {
    return call([&] { return svc_->extract(c, parse_arg(body), wait); });
  }
  std::string job(const std::string& id) { return call([&] { return svc_->job(id); }); }
  std::string wait_job(const std::string& id) { return call([&] { return svc_->wait_job(id); }); }
  std::string jobs() { return call([&] { return svc_->jobs(); }); }
  std::string eval(const std::string& body) { return call([&] { return svc_->eval(parse_arg(body)); }); }
  std::string chat(const std::string& body) { return call([&] { return svc_->chat(parse_arg(body)); }); }
  std::string cost_curve(const std::string& body) {
    return call([&] { return svc_->cost_curve(parse_arg(body)); });
  }
  std::string tools() { return call([&] { return svc_->tools(); }); }

 private:
  std::unique_ptr<lexstat::Service> svc_;
};

py::tuple run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"lexstat"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  int rc;
  {
    py::gil_scoped_release nogil;
    rc = lexstat::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  }
  return py::make_tuple(rc, out.str(), err.str());
}

}  // namespace

PYBIND11_MODULE(_lexstat, m) {
  m.doc() = "lexstat core bindings; structured values cross as JSON text.";
  m.attr("__version__") = LEXSTAT_VERSION;

  m.def("_set_error_class", [](py::object cls) { error_class() = std::move(cls); });
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const lexstat::Error& e) {
      if (!error_class()) {
        PyErr_SetString(PyExc_RuntimeError, e.what());
        return;
      }
      py::object exc = error_class()(std::string(lexstat::to_string(e.code())), e.what(), e.detail());
      PyErr_SetObject(error_class().ptr(), exc.ptr());
    }
  });

  m.def("normalize_value", [](const std::string& raw, const std::string& kind) {
    return lexstat::normalize_value(raw, lexstat::field_kind_from_string(kind));
  });
  m.def("eval_request", [](const std::string& body) {
    return call([&] { return lexstat::eval_request(parse_arg(body), nullptr); });
  });
  m.def("cost_curve_request", [](const std::string& body) {
    return call([&] { return lexstat::cost_curve_request(parse_arg(body), lexstat::ServiceConfig{}); });
  });
  m.def("schema", [] { return lexstat::Service::schema().dump(); });
  m.def("run_cli", &run_cli, py::arg("args"));

  py::class_<PyService>(m, "Service")
      .def(py::init<const std::string&>(), py::arg("config_json") = "")
      .def("config", &PyService::config)
      .def("ingest", &PyService::ingest)
      .def("list_corpora", &PyService::list_corpora)
      .def("get_ontology", &PyService::get_ontology)
      .def("put_ontology", &PyService::put_ontology)
      .def("search", &PyService::search)
      .def("get_document", &PyService::get_document)
      .def("put_label", &PyService::put_label)
      .def("get_labels", &PyService::get_labels)
      .def("augment", &PyService::augment)
      .def("train", &PyService::train)
      .def("extract", &PyService::extract)
      .def("job", &PyService::job)
      .def("wait_job", &PyService::wait_job)
      .def("jobs", &PyService::jobs)
      .def("eval", &PyService::eval)
      .def("chat", &PyService::chat)
      .def("cost_curve", &PyService::cost_curve)
      .def("tools", &PyService::tools);
}
