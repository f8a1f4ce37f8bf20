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

#include "lexstat/types.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <set>

#include "lexstat/error.hpp"
#include "lexstat/text.hpp"

namespace lexstat {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kValidation: return "validation";
    case ErrorCode::kNotFound: return "not_found";
    case ErrorCode::kConflict: return "conflict";
    case ErrorCode::kPrecondition: return "precondition";
    case ErrorCode::kContextLength: return "context_length";
    case ErrorCode::kAuth: return "auth";
    case ErrorCode::kTransient: return "transient";
    case ErrorCode::kTimeout: return "timeout";
    case ErrorCode::kParseFailure: return "parse_failure";
    case ErrorCode::kToolRouting: return "tool_routing";
    case ErrorCode::kInternal: return "internal";
  }
  return "internal";
}

namespace {

constexpr std::pair<FieldKind, std::string_view> kKindNames[] = {
    {FieldKind::kNumeric, "numeric"},         {FieldKind::kMoney, "money"},
    {FieldKind::kDuration, "duration"},       {FieldKind::kCategorical, "categorical"},
    {FieldKind::kFreeText, "free-text"},      {FieldKind::kLabelSet, "label-set"},
};

const std::vector<std::string> kNoValues;

}  // namespace

std::string_view to_string(FieldKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "free-text";
}

FieldKind field_kind_from_string(std::string_view s) {
  for (const auto& [k, name] : kKindNames) {
    if (name == s) return k;
  }
  if (s == "free_text" || s == "text") return FieldKind::kFreeText;
  if (s == "label_set") return FieldKind::kLabelSet;
  throw Error(ErrorCode::kInvalidArgument, "unknown field kind: " + std::string(s));
}

bool is_numeric_kind(FieldKind kind) {
  return kind == FieldKind::kNumeric || kind == FieldKind::kMoney ||
         kind == FieldKind::kDuration;
}

std::string canonical_field_name(std::string_view raw) {
  std::string name;
  bool in_space = false;
  for (char c : text::trim(raw)) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      in_space = true;
      continue;
    }
    if (in_space) name.push_back('_');
    in_space = false;
    name.push_back(c);
  }
  const bool ok = !name.empty() && std::all_of(name.begin(), name.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
           (c >= '0' && c <= '9') || c == '_' || c == '-';
  });
  if (!ok) {
    throw Error(ErrorCode::kInvalidArgument,
                "field name must match [A-Za-z0-9_-]+: '" + std::string(raw) + "'",
                std::string(raw));
  }
  return name;
}

std::string_view to_string(Language lang) {
  return lang == Language::kKorean ? "ko" : "en";
}

Language language_from_string(std::string_view s) {
  if (s == "ko" || s == "kor" || s == "korean") return Language::kKorean;
  if (s.empty() || s == "en" || s == "eng" || s == "english") return Language::kEnglish;
  throw Error(ErrorCode::kInvalidArgument, "unknown language tag: " + std::string(s));
}

const FieldSpec* Ontology::find(std::string_view name) const {
  for (const auto& f : fields) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

std::vector<std::string> Ontology::field_names() const {
  std::vector<std::string> out;
  out.reserve(fields.size());
  for (const auto& f : fields) out.push_back(f.name);
  return out;
}

void Ontology::validate() const {
  if (fields.empty()) {
    throw Error(ErrorCode::kValidation, "ontology must define at least one field");
  }
  std::set<std::string> seen;
  for (const auto& f : fields) {
    if (canonical_field_name(f.name) != f.name) {
      throw Error(ErrorCode::kValidation, "field name is not canonical: " + f.name, f.name);
    }
    if (!seen.insert(f.name).second) {
      throw Error(ErrorCode::kConflict, "duplicate field name: " + f.name, f.name);
    }
  }
}

const std::vector<std::string>& Parse::get(std::string_view field) const {
  auto it = values.find(std::string(field));
  return it == values.end() ? kNoValues : it->second;
}

bool Parse::empty() const {
  return std::all_of(values.begin(), values.end(),
                     [](const auto& kv) { return kv.second.empty(); });
}

void Parse::canonicalize(const Ontology& ontology) {
  for (const auto& f : ontology.fields) values.try_emplace(f.name);
}

bool Parse::equivalent(const Parse& other) const {
  auto covered = [](const Parse& a, const Parse& b) {
    for (const auto& [k, v] : a.values) {
      if (v != b.get(k)) return false;
    }
    return true;
  };
  return covered(*this, other) && covered(other, *this);
}

void validate_parse(const Parse& parse, const Ontology& ontology) {
  for (const auto& [name, vals] : parse.values) {
    const FieldSpec* spec = ontology.find(name);
    if (spec == nullptr) {
      throw Error(ErrorCode::kValidation, "unknown field: " + name, name);
    }
    if (!spec->multi_valued && vals.size() > 1) {
      throw Error(ErrorCode::kValidation,
                  "single-valued field has " + std::to_string(vals.size()) +
                      " values: " + name,
                  name);
    }
  }
}

bool covers_all_fields(const Parse& parse, const Ontology& ontology) {
  return std::all_of(ontology.fields.begin(), ontology.fields.end(),
                     [&](const FieldSpec& f) { return !parse.get(f.name).empty(); });
}

namespace {

void render_entry(std::string& out, bool& first, const std::string& name,
                  const std::vector<std::string>& vals) {
  if (vals.empty()) return;
  if (!first) out += ", ";
  first = false;
  out += Json(name).dump();
  out += ": [";
  for (std::size_t i = 0; i < vals.size(); ++i) {
    if (i > 0) out += ", ";
    out += Json(vals[i]).dump();
  }
  out += "]";
}

}  // namespace

std::string canonical_parse_json(const Parse& parse, const Ontology& ontology) {
  std::string out = "{";
  bool first = true;
  for (const auto& f : ontology.fields) render_entry(out, first, f.name, parse.get(f.name));
  out += "}";
  return out;
}

std::string canonical_parse_json(const Parse& parse) {
  std::string out = "{";
  bool first = true;
  for (const auto& [name, vals] : parse.values) render_entry(out, first, name, vals);
  out += "}";
  return out;
}

std::string_view to_string(Provenance p) {
  return p == Provenance::kHuman ? "human" : "llm";
}

Provenance provenance_from_string(std::string_view s) {
  if (s == "human") return Provenance::kHuman;
  if (s == "llm") return Provenance::kLlm;
  throw Error(ErrorCode::kInvalidArgument, "unknown provenance: " + std::string(s));
}

std::string now_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void to_json(Json& j, const Document& d) {
  j = Json{{"doc_id", d.doc_id}, {"body", d.body}};
  if (!d.meta.empty()) j["meta"] = d.meta;
}

void from_json(const Json& j, Document& d) {
  d.doc_id = j.value("doc_id", std::string{});
  d.body = j.at("body").get<std::string>();
  d.meta.clear();
  if (auto it = j.find("meta"); it != j.end() && !it->is_null()) {
    for (const auto& [k, v] : it->items()) {
      d.meta[k] = v.is_string() ? v.get<std::string>() : v.dump();
    }
  }
}

void to_json(Json& j, const FieldSpec& f) {
  j = Json{{"name", f.name},
           {"kind", to_string(f.kind)},
           {"multi_valued", f.multi_valued},
           {"description", f.description}};
}

void from_json(const Json& j, FieldSpec& f) {
  f.name = canonical_field_name(j.at("name").get<std::string>());
  f.kind = field_kind_from_string(j.value("kind", std::string("free-text")));
  f.multi_valued = j.value("multi_valued", true);
  f.description = j.value("description", std::string{});
}

void to_json(Json& j, const Ontology& o) {
  j = Json{{"task_description", o.task_description},
           {"fields", o.fields},
           {"version", o.version},
           {"language", to_string(o.language)}};
}

void from_json(const Json& j, Ontology& o) {
  o.task_description = j.value("task_description", std::string{});
  o.fields = j.at("fields").get<std::vector<FieldSpec>>();
  o.version = j.value("version", std::int64_t{0});
  o.language = language_from_string(j.value("language", std::string("en")));
}

void to_json(Json& j, const Parse& p) {
  j = Json::object();
  for (const auto& [k, v] : p.values) {
    if (!v.empty()) j[k] = v;
  }
}

void from_json(const Json& j, Parse& p) {
  if (!j.is_object()) {
    throw Error(ErrorCode::kInvalidArgument, "parse must be a JSON object");
  }
  p.values.clear();
  for (const auto& [k, v] : j.items()) {
    auto& out = p.values[k];
    auto push = [&](const Json& x) {
      if (x.is_string()) {
        out.push_back(x.get<std::string>());
      } else if (!x.is_null()) {
        out.push_back(x.dump());
      }
    };
    if (v.is_array()) {
      for (const auto& x : v) push(x);
    } else {
      push(v);
    }
  }
}

void to_json(Json& j, const LabeledExample& e) {
  j = Json{{"doc_id", e.doc_id},
           {"provenance", to_string(e.provenance)},
           {"parse", e.parse},
           {"labeler_meta", e.labeler_meta},
           {"created_at", e.created_at},
           {"version", e.version},
           {"ontology_version", e.ontology_version},
           {"stale", e.stale}};
}

void from_json(const Json& j, LabeledExample& e) {
  e.doc_id = j.at("doc_id").get<std::string>();
  e.provenance = provenance_from_string(j.value("provenance", std::string("human")));
  e.parse = j.at("parse").get<Parse>();
  e.labeler_meta = j.value("labeler_meta", std::string{});
  e.created_at = j.value("created_at", std::string{});
  e.version = j.value("version", std::int64_t{0});
  e.ontology_version = j.value("ontology_version", std::int64_t{0});
  e.stale = j.value("stale", false);
}

}  // namespace lexstat
