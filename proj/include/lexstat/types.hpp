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

// Core domain values: documents, ontologies, parses and labels.

#ifndef LEXSTAT_TYPES_HPP_
#define LEXSTAT_TYPES_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace lexstat {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

struct Document {
  std::string doc_id;
  std::string body;
  std::map<std::string, std::string> meta;

  bool operator==(const Document&) const = default;
};

enum class FieldKind { kNumeric, kMoney, kDuration, kCategorical, kFreeText, kLabelSet };

std::string_view to_string(FieldKind kind);
FieldKind field_kind_from_string(std::string_view s);

/// True for kinds whose normalized values coerce to numbers.
bool is_numeric_kind(FieldKind kind);

struct FieldSpec {
  std::string name;
  FieldKind kind = FieldKind::kFreeText;
  bool multi_valued = true;
  std::string description;

  bool operator==(const FieldSpec&) const = default;
};

/// Trims and replaces internal whitespace runs with '_'. Throws
/// kInvalidArgument if the result is not `[A-Za-z0-9_-]+`.
std::string canonical_field_name(std::string_view raw);

/// Prompt language. English is the default rendering.
enum class Language { kEnglish, kKorean };

std::string_view to_string(Language lang);
Language language_from_string(std::string_view s);

struct Ontology {
  std::string task_description;
  std::vector<FieldSpec> fields;
  std::int64_t version = 0;
  Language language = Language::kEnglish;

  const FieldSpec* find(std::string_view name) const;
  bool has(std::string_view name) const { return find(name) != nullptr; }
  std::vector<std::string> field_names() const;

  /// Throws kValidation on empty field list, duplicate or malformed names.
  void validate() const;

  bool operator==(const Ontology&) const = default;
};

/// field name -> ordered values. A field that is absent and a field with an
/// empty list mean the same thing; `canonicalize` makes every ontology field
/// present.
struct Parse {
  std::map<std::string, std::vector<std::string>> values;

  const std::vector<std::string>& get(std::string_view field) const;
  bool empty() const;

  /// Adds empty lists for ontology fields that are absent.
  void canonicalize(const Ontology& ontology);

  /// Equality that treats absent and empty fields alike.
  bool equivalent(const Parse& other) const;

  bool operator==(const Parse&) const = default;
};

/// Throws kValidation naming the first unknown field, or a single-valued
/// field carrying more than one value.
void validate_parse(const Parse& parse, const Ontology& ontology);

/// True when every ontology field has at least one value.
bool covers_all_fields(const Parse& parse, const Ontology& ontology);

/// `{"F1": ["v1", "v2"], "F2": ["v"]}` with fields in ontology order and
/// empty fields omitted. This is the format shown to the LLM and used as
/// the training target.
std::string canonical_parse_json(const Parse& parse, const Ontology& ontology);

/// Same rendering without an ontology: keys in lexicographic order.
std::string canonical_parse_json(const Parse& parse);

enum class Provenance { kHuman, kLlm };

std::string_view to_string(Provenance p);
Provenance provenance_from_string(std::string_view s);

struct LabeledExample {
  std::string doc_id;
  Parse parse;
  Provenance provenance = Provenance::kHuman;
  std::string labeler_meta;
  std::string created_at;  // ISO-8601 UTC
  std::int64_t version = 0;
  std::int64_t ontology_version = 0;
  bool stale = false;

  bool operator==(const LabeledExample&) const = default;
};

std::string now_iso8601();

// JSON mapping. Parses serialize with empty fields omitted.
void to_json(Json& j, const Document& d);
void from_json(const Json& j, Document& d);
void to_json(Json& j, const FieldSpec& f);
void from_json(const Json& j, FieldSpec& f);
void to_json(Json& j, const Ontology& o);
void from_json(const Json& j, Ontology& o);
void to_json(Json& j, const Parse& p);
void from_json(const Json& j, Parse& p);
void to_json(Json& j, const LabeledExample& e);
void from_json(const Json& j, LabeledExample& e);

}  // namespace lexstat

#endif  // LEXSTAT_TYPES_HPP_
