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

// Value normalization and field-level / label-set scoring.
//
// Field-level scoring treats each field's values in a document as a
// multiset. After normalization by field kind,
//
//   TP = sum over docs of |pred ∩ gold|   (multiset intersection)
//   FP = sum over docs of |pred| - |pred ∩ gold|
//   FN = sum over docs of |gold| - |pred ∩ gold|
//
// and P, R, F1 are the usual ratios, each defined as 0 when its denominator
// is 0. Exact string match after normalization is the only notion of a hit.

#ifndef LEXSTAT_EVALUATOR_HPP_
#define LEXSTAT_EVALUATOR_HPP_

#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "lexstat/types.hpp"

namespace lexstat {

class LlmGateway;

struct NormalizedValue {
  std::string value;
  bool flagged = false;  // no rule applied; value is the trimmed input
};

/// Rule-based canonicalization by field kind:
///   money     -> integer amount, separators/currency stripped ("5,000,000 won" -> "5000000")
///   duration  -> integer months; leftover days as "Nd" ("2 years" -> "24", "45 days" -> "45d")
///   numeric   -> decimal without trailing zeros, unit suffix kept ("0.120%" -> "0.12%")
///   others    -> trimmed, case-folded, whitespace collapsed
/// When `fallback` is given and the rules fail, the normalization model is
/// asked to rewrite the value and the rules run once more on its answer.
NormalizedValue normalize(std::string_view raw, FieldKind kind, LlmGateway* fallback = nullptr);

std::string normalize_value(std::string_view raw, FieldKind kind);

/// Applies `normalize_value` to every value of every ontology field.
Parse normalize_parse(const Parse& parse, const Ontology& ontology);

struct FieldScore {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;  // gold values

  void finish();
};

struct EvalReport {
  std::vector<std::pair<std::string, FieldScore>> per_field;  // ontology order
  double average_f1 = 0.0;  // over fields not excluded
  std::vector<std::string> excluded_fields;
  std::size_t documents = 0;

  const FieldScore& field(std::string_view name) const;
};

void to_json(Json& j, const EvalReport& r);
void write_csv(std::ostream& out, const EvalReport& r);

using ParseMap = std::map<std::string, Parse>;

/// Scores over the union of documents in `pred` and `gold`; a missing side
/// counts as an empty parse. Throws kValidation for fields outside the
/// ontology.
EvalReport field_f1_report(const ParseMap& pred, const ParseMap& gold, const Ontology& ontology,
                           const std::set<std::string>& exclude = {});

struct LabelCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double f1 = 0.0;
};

struct ClassificationReport {
  double micro_precision = 0.0;
  double micro_recall = 0.0;
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
  std::map<std::string, LabelCounts> per_label;
};

void to_json(Json& j, const ClassificationReport& r);

using LabelSetMap = std::map<std::string, std::set<std::string>>;

/// Micro F1 over pooled counts; macro F1 is the unweighted mean over labels
/// observed on either side.
ClassificationReport classification_report(const LabelSetMap& pred, const LabelSetMap& gold);

/// Reads labels-export style JSONL (`{"doc_id", "parse": {...}}`); also
/// accepts `"target"` (training/prediction files) or `"values"` (structured
/// tables). Later lines win.
ParseMap load_parses_jsonl(std::istream& in);

/// Ontology with every field seen in `maps`, kind categorical, multi-valued.
Ontology infer_ontology(const std::vector<const ParseMap*>& maps);

}  // namespace lexstat

#endif  // LEXSTAT_EVALUATOR_HPP_
