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


#include "lexstat/analysis.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <set>

#include "lexstat/corpus_store.hpp"
#include "lexstat/error.hpp"
#include "lexstat/evaluator.hpp"
#include "lexstat/search_index.hpp"
#include "lexstat/text.hpp"

namespace lexstat {

namespace {

std::optional<double> leading_number(std::string_view s) {
  double v = 0;
  const auto* begin = s.data();
  const auto* end = s.data() + s.size();
  if (begin != end && *begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr == begin) return std::nullopt;
  return v;
}

bool is_text_kind(FieldKind k) {
  return k == FieldKind::kCategorical || k == FieldKind::kFreeText || k == FieldKind::kLabelSet;
}

const FieldSpec& resolve_field(const Ontology& o, std::string_view name) {
  if (const auto* f = o.find(std::string(name))) return *f;
  const auto folded = text::fold_case(name);
  for (const auto& f : o.fields) {
    if (text::fold_case(f.name) == folded) return f;
  }
  throw Error(ErrorCode::kValidation, "unknown field '" + std::string(name) + "'",
              std::string(name));
}

std::string num(double v) {
  if (std::isfinite(v) && std::fabs(v) < 1e15 && v == std::floor(v)) {
    return std::to_string(static_cast<long long>(v));
  }
  return Json(v).dump();
}

const StructuredTable& require_table(const AnalysisSession& s) {
  if (!s.table) {
    throw Error(ErrorCode::kPrecondition,
                "no structured table is bound to this session; run extraction first");
  }
  return *s.table;
}

}  // namespace

std::optional<double> coerce_number(std::string_view value, FieldKind kind) {
  if (is_text_kind(kind)) return std::nullopt;
  const auto n = normalize(value, kind);
  if (n.flagged) return std::nullopt;
  const std::string& s = n.value;
  if (kind == FieldKind::kDuration) {
    // "24", "45d", "1m15d"
    double months = 0;
    std::string_view rest = s;
    auto first = leading_number(rest);
    if (!first) return std::nullopt;
    const auto unit_pos = rest.find_first_not_of("0123456789.-");
    if (unit_pos == std::string_view::npos) return *first;
    if (rest[unit_pos] == 'd') return *first / 30.0;
    if (rest[unit_pos] != 'm') return std::nullopt;
    months = *first;
    rest.remove_prefix(unit_pos + 1);
    auto days = leading_number(rest);
    if (!days) return std::nullopt;
    return months + *days / 30.0;
  }
  return leading_number(s);
}

// -- conditions ------------------------------------------------------------------

namespace {

const std::map<std::string, Condition::Op>& op_names() {
  static const std::map<std::string, Condition::Op> m = {
      {"eq", Condition::Op::kEq},   {"=", Condition::Op::kEq},
      {"==", Condition::Op::kEq},   {"ne", Condition::Op::kNe},
      {"!=", Condition::Op::kNe},   {"contains", Condition::Op::kContains},
      {"gt", Condition::Op::kGt},   {">", Condition::Op::kGt},
      {"gte", Condition::Op::kGte}, {">=", Condition::Op::kGte},
      {"lt", Condition::Op::kLt},   {"<", Condition::Op::kLt},
      {"lte", Condition::Op::kLte}, {"<=", Condition::Op::kLte},
      {"exists", Condition::Op::kExists}};
  return m;
}

std::string_view op_name(Condition::Op op) {
  switch (op) {
    case Condition::Op::kEq: return "eq";
    case Condition::Op::kNe: return "ne";
    case Condition::Op::kContains: return "contains";
    case Condition::Op::kGt: return "gt";
    case Condition::Op::kGte: return "gte";
    case Condition::Op::kLt: return "lt";
    case Condition::Op::kLte: return "lte";
    case Condition::Op::kExists: return "exists";
  }
  return "eq";
}

std::string value_text(const Json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

bool value_matches(const std::string& cell, const Condition& c, const FieldSpec& f) {
  switch (c.op) {
    case Condition::Op::kExists: return true;
    case Condition::Op::kContains:
      return text::contains_ci(cell, value_text(c.value));
    case Condition::Op::kEq:
    case Condition::Op::kNe: {
      bool eq;
      const auto a = coerce_number(cell, f.kind);
      const auto b = coerce_number(value_text(c.value), f.kind);
      if (a && b) {
        eq = *a == *b;
      } else {
        eq = cell == normalize_value(value_text(c.value), f.kind);
      }
      return c.op == Condition::Op::kEq ? eq : !eq;
    }
    default: break;
  }
  const auto a = coerce_number(cell, f.kind);
  std::optional<double> b =
      c.value.is_number() ? std::optional<double>(c.value.get<double>())
                          : coerce_number(value_text(c.value), f.kind);
  if (!a || !b) return false;
  switch (c.op) {
    case Condition::Op::kGt: return *a > *b;
    case Condition::Op::kGte: return *a >= *b;
    case Condition::Op::kLt: return *a < *b;
    case Condition::Op::kLte: return *a <= *b;
    default: return false;
  }
}

bool row_matches(const TableRow& row, const std::vector<Condition>& where, const Ontology& o) {
  for (const auto& c : where) {
    const auto& f = resolve_field(o, c.field);
    const auto& vals = row.values.get(f.name);
    if (c.op == Condition::Op::kNe) {
      // ne: no value equals
      Condition eq = c;
      eq.op = Condition::Op::kEq;
      if (std::any_of(vals.begin(), vals.end(),
                      [&](const std::string& v) { return value_matches(v, eq, f); })) {
        return false;
      }
      continue;
    }
    if (!std::any_of(vals.begin(), vals.end(),
                     [&](const std::string& v) { return value_matches(v, c, f); })) {
      return false;
    }
  }
  return true;
}

}  // namespace

void from_json(const Json& j, Condition& c) {
  if (!j.is_object()) throw Error(ErrorCode::kToolRouting, "condition must be an object");
  if (!j.contains("field") || !j.at("field").is_string()) {
    throw Error(ErrorCode::kToolRouting, "condition needs a string 'field'");
  }
  c.field = j.at("field").get<std::string>();
  const auto op = j.value("op", std::string("eq"));
  auto it = op_names().find(op);
  if (it == op_names().end()) {
    throw Error(ErrorCode::kToolRouting, "unknown condition op '" + op + "'", op);
  }
  c.op = it->second;
  c.value = j.value("value", Json());
  if (c.op != Condition::Op::kExists && !(c.value.is_string() || c.value.is_number())) {
    throw Error(ErrorCode::kToolRouting,
                "condition on '" + c.field + "' needs a string or number 'value'", c.field);
  }
}

void to_json(Json& j, const Condition& c) {
  j = Json{{"field", c.field}, {"op", op_name(c.op)}};
  if (c.op != Condition::Op::kExists) j["value"] = c.value;
}

std::vector<const TableRow*> filter_rows(const StructuredTable& table,
                                         const std::vector<Condition>& where) {
  for (const auto& c : where) resolve_field(table.ontology, c.field);
  std::vector<const TableRow*> out;
  for (const auto& r : table.rows) {
    if (!r.error.empty()) continue;
    if (row_matches(r, where, table.ontology)) out.push_back(&r);
  }
  return out;
}

// -- aggregate ---------------------------------------------------------------------

std::string_view to_string(Stat s) {
  switch (s) {
    case Stat::kCount: return "count";
    case Stat::kMean: return "mean";
    case Stat::kMedian: return "median";
    case Stat::kSum: return "sum";
    case Stat::kMin: return "min";
    case Stat::kMax: return "max";
  }
  return "count";
}

Stat stat_from_string(std::string_view s) {
  for (auto st : {Stat::kCount, Stat::kMean, Stat::kMedian, Stat::kSum, Stat::kMin, Stat::kMax}) {
    if (to_string(st) == s) return st;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown statistic '" + std::string(s) + "'",
              std::string(s));
}

void to_json(Json& j, const AggregateResult& r) {
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"group", row.group ? Json(*row.group) : Json(nullptr)},
                    {"value", row.value ? Json(*row.value) : Json(nullptr)},
                    {"n", row.n}});
  }
  j = Json{{"target", r.target},
           {"stat", to_string(r.stat)},
           {"group_by", r.group_by ? Json(*r.group_by) : Json(nullptr)},
           {"rows", std::move(rows)},
           {"excluded", r.excluded}};
}

namespace {

double compute_stat(Stat stat, std::vector<double> v) {
  switch (stat) {
    case Stat::kCount: return static_cast<double>(v.size());
    case Stat::kSum: {
      double s = 0;
      for (double x : v) s += x;
      return s;
    }
    case Stat::kMean: {
      double s = 0;
      for (double x : v) s += x;
      return s / static_cast<double>(v.size());
    }
    case Stat::kMedian: {
      std::sort(v.begin(), v.end());
      const auto m = v.size() / 2;
      return v.size() % 2 == 1 ? v[m] : (v[m - 1] + v[m]) / 2.0;
    }
    case Stat::kMin: return *std::min_element(v.begin(), v.end());
    case Stat::kMax: return *std::max_element(v.begin(), v.end());
  }
  return 0.0;
}

}  // namespace

AggregateResult aggregate(const StructuredTable& table, const std::string& target, Stat stat,
                          const std::optional<std::string>& group_by,
                          const std::vector<Condition>& where) {
  AggregateResult res;
  res.stat = stat;
  const FieldSpec* tf = nullptr;
  if (!target.empty() || stat != Stat::kCount) {
    if (target.empty()) throw Error(ErrorCode::kInvalidArgument, "aggregate needs a target field");
    tf = &resolve_field(table.ontology, target);
    res.target = tf->name;
    if (stat != Stat::kCount && is_text_kind(tf->kind)) {
      throw Error(ErrorCode::kValidation,
                  "cannot compute " + std::string(to_string(stat)) + " of " +
                      std::string(to_string(tf->kind)) + " field '" + tf->name + "'",
                  tf->name);
    }
  }
  const FieldSpec* gf = nullptr;
  if (group_by && !group_by->empty()) {
    gf = &resolve_field(table.ontology, *group_by);
    res.group_by = gf->name;
  }

  struct Acc {
    std::vector<double> values;
    std::size_t count = 0;
  };
  std::map<std::string, Acc> groups;
  std::optional<Acc> ungrouped;
  for (const TableRow* row : filter_rows(table, where)) {
    std::vector<Acc*> accs;
    if (gf != nullptr) {
      std::set<std::string> keys(row->values.get(gf->name).begin(), row->values.get(gf->name).end());
      for (const auto& k : keys) accs.push_back(&groups[k]);
      if (keys.empty()) {
        if (!ungrouped) ungrouped.emplace();
        accs.push_back(&*ungrouped);
      }
    } else {
      if (!ungrouped) ungrouped.emplace();
      accs.push_back(&*ungrouped);
    }
    if (tf == nullptr) {
      for (auto* a : accs) ++a->count;
      continue;
    }
    for (const auto& v : row->values.get(tf->name)) {
      if (stat == Stat::kCount) {
        for (auto* a : accs) ++a->count;
        continue;
      }
      const auto x = coerce_number(v, tf->kind);
      if (!x) {
        ++res.excluded;
        continue;
      }
      for (auto* a : accs) a->values.push_back(*x);
    }
  }
  if (gf == nullptr && !ungrouped) ungrouped.emplace();

  auto emit = [&](std::optional<std::string> key, const Acc& a) {
    AggregateRow row;
    row.group = std::move(key);
    if (stat == Stat::kCount) {
      row.n = a.count;
      row.value = static_cast<double>(a.count);
    } else {
      row.n = a.values.size();
      if (!a.values.empty()) row.value = compute_stat(stat, a.values);
    }
    res.rows.push_back(std::move(row));
  };
  for (const auto& [k, a] : groups) emit(k, a);
  if (ungrouped) emit(std::nullopt, *ungrouped);
  return res;
}

// -- histogram -----------------------------------------------------------------------

void to_json(Json& j, const Histogram& h) {
  Json bins = Json::array();
  for (const auto& b : h.bins) bins.push_back({{"lo", b.lo}, {"hi", b.hi}, {"count", b.count}});
  j = Json{{"field", h.field},
           {"bins", std::move(bins)},
           {"n", h.n},
           {"non_coercible", h.non_coercible},
           {"out_of_range", h.out_of_range},
           {"excluded", h.excluded()}};
}

Histogram histogram(const StructuredTable& table, const std::string& field, const BinSpec& bins,
                    const std::vector<Condition>& where) {
  const auto& f = resolve_field(table.ontology, field);
  Histogram h;
  h.field = f.name;
  std::vector<double> values;
  for (const TableRow* row : filter_rows(table, where)) {
    for (const auto& v : row->values.get(f.name)) {
      if (auto x = coerce_number(v, f.kind)) {
        values.push_back(*x);
      } else {
        ++h.non_coercible;
      }
    }
  }
  std::vector<double> edges;
  if (const auto* k = std::get_if<std::size_t>(&bins)) {
    if (*k < 1) throw Error(ErrorCode::kInvalidArgument, "bins must be >= 1");
    if (values.empty()) {
      throw Error(ErrorCode::kValidation, "no numeric values in field '" + f.name + "'", f.name);
    }
    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    const double lo = *mn;
    const double hi = *mx;
    for (std::size_t i = 0; i < *k; ++i) {
      edges.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(*k));
    }
    edges.push_back(hi);
  } else {
    edges = std::get<std::vector<double>>(bins);
    if (edges.size() < 2) throw Error(ErrorCode::kInvalidArgument, "edges needs at least 2 values");
    for (std::size_t i = 1; i < edges.size(); ++i) {
      if (!(edges[i] > edges[i - 1])) {
        throw Error(ErrorCode::kInvalidArgument, "edges must be strictly increasing");
      }
    }
    if (values.empty()) {
      throw Error(ErrorCode::kValidation, "no numeric values in field '" + f.name + "'", f.name);
    }
  }
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) h.bins.push_back({edges[i], edges[i + 1], 0});
  for (double x : values) {
    if (x < edges.front() || x > edges.back()) {
      ++h.out_of_range;
      continue;
    }
    std::size_t b;
    if (x >= edges.back()) {
      b = h.bins.size() - 1;
    } else {
      b = static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), x) -
                                   edges.begin()) - 1;
      b = std::min(b, h.bins.size() - 1);
    }
    ++h.bins[b].count;
    ++h.n;
  }
  return h;
}

Json histogram_chart_spec(const Histogram& h) {
  Json values = Json::array();
  for (const auto& b : h.bins) values.push_back({{"bin_lo", b.lo}, {"bin_hi", b.hi}, {"count", b.count}});
  return Json{{"$schema", "https://vega.github.io/schema/vega-lite/v5.json"},
              {"data", {{"values", std::move(values)}}},
              {"mark", "bar"},
              {"encoding",
               {{"x", {{"field", "bin_lo"}, {"type", "quantitative"}, {"title", h.field}}},
                {"x2", {{"field", "bin_hi"}}},
                {"y", {{"field", "count"}, {"type", "quantitative"}}}}}};
}

void write_aggregate_csv(std::ostream& out, const AggregateResult& r) {
  out << "group,value,n\n";
  for (const auto& row : r.rows) {
    out << (row.group ? *row.group : std::string{}) << ','
        << (row.value ? Json(*row.value).dump() : std::string{}) << ',' << row.n << '\n';
  }
}

void write_histogram_csv(std::ostream& out, const Histogram& h) {
  out << "bin_lo,bin_hi,count\n";
  for (const auto& b : h.bins) out << Json(b.lo).dump() << ',' << Json(b.hi).dump() << ',' << b.count << '\n';
}

// -- tools ----------------------------------------------------------------------------

const std::vector<ToolSchema>& analysis_tool_schemas() {
  using T = ToolParam::Type;
  static const std::vector<ToolSchema> schemas = [] {
    ToolParam where{"where", T::kArray,
                    "conditions that must all hold: {\"field\", \"op\": eq|ne|contains|gt|gte|lt|lte|exists, \"value\"}",
                    false, {}, T::kObject};
    std::vector<ToolSchema> s;
    s.push_back({"filter",
                 "List the documents whose structured fields satisfy the conditions.",
                 {where, {"limit", T::kInteger, "maximum number of doc ids to return", false, {}, T::kString}}});
    s.back().params[0].required = true;
    s.push_back({"aggregate",
                 "Compute a statistic of a field, optionally per group of another field.",
                 {{"target", T::kString, "field to aggregate", true, {}, T::kString},
                  {"stat", T::kEnum, "statistic", true,
                   {"count", "mean", "median", "sum", "min", "max"}, T::kString},
                  {"group_by", T::kString, "field to group by", false, {}, T::kString},
                  where}});
    s.push_back({"histogram",
                 "Histogram of a numeric field with equal-width bins or explicit edges.",
                 {{"field", T::kString, "numeric field", true, {}, T::kString},
                  {"bins", T::kInteger, "number of equal-width bins", false, {}, T::kString},
                  {"edges", T::kArray, "explicit bin edges, strictly increasing", false, {},
                   T::kNumber},
                  where}});
    s.push_back({"get_document",
                 "Fetch one document by id, with its extracted fields.",
                 {{"doc_id", T::kString, "document id", true, {}, T::kString}}});
    s.push_back({"search_corpus",
                 "Full-text search over the corpus.",
                 {{"query", T::kString, "natural-language search request", false, {}, T::kString},
                  {"terms", T::kArray, "search terms", false, {}, T::kString},
                  {"filters", T::kObject, "metadata key -> required value", false, {}, T::kString},
                  {"top_k", T::kInteger, "number of hits", false, {}, T::kString}}});
    return s;
  }();
  return schemas;
}

Json analysis_tools_json() {
  Json out = Json::array();
  for (const auto& s : analysis_tool_schemas()) out.push_back(s.to_function_json());
  return out;
}

namespace {

const ToolSchema* find_schema(std::string_view name) {
  for (const auto& s : analysis_tool_schemas()) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

std::vector<Condition> parse_where(const Json& args) {
  std::vector<Condition> out;
  if (auto it = args.find("where"); it != args.end() && !it->is_null()) {
    for (const auto& c : *it) out.push_back(c.get<Condition>());
  }
  return out;
}

std::optional<std::string> opt_string(const Json& args, const char* key) {
  if (auto it = args.find(key); it != args.end() && it->is_string()) return it->get<std::string>();
  return std::nullopt;
}

void check_field(const StructuredTable& t, const std::string& tool, const std::string& name) {
  try {
    resolve_field(t.ontology, name);
  } catch (const Error& e) {
    throw Error(ErrorCode::kToolRouting, tool + ": " + e.what(), name);
  }
}

}  // namespace

void validate_tool_call(const AnalysisSession& session, const ToolCall& call) {
  const ToolSchema* schema = find_schema(call.name);
  if (schema == nullptr) {
    throw Error(ErrorCode::kToolRouting,
                "unknown tool '" + call.name +
                    "'; available: filter, aggregate, histogram, get_document, search_corpus",
                call.name);
  }
  schema->validate_arguments(call.arguments);
  const auto& a = call.arguments;
  const auto where = parse_where(a);
  if (call.name == "filter" || call.name == "aggregate" || call.name == "histogram") {
    const auto& t = require_table(session);
    for (const auto& c : where) check_field(t, call.name, c.field);
    if (call.name == "aggregate") {
      check_field(t, call.name, a.at("target").get<std::string>());
      if (auto g = opt_string(a, "group_by")) check_field(t, call.name, *g);
    }
    if (call.name == "histogram") {
      check_field(t, call.name, a.at("field").get<std::string>());
      const bool has_bins = a.contains("bins") && !a.at("bins").is_null();
      const bool has_edges = a.contains("edges") && !a.at("edges").is_null();
      if (has_bins && has_edges) {
        throw Error(ErrorCode::kToolRouting, "histogram: give either bins or edges, not both");
      }
      if (has_bins && a.at("bins").get<std::int64_t>() < 1) {
        throw Error(ErrorCode::kToolRouting, "histogram: bins must be >= 1");
      }
    }
  }
  if (call.name == "search_corpus") {
    const bool any = opt_string(a, "query").has_value() ||
                     (a.contains("terms") && a.at("terms").is_array() && !a.at("terms").empty()) ||
                     (a.contains("filters") && a.at("filters").is_object() &&
                      !a.at("filters").empty());
    if (!any) throw Error(ErrorCode::kToolRouting, "search_corpus: give a query, terms or filters");
    if (a.contains("filters") && a.at("filters").is_object()) {
      for (const auto& [k, v] : a.at("filters").items()) {
        if (!v.is_string()) {
          throw Error(ErrorCode::kToolRouting, "search_corpus: filter '" + k + "' must be a string", k);
        }
      }
    }
    if (a.contains("top_k") && a.at("top_k").is_number() && a.at("top_k").get<std::int64_t>() < 1) {
      throw Error(ErrorCode::kToolRouting, "search_corpus: top_k must be >= 1");
    }
  }
}

Json execute_tool(AnalysisSession& session, const ToolCall& call) {
  const auto& a = call.arguments;
  if (call.name == "filter") {
    const auto& t = require_table(session);
    const auto rows = filter_rows(t, parse_where(a));
    Json ids = Json::array();
    std::size_t limit = rows.size();
    if (a.contains("limit") && a.at("limit").is_number()) {
      limit = std::min<std::size_t>(limit, static_cast<std::size_t>(
                                               std::max<std::int64_t>(0, a.at("limit").get<std::int64_t>())));
    }
    for (std::size_t i = 0; i < limit; ++i) ids.push_back(rows[i]->doc_id);
    return Json{{"doc_ids", std::move(ids)}, {"n", rows.size()}};
  }
  if (call.name == "aggregate") {
    const auto& t = require_table(session);
    return aggregate(t, a.at("target").get<std::string>(),
                     stat_from_string(a.at("stat").get<std::string>()), opt_string(a, "group_by"),
                     parse_where(a));
  }
  if (call.name == "histogram") {
    const auto& t = require_table(session);
    BinSpec bins = std::size_t{10};
    if (a.contains("edges") && !a.at("edges").is_null()) {
      bins = a.at("edges").get<std::vector<double>>();
    } else if (a.contains("bins") && !a.at("bins").is_null()) {
      const auto k = a.at("bins").get<std::int64_t>();
      if (k < 1) throw Error(ErrorCode::kInvalidArgument, "bins must be >= 1");
      bins = static_cast<std::size_t>(k);
    }
    const auto h = histogram(t, a.at("field").get<std::string>(), bins, parse_where(a));
    Json j = h;
    j["chart"] = histogram_chart_spec(h);
    return j;
  }
  if (call.name == "get_document") {
    if (session.store == nullptr) throw Error(ErrorCode::kPrecondition, "session has no corpus");
    const auto id = a.at("doc_id").get<std::string>();
    const auto doc = session.store->document(session.corpus_id, id);
    Json j = {{"doc_id", doc.doc_id}, {"body", doc.body}, {"meta", doc.meta}};
    if (session.table) {
      if (const auto* row = session.table->find(id)) j["values"] = row->values;
    }
    return j;
  }
  if (call.name == "search_corpus") {
    if (session.store == nullptr) throw Error(ErrorCode::kPrecondition, "session has no corpus");
    SearchQuery q;
    if (a.contains("terms") && a.at("terms").is_array() && !a.at("terms").empty()) {
      q.terms = a.at("terms").get<std::vector<std::string>>();
    } else if (auto query = opt_string(a, "query")) {
      q.terms = extract_search_terms(session.gateway, *query);
    }
    if (a.contains("filters") && a.at("filters").is_object()) {
      q.filters = a.at("filters").get<std::map<std::string, std::string>>();
    }
    if (a.contains("top_k") && a.at("top_k").is_number()) {
      q.top_k = static_cast<std::size_t>(std::max<std::int64_t>(1, a.at("top_k").get<std::int64_t>()));
    }
    const auto index = open_index(*session.store, session.corpus_id);
    Json hits = Json::array();
    for (const auto& h : index->search(q)) hits.push_back(h);
    return Json{{"terms", q.terms}, {"hits", std::move(hits)}};
  }
  throw Error(ErrorCode::kToolRouting, "unknown tool '" + call.name + "'", call.name);
}

void to_json(Json& j, const ChatTurn& t) {
  j = Json{{"query", t.query},
           {"call", t.call ? Json(*t.call) : Json(nullptr)},
           {"result", t.result},
           {"rendering", t.rendering},
           {"llm_calls", t.llm_calls}};
}

std::string render_tool_result(const ToolCall& call, const Json& r) {
  std::string out;
  if (call.name == "aggregate") {
    out = r.at("stat").get<std::string>() + " of " + r.at("target").get<std::string>();
    const bool grouped = !r.at("group_by").is_null();
    if (grouped) out += " by " + r.at("group_by").get<std::string>();
    out += ":";
    bool first = true;
    for (const auto& row : r.at("rows")) {
      out += first ? " " : "; ";
      first = false;
      if (grouped) {
        out += (row.at("group").is_null() ? std::string("(none)") : row.at("group").get<std::string>()) + " = ";
      }
      out += row.at("value").is_null() ? std::string("n/a") : num(row.at("value").get<double>());
      out += " (n=" + std::to_string(row.at("n").get<std::size_t>()) + ")";
    }
    if (const auto ex = r.at("excluded").get<std::size_t>(); ex > 0) {
      out += "; " + std::to_string(ex) + " values could not be read as numbers";
    }
    return out;
  }
  if (call.name == "histogram") {
    out = r.at("field").get<std::string>() + " histogram:";
    const auto& bins = r.at("bins");
    for (std::size_t i = 0; i < bins.size(); ++i) {
      const auto& b = bins[i];
      out += (i == 0 ? " " : "; ");
      out += "[" + num(b.at("lo").get<double>()) + ", " + num(b.at("hi").get<double>()) +
             (i + 1 == bins.size() ? "]" : ")") + " " + std::to_string(b.at("count").get<std::size_t>());
    }
    out += " (n=" + std::to_string(r.at("n").get<std::size_t>()) + ")";
    return out;
  }
  if (call.name == "filter") {
    const auto n = r.at("n").get<std::size_t>();
    out = std::to_string(n) + (n == 1 ? " document matches" : " documents match");
    const auto& ids = r.at("doc_ids");
    for (std::size_t i = 0; i < ids.size() && i < 20; ++i) {
      out += (i == 0 ? ": " : ", ") + ids[i].get<std::string>();
    }
    if (ids.size() > 20) out += ", ...";
    return out;
  }
  if (call.name == "get_document") {
    return r.at("doc_id").get<std::string>() + ": " + r.at("body").get<std::string>();
  }
  if (call.name == "search_corpus") {
    const auto& hits = r.at("hits");
    out = std::to_string(hits.size()) + (hits.size() == 1 ? " hit" : " hits");
    for (std::size_t i = 0; i < hits.size(); ++i) {
      out += (i == 0 ? ": " : ", ") + hits[i].at("doc_id").get<std::string>();
    }
    return out;
  }
  return r.dump();
}

namespace {

std::string analysis_system_prompt(const AnalysisSession& s) {
  std::string p =
      "You help users analyze a structured corpus of documents. Answer every request by calling "
      "exactly one of the available tools.";
  if (s.table) {
    p += "\nFields:";
    for (const auto& f : s.table->ontology.fields) {
      p += "\n- " + f.name + " (" + std::string(to_string(f.kind)) + ")";
      if (!f.description.empty()) p += ": " + f.description;
    }
  }
  return p;
}

void log_turn(const AnalysisSession& s, const ChatTurn& t, const std::string& error) {
  if (s.log_file.empty()) return;
  std::error_code ec;
  std::filesystem::create_directories(s.log_file.parent_path(), ec);
  Json j = t;
  j["at"] = now_iso8601();
  if (!error.empty()) j["error"] = error;
  std::ofstream(s.log_file, std::ios::app) << j.dump() << '\n';
}

}  // namespace

ChatTurn route_tool_call(AnalysisSession& session, const std::string& user_text) {
  std::lock_guard lock(session.turn_mu);
  if (session.gateway == nullptr) {
    throw Error(ErrorCode::kPrecondition, "chat analysis needs an LLM gateway");
  }
  if (text::trim(user_text).empty()) throw Error(ErrorCode::kInvalidArgument, "empty message");
  ChatTurn turn;
  turn.query = user_text;
  LlmGateway& gw = *session.gateway;

  ChatRequest req;
  req.model_id = gw.config().routing.chat;
  req.tools = analysis_tool_schemas();
  req.messages.push_back({Role::kSystem, analysis_system_prompt(session)});
  req.messages.push_back({Role::kUser, user_text});

  try {
    auto resp = gw.complete(req);
    ++turn.llm_calls;
    if (!resp.is_tool_call()) {
      turn.rendering = resp.content;
      log_turn(session, turn, {});
      return turn;
    }
    ToolCall call = *resp.tool_call;
    try {
      validate_tool_call(session, call);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kToolRouting) throw;
      req.messages.push_back({Role::kAssistant, "Tool call: " + Json(call).dump()});
      req.messages.push_back(
          {Role::kUser, "That tool call was rejected: " + std::string(e.what()) +
                            ". Call one of filter, aggregate, histogram, get_document or "
                            "search_corpus with arguments that match its schema."});
      auto retry = gw.complete(req);
      ++turn.llm_calls;
      if (!retry.is_tool_call()) {
        throw Error(ErrorCode::kToolRouting,
                    "could not route the request to a tool: " + std::string(e.what()), e.detail());
      }
      call = *retry.tool_call;
      validate_tool_call(session, call);
    }
    turn.call = call;
    turn.result = execute_tool(session, call);

    if (gw.is_mock()) {
      turn.rendering = render_tool_result(call, turn.result);
    } else {
      ChatRequest r2;
      r2.model_id = gw.config().routing.chat;
      r2.messages.push_back({Role::kSystem,
                             "Answer the user's question from the tool result in one or two "
                             "sentences. Quote numbers exactly."});
      r2.messages.push_back({Role::kUser, user_text});
      r2.messages.push_back({Role::kAssistant, "Tool call: " + Json(call).dump()});
      r2.messages.push_back({Role::kUser, "Tool result: " + turn.result.dump()});
      try {
        turn.rendering = gw.complete(std::move(r2)).content;
        ++turn.llm_calls;
      } catch (const Error&) {
        turn.rendering = render_tool_result(call, turn.result);
      }
      if (text::trim(turn.rendering).empty()) turn.rendering = render_tool_result(call, turn.result);
    }
  } catch (const Error& e) {
    log_turn(session, turn, e.what());
    throw;
  }
  log_turn(session, turn, {});
  return turn;
}

}  // namespace lexstat
