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


// Statistics over structured tables and the tool layer the chat workflow
// routes into: filter, aggregate, histogram, get_document, search_corpus.

#ifndef LEXSTAT_ANALYSIS_HPP_
#define LEXSTAT_ANALYSIS_HPP_

#include <filesystem>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "lexstat/ie_engine.hpp"
#include "lexstat/llm_gateway.hpp"
#include "lexstat/types.hpp"

namespace lexstat {

class CorpusStore;

/// Number behind a (normalized) value. Durations come back in months
/// ("45d" -> 1.5). nullopt for text kinds and values no rule understands.
std::optional<double> coerce_number(std::string_view value, FieldKind kind);

struct Condition {
  enum class Op { kEq, kNe, kContains, kGt, kGte, kLt, kLte, kExists };
  std::string field;
  Op op = Op::kEq;
  Json value;  // string or number; unused for exists
};

void from_json(const Json& j, Condition& c);
void to_json(Json& j, const Condition& c);

/// A row matches when every condition holds for at least one of the
/// field's values (exists: the field has a value).
std::vector<const TableRow*> filter_rows(const StructuredTable& table,
                                         const std::vector<Condition>& where);

enum class Stat { kCount, kMean, kMedian, kSum, kMin, kMax };

std::string_view to_string(Stat s);
Stat stat_from_string(std::string_view s);

struct AggregateRow {
  std::optional<std::string> group;  // nullopt: no group_by, or rows without a group value
  std::optional<double> value;       // nullopt: no usable values in the group
  std::size_t n = 0;
};

struct AggregateResult {
  std::string target;
  Stat stat = Stat::kCount;
  std::optional<std::string> group_by;
  std::vector<AggregateRow> rows;  // sorted by group, ungrouped last
  std::size_t excluded = 0;        // values that did not coerce
};

void to_json(Json& j, const AggregateResult& r);

/// Every value of a multi-valued cell contributes. `count` counts values of
/// `target` (rows when `target` is empty). Throws kValidation for unknown
/// fields and for non-count stats over text fields.
AggregateResult aggregate(const StructuredTable& table, const std::string& target, Stat stat,
                          const std::optional<std::string>& group_by = {},
                          const std::vector<Condition>& where = {});

struct HistogramBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
};

struct Histogram {
  std::string field;
  std::vector<HistogramBin> bins;  // [lo, hi) except the last, which is [lo, hi]
  std::size_t n = 0;               // values counted in bins
  std::size_t non_coercible = 0;
  std::size_t out_of_range = 0;    // explicit edges only

  std::size_t excluded() const { return non_coercible + out_of_range; }
};

void to_json(Json& j, const Histogram& h);

using BinSpec = std::variant<std::size_t, std::vector<double>>;

/// Equal-width bins over [min, max] or explicit strictly increasing edges.
/// Throws kValidation when no value coerces, kInvalidArgument for bad bins.
Histogram histogram(const StructuredTable& table, const std::string& field, const BinSpec& bins,
                    const std::vector<Condition>& where = {});

/// Vega-Lite bar chart.
Json histogram_chart_spec(const Histogram& h);

/// field,stat,... CSV renderings for the CLI.
void write_aggregate_csv(std::ostream& out, const AggregateResult& r);
void write_histogram_csv(std::ostream& out, const Histogram& h);

// -- tools -------------------------------------------------------------------

const std::vector<ToolSchema>& analysis_tool_schemas();
/// `GET /tools` payload: function-calling JSON for every tool.
Json analysis_tools_json();

struct AnalysisSession {
  CorpusStore* store = nullptr;
  std::string corpus_id;
  std::optional<StructuredTable> table;
  LlmGateway* gateway = nullptr;  // routing and search-term extraction
  std::filesystem::path log_file;  // (query, call, result) JSONL; empty: no log
  std::mutex turn_mu;              // one in-flight turn
};

/// Schema validation plus checks that need the session (field names,
/// condition shapes, bins/edges). Throws kToolRouting.
void validate_tool_call(const AnalysisSession& session, const ToolCall& call);

/// Runs a validated call. Tool errors propagate unchanged.
Json execute_tool(AnalysisSession& session, const ToolCall& call);

struct ChatTurn {
  std::string query;
  std::optional<ToolCall> call;  // nullopt: the model answered in text
  Json result;                   // null without a call
  std::string rendering;
  int llm_calls = 0;
};

void to_json(Json& j, const ChatTurn& t);

/// Deterministic text rendering of a tool result.
std::string render_tool_result(const ToolCall& call, const Json& result);

/// user_text + tool schemas through the chat route; one corrective
/// re-prompt for an unknown tool or invalid arguments, then kToolRouting.
/// The result is rendered by the model, or by `render_tool_result` under
/// the mock backend.
ChatTurn route_tool_call(AnalysisSession& session, const std::string& user_text);

}  // namespace lexstat

#endif  // LEXSTAT_ANALYSIS_HPP_
