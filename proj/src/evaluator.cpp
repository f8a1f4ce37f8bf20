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

#include "lexstat/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>

#include "lexstat/error.hpp"
#include "lexstat/llm_gateway.hpp"
#include "lexstat/text.hpp"

namespace lexstat {

namespace {

// -- lexing ----------------------------------------------------------------

struct Lexeme {
  bool number = false;
  std::string text;  // digits with optional '.', or a case-folded word
};

bool is_digit(char32_t c) { return c >= '0' && c <= '9'; }

// Splits into numbers and words. Thousands separators between digits are
// dropped; other punctuation separates.
std::vector<Lexeme> lex(std::string_view s) {
  std::vector<Lexeme> out;
  std::vector<char32_t> cps;
  for (std::size_t pos = 0; pos < s.size();) cps.push_back(text::next_code_point(s, pos));
  for (std::size_t i = 0; i < cps.size();) {
    const char32_t c = cps[i];
    const bool dot_digit = c == '.' && i + 1 < cps.size() && is_digit(cps[i + 1]);
    if (is_digit(c) || dot_digit) {
      Lexeme lx{true, {}};
      bool seen_dot = false;
      while (i < cps.size()) {
        const char32_t d = cps[i];
        if (is_digit(d)) {
          lx.text.push_back(static_cast<char>(d));
        } else if (d == '.' && !seen_dot && i + 1 < cps.size() && is_digit(cps[i + 1])) {
          seen_dot = true;
          lx.text.push_back('.');
        } else if (d == ',' && !seen_dot && i + 1 < cps.size() && is_digit(cps[i + 1]) &&
                   !lx.text.empty()) {
          // thousands separator
        } else {
          break;
        }
        ++i;
      }
      out.push_back(std::move(lx));
      continue;
    }
    if (c == '%') {
      out.push_back({false, "%"});
      ++i;
      continue;
    }
    if (text::is_word_char(c) || c == '$' || c == 0x20A9 /* ₩ */) {
      std::string w;
      while (i < cps.size() && !is_digit(cps[i]) && cps[i] != '%' &&
             (text::is_word_char(cps[i]) || cps[i] == '$' || cps[i] == 0x20A9)) {
        text::append_utf8(w, text::fold_case(cps[i]));
        ++i;
        if (w == "$" || w == "₩") break;
      }
      out.push_back({false, std::move(w)});
      continue;
    }
    ++i;
  }
  return out;
}

// Canonical decimal string: no leading zeros (except a lone 0), no trailing
// fractional zeros, no trailing '.'.
std::string canonical_decimal(std::string digits, bool negative) {
  std::string ip = digits;
  std::string fp;
  if (auto dot = digits.find('.'); dot != std::string::npos) {
    ip = digits.substr(0, dot);
    fp = digits.substr(dot + 1);
  }
  ip.erase(0, std::min(ip.find_first_not_of('0'), ip.size()));
  if (ip.empty()) ip = "0";
  while (!fp.empty() && fp.back() == '0') fp.pop_back();
  std::string out = ip;
  if (!fp.empty()) out += "." + fp;
  if (negative && out != "0") out = "-" + out;
  return out;
}

std::string format_amount(double v) {
  char buf[64];
  if (std::fabs(v - std::round(v)) < 1e-6) {
    std::snprintf(buf, sizeof(buf), "%.0f", std::round(v));
    return buf;
  }
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return canonical_decimal(buf, false);
}

// -- numeric ---------------------------------------------------------------

std::optional<std::string> normalize_numeric(std::string_view s) {
  std::size_t i = 0;
  bool negative = false;
  if (i < s.size() && (s[i] == '-' || s[i] == '+')) {
    negative = s[i] == '-';
    ++i;
  }
  std::string digits;
  bool seen_dot = false;
  for (; i < s.size(); ++i) {
    const char c = s[i];
    if (c >= '0' && c <= '9') {
      digits.push_back(c);
    } else if (c == '.' && !seen_dot && i + 1 < s.size() && s[i + 1] >= '0' && s[i + 1] <= '9') {
      seen_dot = true;
      digits.push_back('.');
    } else if (c == ',' && !seen_dot && !digits.empty() && i + 1 < s.size() && s[i + 1] >= '0' &&
               s[i + 1] <= '9') {
      continue;
    } else {
      break;
    }
  }
  if (digits.empty() || digits == ".") return std::nullopt;
  std::string suffix;
  for (char c : text::fold_case(s.substr(i))) {
    if (c == ' ' || c == '\t') continue;
    if (c >= '0' && c <= '9') return std::nullopt;
    suffix.push_back(c);
  }
  return canonical_decimal(digits, negative) + suffix;
}

// -- money -----------------------------------------------------------------

std::optional<std::string> normalize_money(std::string_view s) {
  static const std::set<std::string> kIgnore = {
      "$", "₩", "won", "krw", "usd", "dollar", "dollars", "원", "금", "fine", "of", "and",
      "amount", "벌금", "과태료", "추징금", "및"};
  static const std::map<std::string, double> kScale = {
      {"thousand", 1e3}, {"k", 1e3}, {"million", 1e6}, {"mn", 1e6}, {"billion", 1e9},
      {"bn", 1e9}};
  static const std::map<std::string, double> kSmallKo = {{"십", 10}, {"백", 100}, {"천", 1000}};
  static const std::map<std::string, double> kLargeKo = {{"만", 1e4}, {"억", 1e8}, {"조", 1e12}};

  const auto lexemes = lex(s);
  double total = 0;
  double section = 0;
  std::optional<double> pending;
  bool any_number = false;
  auto take = [&] {
    const double v = pending.value_or(1.0);
    pending.reset();
    return v;
  };
  for (const auto& lx : lexemes) {
    if (lx.number) {
      if (pending) {
        section += *pending;
      }
      pending = std::stod(lx.text);
      any_number = true;
      continue;
    }
    std::string w = lx.text;
    // "5천만원": peel Korean unit characters off the front of a word.
    bool consumed = false;
    while (!w.empty()) {
      bool matched = false;
      for (const auto* table : {&kSmallKo, &kLargeKo}) {
        for (const auto& [unit, mult] : *table) {
          if (w.rfind(unit, 0) == 0) {
            if (table == &kSmallKo) {
              section += take() * mult;
            } else {
              section += pending.value_or(section == 0 ? 1.0 : 0.0);
              pending.reset();
              total += section * mult;
              section = 0;
            }
            w.erase(0, unit.size());
            matched = true;
            consumed = true;
            break;
          }
        }
        if (matched) break;
      }
      if (!matched) break;
    }
    if (w.empty()) continue;
    if (auto it = kScale.find(w); it != kScale.end()) {
      section += take() * it->second;
      continue;
    }
    if (kIgnore.count(w) != 0) continue;
    (void)consumed;
    return std::nullopt;
  }
  if (!any_number) return std::nullopt;
  total += section + pending.value_or(0.0);
  return format_amount(total);
}

// -- duration --------------------------------------------------------------

std::optional<std::string> normalize_duration(std::string_view s) {
  enum Unit { kYears, kMonths, kWeeks, kDays };
  static const std::map<std::string, Unit> kUnits = {
      {"year", kYears},   {"years", kYears},   {"yr", kYears},     {"yrs", kYears},
      {"y", kYears},      {"년", kYears},      {"month", kMonths}, {"months", kMonths},
      {"mo", kMonths},    {"mos", kMonths},    {"m", kMonths},     {"개월", kMonths},
      {"월", kMonths},    {"달", kMonths},     {"week", kWeeks},   {"weeks", kWeeks},
      {"wk", kWeeks},     {"wks", kWeeks},     {"w", kWeeks},      {"주", kWeeks},
      {"day", kDays},     {"days", kDays},     {"d", kDays},       {"일", kDays}};
  static const std::set<std::string> kIgnore = {"and", "imprisonment", "prison", "of",
                                                "징역", "금고", "및"};

  double months = 0;
  double days = 0;
  std::optional<double> pending;
  bool any = false;
  for (const auto& lx : lex(s)) {
    if (lx.number) {
      if (pending) months += *pending;  // bare number before another: months
      pending = std::stod(lx.text);
      any = true;
      continue;
    }
    if (kIgnore.count(lx.text) != 0) continue;
    auto it = kUnits.find(lx.text);
    if (it == kUnits.end() || !pending) return std::nullopt;
    switch (it->second) {
      case kYears: months += *pending * 12; break;
      case kMonths: months += *pending; break;
      case kWeeks: days += *pending * 7; break;
      case kDays: days += *pending; break;
    }
    pending.reset();
  }
  if (!any) return std::nullopt;
  if (pending) months += *pending;
  if (std::fabs(months - std::round(months)) > 1e-9 ||
      std::fabs(days - std::round(days)) > 1e-9) {
    return std::nullopt;
  }
  auto m = static_cast<long long>(std::llround(months));
  auto d = static_cast<long long>(std::llround(days));
  if (d % 30 == 0) return std::to_string(m + d / 30);
  if (m == 0) return std::to_string(d) + "d";
  return std::to_string(m) + "m" + std::to_string(d) + "d";
}

std::optional<std::string> apply_rules(std::string_view s, FieldKind kind) {
  switch (kind) {
    case FieldKind::kNumeric: return normalize_numeric(s);
    case FieldKind::kMoney: return normalize_money(s);
    case FieldKind::kDuration: return normalize_duration(s);
    case FieldKind::kCategorical:
    case FieldKind::kFreeText:
    case FieldKind::kLabelSet: break;
  }
  return text::fold_case(s);
}

std::optional<std::string> llm_rewrite(std::string_view s, FieldKind kind, LlmGateway& gw) {
  std::string target;
  switch (kind) {
    case FieldKind::kMoney: target = "a plain integer amount without separators or currency"; break;
    case FieldKind::kDuration: target = "a duration written as '<N> months' or '<N> days'"; break;
    default: target = "a plain decimal number, keeping any unit suffix such as %"; break;
  }
  ChatRequest req;
  req.model_id = gw.config().routing.normalization;
  req.messages.push_back({Role::kSystem, "Rewrite the value the user gives as " + target +
                                             ". Answer with the rewritten value only."});
  req.messages.push_back({Role::kUser, std::string(s)});
  try {
    auto resp = gw.complete(std::move(req));
    if (resp.is_tool_call()) return std::nullopt;
    return apply_rules(text::collapse_whitespace(resp.content), kind);
  } catch (const Error&) {
    return std::nullopt;
  }
}

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

double harmonic(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

std::size_t multiset_overlap(std::vector<std::string> a, std::vector<std::string> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t n = 0;
  for (std::size_t i = 0, j = 0; i < a.size() && j < b.size();) {
    if (a[i] == b[j]) {
      ++n;
      ++i;
      ++j;
    } else if (a[i] < b[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return n;
}

}  // namespace

NormalizedValue normalize(std::string_view raw, FieldKind kind, LlmGateway* fallback) {
  const std::string s = text::collapse_whitespace(raw);
  if (auto v = apply_rules(s, kind)) return {*v, false};
  if (fallback != nullptr) {
    if (auto v = llm_rewrite(s, kind, *fallback)) return {*v, false};
  }
  return {s, true};
}

std::string normalize_value(std::string_view raw, FieldKind kind) {
  return normalize(raw, kind).value;
}

Parse normalize_parse(const Parse& parse, const Ontology& ontology) {
  Parse out;
  for (const auto& [name, vals] : parse.values) {
    const FieldSpec* spec = ontology.find(name);
    const FieldKind kind = spec ? spec->kind : FieldKind::kFreeText;
    auto& dst = out.values[name];
    for (const auto& v : vals) dst.push_back(normalize_value(v, kind));
  }
  return out;
}

void FieldScore::finish() {
  precision = ratio(tp, tp + fp);
  recall = ratio(tp, tp + fn);
  f1 = harmonic(precision, recall);
  support = tp + fn;
}

const FieldScore& EvalReport::field(std::string_view name) const {
  for (const auto& [n, s] : per_field) {
    if (n == name) return s;
  }
  throw Error(ErrorCode::kNotFound, "no score for field: " + std::string(name));
}

void to_json(Json& j, const EvalReport& r) {
  Json fields = Json::array();
  for (const auto& [name, s] : r.per_field) {
    fields.push_back({{"field", name},
                      {"precision", s.precision},
                      {"recall", s.recall},
                      {"f1", s.f1},
                      {"support", s.support},
                      {"tp", s.tp},
                      {"fp", s.fp},
                      {"fn", s.fn}});
  }
  j = Json{{"per_field", fields},
           {"average_f1", r.average_f1},
           {"excluded_fields", r.excluded_fields},
           {"documents", r.documents}};
}

void write_csv(std::ostream& out, const EvalReport& r) {
  out << "field,precision,recall,f1,support,tp,fp,fn\n";
  char buf[160];
  for (const auto& [name, s] : r.per_field) {
    std::snprintf(buf, sizeof(buf), ",%.6f,%.6f,%.6f,%zu,%zu,%zu,%zu\n", s.precision, s.recall,
                  s.f1, s.support, s.tp, s.fp, s.fn);
    out << name << buf;
  }
}

EvalReport field_f1_report(const ParseMap& pred, const ParseMap& gold, const Ontology& ontology,
                           const std::set<std::string>& exclude) {
  auto check = [&](const ParseMap& m) {
    for (const auto& [doc, p] : m) {
      for (const auto& [field, vals] : p.values) {
        if (!ontology.has(field)) {
          throw Error(ErrorCode::kValidation,
                      "field '" + field + "' (doc " + doc + ") is not in the ontology", field);
        }
      }
    }
  };
  check(pred);
  check(gold);

  std::set<std::string> docs;
  for (const auto& [d, _] : pred) docs.insert(d);
  for (const auto& [d, _] : gold) docs.insert(d);

  static const Parse kEmpty;
  EvalReport report;
  report.documents = docs.size();
  double sum = 0;
  std::size_t included = 0;
  for (const auto& f : ontology.fields) {
    FieldScore s;
    for (const auto& d : docs) {
      auto pi = pred.find(d);
      auto gi = gold.find(d);
      const Parse& p = pi == pred.end() ? kEmpty : pi->second;
      const Parse& g = gi == gold.end() ? kEmpty : gi->second;
      std::vector<std::string> pv;
      std::vector<std::string> gv;
      for (const auto& v : p.get(f.name)) pv.push_back(normalize_value(v, f.kind));
      for (const auto& v : g.get(f.name)) gv.push_back(normalize_value(v, f.kind));
      const auto hit = multiset_overlap(pv, gv);
      s.tp += hit;
      s.fp += pv.size() - hit;
      s.fn += gv.size() - hit;
    }
    s.finish();
    if (exclude.count(f.name) != 0) {
      report.excluded_fields.push_back(f.name);
    } else {
      sum += s.f1;
      ++included;
    }
    report.per_field.emplace_back(f.name, s);
  }
  report.average_f1 = included == 0 ? 0.0 : sum / static_cast<double>(included);
  return report;
}

void to_json(Json& j, const ClassificationReport& r) {
  Json labels = Json::object();
  for (const auto& [label, c] : r.per_label) {
    labels[label] = {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"f1", c.f1}};
  }
  j = Json{{"micro_precision", r.micro_precision},
           {"micro_recall", r.micro_recall},
           {"micro_f1", r.micro_f1},
           {"macro_f1", r.macro_f1},
           {"per_label", labels}};
}

ClassificationReport classification_report(const LabelSetMap& pred, const LabelSetMap& gold) {
  static const std::set<std::string> kNone;
  std::set<std::string> docs;
  for (const auto& [d, _] : pred) docs.insert(d);
  for (const auto& [d, _] : gold) docs.insert(d);

  ClassificationReport r;
  for (const auto& d : docs) {
    auto pi = pred.find(d);
    auto gi = gold.find(d);
    const auto& p = pi == pred.end() ? kNone : pi->second;
    const auto& g = gi == gold.end() ? kNone : gi->second;
    for (const auto& l : p) {
      auto& c = r.per_label[l];
      (g.count(l) != 0 ? c.tp : c.fp) += 1;
    }
    for (const auto& l : g) {
      if (p.count(l) == 0) r.per_label[l].fn += 1;
    }
  }
  std::size_t tp = 0, fp = 0, fn = 0;
  double macro = 0;
  std::size_t n_labels = 0;
  for (auto& [label, c] : r.per_label) {
    c.f1 = harmonic(ratio(c.tp, c.tp + c.fp), ratio(c.tp, c.tp + c.fn));
    tp += c.tp;
    fp += c.fp;
    fn += c.fn;
    if (c.tp + c.fp + c.fn > 0) {
      macro += c.f1;
      ++n_labels;
    }
  }
  r.micro_precision = ratio(tp, tp + fp);
  r.micro_recall = ratio(tp, tp + fn);
  r.micro_f1 = harmonic(r.micro_precision, r.micro_recall);
  r.macro_f1 = n_labels == 0 ? 0.0 : macro / static_cast<double>(n_labels);
  return r;
}

ParseMap load_parses_jsonl(std::istream& in) {
  ParseMap out;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (text::trim(line).empty()) continue;
    try {
      const Json j = Json::parse(line);
      const auto doc = j.at("doc_id").get<std::string>();
      Json p;
      if (j.contains("parse")) {
        p = j.at("parse");
      } else if (j.contains("values")) {
        p = j.at("values");
      } else {
        p = j.at("target");
      }
      if (p.is_string()) p = Json::parse(p.get<std::string>());
      out[doc] = p.get<Parse>();
    } catch (const Error& e) {
      throw Error(e.code(), "line " + std::to_string(lineno) + ": " + e.what(), e.detail());
    } catch (const std::exception& e) {
      throw Error(ErrorCode::kInvalidArgument, "line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

Ontology infer_ontology(const std::vector<const ParseMap*>& maps) {
  std::set<std::string> names;
  for (const auto* m : maps) {
    for (const auto& [_, p] : *m) {
      for (const auto& [f, __] : p.values) names.insert(f);
    }
  }
  Ontology o;
  for (const auto& n : names) o.fields.push_back({n, FieldKind::kCategorical, true, {}});
  return o;
}

}  // namespace lexstat
