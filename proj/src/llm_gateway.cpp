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

#include "lexstat/llm_gateway.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <thread>

#include "lexstat/error.hpp"
#include "lexstat/text.hpp"

namespace lexstat {

std::string_view to_string(Role r) {
  switch (r) {
    case Role::kSystem: return "system";
    case Role::kAssistant: return "assistant";
    case Role::kUser: break;
  }
  return "user";
}

Role role_from_string(std::string_view s) {
  if (s == "system") return Role::kSystem;
  if (s == "assistant") return Role::kAssistant;
  if (s == "user") return Role::kUser;
  throw Error(ErrorCode::kInvalidArgument, "unknown role: " + std::string(s));
}

// -- tools -----------------------------------------------------------------

namespace {

std::string_view json_type(ToolParam::Type t) {
  switch (t) {
    case ToolParam::Type::kNumber: return "number";
    case ToolParam::Type::kInteger: return "integer";
    case ToolParam::Type::kBoolean: return "boolean";
    case ToolParam::Type::kArray: return "array";
    case ToolParam::Type::kObject: return "object";
    case ToolParam::Type::kString:
    case ToolParam::Type::kEnum: break;
  }
  return "string";
}

bool type_matches(ToolParam::Type t, const Json& v) {
  switch (t) {
    case ToolParam::Type::kString:
    case ToolParam::Type::kEnum: return v.is_string();
    case ToolParam::Type::kNumber: return v.is_number();
    case ToolParam::Type::kInteger: return v.is_number_integer() ||
                                           (v.is_number_float() &&
                                            std::floor(v.get<double>()) == v.get<double>());
    case ToolParam::Type::kBoolean: return v.is_boolean();
    case ToolParam::Type::kArray: return v.is_array();
    case ToolParam::Type::kObject: return v.is_object();
  }
  return false;
}

}  // namespace

Json ToolSchema::to_function_json() const {
  Json props = Json::object();
  Json required = Json::array();
  for (const auto& p : params) {
    Json s = {{"type", json_type(p.type)}};
    if (!p.description.empty()) s["description"] = p.description;
    if (p.type == ToolParam::Type::kEnum) s["enum"] = p.enum_values;
    if (p.type == ToolParam::Type::kArray) s["items"] = {{"type", json_type(p.item_type)}};
    props[p.name] = std::move(s);
    if (p.required) required.push_back(p.name);
  }
  return Json{{"type", "function"},
              {"function",
               {{"name", name},
                {"description", description},
                {"parameters", {{"type", "object"}, {"properties", props}, {"required", required}}}}}};
}

void ToolSchema::validate_arguments(const Json& args) const {
  if (!args.is_object()) {
    throw Error(ErrorCode::kToolRouting, name + ": arguments must be an object");
  }
  for (const auto& [k, v] : args.items()) {
    auto it = std::find_if(params.begin(), params.end(),
                           [&](const ToolParam& p) { return p.name == k; });
    if (it == params.end()) {
      throw Error(ErrorCode::kToolRouting, name + ": unknown argument '" + k + "'", k);
    }
    if (v.is_null() && !it->required) continue;
    if (!type_matches(it->type, v)) {
      throw Error(ErrorCode::kToolRouting,
                  name + ": argument '" + k + "' must be " + std::string(json_type(it->type)), k);
    }
    if (it->type == ToolParam::Type::kEnum &&
        std::find(it->enum_values.begin(), it->enum_values.end(), v.get<std::string>()) ==
            it->enum_values.end()) {
      throw Error(ErrorCode::kToolRouting,
                  name + ": argument '" + k + "' has invalid value " + v.dump(), k);
    }
    if (it->type == ToolParam::Type::kArray) {
      for (const auto& item : v) {
        if (!type_matches(it->item_type, item)) {
          throw Error(ErrorCode::kToolRouting,
                      name + ": argument '" + k + "' items must be " +
                          std::string(json_type(it->item_type)), k);
        }
      }
    }
  }
  for (const auto& p : params) {
    if (p.required && (!args.contains(p.name) || args.at(p.name).is_null())) {
      throw Error(ErrorCode::kToolRouting, name + ": missing argument '" + p.name + "'", p.name);
    }
  }
}

void to_json(Json& j, const ToolCall& c) { j = Json{{"tool", c.name}, {"args", c.arguments}}; }

void from_json(const Json& j, ToolCall& c) {
  c.name = j.contains("tool") ? j.at("tool").get<std::string>() : j.at("name").get<std::string>();
  if (j.contains("args")) {
    c.arguments = j.at("args");
  } else {
    c.arguments = j.value("arguments", Json::object());
  }
}

void ChatRequest::validate() const {
  if (messages.empty()) throw Error(ErrorCode::kInvalidArgument, "request has no messages");
  if (!(temperature >= 0.0 && temperature <= 2.0)) {
    throw Error(ErrorCode::kInvalidArgument, "temperature out of range");
  }
  std::set<std::string> names;
  for (const auto& t : tools) {
    if (!names.insert(t.name).second) {
      throw Error(ErrorCode::kInvalidArgument, "duplicate tool name: " + t.name, t.name);
    }
  }
}

// -- token estimation ------------------------------------------------------

void TokenEstimator::set_chars_per_token(const std::string& model_id, double ratio) {
  if (!(ratio > 0)) throw Error(ErrorCode::kInvalidArgument, "chars per token must be > 0");
  ratios_[model_id] = ratio;
}

void TokenEstimator::set_tokenizer(const std::string& model_id,
                                   std::shared_ptr<const Tokenizer> tok) {
  tokenizers_[model_id] = std::move(tok);
}

std::int64_t TokenEstimator::estimate(std::string_view s, const std::string& model_id) const {
  if (auto it = tokenizers_.find(model_id); it != tokenizers_.end()) return it->second->count(s);
  double ratio = default_ratio_;
  if (auto it = ratios_.find(model_id); it != ratios_.end()) ratio = it->second;
  const auto chars = static_cast<double>(text::code_point_count(s));
  return static_cast<std::int64_t>(std::ceil(chars / ratio));
}

std::int64_t TokenEstimator::estimate(const ChatRequest& req) const {
  std::int64_t n = 0;
  for (const auto& m : req.messages) n += estimate(m.content, req.model_id);
  for (const auto& t : req.tools) n += estimate(t.to_function_json().dump(), req.model_id);
  return n;
}

std::int64_t estimate_tokens(std::string_view s, const std::string& model_id) {
  static const TokenEstimator kDefault;
  return kDefault.estimate(s, model_id);
}

// -- configuration ---------------------------------------------------------

const std::string& ModelRouting::model_for(Purpose p) const {
  switch (p) {
    case Purpose::kNormalization: return normalization;
    case Purpose::kChat: return chat;
    case Purpose::kSearchTerms: return search_terms;
    case Purpose::kLabeling: break;
  }
  return labeling;
}

std::int64_t GatewayConfig::context_window(const std::string& model_id) const {
  auto it = context_windows.find(model_id);
  return it == context_windows.end() ? default_context_window : it->second;
}

namespace {

std::optional<std::string> env(const char* name) {
  const char* v = std::getenv(name);
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

}  // namespace

GatewayConfig GatewayConfig::from_env() {
  GatewayConfig cfg;
  if (auto v = env("LEXSTAT_MODEL_LABELING")) cfg.routing.labeling = *v;
  if (auto v = env("LEXSTAT_MODEL_NORMALIZATION")) cfg.routing.normalization = *v;
  if (auto v = env("LEXSTAT_MODEL_CHAT")) cfg.routing.chat = *v;
  if (auto v = env("LEXSTAT_MODEL_SEARCH")) cfg.routing.search_terms = *v;
  if (auto v = env("LEXSTAT_PARALLELISM")) {
    cfg.parallelism = static_cast<std::size_t>(std::max(1L, std::strtol(v->c_str(), nullptr, 10)));
  }
  return cfg;
}

HttpBackendConfig HttpBackendConfig::from_env() {
  HttpBackendConfig cfg;
  if (auto v = env("LEXSTAT_API_KEY")) {
    cfg.api_key = *v;
  } else if (auto k = env("OPENAI_API_KEY")) {
    cfg.api_key = *k;
  }
  if (auto v = env("LEXSTAT_BASE_URL")) cfg.base_url = *v;
  if (auto v = env("LEXSTAT_RATE_LIMIT")) cfg.rate_limit_rps = std::strtod(v->c_str(), nullptr);
  return cfg;
}

// -- mock backend ----------------------------------------------------------

namespace {

Json expand_captures(const Json& v, const std::smatch& m) {
  if (v.is_string()) return m.format(v.get<std::string>());
  if (v.is_array() || v.is_object()) {
    Json out = v;
    for (auto& x : out) x = expand_captures(x, m);
    return out;
  }
  return v;
}

std::string scope_text(const ChatRequest& req, const std::string& scope) {
  if (scope == "all") {
    std::string all;
    for (const auto& m : req.messages) {
      all += m.content;
      all += '\n';
    }
    return all;
  }
  const Role want = scope == "system" ? Role::kSystem : Role::kUser;
  for (auto it = req.messages.rbegin(); it != req.messages.rend(); ++it) {
    if (it->role == want) return it->content;
  }
  return {};
}

}  // namespace

MockBackend::MockBackend(const Json& table) {
  for (const auto& r : table.value("rules", Json::array())) add_rule(r);
  if (auto it = table.find("fallback"); it != table.end()) {
    fallback_ = it->is_string() ? it->get<std::string>() : it->value("content", std::string("{}"));
  }
}

std::shared_ptr<MockBackend> MockBackend::from_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::kNotFound, "mock rule table not found: " + file.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const std::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, "invalid mock rule table: " + std::string(e.what()));
  }
  return std::make_shared<MockBackend>(j);
}

void MockBackend::add_rule(const Json& r) {
  Rule rule;
  rule.pattern = r.at("pattern").get<std::string>();
  try {
    rule.regex = std::regex(rule.pattern, std::regex::ECMAScript);
  } catch (const std::regex_error& e) {
    throw Error(ErrorCode::kInvalidArgument, "bad mock pattern '" + rule.pattern + "': " + e.what());
  }
  rule.scope = r.value("scope", std::string("last_user"));
  if (r.contains("content")) rule.content = r.at("content").get<std::string>();
  if (r.contains("tool_call")) rule.tool_call = r.at("tool_call").get<ToolCall>();
  if (r.contains("error")) rule.error = r.at("error").get<std::string>();
  rule.requires_tools = r.value("requires_tools", false);
  rule.latency_ms = r.value("latency_ms", 0.0);
  const int kinds = rule.content.has_value() + rule.tool_call.has_value() + rule.error.has_value();
  if (kinds != 1) {
    throw Error(ErrorCode::kInvalidArgument,
                "mock rule needs exactly one of content/tool_call/error: " + rule.pattern);
  }
  rules_.push_back(std::move(rule));
}

ChatResponse MockBackend::send(const ChatRequest& req) {
  ChatResponse resp;
  resp.usage.input_tokens = estimator_.estimate(req);
  for (const auto& rule : rules_) {
    if (rule.requires_tools && req.tools.empty()) continue;
    const std::string subject = scope_text(req, rule.scope);
    std::smatch m;
    if (!std::regex_search(subject, m, rule.regex)) continue;
    resp.latency_ms = rule.latency_ms;
    if (rule.error) {
      const auto& e = *rule.error;
      if (e == "auth") throw Error(ErrorCode::kAuth, "mock: authentication failed");
      if (e == "timeout") throw Error(ErrorCode::kTimeout, "mock: timed out");
      if (e == "context_length") throw Error(ErrorCode::kContextLength, "mock: context length exceeded");
      throw Error(ErrorCode::kTransient, "mock: backend unavailable");
    }
    if (rule.tool_call) {
      ToolCall call = *rule.tool_call;
      call.arguments = expand_captures(call.arguments, m);
      resp.usage.output_tokens = estimator_.estimate(Json(call).dump(), req.model_id);
      resp.tool_call = std::move(call);
      return resp;
    }
    resp.content = m.format(*rule.content);
    resp.usage.output_tokens = estimator_.estimate(resp.content, req.model_id);
    return resp;
  }
  resp.content = fallback_;
  resp.usage.output_tokens = estimator_.estimate(resp.content, req.model_id);
  return resp;
}

// -- rate limiting ---------------------------------------------------------

RateLimiter::RateLimiter(double rate, double burst)
    : rate_(rate), burst_(std::max(1.0, burst)), tokens_(std::max(1.0, burst)),
      last_(std::chrono::steady_clock::now()) {}

void RateLimiter::acquire() {
  if (rate_ <= 0) return;
  for (;;) {
    std::chrono::duration<double> wait{};
    {
      std::lock_guard lock(mu_);
      const auto now = std::chrono::steady_clock::now();
      tokens_ = std::min(burst_,
                         tokens_ + std::chrono::duration<double>(now - last_).count() * rate_);
      last_ = now;
      if (tokens_ >= 1.0) {
        tokens_ -= 1.0;
        return;
      }
      wait = std::chrono::duration<double>((1.0 - tokens_) / rate_);
    }
    std::this_thread::sleep_for(wait);
  }
}

// -- gateway ---------------------------------------------------------------

LlmGateway::LlmGateway(std::shared_ptr<ChatBackend> backend, GatewayConfig cfg)
    : backend_(std::move(backend)),
      cfg_(std::move(cfg)),
      slots_(static_cast<std::ptrdiff_t>(std::clamp<std::size_t>(cfg_.parallelism, 1, 1024))) {
  if (!backend_) throw Error(ErrorCode::kInvalidArgument, "gateway needs a backend");
}

ChatResponse LlmGateway::complete(ChatRequest req) {
  req.validate();
  const auto window = cfg_.context_window(req.model_id);
  const auto needed = estimator_.estimate(req) + req.max_output_tokens.value_or(0);
  if (needed > window) {
    throw Error(ErrorCode::kContextLength,
                "request needs " + std::to_string(needed) + " tokens, context window is " +
                    std::to_string(window),
                std::to_string(needed - window));
  }

  struct SlotGuard {
    std::counting_semaphore<1024>& s;
    explicit SlotGuard(std::counting_semaphore<1024>& sem) : s(sem) { s.acquire(); }
    ~SlotGuard() { s.release(); }
  };

  auto delay = cfg_.retry.initial_delay;
  for (int attempt = 1;; ++attempt) {
    try {
      SlotGuard slot(slots_);
      ++backend_calls_;
      const auto t0 = std::chrono::steady_clock::now();
      ChatResponse resp = backend_->send(req);
      if (!backend_->is_mock()) {
        resp.latency_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      }
      if (resp.usage.input_tokens == 0) resp.usage.input_tokens = estimator_.estimate(req);
      return resp;
    } catch (const Error& e) {
      const bool retryable = e.code() == ErrorCode::kTransient || e.code() == ErrorCode::kTimeout;
      if (!retryable) throw;
      if (attempt >= cfg_.retry.max_attempts) {
        if (e.code() == ErrorCode::kTimeout) throw;
        throw Error(ErrorCode::kTimeout,
                    "LLM call failed after " + std::to_string(attempt) + " attempts: " + e.what());
      }
    }
    std::this_thread::sleep_for(delay);
    delay = std::chrono::duration_cast<std::chrono::milliseconds>(delay * cfg_.retry.backoff);
  }
}

// -- prompts ---------------------------------------------------------------

namespace {

std::string join_fields(const Ontology& o) {
  std::string out;
  for (std::size_t i = 0; i < o.fields.size(); ++i) {
    if (i > 0) out += ", ";
    out += o.fields[i].name;
  }
  return out;
}

std::string format_line(const Ontology& o) {
  std::string out = "'";
  for (std::size_t i = 0; i < o.fields.size(); ++i) {
    if (i > 0) out += ", ";
    out += o.fields[i].name + ": [value1, value2, ...]";
  }
  return out + "'";
}

std::string task_description(const Ontology& o) {
  std::string out = o.task_description;
  for (const auto& f : o.fields) {
    if (f.description.empty()) continue;
    if (!out.empty()) out += '\n';
    out += "- " + f.name + ": " + f.description;
  }
  return out;
}

}  // namespace

std::string ie_instruction(const Ontology& o) {
  if (o.language == Language::kKorean) {
    return "당신은 정보 추출(IE) 작업을 돕는 유용한 어시스턴트입니다. 다음 텍스트를 읽은 후 " +
           join_fields(o) + "에 대한 정보를 다음 JSON 형식으로 추출하세요. " + format_line(o) +
           ".";
  }
  return "You are a helpful assistant for IE tasks. After reading the following text, "
         "extract information about " +
         join_fields(o) + " in the following JSON format. " + format_line(o) + ".";
}

std::string format_reminder(const Ontology& o) {
  if (o.language == Language::kKorean) {
    return "\n\n답변은 다음 필드만 포함하는 하나의 JSON 객체여야 합니다: " + join_fields(o) +
           ". 각 값은 문자열 목록입니다.";
  }
  return "\n\nAnswer with a single JSON object using only these fields: " + join_fields(o) +
         ". Every value must be a list of strings.";
}

ChatRequest build_ie_prompt(const Ontology& ontology, const std::vector<LabeledExample>& fewshot,
                            const std::vector<Document>& shot_docs, const Document& target,
                            const std::string& model_id, const TokenEstimator& estimator,
                            std::int64_t context_window) {
  if (fewshot.empty()) {
    throw Error(ErrorCode::kPrecondition, "few-shot prompt needs at least one example");
  }
  if (fewshot.size() != shot_docs.size()) {
    throw Error(ErrorCode::kInvalidArgument, "few-shot examples and documents differ in count");
  }
  if (text::trim(target.body).empty()) {
    throw Error(ErrorCode::kInvalidArgument, "target document has an empty body");
  }
  ChatRequest req;
  req.model_id = model_id;
  req.temperature = 0.0;
  std::string system = ie_instruction(ontology);
  if (auto td = task_description(ontology); !td.empty()) system += "\n" + td;
  req.messages.push_back({Role::kSystem, std::move(system)});
  for (std::size_t i = 0; i < fewshot.size(); ++i) {
    validate_parse(fewshot[i].parse, ontology);
    if (fewshot[i].doc_id != shot_docs[i].doc_id) {
      throw Error(ErrorCode::kInvalidArgument,
                  "few-shot document mismatch: " + fewshot[i].doc_id + " vs " + shot_docs[i].doc_id);
    }
    req.messages.push_back({Role::kUser, shot_docs[i].body});
    req.messages.push_back({Role::kAssistant, canonical_parse_json(fewshot[i].parse, ontology)});
  }
  req.messages.push_back({Role::kUser, target.body});
  if (context_window > 0) {
    const auto needed = estimator.estimate(req);
    if (needed > context_window) {
      throw Error(ErrorCode::kContextLength,
                  "prompt exceeds the context window by " +
                      std::to_string(needed - context_window) + " tokens",
                  std::to_string(needed - context_window));
    }
  }
  return req;
}

// -- search terms ----------------------------------------------------------

namespace {

constexpr std::size_t kMaxSearchTerms = 8;

const std::set<std::string>& stopwords() {
  static const std::set<std::string> kWords = {
      "a", "about", "all", "an", "and", "any", "are", "as", "at", "be", "by", "can",
      "could", "did", "do", "does", "find", "for", "from", "get", "give", "had", "has",
      "have", "how", "i", "in", "into", "is", "it", "its", "list", "me", "my", "of",
      "on", "or", "please", "show", "some", "that", "the", "their", "there", "these",
      "this", "those", "to", "was", "were", "what", "when", "where", "which", "who",
      "with", "would", "you", "your"};
  return kWords;
}

void add_term(std::vector<std::string>& out, std::set<std::string>& seen, std::string term) {
  if (out.size() >= kMaxSearchTerms) return;
  term = text::collapse_whitespace(term);
  while (!term.empty() && std::string_view("\"'`.,;:!?()[]{}").find(term.front()) != std::string_view::npos) {
    term.erase(term.begin());
  }
  while (!term.empty() && std::string_view("\"'`.,;:!?()[]{}").find(term.back()) != std::string_view::npos) {
    term.pop_back();
  }
  if (term.empty()) return;
  if (seen.insert(text::fold_case(term)).second) out.push_back(std::move(term));
}

std::vector<std::string> parse_term_answer(const std::string& raw) {
  std::vector<std::string> items;
  const auto trimmed = std::string(text::trim(raw));
  try {
    Json j = Json::parse(trimmed);
    if (j.is_object() && j.contains("terms")) j = j.at("terms");
    if (j.is_array()) {
      for (const auto& x : j) {
        if (x.is_string()) items.push_back(x.get<std::string>());
      }
      return items;
    }
  } catch (const Json::exception&) {
  }
  std::string cur;
  for (char c : trimmed) {
    if (c == ',' || c == '\n') {
      items.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  items.push_back(cur);
  return items;
}

}  // namespace

std::vector<std::string> fallback_search_terms(std::string_view user_query) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (auto& w : text::word_runs(user_query)) {
    if (stopwords().count(text::fold_case(w)) != 0) continue;
    add_term(out, seen, std::move(w));
  }
  return out;
}

std::vector<std::string> extract_search_terms(LlmGateway* gateway, std::string_view user_query) {
  if (text::trim(user_query).empty()) {
    throw Error(ErrorCode::kPrecondition, "search query is empty");
  }
  if (gateway == nullptr) return fallback_search_terms(user_query);
  ChatRequest req;
  req.model_id = gateway->config().routing.search_terms;
  req.messages.push_back(
      {Role::kSystem,
       "Extract at most 8 keywords or short key phrases from the user's request for a "
       "full-text search over a document corpus. Answer only with a JSON array of strings."});
  req.messages.push_back({Role::kUser, std::string(user_query)});
  std::vector<std::string> out;
  try {
    const auto resp = gateway->complete(std::move(req));
    if (!resp.is_tool_call()) {
      std::set<std::string> seen;
      const std::string folded_query = text::fold_case(user_query);
      for (auto& item : parse_term_answer(resp.content)) {
        std::string term = text::collapse_whitespace(item);
        // Prefer the user's own spelling when the term occurs in the query.
        const auto pos = folded_query.find(text::fold_case(term));
        if (!term.empty() && pos != std::string::npos &&
            folded_query.size() == user_query.size()) {
          term = std::string(user_query.substr(pos, term.size()));
        }
        add_term(out, seen, std::move(term));
      }
    }
  } catch (const Error&) {
    out.clear();
  }
  if (out.empty()) return fallback_search_terms(user_query);
  return out;
}

}  // namespace lexstat
