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

// Chat-completion access: request/response types, token estimation, the
// retrying gateway, and the offline mock backend.

#ifndef LEXSTAT_LLM_GATEWAY_HPP_
#define LEXSTAT_LLM_GATEWAY_HPP_

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include "lexstat/types.hpp"

namespace lexstat {

enum class Role { kSystem, kUser, kAssistant };

std::string_view to_string(Role r);
Role role_from_string(std::string_view s);

struct ChatMessage {
  Role role = Role::kUser;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

struct ToolParam {
  enum class Type { kString, kNumber, kInteger, kBoolean, kEnum, kArray, kObject };

  std::string name;
  Type type = Type::kString;
  std::string description;
  bool required = false;
  std::vector<std::string> enum_values;  // kEnum
  Type item_type = Type::kString;        // kArray
};

struct ToolSchema {
  std::string name;
  std::string description;
  std::vector<ToolParam> params;

  /// `{"type":"function","function":{"name",...,"parameters":<JSON schema>}}`
  Json to_function_json() const;
  /// Throws kToolRouting describing the first violation.
  void validate_arguments(const Json& args) const;
};

struct ToolCall {
  std::string name;
  Json arguments = Json::object();

  bool operator==(const ToolCall&) const = default;
};

void to_json(Json& j, const ToolCall& c);
void from_json(const Json& j, ToolCall& c);

struct ChatRequest {
  std::string model_id;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  std::vector<ToolSchema> tools;
  std::optional<int> max_output_tokens;

  /// Throws kInvalidArgument: no messages, duplicate tool names, bad temperature.
  void validate() const;
};

struct Usage {
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
};

/// Exactly one of `content` / `tool_call` is meaningful.
struct ChatResponse {
  std::string content;
  std::optional<ToolCall> tool_call;
  Usage usage;
  double latency_ms = 0.0;

  bool is_tool_call() const { return tool_call.has_value(); }
};

// -- token estimation ------------------------------------------------------

class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::int64_t count(std::string_view text) const = 0;
};

/// ceil(code points / chars_per_token), with per-model ratio overrides and
/// optional exact tokenizers.
class TokenEstimator {
 public:
  TokenEstimator() = default;

  void set_chars_per_token(const std::string& model_id, double ratio);
  void set_tokenizer(const std::string& model_id, std::shared_ptr<const Tokenizer> tok);

  std::int64_t estimate(std::string_view text, const std::string& model_id = {}) const;
  /// Message contents plus serialized tool schemas.
  std::int64_t estimate(const ChatRequest& req) const;

 private:
  double default_ratio_ = 4.0;
  std::map<std::string, double> ratios_;
  std::map<std::string, std::shared_ptr<const Tokenizer>> tokenizers_;
};

std::int64_t estimate_tokens(std::string_view text, const std::string& model_id = {});

// -- configuration ---------------------------------------------------------

enum class Purpose { kLabeling, kNormalization, kChat, kSearchTerms };

struct ModelRouting {
  std::string labeling = "gpt-3.5-turbo-16k-0613";
  std::string normalization = "gpt-3.5-turbo-0613";
  std::string chat = "gpt-3.5-turbo-16k-0613";
  std::string search_terms = "gpt-3.5-turbo-16k-0613";

  const std::string& model_for(Purpose p) const;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_delay{200};
  double backoff = 2.0;
};

struct GatewayConfig {
  ModelRouting routing;
  RetryPolicy retry;
  std::size_t parallelism = 4;
  std::int64_t default_context_window = 16385;
  std::map<std::string, std::int64_t> context_windows = {
      {"gpt-3.5-turbo-16k-0613", 16385},
      {"gpt-3.5-turbo-0613", 4096},
      {"gpt-4-0613", 8192},
  };

  std::int64_t context_window(const std::string& model_id) const;

  /// Reads LEXSTAT_MODEL_LABELING, LEXSTAT_MODEL_NORMALIZATION,
  /// LEXSTAT_MODEL_CHAT, LEXSTAT_MODEL_SEARCH, LEXSTAT_PARALLELISM.
  static GatewayConfig from_env();
};

// -- backends --------------------------------------------------------------

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual std::string name() const = 0;
  /// One attempt. Transport problems throw Error(kTransient); the gateway
  /// owns retries.
  virtual ChatResponse send(const ChatRequest& req) = 0;
  virtual bool is_mock() const { return false; }
};

/// Deterministic offline backend. A pure function of its rule table and the
/// request: the first rule whose regex matches the selected text wins.
///
/// Rule table JSON:
///
///   {"rules": [{"pattern": "...", "scope": "last_user" | "all" | "system",
///               "content": "... $1 ...",            // or
///               "tool_call": {"name": "...", "arguments": {...}},  // or
///               "error": "transient" | "auth" | "timeout" | "context_length",
///               "requires_tools": true, "latency_ms": 0}],
///    "fallback": {"content": "..."}}
///
/// `$n` in content and in string-valued tool arguments expands to capture
/// group n. Without a match and without a fallback the mock answers "{}".
class MockBackend final : public ChatBackend {
 public:
  struct Rule {
    std::string pattern;
    std::regex regex;
    std::string scope = "last_user";
    std::optional<std::string> content;
    std::optional<ToolCall> tool_call;
    std::optional<std::string> error;
    bool requires_tools = false;
    double latency_ms = 0.0;
  };

  MockBackend() = default;
  explicit MockBackend(const Json& table);
  static std::shared_ptr<MockBackend> from_file(const std::filesystem::path& file);

  void add_rule(const Json& rule);
  void set_fallback(std::string content) { fallback_ = std::move(content); }

  std::string name() const override { return "mock"; }
  ChatResponse send(const ChatRequest& req) override;
  bool is_mock() const override { return true; }

 private:
  std::vector<Rule> rules_;
  std::string fallback_ = "{}";
  TokenEstimator estimator_;
};

/// Chat-completions HTTP backend (OpenAI-compatible wire format).
struct HttpBackendConfig {
  std::string base_url = "https://api.openai.com/v1";
  std::string api_key;
  std::chrono::seconds timeout{120};
  double rate_limit_rps = 0.0;  // 0 disables the token bucket

  /// LEXSTAT_API_KEY (or OPENAI_API_KEY), LEXSTAT_BASE_URL, LEXSTAT_RATE_LIMIT.
  static HttpBackendConfig from_env();
};

std::shared_ptr<ChatBackend> make_http_backend(HttpBackendConfig cfg);

/// Wire-format helpers, exposed for tests.
Json chat_request_to_wire(const ChatRequest& req);
ChatResponse chat_response_from_wire(const Json& body);

/// Token bucket: `rate` tokens per second, capacity `burst`.
class RateLimiter {
 public:
  RateLimiter(double rate, double burst);
  void acquire();

 private:
  double rate_;
  double burst_;
  double tokens_;
  std::chrono::steady_clock::time_point last_;
  std::mutex mu_;
};

// -- gateway ---------------------------------------------------------------

class LlmGateway {
 public:
  LlmGateway(std::shared_ptr<ChatBackend> backend, GatewayConfig cfg = {});

  /// Context precheck, bounded parallelism, retry with exponential backoff on
  /// kTransient/kTimeout. Invalid requests, auth and context errors are never
  /// retried.
  ChatResponse complete(ChatRequest req);

  const GatewayConfig& config() const { return cfg_; }
  const TokenEstimator& estimator() const { return estimator_; }
  TokenEstimator& estimator() { return estimator_; }
  ChatBackend& backend() { return *backend_; }
  bool is_mock() const { return backend_->is_mock(); }

  /// Calls that reached the backend, including retries.
  std::int64_t backend_calls() const { return backend_calls_.load(); }

 private:
  std::shared_ptr<ChatBackend> backend_;
  GatewayConfig cfg_;
  TokenEstimator estimator_;
  std::counting_semaphore<1024> slots_;
  std::atomic<std::int64_t> backend_calls_{0};
};

// -- prompts ---------------------------------------------------------------

/// The IE few-shot prompt. Messages: system (instruction naming every field
/// and the answer format, then the task description), one user/assistant
/// turn per shot (input text, parse), then the target input text.
ChatRequest build_ie_prompt(const Ontology& ontology, const std::vector<LabeledExample>& fewshot,
                            const std::vector<Document>& shot_docs, const Document& target,
                            const std::string& model_id, const TokenEstimator& estimator = {},
                            std::int64_t context_window = 0);

/// The instruction sentence naming all fields, in the ontology's language.
std::string ie_instruction(const Ontology& ontology);

/// Appended to the final user turn when re-prompting after a bad answer.
std::string format_reminder(const Ontology& ontology);

/// At most 8 deduplicated search terms. Falls back to stopword-filtered
/// query tokens when the LLM fails or returns nothing usable.
std::vector<std::string> extract_search_terms(LlmGateway* gateway, std::string_view user_query);

std::vector<std::string> fallback_search_terms(std::string_view user_query);

}  // namespace lexstat

#endif  // LEXSTAT_LLM_GATEWAY_HPP_
