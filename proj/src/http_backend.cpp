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

// Live chat-completions backend over cpp-httplib.

#include <httplib.h>

#include "lexstat/error.hpp"
#include "lexstat/llm_gateway.hpp"

namespace lexstat {

Json chat_request_to_wire(const ChatRequest& req) {
  Json messages = Json::array();
  for (const auto& m : req.messages) {
    messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  }
  Json body = {{"model", req.model_id}, {"messages", messages}, {"temperature", req.temperature}};
  if (req.max_output_tokens) body["max_tokens"] = *req.max_output_tokens;
  if (!req.tools.empty()) {
    Json tools = Json::array();
    for (const auto& t : req.tools) tools.push_back(t.to_function_json());
    body["tools"] = std::move(tools);
    body["tool_choice"] = "auto";
  }
  return body;
}

ChatResponse chat_response_from_wire(const Json& body) {
  ChatResponse resp;
  const auto& choices = body.at("choices");
  if (!choices.is_array() || choices.empty()) {
    throw Error(ErrorCode::kTransient, "response has no choices");
  }
  const auto& msg = choices.at(0).at("message");
  if (auto tc = msg.find("tool_calls"); tc != msg.end() && tc->is_array() && !tc->empty()) {
    const auto& fn = tc->at(0).at("function");
    ToolCall call;
    call.name = fn.at("name").get<std::string>();
    const auto& args = fn.value("arguments", Json("{}"));
    try {
      call.arguments = args.is_string() ? Json::parse(args.get<std::string>()) : args;
    } catch (const Json::exception&) {
      // Keep the raw text so the router can ask for a correction.
      call.arguments = Json{{"_raw", args}};
    }
    resp.tool_call = std::move(call);
  } else if (auto fc = msg.find("function_call"); fc != msg.end() && fc->is_object()) {
    ToolCall call;
    call.name = fc->at("name").get<std::string>();
    const auto args = fc->value("arguments", std::string("{}"));
    try {
      call.arguments = Json::parse(args);
    } catch (const Json::exception&) {
      call.arguments = Json{{"_raw", args}};
    }
    resp.tool_call = std::move(call);
  } else {
    const auto& c = msg.value("content", Json());
    resp.content = c.is_string() ? c.get<std::string>() : std::string{};
  }
  if (auto u = body.find("usage"); u != body.end() && u->is_object()) {
    resp.usage.input_tokens = u->value("prompt_tokens", std::int64_t{0});
    resp.usage.output_tokens = u->value("completion_tokens", std::int64_t{0});
  }
  return resp;
}

namespace {

class HttpBackend final : public ChatBackend {
 public:
  explicit HttpBackend(HttpBackendConfig cfg)
      : cfg_(std::move(cfg)), limiter_(cfg_.rate_limit_rps, std::max(1.0, cfg_.rate_limit_rps)) {
    // Split "scheme://host[:port]/prefix".
    const auto scheme_end = cfg_.base_url.find("://");
    const auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    const auto path_start = cfg_.base_url.find('/', host_start);
    origin_ = cfg_.base_url.substr(0, path_start);
    prefix_ = path_start == std::string::npos ? "" : cfg_.base_url.substr(path_start);
    while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
  }

  std::string name() const override { return "http:" + cfg_.base_url; }

  ChatResponse send(const ChatRequest& req) override {
    limiter_.acquire();
    httplib::Client cli(origin_);
    cli.set_connection_timeout(std::chrono::seconds(10));
    cli.set_read_timeout(cfg_.timeout);
    cli.set_write_timeout(cfg_.timeout);
    httplib::Headers headers;
    if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);
    const auto payload = chat_request_to_wire(req).dump();
    auto res = cli.Post(prefix_ + "/chat/completions", headers, payload, "application/json");
    if (!res) {
      const auto err = res.error();
      if (err == httplib::Error::Read || err == httplib::Error::Write) {
        throw Error(ErrorCode::kTimeout, "LLM request timed out: " + httplib::to_string(err));
      }
      throw Error(ErrorCode::kTransient, "LLM transport failure: " + httplib::to_string(err));
    }
    const int status = res->status;
    if (status == 401 || status == 403) {
      throw Error(ErrorCode::kAuth, "LLM authentication failed (HTTP " + std::to_string(status) + ")",
                  res->body);
    }
    if (status == 429 || status >= 500) {
      throw Error(ErrorCode::kTransient, "LLM backend returned HTTP " + std::to_string(status),
                  res->body);
    }
    if (status >= 400) {
      if (res->body.find("context_length_exceeded") != std::string::npos) {
        throw Error(ErrorCode::kContextLength, "context length exceeded", res->body);
      }
      throw Error(ErrorCode::kInvalidArgument,
                  "LLM rejected the request (HTTP " + std::to_string(status) + ")", res->body);
    }
    try {
      return chat_response_from_wire(Json::parse(res->body));
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::kTransient, std::string("malformed LLM response: ") + e.what());
    }
  }

 private:
  HttpBackendConfig cfg_;
  RateLimiter limiter_;
  std::string origin_;
  std::string prefix_;
};

}  // namespace

std::shared_ptr<ChatBackend> make_http_backend(HttpBackendConfig cfg) {
  return std::make_shared<HttpBackend>(std::move(cfg));
}

}  // namespace lexstat
