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


#include <doctest.h>

#include "lexstat/error.hpp"
#include "lexstat/llm_gateway.hpp"

using namespace lexstat;

namespace {

/// Backend that fails a fixed number of times before answering.
class FlakyBackend final : public ChatBackend {
 public:
  FlakyBackend(int failures, ErrorCode code) : failures_(failures), code_(code) {}
  std::string name() const override { return "flaky"; }
  ChatResponse send(const ChatRequest&) override {
    ++calls;
    if (failures_-- > 0) throw Error(code_, "flaky");
    ChatResponse r;
    r.content = "ok";
    return r;
  }
  int calls = 0;

 private:
  int failures_;
  ErrorCode code_;
};

GatewayConfig fast_retries() {
  GatewayConfig cfg;
  cfg.retry.initial_delay = std::chrono::milliseconds(1);
  return cfg;
}

ChatRequest user_request(std::string text, std::string model = "gpt-3.5-turbo-16k-0613") {
  ChatRequest r;
  r.model_id = std::move(model);
  r.messages.push_back({Role::kUser, std::move(text)});
  return r;
}

Ontology dui_ontology() {
  Ontology o;
  o.fields = {{"BAC", FieldKind::kNumeric, true, "blood alcohol"},
              {"Dist", FieldKind::kNumeric, true, ""},
              {"Fine", FieldKind::kMoney, true, ""}};
  return o;
}

LabeledExample example(std::string id, std::string bac) {
  LabeledExample e;
  e.doc_id = std::move(id);
  e.parse.values["BAC"] = {std::move(bac)};
  return e;
}

ToolSchema aggregate_schema() {
  ToolSchema s;
  s.name = "aggregate";
  s.params = {{"field", ToolParam::Type::kString, "", true, {}, {}},
              {"op", ToolParam::Type::kEnum, "", true, {"mean", "count"}, {}},
              {"bins", ToolParam::Type::kInteger, "", false, {}, {}}};
  return s;
}

}  // namespace

TEST_SUITE("llm_gateway") {
  TEST_CASE("mock: first matching rule wins and captures expand") {
    MockBackend mock(Json::parse(R"js({"rules":[
      {"pattern":"BAC (\\d\\.\\d+)%","content":"{\"BAC\":[\"$1%\"]}"},
      {"pattern":"BAC","content":"second"}],
      "fallback":{"content":"nothing"}})js"));
    LlmGateway gw(std::shared_ptr<ChatBackend>(&mock, [](ChatBackend*) {}));
    CHECK(gw.complete(user_request("BAC 0.12% measured")).content == R"js({"BAC":["0.12%"]})js");
    CHECK(gw.complete(user_request("BAC unknown")).content == "second");
    CHECK(gw.complete(user_request("unrelated")).content == "nothing");
    CHECK(gw.is_mock());
  }

  TEST_CASE("mock: without a fallback the answer is an empty object") {
    MockBackend mock;
    CHECK(mock.send(user_request("x")).content == "{}");
  }

  TEST_CASE("mock: scope selects the matched text") {
    MockBackend mock(Json::parse(R"js({"rules":[
      {"pattern":"SYSTEM-MARK","scope":"system","content":"sys"},
      {"pattern":"early","scope":"all","content":"all"}]})js"));
    ChatRequest r = user_request("late");
    r.messages.insert(r.messages.begin(), {Role::kUser, "early"});
    CHECK(mock.send(r).content == "all");
    r.messages.insert(r.messages.begin(), {Role::kSystem, "SYSTEM-MARK"});
    CHECK(mock.send(r).content == "sys");
    CHECK(mock.send(user_request("SYSTEM-MARK")).content == "{}");
  }

  TEST_CASE("mock: tool calls are exclusive with content and need tools") {
    MockBackend mock(Json::parse(R"js({"rules":[
      {"pattern":"mean of (\\w+)","requires_tools":true,
       "tool_call":{"name":"aggregate","arguments":{"field":"$1","op":"mean"}}}],
      "fallback":{"content":"plain"}})js"));
    ChatRequest r = user_request("mean of Fine");
    CHECK(mock.send(r).content == "plain");
    r.tools.push_back(aggregate_schema());
    const auto resp = mock.send(r);
    REQUIRE(resp.is_tool_call());
    CHECK(resp.content.empty());
    CHECK(resp.tool_call->name == "aggregate");
    CHECK(resp.tool_call->arguments == Json{{"field", "Fine"}, {"op", "mean"}});
  }

  TEST_CASE("mock: malformed rule tables are rejected") {
    CHECK_THROWS_AS(MockBackend(Json::parse(R"js({"rules":[{"pattern":"("}]})js")), Error);
    CHECK_THROWS_AS(MockBackend(Json::parse(R"js({"rules":[{"pattern":"x"}]})js")), Error);
  }

  TEST_CASE("context precheck fails without calling the backend") {
    auto flaky = std::make_shared<FlakyBackend>(0, ErrorCode::kTransient);
    LlmGateway gw(flaky);
    try {
      gw.complete(user_request(std::string(5000 * 4, 'x'), "gpt-3.5-turbo-0613"));
      FAIL("expected context_length");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kContextLength);
      CHECK(std::stoll(e.detail()) > 0);
    }
    CHECK(flaky->calls == 0);
    CHECK(gw.backend_calls() == 0);
    CHECK(gw.complete(user_request(std::string(5000 * 4, 'x'))).content == "ok");
  }

  TEST_CASE("transient errors are retried, then surface as timeout") {
    auto ok_after_two = std::make_shared<FlakyBackend>(2, ErrorCode::kTransient);
    LlmGateway gw(ok_after_two, fast_retries());
    CHECK(gw.complete(user_request("hi")).content == "ok");
    CHECK(ok_after_two->calls == 3);

    auto never = std::make_shared<FlakyBackend>(100, ErrorCode::kTransient);
    LlmGateway gw2(never, fast_retries());
    CHECK_THROWS_WITH_AS(gw2.complete(user_request("hi")), doctest::Contains("3 attempts"), Error);
    CHECK(never->calls == 3);
  }

  TEST_CASE("auth errors are not retried") {
    auto auth = std::make_shared<FlakyBackend>(1, ErrorCode::kAuth);
    LlmGateway gw(auth, fast_retries());
    try {
      gw.complete(user_request("hi"));
      FAIL("expected auth");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kAuth);
    }
    CHECK(auth->calls == 1);
  }

  TEST_CASE("request validation") {
    ChatRequest r;
    r.model_id = "m";
    CHECK_THROWS_AS(r.validate(), Error);
    r = user_request("x");
    r.temperature = -1;
    CHECK_THROWS_AS(r.validate(), Error);
    r = user_request("x");
    r.tools = {aggregate_schema(), aggregate_schema()};
    CHECK_THROWS_AS(r.validate(), Error);
  }

  TEST_CASE("token estimator") {
    TokenEstimator est;
    CHECK(est.estimate("") == 0);
    CHECK(est.estimate(std::string(400, 'a')) == 100);
    CHECK(est.estimate(std::string(401, 'a')) == 101);
    CHECK(est.estimate("음주운전") == 1);
    std::int64_t prev = 0;
    std::string s;
    for (int i = 0; i < 200; ++i) {
      s += static_cast<char>('a' + i % 26);
      const auto n = est.estimate(s);
      CHECK(n >= prev);
      prev = n;
    }
    est.set_chars_per_token("m", 2.0);
    CHECK(est.estimate(std::string(10, 'a'), "m") == 5);
    struct Words final : Tokenizer {
      std::int64_t count(std::string_view t) const override {
        return static_cast<std::int64_t>(std::count(t.begin(), t.end(), ' ') + 1);
      }
    };
    est.set_tokenizer("w", std::make_shared<Words>());
    CHECK(est.estimate("a b c", "w") == 3);
  }

  TEST_CASE("IE prompt lists every field once and carries the shots in order") {
    const auto o = dui_ontology();
    std::vector<LabeledExample> shots = {example("d1", "0.1%"), example("d2", "0.2%")};
    std::vector<Document> docs = {{"d1", "first text", {}}, {"d2", "second text", {}}};
    const Document target{"t", "target text", {}};
    const auto req = build_ie_prompt(o, shots, docs, target, "gpt-3.5-turbo-16k-0613");
    CHECK(req.temperature == 0.0);
    REQUIRE(req.messages.size() == 6);
    const auto& sys = req.messages[0].content;
    CHECK(sys.rfind("You are a helpful assistant for IE tasks. After reading the following text, "
                    "extract information about BAC, Dist, Fine",
                    0) == 0);
    CHECK(sys.find("- BAC: blood alcohol") != std::string::npos);
    CHECK((req.messages[1] == ChatMessage{Role::kUser, "first text"}));
    CHECK((req.messages[2] == ChatMessage{Role::kAssistant, R"js({"BAC": ["0.1%"]})js"}));
    CHECK((req.messages[3] == ChatMessage{Role::kUser, "second text"}));
    CHECK((req.messages[5] == ChatMessage{Role::kUser, "target text"}));
    const std::string instr = ie_instruction(o);
    for (const std::string f : {"BAC", "Dist", "Fine"}) {
      const auto first = instr.find(f + ": [");
      REQUIRE(first != std::string::npos);
      CHECK(instr.find(f + ": [", first + 1) == std::string::npos);
    }
    const auto again = build_ie_prompt(o, shots, docs, target, "gpt-3.5-turbo-16k-0613");
    CHECK(Json(chat_request_to_wire(again)) == Json(chat_request_to_wire(req)));
  }

  TEST_CASE("IE prompt preconditions") {
    const auto o = dui_ontology();
    const Document target{"t", "x", {}};
    CHECK_THROWS_AS(build_ie_prompt(o, {}, {}, target, "m"), Error);
    try {
      build_ie_prompt(o, {}, {}, target, "m");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kPrecondition);
    }
    std::vector<LabeledExample> shots = {example("d1", "0.1%")};
    CHECK_THROWS_AS(build_ie_prompt(o, shots, {{"other", "b", {}}}, target, "m"), Error);
    CHECK_THROWS_AS(build_ie_prompt(o, shots, {{"d1", "b", {}}}, {"t", "  ", {}}, "m"), Error);
    try {
      build_ie_prompt(o, shots, {{"d1", std::string(40000, 'x'), {}}}, target, "m", {}, 4096);
      FAIL("expected context_length");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kContextLength);
    }
  }

  TEST_CASE("Korean ontology gets a Korean instruction") {
    auto o = dui_ontology();
    o.language = Language::kKorean;
    CHECK(ie_instruction(o).find("BAC, Dist, Fine") != std::string::npos);
    CHECK(ie_instruction(o).find("You are") == std::string::npos);
  }

  TEST_CASE("search terms from the mock, deduplicated and capped") {
    MockBackend mock(Json::parse(R"js({"rules":[{"pattern":"drunk",
      "content":"[\"drunk driving\", \"Drunk Driving\", \"BAC\", \"a\",\"b\",\"c\",\"d\",\"e\",\"f\",\"g\"]"}]})js"));
    LlmGateway gw(std::shared_ptr<ChatBackend>(&mock, [](ChatBackend*) {}));
    const auto t = extract_search_terms(&gw, "find drunk driving cases with BAC");
    CHECK(t.size() == 8);
    CHECK(t[0] == "drunk driving");
    CHECK(t[1] == "BAC");
  }

  TEST_CASE("search terms fall back to query tokens") {
    MockBackend mock(Json::parse(R"js({"rules":[{"pattern":"boom","error":"auth"}]})js"));
    LlmGateway gw(std::shared_ptr<ChatBackend>(&mock, [](ChatBackend*) {}));
    CHECK(extract_search_terms(&gw, "show me the boom cases") == std::vector<std::string>{"boom", "cases"});
    CHECK(extract_search_terms(&gw, "fraud in Seoul") == std::vector<std::string>{"fraud", "Seoul"});
    CHECK(extract_search_terms(nullptr, "drunk drunk driving") ==
          std::vector<std::string>{"drunk", "driving"});
    CHECK_THROWS_AS(extract_search_terms(&gw, "   "), Error);
  }

  TEST_CASE("tool schema argument validation") {
    const auto s = aggregate_schema();
    CHECK_NOTHROW(s.validate_arguments({{"field", "Fine"}, {"op", "mean"}}));
    CHECK_THROWS_AS(s.validate_arguments({{"op", "mean"}}), Error);
    CHECK_THROWS_AS(s.validate_arguments({{"field", "Fine"}, {"op", "median"}}), Error);
    CHECK_THROWS_AS(s.validate_arguments({{"field", "Fine"}, {"op", "mean"}, {"bins", "x"}}), Error);
    CHECK_THROWS_AS(s.validate_arguments({{"field", "Fine"}, {"op", "mean"}, {"zzz", 1}}), Error);
    const auto fj = s.to_function_json();
    CHECK(fj["type"] == "function");
    CHECK(fj["function"]["name"] == "aggregate");
    CHECK(fj["function"]["parameters"]["required"] == Json{"field", "op"});
  }

  TEST_CASE("tool call JSON accepts both spellings") {
    ToolCall a = Json::parse(R"js({"tool":"x","args":{"k":1}})js");
    ToolCall b = Json::parse(R"js({"name":"x","arguments":{"k":1}})js");
    CHECK(a == b);
    CHECK(Json(a) == Json::parse(R"js({"tool":"x","args":{"k":1}})js"));
  }

  TEST_CASE("wire format") {
    ChatRequest r = user_request("hi");
    r.tools.push_back(aggregate_schema());
    r.max_output_tokens = 50;
    const auto w = chat_request_to_wire(r);
    CHECK(w["model"] == "gpt-3.5-turbo-16k-0613");
    CHECK(w["messages"][0] == Json{{"role", "user"}, {"content", "hi"}});
    CHECK(w["max_tokens"] == 50);
    CHECK(w["tools"].size() == 1);

    const auto tool = chat_response_from_wire(Json::parse(R"js({"choices":[{"message":{"tool_calls":[
        {"function":{"name":"aggregate","arguments":"{\"field\":\"Fine\"}"}}]}}],
        "usage":{"prompt_tokens":7,"completion_tokens":3}})js"));
    REQUIRE(tool.is_tool_call());
    CHECK(tool.tool_call->arguments["field"] == "Fine");
    CHECK(tool.usage.input_tokens == 7);
    const auto text = chat_response_from_wire(Json::parse(R"js({"choices":[{"message":{"content":"hello"}}]})js"));
    CHECK(text.content == "hello");
    CHECK_FALSE(text.is_tool_call());
    CHECK_THROWS_AS(chat_response_from_wire(Json::parse(R"js({"choices":[]})js")), Error);
  }

  TEST_CASE("model routing and context windows") {
    GatewayConfig cfg;
    CHECK(cfg.routing.model_for(Purpose::kNormalization) == "gpt-3.5-turbo-0613");
    CHECK(cfg.context_window("gpt-4-0613") == 8192);
    CHECK(cfg.context_window("unknown") == cfg.default_context_window);
  }
}
