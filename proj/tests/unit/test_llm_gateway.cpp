#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <thread>

#include "gridbench/llm_gateway.hpp"

using namespace gridbench;

namespace {

EndpointConfig test_config() {
  EndpointConfig cfg;
  cfg.name = "test";
  cfg.base_url = "http://127.0.0.1:1/v1";
  cfg.model_id = "m";
  return cfg;
}

Sleeper recording_sleeper(std::vector<std::chrono::milliseconds>& out) {
  return [&out](std::chrono::milliseconds d) { out.push_back(d); };
}

const std::vector<ChatMessage> kMessages = {{"system", "sys"}, {"user", "hello"}};

RenderedPrompt fixed_prompt() { return {"sys", "user", {}}; }

}  // namespace

TEST_CASE("request body carries the fixed decoding parameters") {
  EndpointConfig cfg = test_config();
  const auto body = build_request_body(cfg, kMessages, {});
  CHECK(body["model"] == "m");
  CHECK(body["temperature"] == 0.8);
  CHECK(body["top_k"] == 40);
  CHECK(body["top_p"] == 0.9);
  CHECK_FALSE(body.contains("reasoning_effort"));
  CHECK(body["messages"].size() == 2);
  CHECK(body["messages"][0]["role"] == "system");
  cfg.reasoning_effort = ReasoningEffort::Medium;
  cfg.unsupported_params = {"top_k"};
  const auto b2 = build_request_body(cfg, kMessages, {});
  CHECK(b2["reasoning_effort"] == "medium");
  CHECK_FALSE(b2.contains("top_k"));
}

TEST_CASE("mock echo returns the text unchanged") {
  const std::string text = "any text <<ACTION>>{}<<END>>";
  LlmGateway gw(test_config(), ScriptedTransport::with_texts({text}));
  const auto r = gw.complete(kMessages);
  CHECK(r.text == text);
  CHECK(r.transport_retries == 0);
}

TEST_CASE("429 twice then success reports two retries") {
  auto transport = std::make_shared<ScriptedTransport>(std::vector<HttpReply>{
      {429, "slow down", 0.0, {}}, {429, "slow down", 0.0, 2}, {200, make_completion_body("ok"), 0.0, {}}});
  std::vector<std::chrono::milliseconds> sleeps;
  LlmGateway gw(test_config(), transport, nullptr, recording_sleeper(sleeps));
  const auto r = gw.complete(kMessages);
  CHECK(r.text == "ok");
  CHECK(r.transport_retries == 2);
  REQUIRE(sleeps.size() == 2);
  CHECK(sleeps[0] == std::chrono::milliseconds(500));
  CHECK(sleeps[1] == std::chrono::milliseconds(2000));  // Retry-After wins
}

TEST_CASE("retries are bounded") {
  auto transport = std::make_shared<ScriptedTransport>(std::vector<HttpReply>{{503, "down", 0.0, {}}});
  std::vector<std::chrono::milliseconds> sleeps;
  EndpointConfig cfg = test_config();
  cfg.retry.max_retries = 3;
  LlmGateway gw(cfg, transport, nullptr, recording_sleeper(sleeps));
  try {
    gw.complete(kMessages);
    FAIL("expected TransportError");
  } catch (const TransportError& e) {
    CHECK(e.kind() == TransportErrorKind::Http);
    CHECK(e.status() == 503);
  }
  CHECK(transport->calls() == 4);
  CHECK(sleeps == std::vector<std::chrono::milliseconds>{std::chrono::milliseconds(500),
                                                        std::chrono::milliseconds(1000),
                                                        std::chrono::milliseconds(2000)});
}

TEST_CASE("quota exhaustion surfaces as Quota") {
  auto transport = std::make_shared<ScriptedTransport>(std::vector<HttpReply>{{429, "quota", 0.0, {}}});
  std::vector<std::chrono::milliseconds> sleeps;
  LlmGateway gw(test_config(), transport, nullptr, recording_sleeper(sleeps));
  CHECK_THROWS_AS(gw.complete(kMessages), TransportError);
  try {
    gw.complete(kMessages);
  } catch (const TransportError& e) {
    CHECK(e.kind() == TransportErrorKind::Quota);
  }
}

TEST_CASE("a 400 naming top_k drops the parameter and retries") {
  auto transport = std::make_shared<ScriptedTransport>(std::vector<HttpReply>{
      {400, "{\"error\":\"Unrecognized request argument supplied: top_k\"}", 0.0, {}},
      {200, make_completion_body("fine"), 0.0, {}}});
  LlmGateway gw(test_config(), transport);
  const auto r = gw.complete(kMessages);
  CHECK(r.text == "fine");
  CHECK(r.dropped_params == std::vector<std::string>{"decoding param dropped: top_k"});
  REQUIRE(transport->requests().size() == 2);
  CHECK(transport->requests()[0].contains("top_k"));
  CHECK_FALSE(transport->requests()[1].contains("top_k"));
  // Later calls keep it dropped.
  gw.complete(kMessages);
  CHECK_FALSE(transport->requests()[2].contains("top_k"));
}

TEST_CASE("configured unsupported params are recorded as dropped") {
  EndpointConfig cfg = test_config();
  cfg.unsupported_params = {"top_k"};
  LlmGateway gw(cfg, ScriptedTransport::with_texts({"x"}));
  CHECK(gw.complete(kMessages).dropped_params == std::vector<std::string>{"decoding param dropped: top_k"});
}

TEST_CASE("other 4xx errors are not retried") {
  auto transport = std::make_shared<ScriptedTransport>(std::vector<HttpReply>{{401, "bad key", 0.0, {}}});
  LlmGateway gw(test_config(), transport);
  CHECK_THROWS_AS(gw.complete(kMessages), TransportError);
  CHECK(transport->calls() == 1);
}

TEST_CASE("invalid response bodies are retried then reported") {
  auto transport = std::make_shared<ScriptedTransport>(std::vector<HttpReply>{{200, "not json", 0.0, {}}});
  EndpointConfig cfg = test_config();
  cfg.retry.max_retries = 1;
  LlmGateway gw(cfg, transport, nullptr, [](auto) {});
  try {
    gw.complete(kMessages);
    FAIL("expected TransportError");
  } catch (const TransportError& e) {
    CHECK(e.kind() == TransportErrorKind::InvalidResponse);
  }
  CHECK(transport->calls() == 2);
}

TEST_CASE("rejection retry: Ok, RetriedOk(2), Failed") {
  const std::string valid = canonical_payload(Action::Right);
  {
    LlmGateway gw(test_config(), ScriptedTransport::with_texts({valid}));
    const auto d = decide_with_rejection_retry(gw, fixed_prompt);
    CHECK(d.parse_status == ParseStatus::ok());
    CHECK(d.action == Action::Right);
    CHECK(d.calls.size() == 1);
  }
  {
    auto t = ScriptedTransport::with_texts({"garbage", "more garbage", valid});
    LlmGateway gw(test_config(), t);
    const auto d = decide_with_rejection_retry(gw, fixed_prompt, parse_action, 3);
    CHECK(d.parse_status == ParseStatus::retried_ok(2));
    CHECK(to_string(d.parse_status) == "RetriedOk(2)");
    CHECK(t->calls() == 3);
    // Each retry extends the conversation with the rejected reply and the correction.
    CHECK(t->requests()[1]["messages"].size() == 4);
    CHECK(t->requests()[1]["messages"][2]["content"] == "garbage");
    CHECK(t->requests()[1]["messages"][3]["content"].get<std::string>().find("NoSentinel") !=
          std::string::npos);
    CHECK(d.calls[0].parse_error == "NoSentinel");
    CHECK(d.calls[0].prompt_hash != d.calls[1].prompt_hash);
  }
  {
    auto t = ScriptedTransport::with_texts({"garbage"});
    LlmGateway gw(test_config(), t);
    const auto d = decide_with_rejection_retry(gw, fixed_prompt, parse_action, 3);
    CHECK(d.parse_status.kind == ParseStatus::Kind::Failed);
    CHECK_FALSE(d.action.has_value());
    CHECK(t->calls() == 4);
    REQUIRE(d.calls.size() == 4);
    for (const auto& c : d.calls) CHECK(c.raw_output == "garbage");
  }
}

TEST_CASE("transport failure inside a decision is reported, not thrown") {
  auto t = std::make_shared<ScriptedTransport>(std::vector<HttpReply>{{500, "boom", 0.0, {}}});
  EndpointConfig cfg = test_config();
  cfg.retry.max_retries = 0;
  LlmGateway gw(cfg, t);
  const auto d = decide_with_rejection_retry(gw, fixed_prompt);
  CHECK(d.parse_status.kind == ParseStatus::Kind::Failed);
  REQUIRE(d.transport_error.has_value());
  CHECK(d.transport_error->find("Http") == 0);
}

TEST_CASE("negative max_rejections is rejected") {
  LlmGateway gw(test_config(), ScriptedTransport::with_texts({"x"}));
  CHECK_THROWS_AS(decide_with_rejection_retry(gw, fixed_prompt, parse_action, -1), std::invalid_argument);
}

TEST_CASE("mock model transport is seeded and well formed") {
  EndpointConfig cfg = test_config();
  MockModelTransport a(17, {});
  MockModelTransport b(17, {});
  const auto body = build_request_body(cfg, kMessages, {});
  for (int i = 0; i < 20; ++i) CHECK(a.post(cfg, body).body == b.post(cfg, body).body);
  MockModelTransport fixed(1, {0.0, Action::Up});
  LlmGateway gw(cfg, std::make_shared<MockModelTransport>(1, MockBehaviour{0.0, Action::Up}));
  const auto d = decide_with_rejection_retry(gw, fixed_prompt);
  CHECK(d.action == Action::Up);
  CHECK(d.parse_status == ParseStatus::ok());
}

TEST_CASE("rate limiter spaces reservations") {
  RateLimiter unlimited(0);
  CHECK(unlimited.reserve().count() == 0);
  RateLimiter limiter(60);  // one per second
  CHECK(limiter.reserve().count() == 0);
  const auto wait = limiter.reserve();
  CHECK(wait.count() > 900);
  CHECK(wait.count() <= 1000);
}

TEST_CASE("HTTP transport against a local server") {
  httplib::Server server;
  std::atomic<int> hits{0};
  std::string last_auth;
  std::string last_body;
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    const int n = ++hits;
    last_auth = req.get_header_value("Authorization");
    last_body = req.body;
    if (n == 1) {
      res.status = 429;
      res.set_header("Retry-After", "0");
      res.set_content("rate limited", "text/plain");
      return;
    }
    if (req.body.find("top_k") != std::string::npos) {
      res.status = 400;
      res.set_content("{\"error\":\"unsupported parameter: top_k\"}", "application/json");
      return;
    }
    res.set_content(make_completion_body("<<ACTION>>{\"direction_str\":\"LEFT\",\"direction_int\":3}<<END>>",
                                         {10, 5}),
                    "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  ::setenv("GRIDBENCH_TEST_KEY", "secret-123", 1);
  EndpointConfig cfg = test_config();
  cfg.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1/";
  cfg.api_key_env = "GRIDBENCH_TEST_KEY";
  cfg.timeout = std::chrono::milliseconds(5000);
  std::vector<std::chrono::milliseconds> sleeps;
  LlmGateway gw(cfg, std::make_shared<HttpTransport>(), nullptr, recording_sleeper(sleeps));
  const auto r = gw.complete(kMessages);
  server.stop();
  th.join();

  CHECK(hits == 3);
  CHECK(r.transport_retries == 1);
  CHECK(r.usage == TokenUsage{10, 5});
  CHECK(r.dropped_params == std::vector<std::string>{"decoding param dropped: top_k"});
  CHECK(last_auth == "Bearer secret-123");
  CHECK(last_body.find("\"temperature\":0.8") != std::string::npos);
  CHECK(last_body.find("secret-123") == std::string::npos);
  CHECK(r.latency_ms > 0.0);
}

TEST_CASE("HTTP transport reports connection failures") {
  EndpointConfig cfg = test_config();
  cfg.base_url = "http://127.0.0.1:1/v1";
  cfg.timeout = std::chrono::milliseconds(500);
  cfg.retry.max_retries = 1;
  LlmGateway gw(cfg, std::make_shared<HttpTransport>(), nullptr, [](auto) {});
  CHECK_THROWS_AS(gw.complete(kMessages), TransportError);
}
