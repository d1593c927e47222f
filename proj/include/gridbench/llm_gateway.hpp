#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gridbench/observation.hpp"
#include "gridbench/prompt_contract.hpp"

namespace gridbench {

struct DecodingParams {
  double temperature = 0.8;
  int top_k = 40;
  double top_p = 0.9;
};

enum class ReasoningEffort : std::uint8_t { Low, Medium, High };

std::string_view reasoning_effort_name(ReasoningEffort e);
std::optional<ReasoningEffort> reasoning_effort_from_name(std::string_view name);

struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{500};
  std::chrono::milliseconds max_backoff{8000};
};

// Behaviour of the built-in offline endpoint (kind "mock").
struct MockBehaviour {
  double garbage_rate = 0.0;     // probability of a reply without any payload
  std::optional<Action> fixed;   // always answer this move instead of a seeded draw
};

struct EndpointConfig {
  std::string name;                    // label used in traces and reports
  std::string kind = "openai";         // "openai" (HTTP) or "mock"
  std::string base_url;                // e.g. http://localhost:11434/v1
  std::string model_id;
  std::optional<std::string> api_key_env;  // name of the env var holding the key
  DecodingParams decoding;
  // Unset means the vendor default (medium); only sent when set.
  std::optional<ReasoningEffort> reasoning_effort;
  // Decoding fields never sent to this endpoint; recorded as dropped in traces.
  std::vector<std::string> unsupported_params;
  std::chrono::milliseconds timeout{120000};
  RetryPolicy retry;
  double requests_per_minute = 0.0;  // 0 disables rate limiting
  MockBehaviour mock;

  bool is_mock() const { return kind == "mock"; }
};

struct ChatMessage {
  std::string role;
  std::string content;
};

// JSON body for the OpenAI-compatible chat-completion request.
nlohmann::ordered_json build_request_body(const EndpointConfig& cfg, std::span<const ChatMessage> messages,
                                  const std::set<std::string>& dropped);

struct HttpReply {
  int status = 0;
  std::string body;
  double latency_ms = 0.0;
  std::optional<int> retry_after_s;
};

enum class TransportErrorKind : std::uint8_t { Timeout, Connection, Http, Quota, InvalidResponse };

std::string_view transport_error_name(TransportErrorKind kind);

class TransportError : public std::runtime_error {
 public:
  TransportError(TransportErrorKind kind, const std::string& what, int status = 0)
      : std::runtime_error(what), kind_(kind), status_(status) {}

  TransportErrorKind kind() const noexcept { return kind_; }
  int status() const noexcept { return status_; }

 private:
  TransportErrorKind kind_;
  int status_;
};

// Moves one request body to an endpoint. Throws TransportError(Timeout/Connection)
// when no HTTP reply was obtained at all.
class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  virtual HttpReply post(const EndpointConfig& cfg, const nlohmann::ordered_json& body) = 0;
};

// POST {base_url}/chat/completions over cpp-httplib.
class HttpTransport final : public ChatTransport {
 public:
  HttpReply post(const EndpointConfig& cfg, const nlohmann::ordered_json& body) override;
};

// Replays canned replies in order; the last one repeats. Records every request body.
class ScriptedTransport final : public ChatTransport {
 public:
  explicit ScriptedTransport(std::vector<HttpReply> replies);

  // Convenience: 200 replies carrying these completion texts.
  static std::shared_ptr<ScriptedTransport> with_texts(const std::vector<std::string>& texts);

  HttpReply post(const EndpointConfig& cfg, const nlohmann::ordered_json& body) override;

  const std::vector<nlohmann::ordered_json>& requests() const { return requests_; }
  int calls() const { return static_cast<int>(requests_.size()); }

 private:
  std::deque<HttpReply> replies_;
  HttpReply last_;
  std::vector<nlohmann::ordered_json> requests_;
};

// Offline stand-in for a model: seeded, answers with payloads wrapped in chatter,
// occasionally with garbage. Reports zero latency so traces stay byte-stable.
class MockModelTransport final : public ChatTransport {
 public:
  MockModelTransport(std::uint64_t seed, MockBehaviour behaviour);

  HttpReply post(const EndpointConfig& cfg, const nlohmann::ordered_json& body) override;

 private:
  std::mt19937_64 rng_;
  MockBehaviour behaviour_;
};

// Chat-completion response body in the OpenAI shape (used by mocks and tests).
std::string make_completion_body(std::string_view text, TokenUsage usage = {});

// Minimum spacing between requests to one endpoint, shared by all episodes using it.
class RateLimiter {
 public:
  explicit RateLimiter(double requests_per_minute);
  // Returns how long the caller must wait before sending; reserves the slot.
  std::chrono::milliseconds reserve();

 private:
  std::mutex mu_;
  std::chrono::steady_clock::duration interval_;
  std::chrono::steady_clock::time_point next_;
};

struct CompletionResult {
  std::string text;
  std::optional<TokenUsage> usage;
  double latency_ms = 0.0;
  int transport_retries = 0;
  std::vector<std::string> dropped_params;  // e.g. "decoding param dropped: top_k"
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

class LlmGateway {
 public:
  LlmGateway(EndpointConfig cfg, std::shared_ptr<ChatTransport> transport,
             std::shared_ptr<RateLimiter> limiter = nullptr, Sleeper sleeper = nullptr);

  // One chat completion. Retries 429/5xx/timeouts with bounded exponential backoff,
  // drops decoding fields the endpoint rejects. Throws TransportError after the
  // retry budget is spent.
  CompletionResult complete(std::span<const ChatMessage> messages);

  const EndpointConfig& config() const { return cfg_; }
  std::vector<std::string> dropped_params() const;

 private:
  EndpointConfig cfg_;
  std::shared_ptr<ChatTransport> transport_;
  std::shared_ptr<RateLimiter> limiter_;
  Sleeper sleeper_;
  mutable std::mutex mu_;
  std::set<std::string> dropped_;
};

using PromptRenderer = std::function<RenderedPrompt()>;
using PayloadParser = std::function<ParseResult(std::string_view)>;

inline constexpr int kDefaultMaxRejections = 3;

// Calls the endpoint, re-prompting with an error-specific correction after each
// rejected reply, at most 1 + max_rejections calls. Never touches environment state.
// Transport failures come back as Failed with transport_error set.
ActionDecision decide_with_rejection_retry(LlmGateway& gateway, const PromptRenderer& render,
                                           const PayloadParser& parse = parse_action,
                                           int max_rejections = kDefaultMaxRejections);

}  // namespace gridbench
