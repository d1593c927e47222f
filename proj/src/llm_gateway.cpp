#include "gridbench/llm_gateway.hpp"

#include <httplib.h>

#include <algorithm>
#include <cstdlib>
#include <thread>

#include "gridbench/assets.hpp"

namespace gridbench {

namespace {

constexpr std::array<std::string_view, 4> kDecodingFields = {"temperature", "top_k", "top_p",
                                                             "reasoning_effort"};

void real_sleep(std::chrono::milliseconds d) {
  if (d.count() > 0) std::this_thread::sleep_for(d);
}

std::string dropped_note(std::string_view param) {
  return "decoding param dropped: " + std::string(param);
}

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path without trailing slash
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  const auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  const auto path_start = url.find('/', host_start);
  SplitUrl out;
  if (path_start == std::string::npos) {
    out.origin = url;
  } else {
    out.origin = url.substr(0, path_start);
    out.prefix = url.substr(path_start);
  }
  while (!out.prefix.empty() && out.prefix.back() == '/') out.prefix.pop_back();
  return out;
}

std::chrono::milliseconds backoff_for(const RetryPolicy& policy, int attempt,
                                      std::optional<int> retry_after_s) {
  if (retry_after_s) {
    return std::min(policy.max_backoff, std::chrono::milliseconds(*retry_after_s * 1000LL));
  }
  auto delay = policy.initial_backoff;
  for (int i = 0; i < attempt && delay < policy.max_backoff; ++i) delay *= 2;
  return std::min(delay, policy.max_backoff);
}

bool retryable_status(int status) {
  return status == 408 || status == 429 || (status >= 500 && status <= 599);
}

}  // namespace

std::string_view reasoning_effort_name(ReasoningEffort e) {
  switch (e) {
    case ReasoningEffort::Low:
      return "low";
    case ReasoningEffort::Medium:
      return "medium";
    case ReasoningEffort::High:
      return "high";
  }
  return "medium";
}

std::optional<ReasoningEffort> reasoning_effort_from_name(std::string_view name) {
  if (name == "low") return ReasoningEffort::Low;
  if (name == "medium") return ReasoningEffort::Medium;
  if (name == "high") return ReasoningEffort::High;
  return std::nullopt;
}

std::string_view transport_error_name(TransportErrorKind kind) {
  switch (kind) {
    case TransportErrorKind::Timeout:
      return "Timeout";
    case TransportErrorKind::Connection:
      return "Connection";
    case TransportErrorKind::Http:
      return "Http";
    case TransportErrorKind::Quota:
      return "Quota";
    case TransportErrorKind::InvalidResponse:
      return "InvalidResponse";
  }
  return "Unknown";
}

nlohmann::ordered_json build_request_body(const EndpointConfig& cfg, std::span<const ChatMessage> messages,
                                  const std::set<std::string>& dropped) {
  nlohmann::ordered_json body;
  body["model"] = cfg.model_id;
  auto& msgs = body["messages"];
  msgs = nlohmann::ordered_json::array();
  for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  const auto keep = [&](std::string_view field) {
    return !dropped.contains(std::string(field)) &&
           std::find(cfg.unsupported_params.begin(), cfg.unsupported_params.end(), field) ==
               cfg.unsupported_params.end();
  };
  if (keep("temperature")) body["temperature"] = cfg.decoding.temperature;
  if (keep("top_k")) body["top_k"] = cfg.decoding.top_k;
  if (keep("top_p")) body["top_p"] = cfg.decoding.top_p;
  if (cfg.reasoning_effort && keep("reasoning_effort")) {
    body["reasoning_effort"] = reasoning_effort_name(*cfg.reasoning_effort);
  }
  body["stream"] = false;
  return body;
}

// ---------------------------------------------------------------------------
// Transports

HttpReply HttpTransport::post(const EndpointConfig& cfg, const nlohmann::ordered_json& body) {
  const SplitUrl url = split_url(cfg.base_url);
  httplib::Client client(url.origin);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(cfg.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  httplib::Headers headers;
  if (cfg.api_key_env) {
    if (const char* key = std::getenv(cfg.api_key_env->c_str()); key && *key) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
  }

  const auto t0 = std::chrono::steady_clock::now();
  auto res = client.Post(url.prefix + "/chat/completions", headers, body.dump(),
                         "application/json");
  const auto t1 = std::chrono::steady_clock::now();
  if (!res) {
    const auto err = res.error();
    const std::string what = httplib::to_string(err);
    const bool timeout = err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read;
    throw TransportError(timeout ? TransportErrorKind::Timeout : TransportErrorKind::Connection,
                         cfg.base_url + ": " + what);
  }
  HttpReply reply;
  reply.status = res->status;
  reply.body = res->body;
  reply.latency_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  if (res->has_header("Retry-After")) {
    try {
      reply.retry_after_s = std::stoi(res->get_header_value("Retry-After"));
    } catch (const std::exception&) {
    }
  }
  return reply;
}

ScriptedTransport::ScriptedTransport(std::vector<HttpReply> replies)
    : replies_(replies.begin(), replies.end()) {
  if (replies_.empty()) throw std::invalid_argument("ScriptedTransport needs at least one reply");
  last_ = replies_.back();
}

std::shared_ptr<ScriptedTransport> ScriptedTransport::with_texts(
    const std::vector<std::string>& texts) {
  std::vector<HttpReply> replies;
  for (const auto& t : texts) replies.push_back({200, make_completion_body(t), 0.0, {}});
  return std::make_shared<ScriptedTransport>(std::move(replies));
}

HttpReply ScriptedTransport::post(const EndpointConfig&, const nlohmann::ordered_json& body) {
  requests_.push_back(body);
  if (replies_.empty()) return last_;
  HttpReply r = replies_.front();
  replies_.pop_front();
  return r;
}

MockModelTransport::MockModelTransport(std::uint64_t seed, MockBehaviour behaviour)
    : rng_(seed), behaviour_(behaviour) {}

HttpReply MockModelTransport::post(const EndpointConfig&, const nlohmann::ordered_json& body) {
  const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
  const Action a = behaviour_.fixed ? *behaviour_.fixed : static_cast<Action>(rng_() % 4);
  std::string text;
  if (u < behaviour_.garbage_rate) {
    text = "Let me look at the grid again before committing to a move.";
  } else {
    std::string name(action_name(a));
    std::transform(name.begin(), name.end(), name.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    text = "Heading " + name + " looks reasonable.\n" + canonical_payload(a);
  }
  std::size_t prompt_bytes = 0;
  for (const auto& m : body.at("messages")) prompt_bytes += m.at("content").get<std::string>().size();
  TokenUsage usage{static_cast<int>(prompt_bytes / 4), static_cast<int>(text.size() / 4)};
  return {200, make_completion_body(text, usage), 0.0, {}};
}

std::string make_completion_body(std::string_view text, TokenUsage usage) {
  nlohmann::json body = {
      {"object", "chat.completion"},
      {"choices",
       {{{"index", 0},
         {"message", {{"role", "assistant"}, {"content", text}}},
         {"finish_reason", "stop"}}}},
      {"usage",
       {{"prompt_tokens", usage.prompt_tokens},
        {"completion_tokens", usage.completion_tokens},
        {"total_tokens", usage.prompt_tokens + usage.completion_tokens}}}};
  return body.dump();
}

// ---------------------------------------------------------------------------
// Rate limiting

RateLimiter::RateLimiter(double requests_per_minute)
    : interval_(requests_per_minute > 0
                    ? std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                          std::chrono::duration<double>(60.0 / requests_per_minute))
                    : std::chrono::steady_clock::duration::zero()),
      next_(std::chrono::steady_clock::now()) {}

std::chrono::milliseconds RateLimiter::reserve() {
  if (interval_ == std::chrono::steady_clock::duration::zero()) return {};
  std::lock_guard lock(mu_);
  const auto now = std::chrono::steady_clock::now();
  const auto slot = std::max(now, next_);
  next_ = slot + interval_;
  return std::chrono::duration_cast<std::chrono::milliseconds>(slot - now);
}

// ---------------------------------------------------------------------------
// Gateway

LlmGateway::LlmGateway(EndpointConfig cfg, std::shared_ptr<ChatTransport> transport,
                       std::shared_ptr<RateLimiter> limiter, Sleeper sleeper)
    : cfg_(std::move(cfg)),
      transport_(std::move(transport)),
      limiter_(std::move(limiter)),
      sleeper_(sleeper ? std::move(sleeper) : Sleeper(real_sleep)) {
  if (!transport_) throw std::invalid_argument("LlmGateway requires a transport");
  for (const auto& p : cfg_.unsupported_params) dropped_.insert(p);
}

std::vector<std::string> LlmGateway::dropped_params() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  for (const auto& p : dropped_) out.push_back(dropped_note(p));
  return out;
}

CompletionResult LlmGateway::complete(std::span<const ChatMessage> messages) {
  CompletionResult result;
  int retries = 0;
  const auto retry_or_throw = [&](TransportErrorKind kind, const std::string& what, int status,
                                  std::optional<int> retry_after) {
    if (retries >= cfg_.retry.max_retries) {
      throw TransportError(kind,
                           what + " (after " + std::to_string(retries) + " retries)", status);
    }
    sleeper_(backoff_for(cfg_.retry, retries, retry_after));
    ++retries;
  };

  for (;;) {
    std::set<std::string> dropped;
    {
      std::lock_guard lock(mu_);
      dropped = dropped_;
    }
    const auto body = build_request_body(cfg_, messages, dropped);
    if (limiter_) sleeper_(limiter_->reserve());

    HttpReply reply;
    try {
      reply = transport_->post(cfg_, body);
    } catch (const TransportError& e) {
      retry_or_throw(e.kind(), e.what(), 0, std::nullopt);
      continue;
    }
    result.latency_ms += reply.latency_ms;

    if (reply.status == 200) {
      const auto json = nlohmann::json::parse(reply.body, nullptr, false);
      const nlohmann::json* content = nullptr;
      if (!json.is_discarded() && json.contains("choices") && json["choices"].is_array() &&
          !json["choices"].empty()) {
        const auto& choice = json["choices"][0];
        if (choice.contains("message") && choice["message"].contains("content") &&
            choice["message"]["content"].is_string()) {
          content = &choice["message"]["content"];
        }
      }
      if (!content) {
        retry_or_throw(TransportErrorKind::InvalidResponse,
                       cfg_.name + ": response has no choices[0].message.content", 200,
                       std::nullopt);
        continue;
      }
      result.text = content->get<std::string>();
      if (json.contains("usage") && json["usage"].is_object()) {
        const auto& u = json["usage"];
        result.usage = TokenUsage{u.value("prompt_tokens", 0), u.value("completion_tokens", 0)};
      }
      result.transport_retries = retries;
      result.dropped_params = dropped_params();
      return result;
    }

    if (reply.status == 400 || reply.status == 422) {
      bool dropped_one = false;
      for (auto field : kDecodingFields) {
        if (body.contains(std::string(field)) &&
            reply.body.find(field) != std::string::npos) {
          std::lock_guard lock(mu_);
          dropped_.insert(std::string(field));
          dropped_one = true;
          break;
        }
      }
      if (dropped_one) continue;
    }

    const std::string what =
        cfg_.name + ": HTTP " + std::to_string(reply.status) + " " + reply.body.substr(0, 200);
    if (!retryable_status(reply.status)) {
      throw TransportError(TransportErrorKind::Http, what, reply.status);
    }
    retry_or_throw(reply.status == 429 ? TransportErrorKind::Quota : TransportErrorKind::Http, what,
                   reply.status, reply.retry_after_s);
  }
}

ActionDecision decide_with_rejection_retry(LlmGateway& gateway, const PromptRenderer& render,
                                           const PayloadParser& parse, int max_rejections) {
  if (max_rejections < 0) throw std::invalid_argument("max_rejections must be >= 0");
  const RenderedPrompt prompt = render();
  std::vector<ChatMessage> messages = {{"system", prompt.system}, {"user", prompt.user}};

  ActionDecision decision;
  for (int attempt = 0; attempt <= max_rejections; ++attempt) {
    nlohmann::json transcript = nlohmann::json::array();
    for (const auto& m : messages) transcript.push_back({{"role", m.role}, {"content", m.content}});
    CallRecord call;
    call.prompt_hash = sha256_hex(transcript.dump());

    CompletionResult completion;
    try {
      completion = gateway.complete(messages);
    } catch (const TransportError& e) {
      decision.action.reset();
      decision.parse_status = ParseStatus::failed();
      decision.transport_error =
          std::string(transport_error_name(e.kind())) + ": " + e.what();
      return decision;
    }

    call.raw_output = completion.text;
    call.latency_ms = completion.latency_ms;
    call.usage = completion.usage;
    call.transport_retries = completion.transport_retries;
    call.dropped_params = completion.dropped_params;
    decision.raw_output = completion.text;
    decision.latency_ms += completion.latency_ms;
    if (completion.usage) {
      if (!decision.token_usage) decision.token_usage = TokenUsage{};
      decision.token_usage->prompt_tokens += completion.usage->prompt_tokens;
      decision.token_usage->completion_tokens += completion.usage->completion_tokens;
    }

    const ParseResult parsed = parse(completion.text);
    if (const auto* payload = std::get_if<ActionPayload>(&parsed)) {
      decision.calls.push_back(std::move(call));
      decision.action = payload->action;
      decision.parse_status =
          attempt == 0 ? ParseStatus::ok() : ParseStatus::retried_ok(attempt);
      return decision;
    }
    const auto& error = std::get<ParseError>(parsed);
    call.parse_error = std::string(parse_error_name(error.kind));
    decision.calls.push_back(std::move(call));
    messages.push_back({"assistant", completion.text});
    messages.push_back({"user", retry_message(error)});
  }
  decision.action.reset();
  decision.parse_status = ParseStatus::failed();
  return decision;
}

}  // namespace gridbench
