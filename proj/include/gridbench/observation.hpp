#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gridbench/grid_env.hpp"

namespace gridbench {

// Everything a policy is allowed to see for one decision. Deliberately holds no
// GridMap: only the rendered current and immediately preceding observations.
struct ObservationContext {
  std::string current_doc;
  std::optional<std::string> previous_doc;  // present iff step_index > 0
  std::optional<Action> last_action;
  std::optional<StepOutcome> last_outcome;
  // Set when the previous step decided nothing (parse failure); no outcome exists then.
  bool last_step_failed = false;
  TaskKind task = TaskKind::Exploration;
  int step_index = 0;
  Coord position;  // oracle localisation
};

struct TokenUsage {
  int prompt_tokens = 0;
  int completion_tokens = 0;

  bool operator==(const TokenUsage&) const = default;
};

// One endpoint round trip inside a decision (the first attempt or a re-prompt).
struct CallRecord {
  std::string prompt_hash;
  std::string raw_output;
  std::optional<std::string> parse_error;  // ParseErrorKind name when rejected
  double latency_ms = 0.0;
  std::optional<TokenUsage> usage;
  int transport_retries = 0;
  std::vector<std::string> dropped_params;

  bool operator==(const CallRecord&) const = default;
};

struct ParseStatus {
  enum class Kind : std::uint8_t { Ok, RetriedOk, Failed };
  Kind kind = Kind::Ok;
  int retries = 0;  // rejected replies before the accepted one (RetriedOk)

  static ParseStatus ok() { return {Kind::Ok, 0}; }
  static ParseStatus retried_ok(int k) { return {Kind::RetriedOk, k}; }
  static ParseStatus failed(int k = 0) { return {Kind::Failed, k}; }

  bool operator==(const ParseStatus&) const = default;
};

std::string to_string(const ParseStatus& s);  // "Ok", "RetriedOk(2)", "Failed"
std::optional<ParseStatus> parse_status_from_string(std::string_view s);

struct ActionDecision {
  std::optional<Action> action;  // absent iff parse_status is Failed
  std::string raw_output;
  ParseStatus parse_status;
  double latency_ms = 0.0;
  std::optional<TokenUsage> token_usage;
  std::vector<CallRecord> calls;
  // Set when the endpoint itself failed after bounded retries; the episode aborts.
  std::optional<std::string> transport_error;

  static ActionDecision failed(std::string raw);
};

// Builds the context for the next decision from the current and previous states.
ObservationContext make_context(const WorldState& current, const WorldState* previous,
                                TaskKind task, std::optional<Action> last_action,
                                bool last_step_failed);

}  // namespace gridbench
