#include "gridbench/observation.hpp"

#include <charconv>

namespace gridbench {

std::string to_string(const ParseStatus& s) {
  switch (s.kind) {
    case ParseStatus::Kind::Ok:
      return "Ok";
    case ParseStatus::Kind::RetriedOk:
      return "RetriedOk(" + std::to_string(s.retries) + ")";
    case ParseStatus::Kind::Failed:
      return "Failed";
  }
  return "Failed";
}

std::optional<ParseStatus> parse_status_from_string(std::string_view s) {
  if (s == "Ok") return ParseStatus::ok();
  if (s == "Failed") return ParseStatus::failed();
  constexpr std::string_view prefix = "RetriedOk(";
  if (s.starts_with(prefix) && s.ends_with(")")) {
    const auto digits = s.substr(prefix.size(), s.size() - prefix.size() - 1);
    int k = 0;
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), k);
    if (ec == std::errc{} && ptr == digits.data() + digits.size() && k > 0) {
      return ParseStatus::retried_ok(k);
    }
  }
  return std::nullopt;
}

ActionDecision ActionDecision::failed(std::string raw) {
  ActionDecision d;
  d.raw_output = std::move(raw);
  d.parse_status = ParseStatus::failed();
  return d;
}

ObservationContext make_context(const WorldState& current, const WorldState* previous,
                                TaskKind task, std::optional<Action> last_action,
                                bool last_step_failed) {
  ObservationContext ctx;
  ctx.current_doc = render_observation(current);
  if (previous) ctx.previous_doc = render_observation(*previous);
  ctx.last_action = last_action;
  ctx.last_step_failed = last_step_failed;
  if (!last_step_failed) ctx.last_outcome = current.last_outcome();
  ctx.task = task;
  ctx.step_index = current.steps_taken();
  ctx.position = current.pos();
  return ctx;
}

}  // namespace gridbench
