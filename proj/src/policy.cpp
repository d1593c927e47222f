#include "gridbench/policy.hpp"

#include <algorithm>

#include "gridbench/planning_oracle.hpp"

namespace gridbench {

namespace {

ActionDecision decided(Action a) {
  ActionDecision d;
  d.action = a;
  d.raw_output = canonical_payload(a);
  d.parse_status = ParseStatus::ok();
  return d;
}

}  // namespace

RandomPolicy::RandomPolicy(std::uint64_t seed) : rng_(seed) {}

ActionDecision RandomPolicy::decide(const ObservationContext&) {
  return decided(static_cast<Action>(rng_() % 4));
}

PolicyInfo RandomPolicy::describe() const { return {"random", "Random Actions", "", "", "", {}}; }

ScriptedPolicy::ScriptedPolicy(std::vector<Action> actions, bool cycle)
    : actions_(std::move(actions)), cycle_(cycle) {
  if (actions_.empty()) throw std::invalid_argument("scripted policy needs at least one action");
}

ActionDecision ScriptedPolicy::decide(const ObservationContext&) {
  if (next_ >= actions_.size()) {
    if (!cycle_) return ActionDecision::failed("script exhausted");
    next_ = 0;
  }
  return decided(actions_[next_++]);
}

PolicyInfo ScriptedPolicy::describe() const { return {"scripted", "Scripted", "", "", "", {}}; }

OraclePolicy::OraclePolicy(const GridMap& map) {
  if (!map.goal()) throw MapError(MapErrorCode::MissingGoal, "oracle policy needs a goal");
  auto path = shortest_path(map, map.start(), *map.goal());
  if (!path) throw OracleError("goal " + to_string(*map.goal()) + " is unreachable");
  witness_ = std::move(path->cells);
}

ActionDecision OraclePolicy::decide(const ObservationContext& ctx) {
  const auto it = std::find(witness_.begin(), witness_.end(), ctx.position);
  if (it == witness_.end() || it + 1 == witness_.end()) {
    return ActionDecision::failed("off the witness path");
  }
  return decided(*action_between(*it, *(it + 1)));
}

PolicyInfo OraclePolicy::describe() const { return {"oracle", "Oracle", "", "", "", {}}; }

LlmPolicy::LlmPolicy(std::shared_ptr<LlmGateway> gateway,
                     std::shared_ptr<const PromptTemplate> tmpl, int max_rejections)
    : gateway_(std::move(gateway)), template_(std::move(tmpl)), max_rejections_(max_rejections) {
  if (!gateway_ || !template_) throw std::invalid_argument("LlmPolicy needs a gateway and a template");
  if (max_rejections_ < 0) throw std::invalid_argument("max_rejections must be >= 0");
}

ActionDecision LlmPolicy::decide(const ObservationContext& ctx) {
  return decide_with_rejection_retry(
      *gateway_, [&] { return template_->render(ctx); }, parse_action, max_rejections_);
}

PolicyInfo LlmPolicy::describe() const {
  const auto& cfg = gateway_->config();
  const std::string endpoint = cfg.is_mock() ? "mock:" + cfg.model_id : cfg.base_url;
  return {"llm", cfg.name, endpoint, template_->hash(), template_->version(), template_->regime()};
}

}  // namespace gridbench
