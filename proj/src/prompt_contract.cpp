#include "gridbench/prompt_contract.hpp"

#include <json.hpp>

#include "gridbench/assets.hpp"

namespace gridbench {

namespace {

constexpr std::string_view kGridFenceOpen = "```grid\n";
constexpr std::string_view kGridFenceClose = "```\n";

std::string trim_trailing_newlines(std::string_view s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.remove_suffix(1);
  return std::string(s);
}

void replace_all(std::string& text, std::string_view key, std::string_view value) {
  std::size_t pos = 0;
  while ((pos = text.find(key, pos)) != std::string::npos) {
    text.replace(pos, key.size(), value);
    pos += value.size();
  }
}

std::string fenced(std::string_view doc) {
  std::string out(kGridFenceOpen);
  out += doc;
  if (out.back() != '\n') out += '\n';
  out += kGridFenceClose;
  return out;
}

std::string action_with_int(Action a) {
  return std::string(action_name(a)) + " (" + std::to_string(wire_int(a)) + ")";
}

std::string demo_block(int number, Action action, const WorldState& before) {
  const auto [after, outcome] = apply_action(before, action);
  ObservationContext ctx;
  ctx.last_action = action;
  ctx.last_outcome = outcome;
  ctx.step_index = 1;

  std::string out = "### Example " + std::to_string(number) + ": " +
                    std::string(action_name(action)) +
                    (outcome.collision ? " into a wall" : "") + "\n";
  out += "Observation before (robot at " + to_string(before.pos()) + "):\n";
  out += fenced(render_observation(before));
  out += "Chosen action: " + canonical_payload(action) + "\n";
  out += "Observation after (robot at " + to_string(after.pos()) + "):\n";
  out += fenced(render_observation(after));
  out += "Reward note: " + reward_note(ctx) + "\n";
  return out;
}

}  // namespace

std::string_view regime_name(Regime r) {
  return r == Regime::ZeroShot ? "zero-shot" : "five-shot";
}

std::string_view regime_label(Regime r) { return r == Regime::ZeroShot ? "0-Shot" : "5-Shot"; }

std::optional<Regime> regime_from_name(std::string_view name) {
  if (name == "zero-shot" || name == "0-shot") return Regime::ZeroShot;
  if (name == "five-shot" || name == "5-shot") return Regime::FiveShot;
  return std::nullopt;
}

std::string_view output_contract() {
  static const std::string contract = trim_trailing_newlines(asset("prompts/output_contract.txt"));
  return contract;
}

std::string canonical_payload(Action action) {
  return std::string(kActionOpenTag) + "{\"direction_str\":\"" + std::string(action_name(action)) +
         "\",\"direction_int\":" + std::to_string(wire_int(action)) + "}" +
         std::string(kActionCloseTag);
}

std::string reward_note(const ObservationContext& ctx) {
  if (ctx.last_step_failed) return "no valid action was received; position unchanged";
  if (!ctx.last_outcome) return "episode start, no previous move";
  const StepOutcome& o = *ctx.last_outcome;
  if (o.collision) {
    const Coord wall = ctx.last_action ? step_toward(o.from, *ctx.last_action) : o.from;
    return "invalid move: wall at " + to_string(wall) + "; position unchanged";
  }
  return "moved from " + to_string(o.from) + " to " + to_string(o.to) + ", revealed " +
         std::to_string(o.newly_revealed) + " new cells";
}

std::string build_fewshot_block(TaskKind /*task*/) {
  const auto demo_map =
      std::make_shared<const GridMap>(parse_map(asset("prompts/fewshot_demo_map.txt"), "demo"));
  const WorldState fresh = initial_state(demo_map, TaskKind::Exploration);

  std::string out = trim_trailing_newlines(asset("prompts/fewshot_header.txt")) + "\n";
  int number = 1;
  for (Action a : kAllActions) out += demo_block(number++, a, fresh);

  // Collision: robot directly below the inner wall segment, neighbourhood already seen.
  WorldState blocked(demo_map, Coord{4, 5});
  reveal_in_place(blocked);
  out += demo_block(number, Action::Up, blocked);
  return out;
}

PromptTemplate::PromptTemplate(TaskKind task, Regime regime)
    : task_(task), regime_(regime), version_(trim_trailing_newlines(asset("prompts/VERSION"))) {
  const std::string role = trim_trailing_newlines(
      asset(task == TaskKind::Navigation ? "prompts/role_task_navigation.txt"
                                         : "prompts/role_task_exploration.txt"));
  std::string schema = trim_trailing_newlines(asset("prompts/action_schema.txt"));
  replace_all(schema, "{{output_contract}}", output_contract());

  static_blocks_.push_back({BlockKind::RoleTask, role + "\n"});
  static_blocks_.push_back(
      {BlockKind::GridReference, trim_trailing_newlines(asset("prompts/grid_reference.txt")) + "\n"});
  static_blocks_.push_back({BlockKind::ActionSchema, schema + "\n"});
  if (regime == Regime::FiveShot) {
    static_blocks_.push_back({BlockKind::FewShot, build_fewshot_block(task)});
  }
  hash_ = sha256_hex(version_ + "\n" + static_text());
}

std::string PromptTemplate::static_text() const {
  std::string out;
  for (const auto& b : static_blocks_) {
    if (!out.empty()) out += "\n";
    out += b.text;
  }
  return out;
}

std::string render_current_status(const ObservationContext& ctx) {
  std::string text = trim_trailing_newlines(asset("prompts/current_status.txt")) + "\n";

  std::string move;
  if (ctx.last_outcome) {
    move = to_string(ctx.last_outcome->from) + " -> " + to_string(ctx.last_outcome->to);
  } else if (ctx.step_index > 0) {
    move = to_string(ctx.position) + " -> " + to_string(ctx.position);
  } else {
    move = "start -> " + to_string(ctx.position);
  }

  std::string grids;
  if (ctx.previous_doc) {
    grids += "Previous grid:\n" + fenced(*ctx.previous_doc);
  }
  grids += "Current grid:\n" + fenced(ctx.current_doc);

  replace_all(text, "{{step}}", std::to_string(ctx.step_index));
  replace_all(text, "{{move}}", move);
  replace_all(text, "{{last_action}}", ctx.last_action ? action_with_int(*ctx.last_action) : "none");
  replace_all(text, "{{reward_note}}", reward_note(ctx));
  replace_all(text, "{{grids}}", grids);
  return text;
}

RenderedPrompt PromptTemplate::render(const ObservationContext& ctx) const {
  RenderedPrompt out;
  out.blocks = static_blocks_;
  out.blocks.push_back({BlockKind::CurrentStatus, render_current_status(ctx)});
  for (const auto& b : out.blocks) {
    const bool system = b.kind == BlockKind::RoleTask || b.kind == BlockKind::GridReference ||
                        b.kind == BlockKind::ActionSchema;
    std::string& target = system ? out.system : out.user;
    if (!target.empty()) target += "\n";
    target += b.text;
  }
  return out;
}

RenderedPrompt render_prompt(const PromptTemplate& tmpl, const ObservationContext& ctx) {
  return tmpl.render(ctx);
}

std::string_view parse_error_name(ParseErrorKind kind) {
  switch (kind) {
    case ParseErrorKind::NoSentinel:
      return "NoSentinel";
    case ParseErrorKind::MalformedPayload:
      return "MalformedPayload";
    case ParseErrorKind::UnknownDirection:
      return "UnknownDirection";
    case ParseErrorKind::IntStrMismatch:
      return "IntStrMismatch";
  }
  return "Unknown";
}

ParseResult parse_action(std::string_view raw) {
  const auto open = raw.find(kActionOpenTag);
  if (open == std::string_view::npos) {
    return ParseError{ParseErrorKind::NoSentinel, "no <<ACTION>> tag found"};
  }
  const auto body_start = open + kActionOpenTag.size();
  const auto close = raw.find(kActionCloseTag, body_start);
  if (close == std::string_view::npos) {
    return ParseError{ParseErrorKind::NoSentinel, "<<ACTION>> tag is not closed by <<END>>"};
  }
  const std::string_view body = raw.substr(body_start, close - body_start);

  const auto json = nlohmann::json::parse(body, nullptr, /*allow_exceptions=*/false);
  if (json.is_discarded() || !json.is_object()) {
    return ParseError{ParseErrorKind::MalformedPayload, "payload is not a JSON object"};
  }
  if (json.size() != 2 || !json.contains("direction_str") || !json.contains("direction_int")) {
    return ParseError{ParseErrorKind::MalformedPayload,
                      "payload must hold exactly direction_str and direction_int"};
  }
  const auto& str = json["direction_str"];
  const auto& num = json["direction_int"];
  if (!str.is_string() || !num.is_number_integer()) {
    return ParseError{ParseErrorKind::MalformedPayload,
                      "direction_str must be a string and direction_int an integer"};
  }

  const auto by_name = action_from_name(str.get<std::string>());
  if (!by_name) {
    return ParseError{ParseErrorKind::UnknownDirection,
                      "unknown direction_str \"" + str.get<std::string>() + "\""};
  }
  const auto wire = num.get<std::int64_t>();
  const auto by_int = wire >= 0 && wire <= 3 ? action_from_wire(static_cast<int>(wire))
                                              : std::nullopt;
  if (!by_int) {
    return ParseError{ParseErrorKind::UnknownDirection,
                      "direction_int " + std::to_string(wire) + " is outside 0..3"};
  }
  if (*by_int != *by_name) {
    return ParseError{ParseErrorKind::IntStrMismatch,
                      "direction_str " + str.get<std::string>() + " does not match direction_int " +
                          std::to_string(wire)};
  }
  return ActionPayload{str.get<std::string>(), static_cast<int>(wire), *by_name};
}

std::string retry_message(const ParseError& error) {
  std::string text = trim_trailing_newlines(asset("prompts/retry.txt"));
  replace_all(text, "{{reason}}",
              std::string(parse_error_name(error.kind)) + ": " + error.detail);
  replace_all(text, "{{output_contract}}", output_contract());
  return text;
}

int count_grid_snapshots(std::string_view text) {
  int count = 0;
  std::size_t pos = 0;
  while ((pos = text.find(kGridFenceOpen, pos)) != std::string_view::npos) {
    if (pos == 0 || text[pos - 1] == '\n') ++count;
    pos += kGridFenceOpen.size();
  }
  return count;
}

}  // namespace gridbench
