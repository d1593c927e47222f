#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "gridbench/grid_env.hpp"
#include "gridbench/observation.hpp"

namespace gridbench {

inline constexpr std::string_view kActionOpenTag = "<<ACTION>>";
inline constexpr std::string_view kActionCloseTag = "<<END>>";

enum class Regime : std::uint8_t { ZeroShot, FiveShot };

std::string_view regime_name(Regime r);  // "zero-shot" / "five-shot"
std::string_view regime_label(Regime r);  // "0-Shot" / "5-Shot"
std::optional<Regime> regime_from_name(std::string_view name);

enum class BlockKind : std::uint8_t {
  RoleTask,
  GridReference,
  ActionSchema,
  FewShot,
  CurrentStatus,
};

struct PromptBlock {
  BlockKind kind;
  std::string text;
};

// The chat split: RoleTask + GridReference + ActionSchema go out as the system
// message, FewShot (if any) + CurrentStatus as the user message.
struct RenderedPrompt {
  std::string system;
  std::string user;
  std::vector<PromptBlock> blocks;

  std::string full_text() const { return system + "\n" + user; }
};

// Fixed per (task, regime). All text except CurrentStatus is identical across steps
// and models; its digest is recorded in every trace.
class PromptTemplate {
 public:
  PromptTemplate(TaskKind task, Regime regime);

  TaskKind task() const { return task_; }
  Regime regime() const { return regime_; }
  const std::string& version() const { return version_; }

  // Static blocks in order (RoleTask, GridReference, ActionSchema[, FewShot]).
  const std::vector<PromptBlock>& static_blocks() const { return static_blocks_; }
  std::string static_text() const;
  // sha256 over version + static text.
  const std::string& hash() const { return hash_; }

  RenderedPrompt render(const ObservationContext& ctx) const;

 private:
  TaskKind task_;
  Regime regime_;
  std::string version_;
  std::vector<PromptBlock> static_blocks_;
  std::string hash_;
};

RenderedPrompt render_prompt(const PromptTemplate& tmpl, const ObservationContext& ctx);

// Five full demonstrations in order down, right, up, left, wall collision.
// Both tasks share the same demonstrations.
std::string build_fewshot_block(TaskKind task);

// CurrentStatus block alone.
std::string render_current_status(const ObservationContext& ctx);

// "moved from (r,c) to (r',c'), revealed k new cells" or the collision note.
std::string reward_note(const ObservationContext& ctx);

// Canonical payload, e.g. <<ACTION>>{"direction_str":"UP","direction_int":2}<<END>>
std::string canonical_payload(Action action);

std::string_view output_contract();

struct ActionPayload {
  std::string direction_str;
  int direction_int = 0;
  Action action = Action::Down;

  bool operator==(const ActionPayload&) const = default;
};

enum class ParseErrorKind : std::uint8_t {
  NoSentinel,
  MalformedPayload,
  UnknownDirection,
  IntStrMismatch,
};

std::string_view parse_error_name(ParseErrorKind kind);

struct ParseError {
  ParseErrorKind kind;
  std::string detail;
};

using ParseResult = std::variant<ActionPayload, ParseError>;

// Extracts the first sentinel-delimited region and checks both fields against the
// fixed direction table. Text outside the sentinels is ignored.
ParseResult parse_action(std::string_view raw);

// Correction message sent back to the model after a rejected reply; quotes the
// output contract verbatim.
std::string retry_message(const ParseError& error);

// Number of fenced grid documents inside a block of prompt text.
int count_grid_snapshots(std::string_view text);

}  // namespace gridbench
