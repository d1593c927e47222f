#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gridbench {

inline constexpr int kDefaultRows = 19;
inline constexpr int kDefaultCols = 21;

// Chebyshev radius of the per-step reveal window (5x5).
inline constexpr int kRevealRadius = 2;

struct Coord {
  int row = 0;
  int col = 0;

  auto operator<=>(const Coord&) const = default;
};

std::string to_string(Coord c);

enum class CellKind : std::uint8_t { Wall, Free };

// Wire encoding is fixed: Down=0, Right=1, Up=2, Left=3.
enum class Action : std::uint8_t { Down = 0, Right = 1, Up = 2, Left = 3 };

inline constexpr std::array<Action, 4> kAllActions = {Action::Down, Action::Right, Action::Up,
                                                      Action::Left};

constexpr int wire_int(Action a) { return static_cast<int>(a); }
std::optional<Action> action_from_wire(int v);
std::string_view action_name(Action a);  // "DOWN", "RIGHT", "UP", "LEFT"
std::optional<Action> action_from_name(std::string_view name);
Coord step_toward(Coord c, Action a);
// The action moving `from` onto the 4-neighbour `to`, if they are adjacent.
std::optional<Action> action_between(Coord from, Coord to);

enum class TaskKind : std::uint8_t { Exploration, Navigation };

std::string_view task_name(TaskKind t);  // "exploration" / "navigation"
std::optional<TaskKind> task_from_name(std::string_view name);

enum class MapErrorCode {
  EmptyDocument,
  RaggedLines,
  UnknownCharacter,
  MissingStart,
  MultipleStarts,
  MultipleGoals,
  InvalidStart,
  InvalidGoal,
  OpenBoundary,
  MissingGoal,
};

std::string_view map_error_name(MapErrorCode code);

class MapError : public std::runtime_error {
 public:
  MapError(MapErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  MapErrorCode code() const noexcept { return code_; }

 private:
  MapErrorCode code_;
};

// Immutable full layout. Cells are row-major with the origin at the top-left.
class GridMap {
 public:
  // Shape-checked only: boundary and reachability are reported by validate_map.
  // Throws MapError when cells.size() != rows * cols, start/goal are outside the grid,
  // or start == goal.
  GridMap(int rows, int cols, std::vector<CellKind> cells, Coord start,
          std::optional<Coord> goal, std::string name = {});

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int cell_count() const { return rows_ * cols_; }
  Coord start() const { return start_; }
  const std::optional<Coord>& goal() const { return goal_; }
  const std::string& name() const { return name_; }

  bool in_bounds(Coord c) const {
    return c.row >= 0 && c.row < rows_ && c.col >= 0 && c.col < cols_;
  }
  int index(Coord c) const { return c.row * cols_ + c.col; }
  Coord coord(int index) const { return {index / cols_, index % cols_}; }
  CellKind cell(Coord c) const { return cells_[static_cast<std::size_t>(index(c))]; }
  bool is_free(Coord c) const { return in_bounds(c) && cell(c) == CellKind::Free; }

  GridMap with_name(std::string name) const;

 private:
  int rows_;
  int cols_;
  std::vector<CellKind> cells_;
  Coord start_;
  std::optional<Coord> goal_;
  std::string name_;
};

// Strict ingest. Alphabet {W, '.', ' ', R, g}; exactly one R, at most one g, solid
// outer wall. A trailing '\r' on each line is ignored.
GridMap parse_map(std::string_view text, std::string name = {});

// Same alphabet and shape rules as parse_map but tolerates an open boundary and
// start/goal on the boundary, so validate_map can report them.
GridMap parse_map_lenient(std::string_view text, std::string name = {});

// Canonical text: W / '.' / R at start / g at goal, newline-terminated lines.
std::string render_map(const GridMap& map);

struct StepOutcome {
  bool moved = false;
  bool collision = false;
  int newly_revealed = 0;
  Coord from;
  Coord to;

  bool operator==(const StepOutcome&) const = default;
};

class WorldState {
 public:
  WorldState(std::shared_ptr<const GridMap> map, Coord pos);

  const GridMap& map() const { return *map_; }
  const std::shared_ptr<const GridMap>& map_ptr() const { return map_; }
  Coord pos() const { return pos_; }
  int steps_taken() const { return steps_taken_; }
  int revealed_count() const { return revealed_count_; }
  const std::optional<StepOutcome>& last_outcome() const { return last_outcome_; }
  bool is_revealed(Coord c) const {
    return revealed_[static_cast<std::size_t>(map_->index(c))] != 0;
  }
  const std::vector<std::uint8_t>& revealed_mask() const { return revealed_; }

  // Marks a single cell revealed; returns true when it was hidden before.
  bool mark_revealed(Coord c);

 private:
  friend std::pair<WorldState, StepOutcome> apply_action(const WorldState&, Action);
  friend WorldState skip_step(const WorldState&);

  std::shared_ptr<const GridMap> map_;
  Coord pos_;
  std::vector<std::uint8_t> revealed_;
  int revealed_count_ = 0;
  int steps_taken_ = 0;
  std::optional<StepOutcome> last_outcome_;
};

// Revealed = clipped 5x5 window around start; Navigation also reveals the goal cell.
// Throws MapError(MissingGoal) for Navigation on a goal-less map.
WorldState initial_state(std::shared_ptr<const GridMap> map, TaskKind task);

// Adds the clipped Chebyshev-radius-2 window around pos. Idempotent.
WorldState reveal(WorldState state);
int reveal_in_place(WorldState& state);

// Deterministic move; wall hits are outcomes, not errors. Always consumes one step.
std::pair<WorldState, StepOutcome> apply_action(const WorldState& state, Action action);

// Consumes one step without moving (used when no action could be decided).
WorldState skip_step(const WorldState& state);

// '?' for hidden cells, W/./g for revealed ones, R at the robot position.
std::string render_observation(const WorldState& state);

double coverage(const WorldState& state);

}  // namespace gridbench
