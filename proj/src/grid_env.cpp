#include "gridbench/grid_env.hpp"

#include <algorithm>
#include <sstream>
#include <utility>

namespace gridbench {

std::string to_string(Coord c) {
  return "(" + std::to_string(c.row) + "," + std::to_string(c.col) + ")";
}

std::optional<Action> action_from_wire(int v) {
  if (v < 0 || v > 3) return std::nullopt;
  return static_cast<Action>(v);
}

std::string_view action_name(Action a) {
  switch (a) {
    case Action::Down:
      return "DOWN";
    case Action::Right:
      return "RIGHT";
    case Action::Up:
      return "UP";
    case Action::Left:
      return "LEFT";
  }
  return "?";
}

std::optional<Action> action_from_name(std::string_view name) {
  for (Action a : kAllActions) {
    if (action_name(a) == name) return a;
  }
  return std::nullopt;
}

Coord step_toward(Coord c, Action a) {
  switch (a) {
    case Action::Down:
      return {c.row + 1, c.col};
    case Action::Right:
      return {c.row, c.col + 1};
    case Action::Up:
      return {c.row - 1, c.col};
    case Action::Left:
      return {c.row, c.col - 1};
  }
  return c;
}

std::optional<Action> action_between(Coord from, Coord to) {
  for (Action a : kAllActions) {
    if (step_toward(from, a) == to) return a;
  }
  return std::nullopt;
}

std::string_view task_name(TaskKind t) {
  return t == TaskKind::Exploration ? "exploration" : "navigation";
}

std::optional<TaskKind> task_from_name(std::string_view name) {
  if (name == "exploration") return TaskKind::Exploration;
  if (name == "navigation") return TaskKind::Navigation;
  return std::nullopt;
}

std::string_view map_error_name(MapErrorCode code) {
  switch (code) {
    case MapErrorCode::EmptyDocument:
      return "EmptyDocument";
    case MapErrorCode::RaggedLines:
      return "RaggedLines";
    case MapErrorCode::UnknownCharacter:
      return "UnknownCharacter";
    case MapErrorCode::MissingStart:
      return "MissingStart";
    case MapErrorCode::MultipleStarts:
      return "MultipleStarts";
    case MapErrorCode::MultipleGoals:
      return "MultipleGoals";
    case MapErrorCode::InvalidStart:
      return "InvalidStart";
    case MapErrorCode::InvalidGoal:
      return "InvalidGoal";
    case MapErrorCode::OpenBoundary:
      return "OpenBoundary";
    case MapErrorCode::MissingGoal:
      return "MissingGoal";
  }
  return "Unknown";
}

// ---------------------------------------------------------------------------
// GridMap

GridMap::GridMap(int rows, int cols, std::vector<CellKind> cells, Coord start,
                 std::optional<Coord> goal, std::string name)
    : rows_(rows),
      cols_(cols),
      cells_(std::move(cells)),
      start_(start),
      goal_(goal),
      name_(std::move(name)) {
  if (rows_ <= 0 || cols_ <= 0 ||
      cells_.size() != static_cast<std::size_t>(rows_) * static_cast<std::size_t>(cols_)) {
    throw MapError(MapErrorCode::RaggedLines, "cell array does not match grid shape");
  }
  if (!in_bounds(start_)) {
    throw MapError(MapErrorCode::InvalidStart, "start " + to_string(start_) + " outside grid");
  }
  if (goal_ && !in_bounds(*goal_)) {
    throw MapError(MapErrorCode::InvalidGoal, "goal " + to_string(*goal_) + " outside grid");
  }
  if (goal_ && *goal_ == start_) {
    throw MapError(MapErrorCode::InvalidGoal, "start and goal coincide");
  }
}

GridMap GridMap::with_name(std::string name) const {
  GridMap copy = *this;
  copy.name_ = std::move(name);
  return copy;
}

namespace {

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    std::string_view line =
        text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  // A single trailing empty line is just the terminator of the last row.
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

bool on_boundary(const GridMap& map, Coord c) {
  return c.row == 0 || c.col == 0 || c.row == map.rows() - 1 || c.col == map.cols() - 1;
}

GridMap parse_impl(std::string_view text, std::string name, bool strict) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw MapError(MapErrorCode::EmptyDocument, "map document is empty");

  const int rows = static_cast<int>(lines.size());
  const int cols = static_cast<int>(lines.front().size());
  if (cols == 0) throw MapError(MapErrorCode::EmptyDocument, "map document has empty rows");

  std::vector<CellKind> cells;
  cells.reserve(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols));
  std::optional<Coord> start;
  std::optional<Coord> goal;

  for (int r = 0; r < rows; ++r) {
    const auto line = lines[static_cast<std::size_t>(r)];
    if (static_cast<int>(line.size()) != cols) {
      throw MapError(MapErrorCode::RaggedLines,
                     "line " + std::to_string(r) + " has " + std::to_string(line.size()) +
                         " characters, expected " + std::to_string(cols));
    }
    for (int c = 0; c < cols; ++c) {
      const char ch = line[static_cast<std::size_t>(c)];
      switch (ch) {
        case 'W':
          cells.push_back(CellKind::Wall);
          break;
        case '.':
        case ' ':
          cells.push_back(CellKind::Free);
          break;
        case 'R':
          if (start) {
            throw MapError(MapErrorCode::MultipleStarts,
                           "second start at " + to_string({r, c}));
          }
          start = Coord{r, c};
          cells.push_back(CellKind::Free);
          break;
        case 'g':
          if (goal) {
            throw MapError(MapErrorCode::MultipleGoals, "second goal at " + to_string({r, c}));
          }
          goal = Coord{r, c};
          cells.push_back(CellKind::Free);
          break;
        default:
          throw MapError(MapErrorCode::UnknownCharacter,
                         std::string("unknown character '") + ch + "' at " +
                             to_string({r, c}));
      }
    }
  }
  if (!start) throw MapError(MapErrorCode::MissingStart, "map has no start cell 'R'");

  GridMap map(rows, cols, std::move(cells), *start, goal, std::move(name));
  if (!strict) return map;

  if (on_boundary(map, map.start())) {
    throw MapError(MapErrorCode::InvalidStart,
                   "start " + to_string(map.start()) + " lies on the outer wall");
  }
  if (map.goal() && on_boundary(map, *map.goal())) {
    throw MapError(MapErrorCode::InvalidGoal,
                   "goal " + to_string(*map.goal()) + " lies on the outer wall");
  }
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (on_boundary(map, {r, c}) && map.cell({r, c}) != CellKind::Wall) {
        throw MapError(MapErrorCode::OpenBoundary, "outer wall open at " + to_string({r, c}));
      }
    }
  }
  return map;
}

}  // namespace

GridMap parse_map(std::string_view text, std::string name) {
  return parse_impl(text, std::move(name), true);
}

GridMap parse_map_lenient(std::string_view text, std::string name) {
  return parse_impl(text, std::move(name), false);
}

std::string render_map(const GridMap& map) {
  std::string out;
  out.reserve(static_cast<std::size_t>(map.rows() * (map.cols() + 1)));
  for (int r = 0; r < map.rows(); ++r) {
    for (int c = 0; c < map.cols(); ++c) {
      const Coord p{r, c};
      if (p == map.start()) {
        out += 'R';
      } else if (map.goal() && p == *map.goal()) {
        out += 'g';
      } else {
        out += map.cell(p) == CellKind::Wall ? 'W' : '.';
      }
    }
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// WorldState

WorldState::WorldState(std::shared_ptr<const GridMap> map, Coord pos)
    : map_(std::move(map)), pos_(pos) {
  if (!map_) throw std::invalid_argument("WorldState requires a map");
  if (!map_->is_free(pos_)) {
    throw MapError(MapErrorCode::InvalidStart, "position " + to_string(pos_) + " is not free");
  }
  revealed_.assign(static_cast<std::size_t>(map_->cell_count()), 0);
}

bool WorldState::mark_revealed(Coord c) {
  auto& cell = revealed_[static_cast<std::size_t>(map_->index(c))];
  if (cell != 0) return false;
  cell = 1;
  ++revealed_count_;
  return true;
}

int reveal_in_place(WorldState& state) {
  const GridMap& map = state.map();
  const Coord p = state.pos();
  const int r0 = std::max(0, p.row - kRevealRadius);
  const int r1 = std::min(map.rows() - 1, p.row + kRevealRadius);
  const int c0 = std::max(0, p.col - kRevealRadius);
  const int c1 = std::min(map.cols() - 1, p.col + kRevealRadius);
  int added = 0;
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      if (state.mark_revealed({r, c})) ++added;
    }
  }
  return added;
}

WorldState reveal(WorldState state) {
  reveal_in_place(state);
  return state;
}

WorldState initial_state(std::shared_ptr<const GridMap> map, TaskKind task) {
  if (task == TaskKind::Navigation && !map->goal()) {
    throw MapError(MapErrorCode::MissingGoal, "navigation requires a goal cell 'g'");
  }
  const Coord start = map->start();
  WorldState state(std::move(map), start);
  reveal_in_place(state);
  if (task == TaskKind::Navigation) state.mark_revealed(*state.map().goal());
  return state;
}

std::pair<WorldState, StepOutcome> apply_action(const WorldState& state, Action action) {
  WorldState next = state;
  StepOutcome outcome;
  outcome.from = state.pos();
  const Coord target = step_toward(state.pos(), action);
  if (state.map().is_free(target)) {
    next.pos_ = target;
    outcome.moved = true;
    outcome.newly_revealed = reveal_in_place(next);
  } else {
    outcome.collision = true;
  }
  outcome.to = next.pos_;
  ++next.steps_taken_;
  next.last_outcome_ = outcome;
  return {std::move(next), outcome};
}

WorldState skip_step(const WorldState& state) {
  WorldState next = state;
  ++next.steps_taken_;
  next.last_outcome_ = StepOutcome{false, false, 0, state.pos(), state.pos()};
  return next;
}

std::string render_observation(const WorldState& state) {
  const GridMap& map = state.map();
  std::string out;
  out.reserve(static_cast<std::size_t>(map.rows() * (map.cols() + 1)));
  for (int r = 0; r < map.rows(); ++r) {
    for (int c = 0; c < map.cols(); ++c) {
      const Coord p{r, c};
      if (p == state.pos()) {
        out += 'R';
      } else if (!state.is_revealed(p)) {
        out += '?';
      } else if (map.goal() && p == *map.goal()) {
        out += 'g';
      } else {
        out += map.cell(p) == CellKind::Wall ? 'W' : '.';
      }
    }
    out += '\n';
  }
  return out;
}

double coverage(const WorldState& state) {
  return static_cast<double>(state.revealed_count()) /
         static_cast<double>(state.map().cell_count());
}

}  // namespace gridbench
