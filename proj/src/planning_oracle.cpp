#include "gridbench/planning_oracle.hpp"

#include <algorithm>
#include <deque>

namespace gridbench {

namespace {

void require_free(const GridMap& map, Coord c, const char* what) {
  if (!map.is_free(c)) {
    throw OracleError(std::string(what) + " " + to_string(c) + " is not a free cell");
  }
}

// Parent links from a BFS rooted at `from`; -2 marks unvisited cells.
std::vector<int> bfs_parents(const GridMap& map, Coord from) {
  std::vector<int> parent(static_cast<std::size_t>(map.cell_count()), -2);
  std::deque<Coord> frontier{from};
  parent[static_cast<std::size_t>(map.index(from))] = -1;
  while (!frontier.empty()) {
    const Coord cur = frontier.front();
    frontier.pop_front();
    for (Action a : kAllActions) {
      const Coord next = step_toward(cur, a);
      if (!map.is_free(next)) continue;
      auto& slot = parent[static_cast<std::size_t>(map.index(next))];
      if (slot != -2) continue;
      slot = map.index(cur);
      frontier.push_back(next);
    }
  }
  return parent;
}

}  // namespace

std::optional<Path> shortest_path(const GridMap& map, Coord from, Coord to) {
  require_free(map, from, "path source");
  require_free(map, to, "path target");
  const auto parent = bfs_parents(map, from);
  if (parent[static_cast<std::size_t>(map.index(to))] == -2) return std::nullopt;

  Path path;
  for (int idx = map.index(to); idx != -1; idx = parent[static_cast<std::size_t>(idx)]) {
    path.cells.push_back(map.coord(idx));
  }
  std::reverse(path.cells.begin(), path.cells.end());
  path.length = static_cast<int>(path.cells.size()) - 1;
  return path;
}

std::vector<Coord> reachable_cells(const GridMap& map, Coord from) {
  require_free(map, from, "flood fill source");
  const auto parent = bfs_parents(map, from);
  std::vector<Coord> out;
  for (int i = 0; i < map.cell_count(); ++i) {
    if (parent[static_cast<std::size_t>(i)] != -2) out.push_back(map.coord(i));
  }
  return out;
}

int max_revealable_cells(const GridMap& map) {
  if (!map.is_free(map.start())) return 0;
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(map.cell_count()), 0);
  int count = 0;
  for (Coord p : reachable_cells(map, map.start())) {
    for (int r = std::max(0, p.row - kRevealRadius);
         r <= std::min(map.rows() - 1, p.row + kRevealRadius); ++r) {
      for (int c = std::max(0, p.col - kRevealRadius);
           c <= std::min(map.cols() - 1, p.col + kRevealRadius); ++c) {
        auto& s = seen[static_cast<std::size_t>(map.index({r, c}))];
        if (!s) {
          s = 1;
          ++count;
        }
      }
    }
  }
  return count;
}

OracleBound oracle_bounds(const GridMap& map, TaskKind task) {
  if (task == TaskKind::Navigation && !map.goal()) {
    throw MapError(MapErrorCode::MissingGoal, "navigation bounds require a goal cell 'g'");
  }
  OracleBound bound;
  bound.max_revealable = max_revealable_cells(map);
  bound.max_coverage =
      static_cast<double>(bound.max_revealable) / static_cast<double>(map.cell_count());
  if (map.goal() && map.is_free(map.start()) && map.is_free(*map.goal())) {
    if (auto path = shortest_path(map, map.start(), *map.goal())) {
      bound.shortest_path_len = path->length;
      bound.witness_path = std::move(path->cells);
    }
  }
  return bound;
}

std::vector<Action> path_actions(const std::vector<Coord>& cells) {
  std::vector<Action> out;
  for (std::size_t i = 1; i < cells.size(); ++i) {
    const auto a = action_between(cells[i - 1], cells[i]);
    if (!a) throw OracleError("path cells " + to_string(cells[i - 1]) + " and " +
                              to_string(cells[i]) + " are not adjacent");
    out.push_back(*a);
  }
  return out;
}

std::string path_direction_string(const std::vector<Coord>& cells) {
  std::string out;
  for (Action a : path_actions(cells)) out += action_name(a).front();
  return out;
}

std::string_view diagnostic_name(DiagnosticKind kind) {
  switch (kind) {
    case DiagnosticKind::OpenBoundary:
      return "OpenBoundary";
    case DiagnosticKind::StartOnBoundary:
      return "StartOnBoundary";
    case DiagnosticKind::GoalOnBoundary:
      return "GoalOnBoundary";
    case DiagnosticKind::MissingStart:
      return "MissingStart";
    case DiagnosticKind::MultipleStarts:
      return "MultipleStarts";
    case DiagnosticKind::MultipleGoals:
      return "MultipleGoals";
    case DiagnosticKind::UnreachableGoal:
      return "UnreachableGoal";
    case DiagnosticKind::MalformedDocument:
      return "MalformedDocument";
  }
  return "Unknown";
}

std::vector<Diagnostic> validate_map(const GridMap& map) {
  std::vector<Diagnostic> out;
  const auto on_boundary = [&](Coord c) {
    return c.row == 0 || c.col == 0 || c.row == map.rows() - 1 || c.col == map.cols() - 1;
  };
  for (int r = 0; r < map.rows(); ++r) {
    for (int c = 0; c < map.cols(); ++c) {
      const Coord p{r, c};
      if (on_boundary(p) && map.cell(p) != CellKind::Wall) {
        out.push_back({DiagnosticKind::OpenBoundary, "outer wall open at " + to_string(p), p});
      }
    }
  }
  if (on_boundary(map.start())) {
    out.push_back({DiagnosticKind::StartOnBoundary,
                   "start " + to_string(map.start()) + " lies on the outer wall", map.start()});
  }
  if (map.goal() && on_boundary(*map.goal())) {
    out.push_back({DiagnosticKind::GoalOnBoundary,
                   "goal " + to_string(*map.goal()) + " lies on the outer wall", map.goal()});
  }
  if (map.goal() && map.is_free(map.start()) && map.is_free(*map.goal()) &&
      !shortest_path(map, map.start(), *map.goal())) {
    out.push_back({DiagnosticKind::UnreachableGoal,
                   "goal " + to_string(*map.goal()) + " is not reachable from start",
                   map.goal()});
  }
  return out;
}

std::vector<Diagnostic> validate_map_document(std::string_view text) {
  int starts = 0;
  int goals = 0;
  for (char ch : text) {
    starts += ch == 'R';
    goals += ch == 'g';
  }
  std::vector<Diagnostic> out;
  if (starts == 0) out.push_back({DiagnosticKind::MissingStart, "no start cell 'R'", {}});
  if (starts > 1) {
    out.push_back({DiagnosticKind::MultipleStarts,
                   std::to_string(starts) + " start cells 'R' (expected 1)", {}});
  }
  if (goals > 1) {
    out.push_back({DiagnosticKind::MultipleGoals,
                   std::to_string(goals) + " goal cells 'g' (expected at most 1)", {}});
  }
  if (!out.empty()) return out;

  try {
    const GridMap map = parse_map_lenient(text);
    return validate_map(map);
  } catch (const MapError& e) {
    out.push_back({DiagnosticKind::MalformedDocument,
                   std::string(map_error_name(e.code())) + ": " + e.what(), {}});
  }
  return out;
}

}  // namespace gridbench
