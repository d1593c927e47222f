#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "gridbench/grid_env.hpp"

namespace gridbench {

class OracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Path {
  int length = 0;            // number of moves
  std::vector<Coord> cells;  // from .. to, inclusive
};

// BFS over 4-connected free cells. Neighbours are expanded Down, Right, Up, Left so
// the witness is deterministic. Throws OracleError if either endpoint is a wall.
std::optional<Path> shortest_path(const GridMap& map, Coord from, Coord to);

// Flood fill from `from`, row-major order. Throws OracleError if `from` is a wall.
std::vector<Coord> reachable_cells(const GridMap& map, Coord from);

// Number of cells that fall inside the reveal window of at least one reachable cell.
int max_revealable_cells(const GridMap& map);

struct OracleBound {
  std::optional<int> shortest_path_len;  // present iff the goal exists and is reachable
  double max_coverage = 0.0;
  int max_revealable = 0;  // numerator of max_coverage
  std::optional<std::vector<Coord>> witness_path;
};

// Throws MapError(MissingGoal) for Navigation on a goal-less map.
OracleBound oracle_bounds(const GridMap& map, TaskKind task);

// Actions that walk the witness path.
std::vector<Action> path_actions(const std::vector<Coord>& cells);
std::string path_direction_string(const std::vector<Coord>& cells);  // e.g. "UUURR"

enum class DiagnosticKind {
  OpenBoundary,
  StartOnBoundary,
  GoalOnBoundary,
  MissingStart,
  MultipleStarts,
  MultipleGoals,
  UnreachableGoal,
  MalformedDocument,
};

std::string_view diagnostic_name(DiagnosticKind kind);

struct Diagnostic {
  DiagnosticKind kind;
  std::string message;
  std::optional<Coord> where;
};

// Empty result <=> the map is admissible for benchmark runs.
std::vector<Diagnostic> validate_map(const GridMap& map);

// Text-level validation: multiplicity and shape problems a GridMap cannot express,
// followed by validate_map on the leniently parsed layout.
std::vector<Diagnostic> validate_map_document(std::string_view text);

}  // namespace gridbench
