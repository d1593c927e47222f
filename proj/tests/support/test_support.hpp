#pragma once

// Independent reference implementations used to cross-check the library.

#include <cstdint>
#include <filesystem>
#include <limits>
#include <memory>
#include <optional>
#include <queue>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "gridbench/episode.hpp"
#include "gridbench/grid_env.hpp"

namespace gbtest {

using namespace gridbench;

inline std::filesystem::path source_path(const std::string& rel) {
  return std::filesystem::path(GRIDBENCH_SOURCE_DIR) / rel;
}

// Unit-weight Dijkstra with a binary heap over (row, col) pairs. Shares no code with
// the BFS under test and expands neighbours in a different order.
inline std::optional<int> dijkstra_distance(const GridMap& map, Coord from, Coord to) {
  const int inf = std::numeric_limits<int>::max();
  std::vector<std::vector<int>> dist(map.rows(), std::vector<int>(map.cols(), inf));
  using Item = std::pair<int, std::pair<int, int>>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[from.row][from.col] = 0;
  pq.push({0, {from.row, from.col}});
  const int dr[4] = {0, -1, 0, 1};
  const int dc[4] = {-1, 0, 1, 0};
  while (!pq.empty()) {
    auto [d, rc] = pq.top();
    pq.pop();
    auto [r, c] = rc;
    if (d > dist[r][c]) continue;
    if (r == to.row && c == to.col) return d;
    for (int k = 0; k < 4; ++k) {
      const int nr = r + dr[k];
      const int nc = c + dc[k];
      if (nr < 0 || nc < 0 || nr >= map.rows() || nc >= map.cols()) continue;
      if (map.cell({nr, nc}) != CellKind::Free) continue;
      if (d + 1 < dist[nr][nc]) {
        dist[nr][nc] = d + 1;
        pq.push({d + 1, {nr, nc}});
      }
    }
  }
  return std::nullopt;
}

// Every cell within Chebyshev distance 2 of `pos`, found by scanning the whole grid.
inline std::set<std::pair<int, int>> brute_reveal_set(const GridMap& map, Coord pos) {
  std::set<std::pair<int, int>> out;
  for (int r = 0; r < map.rows(); ++r) {
    for (int c = 0; c < map.cols(); ++c) {
      const int d = std::max(std::abs(r - pos.row), std::abs(c - pos.col));
      if (d <= 2) out.insert({r, c});
    }
  }
  return out;
}

// Random walled map with a reachable goal (reachability checked with dijkstra).
inline GridMap random_solvable_map(std::mt19937_64& rng, int rows, int cols, double wall_p) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (;;) {
    std::vector<CellKind> cells(static_cast<std::size_t>(rows * cols), CellKind::Wall);
    std::vector<Coord> free;
    for (int r = 1; r < rows - 1; ++r) {
      for (int c = 1; c < cols - 1; ++c) {
        if (u(rng) >= wall_p) {
          cells[static_cast<std::size_t>(r * cols + c)] = CellKind::Free;
          free.push_back({r, c});
        }
      }
    }
    if (free.size() < 2) continue;
    std::shuffle(free.begin(), free.end(), rng);
    GridMap map(rows, cols, cells, free[0], free[1], "random");
    if (dijkstra_distance(map, free[0], free[1])) return map;
  }
}

inline EpisodeTrace synthetic_trace(const std::string& model, const std::string& layout,
                                    TaskKind task, std::optional<Regime> regime, bool success,
                                    int steps, int revealed, int collisions = 0,
                                    std::optional<int> oracle_len = 26) {
  EpisodeTrace t;
  t.header.map_name = layout;
  t.header.map_hash = "hash-" + layout;
  t.header.rows = 19;
  t.header.cols = 21;
  t.header.template_hash = regime ? "tmpl-" + std::string(regime_name(*regime)) : "";
  t.header.policy_kind = regime ? "llm" : "random";
  t.header.model = model;
  t.header.endpoint = regime ? "mock:" + model : "";
  t.header.task = task;
  t.header.regime = regime;
  t.header.t_max = 400;
  t.header.oracle_path_len = oracle_len;
  t.header.oracle_max_coverage = 1.0;
  t.header.oracle_max_revealable = 399;
  t.result.status = success ? EpisodeStatus::Success : EpisodeStatus::Truncated;
  t.result.steps_used = steps;
  t.result.revealed = revealed;
  t.result.final_coverage = revealed / 399.0;
  t.result.collisions = collisions;
  return t;
}

// Fixture behind the golden report: two layouts, a random row, two models, n = 13.
//   easy / alpha / nav 0-shot: 4 of 13 succeed at 91, 150, 200, 199 steps -> 30.77% (160)
//   easy / alpha / nav 5-shot: 13 of 13 at 26 steps                      -> 100.00% (26)
//   easy / alpha / explore 0-shot: revealed 200 x 13                     -> 50.13%
//   easy / alpha / explore 5-shot: revealed 399 x 13, all succeed        -> 100.00%
//   easy / beta  / nav both: 0 of 13                                     -> 0.00% (∞)
//   easy / random: explore revealed 214 x 100 -> 53.63%; nav 8 of 100 at 282 -> 8.00% (282)
//   medium / alpha / nav 0-shot only, 1 of 13 at 40 steps -> 7.69% (40); other cells absent
inline std::vector<EpisodeTrace> report_fixture() {
  std::vector<EpisodeTrace> out;
  const auto add = [&](int count, auto make) {
    for (int i = 0; i < count; ++i) out.push_back(make(i));
  };
  const int nav_success_steps[4] = {91, 150, 200, 199};
  add(13, [&](int i) {
    return synthetic_trace("alpha", "easy", TaskKind::Navigation, Regime::ZeroShot, i < 4,
                           i < 4 ? nav_success_steps[i] : 400, 120 + i, 30);
  });
  add(13, [&](int) {
    return synthetic_trace("alpha", "easy", TaskKind::Navigation, Regime::FiveShot, true, 26, 90);
  });
  add(13, [&](int) {
    return synthetic_trace("alpha", "easy", TaskKind::Exploration, Regime::ZeroShot, false, 400, 200);
  });
  add(13, [&](int i) {
    return synthetic_trace("alpha", "easy", TaskKind::Exploration, Regime::FiveShot, true, 300 + i, 399);
  });
  for (Regime r : {Regime::ZeroShot, Regime::FiveShot}) {
    add(13, [&](int) {
      return synthetic_trace("beta", "easy", TaskKind::Navigation, r, false, 400, 150, 120);
    });
    add(13, [&](int) {
      return synthetic_trace("beta", "easy", TaskKind::Exploration, r, false, 400, 100, 120);
    });
  }
  add(100, [&](int) {
    return synthetic_trace("Random Actions", "easy", TaskKind::Exploration, std::nullopt, false, 400, 214, 35);
  });
  add(100, [&](int i) {
    return synthetic_trace("Random Actions", "easy", TaskKind::Navigation, std::nullopt, i < 8,
                           i < 8 ? 282 : 400, 200, 35);
  });
  add(13, [&](int i) {
    return synthetic_trace("alpha", "medium", TaskKind::Navigation, Regime::ZeroShot, i == 0,
                           i == 0 ? 40 : 400, 150, 10, 25);
  });
  return out;
}

}  // namespace gbtest
