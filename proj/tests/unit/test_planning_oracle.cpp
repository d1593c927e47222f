#include <doctest.h>

#include "gridbench/assets.hpp"
#include "gridbench/planning_oracle.hpp"
#include "test_support.hpp"

using namespace gridbench;

TEST_CASE("shortest path on the shipped layouts") {
  const std::pair<const char*, int> expected[] = {{"easy", 26}, {"medium", 25}, {"hard", 24}};
  for (const auto& [name, len] : expected) {
    const auto map = shipped_layout(name);
    const auto p = shortest_path(*map, map->start(), *map->goal());
    REQUIRE(p);
    CHECK(p->length == len);
    CHECK(p->cells.size() == static_cast<std::size_t>(len + 1));
    CHECK(gbtest::dijkstra_distance(*map, map->start(), *map->goal()) == len);
    // The witness is a legal walk.
    for (std::size_t i = 1; i < p->cells.size(); ++i) {
      CHECK(map->is_free(p->cells[i]));
      CHECK(action_between(p->cells[i - 1], p->cells[i]).has_value());
    }
  }
}

TEST_CASE("BFS agrees with Dijkstra on random maps") {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 200; ++i) {
    const GridMap m = gbtest::random_solvable_map(rng, 7 + static_cast<int>(rng() % 5),
                                                  7 + static_cast<int>(rng() % 7), 0.35);
    const auto p = shortest_path(m, m.start(), *m.goal());
    REQUIRE(p);
    CHECK(p->length == *gbtest::dijkstra_distance(m, m.start(), *m.goal()));
  }
}

TEST_CASE("unreachable goal and wall endpoints") {
  const GridMap m = parse_map(
      "WWWWWWW\n"
      "WR.W.gW\n"
      "WWWWWWW\n");
  CHECK_FALSE(shortest_path(m, m.start(), *m.goal()).has_value());
  CHECK_THROWS_AS(shortest_path(m, {0, 0}, *m.goal()), OracleError);
  const auto b = oracle_bounds(m, TaskKind::Navigation);
  CHECK_FALSE(b.shortest_path_len.has_value());
  const auto diags = validate_map(m);
  REQUIRE(diags.size() == 1);
  CHECK(diags[0].kind == DiagnosticKind::UnreachableGoal);
}

TEST_CASE("max coverage of an open toy map is 1.0") {
  const GridMap m = parse_map(
      "WWWWWW\n"
      "WR...W\n"
      "W....W\n"
      "WWWWWW\n");
  const auto b = oracle_bounds(m, TaskKind::Exploration);
  CHECK(b.max_coverage == 1.0);
  CHECK(b.max_revealable == 24);
}

TEST_CASE("a sealed pocket lowers max coverage") {
  // The pocket at the far right is out of reveal range of every reachable cell.
  const GridMap m = parse_map(
      "WWWWWWWWWW\n"
      "WR..WWW..W\n"
      "W...WWW..W\n"
      "WWWWWWWWWW\n");
  const auto b = oracle_bounds(m, TaskKind::Exploration);
  // Brute force: union of reveal windows over reachable cells.
  std::set<std::pair<int, int>> seen;
  for (const auto& c : reachable_cells(m, m.start())) {
    const auto w = gbtest::brute_reveal_set(m, c);
    seen.insert(w.begin(), w.end());
  }
  CHECK(b.max_revealable == static_cast<int>(seen.size()));
  CHECK(b.max_coverage < 1.0);
}

TEST_CASE("reachable_cells is a row-major flood fill") {
  const GridMap m = parse_map(
      "WWWWW\n"
      "WR.WW\n"
      "WW.WW\n"
      "WWWWW\n");
  const auto cells = reachable_cells(m, m.start());
  REQUIRE(cells.size() == 3);
  CHECK(cells[0] == Coord{1, 1});
  CHECK(cells[1] == Coord{1, 2});
  CHECK(cells[2] == Coord{2, 2});
}

TEST_CASE("path helpers") {
  const std::vector<Coord> cells = {{3, 3}, {2, 3}, {2, 4}, {3, 4}, {3, 3}};
  CHECK(path_direction_string(cells) == "URDL");
  const auto actions = path_actions(cells);
  CHECK(actions == std::vector<Action>{Action::Up, Action::Right, Action::Down, Action::Left});
}

TEST_CASE("validate_map_document diagnostics") {
  CHECK(validate_map_document(shipped_layout_text("hard")).empty());
  auto d = validate_map_document("WWWWW\nWR...\nWWWWW\n");
  REQUIRE_FALSE(d.empty());
  CHECK(d[0].kind == DiagnosticKind::OpenBoundary);
  d = validate_map_document("WWWWW\nWRR.W\nWWWWW\n");
  REQUIRE_FALSE(d.empty());
  CHECK(d[0].kind == DiagnosticKind::MultipleStarts);
  d = validate_map_document("WWWWW\nW...W\nWWWWW\n");
  REQUIRE_FALSE(d.empty());
  CHECK(d[0].kind == DiagnosticKind::MissingStart);
  d = validate_map_document("WWRWW\nW...W\nWWWWW\n");
  REQUIRE_FALSE(d.empty());
  CHECK(std::any_of(d.begin(), d.end(),
                    [](const Diagnostic& x) { return x.kind == DiagnosticKind::StartOnBoundary; }));
  d = validate_map_document("WWWW\nWRxW\nWWWW\n");
  REQUIRE_FALSE(d.empty());
  CHECK(d[0].kind == DiagnosticKind::MalformedDocument);
}
