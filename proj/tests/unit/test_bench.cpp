#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gridbench/assets.hpp"
#include "gridbench/bench.hpp"
#include "test_support.hpp"

using namespace gridbench;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag)
      : path(fs::temp_directory_path() / ("gridbench_" + tag + "_" + std::to_string(std::random_device{}()))) {
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

int count_of(const std::string& text, const std::string& needle) {
  int n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

RunConfig small_config(const fs::path& out) {
  RunConfig c;
  c.layouts = {"builtin:easy"};
  c.tasks = {TaskKind::Navigation};
  c.regimes = {Regime::ZeroShot};
  EndpointConfig e;
  e.name = "mock-a";
  e.kind = "mock";
  e.model_id = "mock-a";
  c.endpoints = {e};
  c.episodes_per_cell = 2;
  c.random_baseline_episodes = 2;
  c.master_seed = 5;
  c.output_dir = out;
  c.run_id = "r1";
  c.workers = 1;
  return c;
}

}  // namespace

TEST_CASE("config parsing") {
  const auto c = parse_run_config(
      "layouts: [builtin:easy, maps/x.txt]\n"
      "tasks: [navigation]\n"
      "regimes: [five-shot]\n"
      "episodes_per_cell: 4\n"
      "master_seed: 9\n"
      "endpoints:\n"
      "  - name: m\n"
      "    kind: mock\n"
      "    model_id: m\n",
      "/base");
  CHECK(c.layouts == std::vector<std::string>{"builtin:easy", "/base/maps/x.txt"});
  CHECK(c.tasks == std::vector<TaskKind>{TaskKind::Navigation});
  CHECK(c.regimes == std::vector<Regime>{Regime::FiveShot});
  CHECK(c.episodes_per_cell == 4);
  CHECK(c.random_baseline_episodes == 100);
  CHECK(c.master_seed == 9);
  REQUIRE(c.endpoints.size() == 1);
  CHECK(c.endpoints[0].is_mock());
}

TEST_CASE("config errors are usage errors") {
  CHECK_THROWS_AS(parse_run_config("layouts: [builtin:easy]\nbogus: 1\n"), UsageError);
  CHECK_THROWS_AS(parse_run_config("tasks: [swimming]\n"), UsageError);
  CHECK_THROWS_AS(parse_run_config("regimes: [ten-shot]\n"), UsageError);
  CHECK_THROWS_AS(parse_run_config("episodes_per_cell: 0\n"), UsageError);
  CHECK_THROWS_AS(parse_run_config("on_parse_failure: explode\n"), UsageError);
  CHECK_THROWS_AS(parse_run_config("workers: many\n"), UsageError);
  CHECK_THROWS_AS(parse_run_config("layouts: [\n"), UsageError);
  CHECK_THROWS_AS(parse_run_config("endpoints:\n  - {name: a, kind: mock}\n  - {name: a, kind: mock}\n"),
                  UsageError);
  CHECK(exit_code_for(UsageError("x")) == kExitUsage);
  CHECK(exit_code_for(ValidationError("x")) == kExitValidation);
}

TEST_CASE("shipped suite configs parse") {
  const auto c = load_run_config(gbtest::source_path("configs/mock_suite.yaml"));
  CHECK(c.layouts.size() == 3);
  CHECK(c.episodes_per_cell == 13);
  const auto live = load_run_config(gbtest::source_path("configs/live_example.yaml"));
  for (const auto& e : live.endpoints) CHECK_FALSE(e.is_mock());
}

TEST_CASE("layout loading") {
  CHECK(load_layout("builtin:medium").name == "medium");
  CHECK_THROWS_AS(load_layout("builtin:nowhere"), UsageError);
  TempDir dir("layout");
  const fs::path bad = dir.path / "cut.txt";
  std::ofstream(bad) << "WWWWW\nWRWgW\nWWWWW\n";
  CHECK_THROWS_AS(load_layout(bad.string()), ValidationError);
  CHECK(load_layout(bad.string(), true).name == "cut");
  CHECK(cmd_oracle(bad.string(), TaskKind::Navigation).find("shortest_path_len: unreachable") !=
        std::string::npos);
}

TEST_CASE("cell ids") {
  CHECK(cell_id("easy", TaskKind::Navigation, std::nullopt, "") == "easy__navigation__random");
  CHECK(cell_id("easy", TaskKind::Exploration, Regime::FiveShot, "m") == "easy__exploration__five-shot__m");
}

TEST_CASE("oracle command") {
  const auto text = cmd_oracle("builtin:easy", TaskKind::Navigation);
  CHECK(text.find("shortest_path_len: 26\n") != std::string::npos);
  CHECK(text.find("witness: RRRRRRRUUUUUUUUUUUULLLLLLL\n") != std::string::npos);
  CHECK(text.find("max_coverage: 1.0000") != std::string::npos);
}

TEST_CASE("random baseline command") {
  CHECK_THROWS_AS(cmd_random_baseline("builtin:easy", TaskKind::Navigation, 0, 1), UsageError);
  const auto a = cmd_random_baseline("builtin:easy", TaskKind::Exploration, 20, 1);
  const auto b = cmd_random_baseline("builtin:easy", TaskKind::Exploration, 20, 1);
  CHECK(a.row.n == 20);
  CHECK(a.text == b.text);
  CHECK(a.row.key.model == kRandomRowLabel);
}

TEST_CASE("mock run writes manifest, traces and reports") {
  TempDir dir("run");
  const auto summary = cmd_run(small_config(dir.path));
  CHECK(summary.exit_code() == kExitOk);
  CHECK(summary.cells == 2);
  CHECK(summary.traces == 4);
  const fs::path run = dir.path / "r1";
  CHECK(fs::exists(run / "report.md"));
  CHECK(fs::exists(run / "report.csv"));
  const auto manifest = nlohmann::json::parse(std::ifstream(run / "manifest.json"));
  CHECK(manifest.at("status") == "complete");
  CHECK(manifest.at("cells").size() == 2);

  const auto rep = cmd_report(run, ReportFormat::Markdown);
  CHECK(rep.problems.empty());
  CHECK(rep.table.rows.size() == 2);

  SUBCASE("rerunning into the same run id is refused") {
    CHECK_THROWS_AS(cmd_run(small_config(dir.path)), UsageError);
  }
  SUBCASE("a deleted trace is reported as a problem") {
    const auto rel = manifest.at("cells")[0].at("traces")[0].get<std::string>();
    fs::remove(run / rel);
    const auto broken = cmd_report(run, ReportFormat::Csv);
    REQUIRE(broken.problems.size() == 1);
    CHECK(broken.problems[0].find(rel) != std::string::npos);
  }
}

TEST_CASE("live endpoints need the live flag") {
  TempDir dir("live");
  auto c = small_config(dir.path);
  c.endpoints[0].kind = "openai";
  c.endpoints[0].base_url = "http://127.0.0.1:9";
  CHECK_THROWS_AS(cmd_run(c), UsageError);
}

TEST_CASE("a failing endpoint marks its cell failed and the run partial") {
  TempDir dir("fail");
  auto c = small_config(dir.path);
  c.endpoints[0].retry.max_retries = 0;
  RunOptions opts;
  opts.transport = [](const EndpointConfig&, std::uint64_t) -> std::shared_ptr<ChatTransport> {
    return std::make_shared<ScriptedTransport>(std::vector<HttpReply>{{500, "boom", 0.0, {}}});
  };
  opts.sleeper = [](std::chrono::milliseconds) {};
  const auto summary = cmd_run(c, opts);
  CHECK(summary.failed_cells == 1);
  CHECK(summary.exit_code() == kExitPartial);
  const fs::path run = dir.path / "r1";
  const auto manifest = nlohmann::json::parse(std::ifstream(run / "manifest.json"));
  CHECK(manifest.at("status") == "partial");
  const auto rep = cmd_report(run, ReportFormat::Markdown);
  CHECK(rep.table.failed.size() == 1);
  CHECK(rep.document.find("failed") != std::string::npos);
}

TEST_CASE("render frames") {
  TempDir dir("render");
  const auto map = shipped_layout("easy");
  OraclePolicy oracle(*map);
  const auto t = run_episode(map, oracle, TaskSpec::for_map(*map, TaskKind::Navigation), 0,
                             oracle_bounds(*map, TaskKind::Navigation));
  const fs::path p = dir.path / "oracle.jsonl";
  write_trace(p, t);
  const auto text = cmd_render(p, std::string("builtin:easy"));
  CHECK(count_of(text, "## Step ") == 27);
  CHECK(text.find("## Step 0: initial") != std::string::npos);
  CHECK(text.find("Result: Success after 26 steps") != std::string::npos);
  // Without an explicit layout the shipped map is found by hash.
  CHECK(cmd_render(p) == text);

  const auto wall = std::make_shared<const GridMap>(parse_map("WWWWW\nWR.gW\nW...W\nWWWWW\n", "box"));
  ScriptedPolicy up({Action::Up, Action::Right, Action::Right});
  const auto tw = run_episode(wall, up, TaskSpec::for_map(*wall, TaskKind::Navigation), 0,
                              oracle_bounds(*wall, TaskKind::Navigation));
  const fs::path mp = dir.path / "box.txt";
  std::ofstream(mp) << render_map(*wall);
  const fs::path tp = dir.path / "box.jsonl";
  write_trace(tp, tw);
  const auto wt = cmd_render(tp, mp.string());
  CHECK(wt.find("invalid (wall) at (0,1)") != std::string::npos);
  CHECK(count_of(wt, "## Step ") == 4);
  CHECK_THROWS_AS(cmd_render(tp, std::string("builtin:easy")), MapHashMismatch);
}
