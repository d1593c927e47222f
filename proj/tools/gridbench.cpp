#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "gridbench/bench.hpp"

using namespace gridbench;

namespace {

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw UsageError("cannot write " + out_path);
  out << text;
}

TaskKind parse_task(const std::string& name) {
  const auto t = task_from_name(name);
  if (!t) throw UsageError("unknown task '" + name + "' (exploration or navigation)");
  return *t;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gridbench: partially observable gridworld benchmark harness"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run every cell of a suite config");
  std::string config_path;
  bool live = false;
  std::string output_dir;
  std::string run_id;
  int workers = -1;
  std::optional<std::uint64_t> master_seed;
  run->add_option("config", config_path, "YAML run config")->required()->check(CLI::ExistingFile);
  run->add_flag("--live", live, "Allow calls to non-mock endpoints");
  run->add_option("--output-dir", output_dir, "Override output_dir");
  run->add_option("--run-id", run_id, "Run directory name (default: UTC timestamp)");
  run->add_option("--workers", workers, "Worker threads (0 = all cores)");
  run->add_option("--master-seed", master_seed, "Override master_seed");

  auto* oracle = app.add_subcommand("oracle", "Print oracle bounds for a layout");
  std::string layout;
  std::string task = "navigation";
  oracle->add_option("layout", layout, "Layout file or builtin:<name>")->required();
  oracle->add_option("--task", task, "exploration or navigation");

  auto* baseline = app.add_subcommand("random-baseline", "Seeded uniform-random episodes");
  int episodes = 100;
  std::uint64_t seed = 0;
  baseline->add_option("layout", layout, "Layout file or builtin:<name>")->required();
  baseline->add_option("--task", task, "exploration or navigation");
  baseline->add_option("--episodes", episodes, "Episode count");
  baseline->add_option("--seed", seed, "Master seed");

  auto* render = app.add_subcommand("render", "Render a trace as ASCII frames");
  std::string trace_path;
  std::string map_override;
  std::string out_path;
  render->add_option("trace", trace_path, "Trace file (.jsonl)")->required()->check(CLI::ExistingFile);
  render->add_option("--map", map_override, "Layout to replay on (default: located by hash)");
  render->add_option("-o,--output", out_path, "Write to file instead of stdout");

  auto* report = app.add_subcommand("report", "Aggregate a run directory");
  std::string run_dir;
  std::string format = "markdown";
  report->add_option("run_dir", run_dir, "Run directory")->required()->check(CLI::ExistingDirectory);
  report->add_option("--format", format, "markdown or csv");
  report->add_option("-o,--output", out_path, "Write to file instead of stdout");

  auto* validate = app.add_subcommand("validate-map", "Check a layout and list diagnostics");
  validate->add_option("layout", layout, "Layout file or builtin:<name>")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*run) {
      RunConfig cfg = load_run_config(config_path);
      if (!output_dir.empty()) cfg.output_dir = output_dir;
      if (!run_id.empty()) cfg.run_id = run_id;
      if (workers >= 0) cfg.workers = workers;
      if (master_seed) cfg.master_seed = *master_seed;
      RunOptions opts;
      opts.live = live;
      opts.log = &std::cerr;
      const RunSummary s = cmd_run(cfg, opts);
      std::cout << s.run_dir.string() << "\n"
                << s.cells << " cells, " << s.traces << " traces, " << s.failed_cells
                << " failed\n";
      return s.exit_code();
    }
    if (*oracle) {
      std::cout << cmd_oracle(layout, parse_task(task));
      return kExitOk;
    }
    if (*baseline) {
      std::cout << cmd_random_baseline(layout, parse_task(task), episodes, seed).text;
      return kExitOk;
    }
    if (*render) {
      emit(cmd_render(trace_path, map_override.empty() ? std::nullopt : std::optional(map_override)),
           out_path);
      return kExitOk;
    }
    if (*report) {
      const auto fmt = report_format_from_name(format);
      if (!fmt) throw UsageError("unknown format '" + format + "' (markdown or csv)");
      const ReportOutput r = cmd_report(run_dir, *fmt);
      for (const auto& p : r.problems) std::cerr << "warning: " << p << "\n";
      emit(r.document, out_path);
      return r.problems.empty() && r.table.failed.empty() ? kExitOk : kExitPartial;
    }
    if (*validate) {
      const ValidationOutput v = cmd_validate_map(layout);
      std::cout << v.text;
      return v.diagnostics.empty() ? kExitOk : kExitValidation;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kExitUsage;
}
