#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gridbench/episode.hpp"
#include "gridbench/llm_gateway.hpp"
#include "gridbench/metrics_report.hpp"

namespace gridbench {

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitPartial = 3;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Maps an exception escaping a command onto an exit code.
int exit_code_for(const std::exception& e);

struct RunConfig {
  std::vector<std::string> layouts = {"builtin:easy", "builtin:medium", "builtin:hard"};
  std::vector<TaskKind> tasks = {TaskKind::Exploration, TaskKind::Navigation};
  std::vector<Regime> regimes = {Regime::ZeroShot, Regime::FiveShot};
  std::vector<EndpointConfig> endpoints;
  int episodes_per_cell = 13;
  int random_baseline_episodes = 100;
  std::uint64_t master_seed = 0;
  std::filesystem::path output_dir = "runs";
  std::optional<std::string> run_id;  // default: UTC timestamp
  int workers = 1;                    // 0 = hardware concurrency
  int max_rejections = kDefaultMaxRejections;
  ParseFailureMode on_parse_failure = ParseFailureMode::NoOp;
};

// YAML. Relative layout paths resolve against `base_dir`. Throws UsageError.
RunConfig parse_run_config(std::string_view yaml, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

struct LoadedLayout {
  std::string source;  // as written in the config
  std::string name;
  std::shared_ptr<const GridMap> map;
};

// "builtin:<name>" or a file path. Throws ValidationError for inadmissible maps unless
// `allow_unreachable_goal` and the only problem is an unreachable goal.
LoadedLayout load_layout(const std::string& source, bool allow_unreachable_goal = false);

using TransportFactory =
    std::function<std::shared_ptr<ChatTransport>(const EndpointConfig&, std::uint64_t seed)>;

// Mock endpoints get a MockModelTransport seeded per episode; the rest go over HTTP.
std::shared_ptr<ChatTransport> default_transport(const EndpointConfig& cfg, std::uint64_t seed);

struct RunOptions {
  bool live = false;  // required for non-mock endpoints
  TransportFactory transport = default_transport;
  Sleeper sleeper;     // default: real sleep
  std::ostream* log = nullptr;
};

struct RunSummary {
  std::filesystem::path run_dir;
  int cells = 0;
  int failed_cells = 0;
  int traces = 0;

  int exit_code() const { return failed_cells > 0 ? kExitPartial : kExitOk; }
};

// Runs every (layout, task, regime, endpoint) cell plus the random baseline cells and
// writes manifest.json, artifacts/, traces/, report.md and report.csv.
RunSummary cmd_run(const RunConfig& config, const RunOptions& options = {});

std::string cmd_oracle(const std::string& layout, TaskKind task);

struct BaselineSummary {
  MetricsRow row;
  std::string text;
};

BaselineSummary cmd_random_baseline(const std::string& layout, TaskKind task, int episodes,
                                    std::uint64_t seed);

// Frames for the initial state and every step. The map comes from `layout` when given,
// otherwise from the run's artifacts/ or the shipped layouts, matched by hash.
std::string cmd_render(const std::filesystem::path& trace_path,
                       const std::optional<std::string>& layout = std::nullopt);

struct ReportOutput {
  MetricsTable table;
  std::string document;
  std::vector<std::string> problems;  // missing or unreadable traces
};

ReportOutput cmd_report(const std::filesystem::path& run_dir, ReportFormat format);

struct ValidationOutput {
  std::vector<Diagnostic> diagnostics;
  std::string text;
};

ValidationOutput cmd_validate_map(const std::string& layout);

// Cell identifiers used for trace directories and seed derivation.
std::string cell_id(const std::string& layout, TaskKind task, std::optional<Regime> regime,
                    const std::string& endpoint);

}  // namespace gridbench
