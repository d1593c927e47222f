#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gridbench/grid_env.hpp"
#include "gridbench/observation.hpp"
#include "gridbench/planning_oracle.hpp"
#include "gridbench/policy.hpp"

namespace gridbench {

inline constexpr std::string_view kTraceFormat = "gridbench-trace-v1";

struct TaskSpec {
  TaskKind kind = TaskKind::Exploration;
  int t_max = kDefaultRows * kDefaultCols + 1;

  // t_max = rows * cols + 1.
  static TaskSpec for_map(const GridMap& map, TaskKind kind);
};

enum class EpisodeStatus : std::uint8_t { Running, Success, Truncated };

std::string_view episode_status_name(EpisodeStatus s);
std::optional<EpisodeStatus> episode_status_from_name(std::string_view name);

enum class ParseFailureMode : std::uint8_t { NoOp, Abort };

struct EpisodeResult {
  EpisodeStatus status = EpisodeStatus::Running;
  int steps_used = 0;
  double final_coverage = 0.0;
  int revealed = 0;
  Coord final_pos;
  int collisions = 0;
  int parse_failures = 0;
  bool aborted = false;
  std::optional<std::string> abort_reason;

  bool operator==(const EpisodeResult&) const = default;
};

struct StepRecord {
  int index = 0;
  std::optional<Action> action;  // absent for a Failed decision (no-op step)
  ParseStatus parse_status;
  std::string raw_output;
  std::vector<CallRecord> calls;
  double latency_ms = 0.0;
  std::optional<TokenUsage> token_usage;
  std::optional<StepOutcome> outcome;  // absent iff action is absent
  Coord pos;                           // after the step
  int revealed = 0;                    // after the step
  double coverage = 0.0;

  bool operator==(const StepRecord&) const = default;
};

struct TraceHeader {
  std::string format{kTraceFormat};
  std::string map_name;
  std::string map_hash;  // sha256 of render_map
  int rows = 0;
  int cols = 0;
  std::string template_hash;
  std::string template_version;
  std::string policy_kind;
  std::string model;
  std::string endpoint;
  TaskKind task = TaskKind::Exploration;
  std::optional<Regime> regime;
  std::uint64_t seed = 0;
  int t_max = 0;
  std::optional<int> oracle_path_len;
  double oracle_max_coverage = 0.0;
  int oracle_max_revealable = 0;
  std::vector<std::string> dropped_params;

  bool operator==(const TraceHeader&) const = default;
};

struct EpisodeTrace {
  TraceHeader header;
  std::vector<StepRecord> steps;
  EpisodeResult result;

  bool operator==(const EpisodeTrace&) const = default;
};

struct EpisodeOptions {
  ParseFailureMode on_parse_failure = ParseFailureMode::NoOp;
};

// Navigation: Success iff pos == goal. Exploration: Success iff every revealable
// cell is revealed. Otherwise Truncated once steps_taken >= t_max, else Running.
EpisodeStatus check_termination(const WorldState& state, const TaskSpec& spec,
                                const OracleBound& bounds);

// Throws std::invalid_argument when t_max < 1, and MapError for Navigation without a goal.
EpisodeTrace run_episode(std::shared_ptr<const GridMap> map, Policy& policy, const TaskSpec& spec,
                         std::uint64_t seed, const OracleBound& bounds,
                         const EpisodeOptions& options = {});

std::string map_hash(const GridMap& map);

// Seed rule: splitmix64(splitmix64(master ^ fnv1a64(cell_id)) + episode).
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t episode_seed(std::uint64_t master, std::string_view cell_id, int episode);
inline constexpr std::string_view kSeedRule =
    "splitmix64(splitmix64(master_seed ^ fnv1a64(cell_id)) + episode_index)";

class TraceFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One JSON object per line: header, steps in order, result.
std::string trace_to_jsonl(const EpisodeTrace& trace);
EpisodeTrace trace_from_jsonl(std::string_view text);
void write_trace(const std::filesystem::path& path, const EpisodeTrace& trace);
EpisodeTrace read_trace(const std::filesystem::path& path);

class MapHashMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ReplayDivergence : public std::runtime_error {
 public:
  ReplayDivergence(int index, std::string expected, std::string observed);

  int index() const noexcept { return index_; }
  const std::string& expected() const { return expected_; }
  const std::string& observed() const { return observed_; }

 private:
  int index_;
  std::string expected_;
  std::string observed_;
};

// Re-applies the recorded actions. Every recorded outcome, position and reveal count
// must be reproduced; the result is recomputed from the replayed states.
EpisodeResult replay(const EpisodeTrace& trace, std::shared_ptr<const GridMap> map);

// Same as replay but also hands each state to `frame` (initial state first).
EpisodeResult replay_frames(
    const EpisodeTrace& trace, std::shared_ptr<const GridMap> map,
    const std::function<void(const WorldState&, const StepRecord*)>& frame);

}  // namespace gridbench
