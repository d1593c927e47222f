#pragma once

#include <array>
#include <compare>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gridbench/episode.hpp"

namespace gridbench {

inline constexpr std::string_view kRandomRowLabel = "Random Actions";

struct GroupKey {
  std::string model;
  std::string layout;
  TaskKind task = TaskKind::Exploration;
  std::optional<Regime> regime;  // absent for policies that ignore the prompt

  auto operator<=>(const GroupKey&) const = default;
};

struct MetricsRow {
  GroupKey key;
  std::string policy_kind;
  int n = 0;
  int successes = 0;
  double coverage_mean = 0.0;
  double success_rate = 0.0;
  std::optional<double> avg_steps_successful;  // absent iff successes == 0
  double collisions_mean = 0.0;
  double parse_failures_mean = 0.0;
  std::optional<int> oracle_path_len;
  double oracle_max_coverage = 0.0;
};

struct MetricsTable {
  std::vector<MetricsRow> rows;  // sorted by key
  std::vector<GroupKey> failed;  // cells that produced no usable traces
};

class AggregationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Groups by (model, layout, task, regime). Throws AggregationError when a group mixes
// maps, templates, budgets or policies. The result does not depend on input order.
MetricsTable aggregate(std::span<const EpisodeTrace> traces);

struct Loop {
  Coord pos;
  int revealed = 0;
  int start_step = 0;
  int period = 0;
  int dwell = 0;  // step records inside the recurrence
};

struct BehaviourReport {
  std::array<int, 4> action_counts{};      // indexed by wire int
  std::array<double, 4> action_histogram{};  // fractions over emitted valid actions
  int valid_actions = 0;
  double up_right_share = 0.0;
  std::vector<Loop> loops;
  int longest_dwell = 0;
};

struct LoopOptions {
  int threshold = 3;    // recurrences of the signature after its first occurrence
  int max_period = 64;
};

BehaviourReport analyze_behaviour(const EpisodeTrace& trace, const LoopOptions& options = {});

enum class ReportFormat : std::uint8_t { Markdown, Csv };

std::optional<ReportFormat> report_format_from_name(std::string_view name);

// One table per layout, one row per model, columns Exploration/Navigation x 0/5-shot.
std::string emit_report(const MetricsTable& table, ReportFormat format);

// "53.71%", "8.00% (282)", "0.00% (∞)".
std::string format_percent(double fraction);
std::string format_navigation_cell(const MetricsRow& row);

}  // namespace gridbench
