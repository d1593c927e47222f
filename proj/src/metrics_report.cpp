#include "gridbench/metrics_report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

namespace gridbench {

namespace {

struct GroupAccumulator {
  const TraceHeader* first = nullptr;
  int n = 0;
  int successes = 0;
  long long revealed_sum = 0;
  long long success_steps = 0;
  long long collisions = 0;
  long long parse_failures = 0;
};

void check_compatible(const TraceHeader& a, const TraceHeader& b, const GroupKey& key) {
  const auto fail = [&](std::string_view field) {
    throw AggregationError("traces for " + key.model + " / " + key.layout + " / " +
                           std::string(task_name(key.task)) + " disagree on " +
                           std::string(field));
  };
  if (a.map_hash != b.map_hash) fail("map_hash");
  if (a.template_hash != b.template_hash) fail("template_hash");
  if (a.t_max != b.t_max) fail("t_max");
  if (a.policy_kind != b.policy_kind) fail("policy");
  if (a.endpoint != b.endpoint) fail("endpoint");
  if (a.rows != b.rows || a.cols != b.cols) fail("grid size");
}

std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

int layout_rank(const std::string& name) {
  if (name == "easy") return 0;
  if (name == "medium") return 1;
  if (name == "hard") return 2;
  return 3;
}

bool layout_less(const std::string& a, const std::string& b) {
  const int ra = layout_rank(a);
  const int rb = layout_rank(b);
  return ra != rb ? ra < rb : a < b;
}

bool model_less(const std::string& a, const std::string& b) {
  const bool ra = a == kRandomRowLabel;
  const bool rb = b == kRandomRowLabel;
  return ra != rb ? ra : a < b;
}

struct Column {
  TaskKind task;
  Regime regime;
  std::string_view title;
};

constexpr std::array<Column, 4> kColumns = {{
    {TaskKind::Exploration, Regime::ZeroShot, "Exploration 0-Shot"},
    {TaskKind::Exploration, Regime::FiveShot, "Exploration 5-Shot"},
    {TaskKind::Navigation, Regime::ZeroShot, "Navigation 0-Shot"},
    {TaskKind::Navigation, Regime::FiveShot, "Navigation 5-Shot"},
}};

struct LayoutView {
  std::vector<std::string> models;
  std::vector<const MetricsRow*> rows;
  std::vector<const GroupKey*> failed;
};

std::map<std::string, LayoutView, decltype(&layout_less)> by_layout(const MetricsTable& table) {
  std::map<std::string, LayoutView, decltype(&layout_less)> out(&layout_less);
  std::map<std::string, std::set<std::string, decltype(&model_less)>> models;
  const auto note_model = [&](const GroupKey& k) {
    models.try_emplace(k.layout, &model_less).first->second.insert(k.model);
  };
  for (const auto& r : table.rows) {
    out[r.key.layout].rows.push_back(&r);
    note_model(r.key);
  }
  for (const auto& k : table.failed) {
    out[k.layout].failed.push_back(&k);
    note_model(k);
  }
  for (auto& [layout, view] : out) {
    view.models.assign(models.at(layout).begin(), models.at(layout).end());
  }
  return out;
}

const MetricsRow* find_row(const LayoutView& view, const std::string& model, TaskKind task,
                           std::optional<Regime> regime) {
  for (const auto* r : view.rows) {
    if (r->key.model == model && r->key.task == task && r->key.regime == regime) return r;
  }
  return nullptr;
}

bool is_failed(const LayoutView& view, const std::string& model, TaskKind task,
               std::optional<Regime> regime) {
  return std::any_of(view.failed.begin(), view.failed.end(), [&](const GroupKey* k) {
    return k->model == model && k->task == task && k->regime == regime;
  });
}

// A regime-free row (random baseline) fills both regime columns of its task.
std::string cell_text(const LayoutView& view, const std::string& model, const Column& col) {
  const MetricsRow* row = find_row(view, model, col.task, col.regime);
  if (!row) row = find_row(view, model, col.task, std::nullopt);
  if (row) {
    return col.task == TaskKind::Exploration ? format_percent(row->coverage_mean)
                                             : format_navigation_cell(*row);
  }
  if (is_failed(view, model, col.task, col.regime) ||
      is_failed(view, model, col.task, std::nullopt)) {
    return "failed";
  }
  return "n/a";
}

std::string n_summary(const std::set<int>& ns) {
  if (ns.empty()) return "";
  if (ns.size() == 1) return "n=" + std::to_string(*ns.begin());
  return "n=" + std::to_string(*ns.begin()) + ".." + std::to_string(*ns.rbegin());
}

std::string caption(const LayoutView& view) {
  std::optional<int> path;
  std::optional<double> max_cov;
  std::set<int> model_n;
  std::set<int> random_n;
  for (const auto* r : view.rows) {
    if (r->oracle_path_len && !path) path = r->oracle_path_len;
    if (!max_cov) max_cov = r->oracle_max_coverage;
    (r->key.model == kRandomRowLabel ? random_n : model_n).insert(r->n);
  }
  std::string out = "Oracle path: " + (path ? std::to_string(*path) + " cells" : "n/a") +
                    ". Max coverage: " + (max_cov ? format_percent(*max_cov) : "n/a") + ".";
  if (!model_n.empty()) out += " Model cells: " + n_summary(model_n) + ".";
  if (!random_n.empty()) {
    out += " " + std::string(kRandomRowLabel) + ": " + n_summary(random_n) + ".";
  }
  return out;
}

std::string markdown_header_row() {
  std::string out = "| Model |";
  for (const auto& c : kColumns) out += " " + std::string(c.title) + " |";
  out += "\n|---|";
  for (std::size_t i = 0; i < kColumns.size(); ++i) out += "---|";
  return out + "\n";
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

MetricsTable aggregate(std::span<const EpisodeTrace> traces) {
  std::map<GroupKey, GroupAccumulator> groups;
  for (const auto& t : traces) {
    const GroupKey key{t.header.model, t.header.map_name, t.header.task, t.header.regime};
    auto& g = groups[key];
    if (g.first) {
      check_compatible(*g.first, t.header, key);
    } else {
      g.first = &t.header;
    }
    ++g.n;
    g.revealed_sum += t.result.revealed;
    g.collisions += t.result.collisions;
    g.parse_failures += t.result.parse_failures;
    if (t.result.status == EpisodeStatus::Success) {
      ++g.successes;
      g.success_steps += t.result.steps_used;
    }
  }

  MetricsTable table;
  for (const auto& [key, g] : groups) {
    MetricsRow row;
    row.key = key;
    row.policy_kind = g.first->policy_kind;
    row.n = g.n;
    row.successes = g.successes;
    const double cells = static_cast<double>(g.first->rows) * g.first->cols;
    row.coverage_mean = static_cast<double>(g.revealed_sum) / (cells * g.n);
    row.success_rate = static_cast<double>(g.successes) / g.n;
    if (g.successes > 0) {
      row.avg_steps_successful = static_cast<double>(g.success_steps) / g.successes;
    }
    row.collisions_mean = static_cast<double>(g.collisions) / g.n;
    row.parse_failures_mean = static_cast<double>(g.parse_failures) / g.n;
    row.oracle_path_len = g.first->oracle_path_len;
    row.oracle_max_coverage = g.first->oracle_max_coverage;
    table.rows.push_back(std::move(row));
  }
  return table;
}

BehaviourReport analyze_behaviour(const EpisodeTrace& trace, const LoopOptions& options) {
  BehaviourReport report;
  for (const auto& s : trace.steps) {
    if (!s.action) continue;
    ++report.action_counts[static_cast<std::size_t>(wire_int(*s.action))];
    ++report.valid_actions;
  }
  if (report.valid_actions > 0) {
    for (std::size_t i = 0; i < 4; ++i) {
      report.action_histogram[i] =
          static_cast<double>(report.action_counts[i]) / report.valid_actions;
    }
    const int up_right = report.action_counts[wire_int(Action::Up)] +
                         report.action_counts[wire_int(Action::Right)];
    report.up_right_share = static_cast<double>(up_right) / report.valid_actions;
  }

  const auto& steps = trace.steps;
  const int n = static_cast<int>(steps.size());
  const auto same = [&](int a, int b) {
    return steps[a].pos == steps[b].pos && steps[a].revealed == steps[b].revealed;
  };
  int i = 0;
  while (i < n) {
    bool found = false;
    for (int p = 1; p <= options.max_period && i + p < n; ++p) {
      int m = 0;
      while (i + p + m < n && same(i + p + m, i + m)) ++m;
      if (m >= options.threshold * p) {
        report.loops.push_back({steps[i].pos, steps[i].revealed, steps[i].index, p, p + m});
        report.longest_dwell = std::max(report.longest_dwell, p + m);
        i += p + m;
        found = true;
        break;
      }
    }
    if (!found) ++i;
  }
  return report;
}

std::optional<ReportFormat> report_format_from_name(std::string_view name) {
  if (name == "markdown" || name == "md") return ReportFormat::Markdown;
  if (name == "csv") return ReportFormat::Csv;
  return std::nullopt;
}

std::string format_percent(double fraction) { return fixed2(fraction * 100.0) + "%"; }

std::string format_navigation_cell(const MetricsRow& row) {
  const std::string steps = row.avg_steps_successful
                                ? std::to_string(std::llround(*row.avg_steps_successful))
                                : "∞";
  return format_percent(row.success_rate) + " (" + steps + ")";
}

std::string emit_report(const MetricsTable& table, ReportFormat format) {
  const auto layouts = by_layout(table);
  std::string out;

  if (format == ReportFormat::Markdown) {
    out = "# Results\n\n";
    if (layouts.empty()) return out + markdown_header_row();
    bool first = true;
    for (const auto& [layout, view] : layouts) {
      if (!first) out += "\n";
      first = false;
      out += "## Layout: " + layout + "\n\n" + caption(view) + "\n\n" + markdown_header_row();
      for (const auto& model : view.models) {
        out += "| " + model + " |";
        for (const auto& c : kColumns) out += " " + cell_text(view, model, c) + " |";
        out += "\n";
      }
    }
    return out;
  }

  out =
      "layout,model,task,regime,n,successes,coverage_pct,success_pct,avg_steps_successful,"
      "collisions_mean,parse_failures_mean,oracle_path_len,max_coverage_pct,status\n";
  for (const auto& [layout, view] : layouts) {
    for (const auto& model : view.models) {
      for (TaskKind task : {TaskKind::Exploration, TaskKind::Navigation}) {
        for (std::optional<Regime> regime :
             {std::optional<Regime>{}, std::optional<Regime>{Regime::ZeroShot},
              std::optional<Regime>{Regime::FiveShot}}) {
          const std::string prefix = csv_field(layout) + "," + csv_field(model) + "," +
                                     std::string(task_name(task)) + "," +
                                     (regime ? std::string(regime_name(*regime)) : "none") + ",";
          if (const MetricsRow* r = find_row(view, model, task, regime)) {
            out += prefix + std::to_string(r->n) + "," + std::to_string(r->successes) + "," +
                   fixed2(r->coverage_mean * 100.0) + "," + fixed2(r->success_rate * 100.0) + "," +
                   (r->avg_steps_successful
                        ? std::to_string(std::llround(*r->avg_steps_successful))
                        : "inf") +
                   "," + fixed2(r->collisions_mean) + "," + fixed2(r->parse_failures_mean) + "," +
                   (r->oracle_path_len ? std::to_string(*r->oracle_path_len) : "") + "," +
                   fixed2(r->oracle_max_coverage * 100.0) + ",ok\n";
          } else if (is_failed(view, model, task, regime)) {
            out += prefix + "0,0,,,,,,,,failed\n";
          }
        }
      }
    }
  }
  return out;
}

}  // namespace gridbench
