#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "gridbench/assets.hpp"
#include "gridbench/bench.hpp"

namespace py = pybind11;
using namespace gridbench;

namespace {

TaskKind task_arg(const std::string& name) {
  const auto t = task_from_name(name);
  if (!t) throw py::value_error("unknown task '" + name + "'");
  return *t;
}

Regime regime_arg(const std::string& name) {
  const auto r = regime_from_name(name);
  if (!r) throw py::value_error("unknown regime '" + name + "'");
  return *r;
}

Action action_arg(const std::string& name) {
  const auto a = action_from_name(name);
  if (!a) throw py::value_error("unknown direction '" + name + "'");
  return *a;
}

py::dict oracle(const std::string& layout, const std::string& task) {
  const auto l = load_layout(layout, true);
  const auto b = oracle_bounds(*l.map, task_arg(task));
  py::dict d;
  d["layout"] = l.name;
  d["shortest_path_len"] = b.shortest_path_len;
  d["witness"] = b.witness_path ? py::cast(path_direction_string(*b.witness_path)) : py::none();
  d["max_coverage"] = b.max_coverage;
  d["max_revealable"] = b.max_revealable;
  return d;
}

py::dict parse(const std::string& raw) {
  const auto r = parse_action(raw);
  py::dict d;
  if (const auto* p = std::get_if<ActionPayload>(&r)) {
    d["ok"] = true;
    d["direction_str"] = p->direction_str;
    d["direction_int"] = p->direction_int;
  } else {
    const auto& e = std::get<ParseError>(r);
    d["ok"] = false;
    d["error"] = std::string(parse_error_name(e.kind));
    d["detail"] = e.detail;
  }
  return d;
}

py::dict initial_prompt(const std::string& layout, const std::string& task, const std::string& regime) {
  const auto l = load_layout(layout);
  const TaskKind t = task_arg(task);
  const PromptTemplate tmpl(t, regime_arg(regime));
  const auto ctx = make_context(initial_state(l.map, t), nullptr, t, std::nullopt, false);
  const auto p = tmpl.render(ctx);
  py::dict d;
  d["system"] = p.system;
  d["user"] = p.user;
  d["template_hash"] = tmpl.hash();
  d["template_version"] = tmpl.version();
  return d;
}

std::string episode(const std::string& layout, const std::string& task, const std::string& policy,
                    std::uint64_t seed) {
  const auto l = load_layout(layout);
  const TaskKind t = task_arg(task);
  std::unique_ptr<Policy> p;
  if (policy == "random") {
    p = std::make_unique<RandomPolicy>(seed);
  } else if (policy == "oracle") {
    p = std::make_unique<OraclePolicy>(*l.map);
  } else {
    throw py::value_error("policy must be 'random' or 'oracle'");
  }
  return trace_to_jsonl(run_episode(l.map, *p, TaskSpec::for_map(*l.map, t), seed, oracle_bounds(*l.map, t)));
}

py::dict replay_trace(const std::string& jsonl, const std::string& layout) {
  const auto trace = trace_from_jsonl(jsonl);
  const auto r = replay(trace, load_layout(layout, true).map);
  py::dict d;
  d["status"] = std::string(episode_status_name(r.status));
  d["steps_used"] = r.steps_used;
  d["final_coverage"] = r.final_coverage;
  d["collisions"] = r.collisions;
  d["parse_failures"] = r.parse_failures;
  d["matches_recorded"] = r == trace.result;
  return d;
}

py::dict run(const std::string& config_path, std::optional<std::string> output_dir,
             std::optional<std::string> run_id, std::optional<int> workers) {
  RunConfig c = load_run_config(config_path);
  if (output_dir) c.output_dir = *output_dir;
  if (run_id) c.run_id = *run_id;
  if (workers) c.workers = *workers;
  RunSummary s;
  {
    py::gil_scoped_release release;
    s = cmd_run(c);
  }
  py::dict d;
  d["run_dir"] = s.run_dir.string();
  d["cells"] = s.cells;
  d["failed_cells"] = s.failed_cells;
  d["traces"] = s.traces;
  d["exit_code"] = s.exit_code();
  return d;
}

py::dict report(const std::string& run_dir, const std::string& format) {
  const auto f = report_format_from_name(format);
  if (!f) throw py::value_error("format must be markdown or csv");
  const auto out = cmd_report(run_dir, *f);
  py::dict d;
  d["document"] = out.document;
  d["problems"] = out.problems;
  d["failed_cells"] = out.table.failed.size();
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<MapError>(m, "MapError", PyExc_ValueError);
  py::register_exception<TraceFormatError>(m, "TraceFormatError", PyExc_ValueError);
  py::register_exception<MapHashMismatch>(m, "MapHashMismatch", PyExc_ValueError);
  py::register_exception<ReplayDivergence>(m, "ReplayDivergence", PyExc_ValueError);

  m.def("shipped_layouts", &shipped_layout_names);
  m.def("layout_text", [](const std::string& name) { return std::string(shipped_layout_text(name)); });
  m.def("normalize_map", [](const std::string& text) { return render_map(parse_map(text)); });
  m.def("validate_map", [](const std::string& layout) { return cmd_validate_map(layout).text; });
  m.def("oracle", &oracle, py::arg("layout"), py::arg("task") = "navigation");
  m.def("parse_action", &parse, py::arg("raw"));
  m.def("canonical_payload", [](const std::string& d) { return canonical_payload(action_arg(d)); });
  m.def("initial_prompt", &initial_prompt, py::arg("layout"), py::arg("task"), py::arg("regime"));
  m.def("run_episode", &episode, py::arg("layout"), py::arg("task"), py::arg("policy") = "random",
        py::arg("seed") = 0);
  m.def("replay", &replay_trace, py::arg("trace_jsonl"), py::arg("layout"));
  m.def("episode_seed", &episode_seed, py::arg("master_seed"), py::arg("cell_id"), py::arg("episode"));
  m.def(
      "random_baseline",
      [](const std::string& layout, const std::string& task, int episodes, std::uint64_t seed) {
        return cmd_random_baseline(layout, task_arg(task), episodes, seed).text;
      },
      py::arg("layout"), py::arg("task"), py::arg("episodes") = 100, py::arg("seed") = 0);
  m.def("run", &run, py::arg("config_path"), py::arg("output_dir") = py::none(),
        py::arg("run_id") = py::none(), py::arg("workers") = py::none());
  m.def("report", &report, py::arg("run_dir"), py::arg("format") = "markdown");
}
