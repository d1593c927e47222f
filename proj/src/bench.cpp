#include "gridbench/bench.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <ctime>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "gridbench/assets.hpp"
#include "gridbench/planning_oracle.hpp"

namespace gridbench {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr std::string_view kManifestFormat = "gridbench-run-v1";
constexpr std::string_view kBuiltinPrefix = "builtin:";

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << bytes;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

std::string utc_stamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

bool valid_label(const std::string& s) {
  static const std::regex re("[A-Za-z0-9._-]+");
  return std::regex_match(s, re);
}

// ---------------------------------------------------------------------------
// Config parsing

[[noreturn]] void config_error(const YAML::Node& node, const std::string& what) {
  const auto mark = node.Mark();
  std::string where;
  if (mark.line >= 0) where = " (line " + std::to_string(mark.line + 1) + ")";
  throw UsageError("config: " + what + where);
}

void check_keys(const YAML::Node& node, const std::set<std::string>& allowed,
                const std::string& context) {
  if (!node.IsMap()) config_error(node, context + " must be a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.contains(key)) config_error(kv.first, "unknown key '" + key + "' in " + context);
  }
}

template <typename T>
T scalar(const YAML::Node& node, const std::string& what) {
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    config_error(node, "bad value for " + what);
  }
}

std::vector<std::string> string_list(const YAML::Node& node, const std::string& what) {
  if (!node.IsSequence()) config_error(node, what + " must be a list");
  std::vector<std::string> out;
  for (const auto& item : node) out.push_back(scalar<std::string>(item, what));
  return out;
}

EndpointConfig parse_endpoint(const YAML::Node& node) {
  check_keys(node,
             {"name", "kind", "base_url", "model_id", "api_key_env", "decoding",
              "reasoning_effort", "unsupported_params", "timeout_s", "retry",
              "requests_per_minute", "mock"},
             "endpoint");
  EndpointConfig cfg;
  if (!node["name"]) config_error(node, "endpoint needs a name");
  cfg.name = scalar<std::string>(node["name"], "endpoint name");
  if (!valid_label(cfg.name)) config_error(node["name"], "endpoint name must match [A-Za-z0-9._-]+");
  if (node["kind"]) cfg.kind = scalar<std::string>(node["kind"], "kind");
  if (cfg.kind != "openai" && cfg.kind != "mock") config_error(node["kind"], "kind must be openai or mock");
  if (node["base_url"]) cfg.base_url = scalar<std::string>(node["base_url"], "base_url");
  if (node["model_id"]) cfg.model_id = scalar<std::string>(node["model_id"], "model_id");
  if (!cfg.is_mock() && (cfg.base_url.empty() || cfg.model_id.empty())) {
    config_error(node, "endpoint '" + cfg.name + "' needs base_url and model_id");
  }
  if (node["api_key_env"]) cfg.api_key_env = scalar<std::string>(node["api_key_env"], "api_key_env");
  if (const auto d = node["decoding"]) {
    check_keys(d, {"temperature", "top_k", "top_p"}, "decoding");
    if (d["temperature"]) cfg.decoding.temperature = scalar<double>(d["temperature"], "temperature");
    if (d["top_k"]) cfg.decoding.top_k = scalar<int>(d["top_k"], "top_k");
    if (d["top_p"]) cfg.decoding.top_p = scalar<double>(d["top_p"], "top_p");
  }
  if (node["reasoning_effort"]) {
    const auto name = scalar<std::string>(node["reasoning_effort"], "reasoning_effort");
    cfg.reasoning_effort = reasoning_effort_from_name(name);
    if (!cfg.reasoning_effort) config_error(node["reasoning_effort"], "reasoning_effort must be low, medium or high");
  }
  if (node["unsupported_params"]) {
    cfg.unsupported_params = string_list(node["unsupported_params"], "unsupported_params");
  }
  if (node["timeout_s"]) {
    cfg.timeout = std::chrono::milliseconds(
        static_cast<long long>(scalar<double>(node["timeout_s"], "timeout_s") * 1000.0));
  }
  if (const auto r = node["retry"]) {
    check_keys(r, {"max_retries", "initial_backoff_ms", "max_backoff_ms"}, "retry");
    if (r["max_retries"]) cfg.retry.max_retries = scalar<int>(r["max_retries"], "max_retries");
    if (r["initial_backoff_ms"]) {
      cfg.retry.initial_backoff =
          std::chrono::milliseconds(scalar<long long>(r["initial_backoff_ms"], "initial_backoff_ms"));
    }
    if (r["max_backoff_ms"]) {
      cfg.retry.max_backoff =
          std::chrono::milliseconds(scalar<long long>(r["max_backoff_ms"], "max_backoff_ms"));
    }
    if (cfg.retry.max_retries < 0) config_error(r, "max_retries must be >= 0");
  }
  if (node["requests_per_minute"]) {
    cfg.requests_per_minute = scalar<double>(node["requests_per_minute"], "requests_per_minute");
  }
  if (const auto m = node["mock"]) {
    check_keys(m, {"garbage_rate", "fixed"}, "mock");
    if (m["garbage_rate"]) cfg.mock.garbage_rate = scalar<double>(m["garbage_rate"], "garbage_rate");
    if (m["fixed"]) {
      cfg.mock.fixed = action_from_name(scalar<std::string>(m["fixed"], "fixed"));
      if (!cfg.mock.fixed) config_error(m["fixed"], "fixed must be DOWN, RIGHT, UP or LEFT");
    }
  }
  return cfg;
}

ordered_json endpoint_json(const EndpointConfig& cfg) {
  ordered_json j;
  j["name"] = cfg.name;
  j["kind"] = cfg.kind;
  j["base_url"] = cfg.base_url;
  j["model_id"] = cfg.model_id;
  j["api_key_env"] = cfg.api_key_env ? ordered_json(*cfg.api_key_env) : ordered_json(nullptr);
  j["decoding"] = {{"temperature", cfg.decoding.temperature},
                   {"top_k", cfg.decoding.top_k},
                   {"top_p", cfg.decoding.top_p}};
  j["reasoning_effort"] = cfg.reasoning_effort
                              ? ordered_json(reasoning_effort_name(*cfg.reasoning_effort))
                              : ordered_json(nullptr);
  j["unsupported_params"] = cfg.unsupported_params;
  j["timeout_ms"] = cfg.timeout.count();
  j["retry"] = {{"max_retries", cfg.retry.max_retries},
                {"initial_backoff_ms", cfg.retry.initial_backoff.count()},
                {"max_backoff_ms", cfg.retry.max_backoff.count()}};
  j["requests_per_minute"] = cfg.requests_per_minute;
  if (cfg.is_mock()) {
    j["mock"] = {{"garbage_rate", cfg.mock.garbage_rate},
                 {"fixed", cfg.mock.fixed ? ordered_json(action_name(*cfg.mock.fixed))
                                          : ordered_json(nullptr)}};
  }
  return j;
}

ordered_json config_json(const RunConfig& c) {
  ordered_json j;
  j["layouts"] = c.layouts;
  j["tasks"] = ordered_json::array();
  for (auto t : c.tasks) j["tasks"].push_back(task_name(t));
  j["regimes"] = ordered_json::array();
  for (auto r : c.regimes) j["regimes"].push_back(regime_name(r));
  j["endpoints"] = ordered_json::array();
  for (const auto& e : c.endpoints) j["endpoints"].push_back(endpoint_json(e));
  j["episodes_per_cell"] = c.episodes_per_cell;
  j["random_baseline_episodes"] = c.random_baseline_episodes;
  j["master_seed"] = c.master_seed;
  j["max_rejections"] = c.max_rejections;
  j["on_parse_failure"] = c.on_parse_failure == ParseFailureMode::Abort ? "abort" : "noop";
  return j;
}

std::string layout_text(const std::string& source) {
  if (source.starts_with(kBuiltinPrefix)) {
    const auto name = source.substr(kBuiltinPrefix.size());
    try {
      return std::string(shipped_layout_text(name));
    } catch (const std::out_of_range&) {
      throw UsageError("unknown builtin layout '" + name + "'");
    }
  }
  return read_file(source);
}

std::string layout_name(const std::string& source) {
  if (source.starts_with(kBuiltinPrefix)) return source.substr(kBuiltinPrefix.size());
  return fs::path(source).stem().string();
}

std::string format_diagnostics(const std::vector<Diagnostic>& diags) {
  std::string out;
  for (const auto& d : diags) {
    out += std::string(diagnostic_name(d.kind));
    if (d.where) out += " at " + to_string(*d.where);
    out += ": " + d.message + "\n";
  }
  return out;
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const UsageError*>(&e)) return kExitUsage;
  if (dynamic_cast<const ValidationError*>(&e) || dynamic_cast<const MapError*>(&e) ||
      dynamic_cast<const OracleError*>(&e) || dynamic_cast<const MapHashMismatch*>(&e) ||
      dynamic_cast<const ReplayDivergence*>(&e) || dynamic_cast<const TraceFormatError*>(&e) ||
      dynamic_cast<const AggregationError*>(&e)) {
    return kExitValidation;
  }
  return kExitUsage;
}

RunConfig parse_run_config(std::string_view yaml, const fs::path& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(yaml));
  } catch (const YAML::Exception& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
  RunConfig c;
  if (root.IsNull()) return c;
  check_keys(root,
             {"layouts", "tasks", "regimes", "endpoints", "episodes_per_cell",
              "random_baseline_episodes", "master_seed", "output_dir", "run_id", "workers",
              "max_rejections", "on_parse_failure"},
             "run config");
  if (root["layouts"]) {
    c.layouts.clear();
    for (auto& l : string_list(root["layouts"], "layouts")) {
      if (!l.starts_with(kBuiltinPrefix) && fs::path(l).is_relative() && !base_dir.empty()) {
        l = (base_dir / l).lexically_normal().string();
      }
      c.layouts.push_back(l);
    }
  }
  if (root["tasks"]) {
    c.tasks.clear();
    for (const auto& t : string_list(root["tasks"], "tasks")) {
      const auto kind = task_from_name(t);
      if (!kind) config_error(root["tasks"], "unknown task '" + t + "'");
      c.tasks.push_back(*kind);
    }
  }
  if (root["regimes"]) {
    c.regimes.clear();
    for (const auto& r : string_list(root["regimes"], "regimes")) {
      const auto regime = regime_from_name(r);
      if (!regime) config_error(root["regimes"], "unknown regime '" + r + "'");
      c.regimes.push_back(*regime);
    }
  }
  if (const auto eps = root["endpoints"]) {
    if (!eps.IsSequence()) config_error(eps, "endpoints must be a list");
    for (const auto& e : eps) c.endpoints.push_back(parse_endpoint(e));
  }
  if (root["episodes_per_cell"]) c.episodes_per_cell = scalar<int>(root["episodes_per_cell"], "episodes_per_cell");
  if (root["random_baseline_episodes"]) {
    c.random_baseline_episodes = scalar<int>(root["random_baseline_episodes"], "random_baseline_episodes");
  }
  if (root["master_seed"]) c.master_seed = scalar<std::uint64_t>(root["master_seed"], "master_seed");
  if (root["output_dir"]) {
    fs::path out = scalar<std::string>(root["output_dir"], "output_dir");
    if (out.is_relative() && !base_dir.empty()) out = base_dir / out;
    c.output_dir = out;
  }
  if (root["run_id"]) c.run_id = scalar<std::string>(root["run_id"], "run_id");
  if (root["workers"]) c.workers = scalar<int>(root["workers"], "workers");
  if (root["max_rejections"]) c.max_rejections = scalar<int>(root["max_rejections"], "max_rejections");
  if (root["on_parse_failure"]) {
    const auto mode = scalar<std::string>(root["on_parse_failure"], "on_parse_failure");
    if (mode == "noop") {
      c.on_parse_failure = ParseFailureMode::NoOp;
    } else if (mode == "abort") {
      c.on_parse_failure = ParseFailureMode::Abort;
    } else {
      config_error(root["on_parse_failure"], "on_parse_failure must be noop or abort");
    }
  }

  if (c.episodes_per_cell < 1) throw UsageError("config: episodes_per_cell must be >= 1");
  if (c.random_baseline_episodes < 0) throw UsageError("config: random_baseline_episodes must be >= 0");
  if (c.workers < 0) throw UsageError("config: workers must be >= 0");
  if (c.max_rejections < 0) throw UsageError("config: max_rejections must be >= 0");
  if (c.run_id && !valid_label(*c.run_id)) throw UsageError("config: run_id must match [A-Za-z0-9._-]+");
  std::set<std::string> names;
  for (const auto& e : c.endpoints) {
    if (!names.insert(e.name).second) throw UsageError("config: duplicate endpoint '" + e.name + "'");
  }
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  return parse_run_config(read_file(path), path.parent_path());
}

LoadedLayout load_layout(const std::string& source, bool allow_unreachable_goal) {
  const std::string text = layout_text(source);
  auto diags = validate_map_document(text);
  if (allow_unreachable_goal) {
    std::erase_if(diags, [](const Diagnostic& d) { return d.kind == DiagnosticKind::UnreachableGoal; });
  }
  if (!diags.empty()) {
    throw ValidationError("layout " + source + " is not admissible:\n" + format_diagnostics(diags));
  }
  const std::string name = layout_name(source);
  return {source, name, std::make_shared<const GridMap>(parse_map(text, name))};
}

std::string cell_id(const std::string& layout, TaskKind task, std::optional<Regime> regime,
                    const std::string& endpoint) {
  std::string id = layout + "__" + std::string(task_name(task));
  if (!regime) return id + "__random";
  return id + "__" + std::string(regime_name(*regime)) + "__" + endpoint;
}

std::shared_ptr<ChatTransport> default_transport(const EndpointConfig& cfg, std::uint64_t seed) {
  if (cfg.is_mock()) return std::make_shared<MockModelTransport>(seed, cfg.mock);
  return std::make_shared<HttpTransport>();
}

// ---------------------------------------------------------------------------
// run

namespace {

struct CellPlan {
  std::string id;
  std::size_t layout = 0;
  TaskKind task = TaskKind::Exploration;
  std::optional<Regime> regime;
  std::optional<std::size_t> endpoint;
  int episodes = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> traces;  // relative to the run directory
  std::mutex mu;
  bool failed = false;
  std::string error;
  int done = 0;

  void fail(const std::string& why) {
    std::lock_guard lock(mu);
    if (!failed) error = why;
    failed = true;
  }
};

std::string padded(int i, int total) {
  const int width = std::max<int>(3, static_cast<int>(std::to_string(std::max(total - 1, 0)).size()));
  std::string s = std::to_string(i);
  return std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(s.size()))), '0') + s;
}

}  // namespace

RunSummary cmd_run(const RunConfig& config, const RunOptions& options) {
  for (const auto& e : config.endpoints) {
    if (!e.is_mock() && !options.live) {
      throw UsageError("endpoint '" + e.name + "' is live; pass --live to call it");
    }
  }
  if (config.layouts.empty() || config.tasks.empty()) {
    throw UsageError("config needs at least one layout and one task");
  }
  if (!config.endpoints.empty() && config.regimes.empty()) {
    throw UsageError("config needs at least one regime when endpoints are listed");
  }

  std::vector<LoadedLayout> layouts;
  std::set<std::string> layout_names;
  for (const auto& src : config.layouts) {
    layouts.push_back(load_layout(src));
    if (!layout_names.insert(layouts.back().name).second) {
      throw UsageError("two layouts share the name '" + layouts.back().name + "'");
    }
    if (!layouts.back().map->goal() &&
        std::find(config.tasks.begin(), config.tasks.end(), TaskKind::Navigation) != config.tasks.end()) {
      throw ValidationError("layout " + layouts.back().name + " has no goal for navigation");
    }
  }

  std::map<std::pair<std::size_t, TaskKind>, OracleBound> bounds;
  for (std::size_t li = 0; li < layouts.size(); ++li) {
    for (auto t : config.tasks) bounds[{li, t}] = oracle_bounds(*layouts[li].map, t);
  }
  std::map<std::pair<TaskKind, Regime>, std::shared_ptr<const PromptTemplate>> templates;
  if (!config.endpoints.empty()) {
    for (auto t : config.tasks) {
      for (auto r : config.regimes) templates[{t, r}] = std::make_shared<const PromptTemplate>(t, r);
    }
  }

  // Run directory.
  fs::path run_dir = config.output_dir / (config.run_id ? *config.run_id : utc_stamp());
  if (!config.run_id) {
    for (int k = 2; fs::exists(run_dir); ++k) {
      run_dir = config.output_dir / (utc_stamp() + "-" + std::to_string(k));
    }
  } else if (fs::exists(run_dir)) {
    throw UsageError("run directory " + run_dir.string() + " already exists");
  }
  fs::create_directories(run_dir / "artifacts");
  fs::create_directories(run_dir / "traces");

  // Cells.
  std::vector<std::unique_ptr<CellPlan>> cells;
  const auto add_cell = [&](std::size_t li, TaskKind t, std::optional<Regime> r,
                            std::optional<std::size_t> ei, int episodes) {
    auto c = std::make_unique<CellPlan>();
    c->layout = li;
    c->task = t;
    c->regime = r;
    c->endpoint = ei;
    c->episodes = episodes;
    c->id = cell_id(layouts[li].name, t, r, ei ? config.endpoints[*ei].name : "");
    for (int i = 0; i < episodes; ++i) {
      c->seeds.push_back(episode_seed(config.master_seed, c->id, i));
      c->traces.push_back("traces/" + c->id + "/" + padded(i, episodes) + ".jsonl");
    }
    fs::create_directories(run_dir / "traces" / c->id);
    cells.push_back(std::move(c));
  };
  for (std::size_t li = 0; li < layouts.size(); ++li) {
    for (auto t : config.tasks) {
      if (config.random_baseline_episodes > 0) add_cell(li, t, std::nullopt, std::nullopt, config.random_baseline_episodes);
      for (auto r : config.regimes) {
        for (std::size_t ei = 0; ei < config.endpoints.size(); ++ei) {
          add_cell(li, t, r, ei, config.episodes_per_cell);
        }
      }
    }
  }

  // Artifacts and manifest.
  ordered_json manifest;
  manifest["format"] = kManifestFormat;
  manifest["run_id"] = run_dir.filename().string();
  manifest["created_utc"] = utc_stamp();
  manifest["status"] = "running";
  manifest["config"] = config_json(config);
  manifest["seed_rule"] = kSeedRule;
  manifest["trace_format"] = kTraceFormat;
  manifest["digest"] = "sha256";
  manifest["artifacts"] = ordered_json::object();
  manifest["layouts"] = ordered_json::array();
  for (std::size_t li = 0; li < layouts.size(); ++li) {
    const auto& l = layouts[li];
    const std::string text = render_map(*l.map);
    const std::string hash = sha256_hex(text);
    write_file(run_dir / "artifacts" / (hash + ".txt"), text);
    manifest["artifacts"][hash] = {{"kind", "layout"}, {"name", l.name}, {"path", "artifacts/" + hash + ".txt"}};
    ordered_json entry = {{"name", l.name}, {"source", l.source}, {"hash", hash},
                          {"rows", l.map->rows()}, {"cols", l.map->cols()}};
    entry["oracle"] = ordered_json::object();
    for (auto t : config.tasks) {
      const auto& b = bounds.at({li, t});
      entry["oracle"][std::string(task_name(t))] = {
          {"shortest_path_len", b.shortest_path_len ? ordered_json(*b.shortest_path_len) : ordered_json(nullptr)},
          {"max_coverage", b.max_coverage},
          {"max_revealable", b.max_revealable},
          {"witness", b.witness_path ? ordered_json(path_direction_string(*b.witness_path)) : ordered_json(nullptr)}};
    }
    manifest["layouts"].push_back(entry);
  }
  manifest["templates"] = ordered_json::array();
  for (const auto& [key, tmpl] : templates) {
    const std::string bytes = tmpl->version() + "\n" + tmpl->static_text();
    write_file(run_dir / "artifacts" / (tmpl->hash() + ".txt"), bytes);
    manifest["artifacts"][tmpl->hash()] = {{"kind", "template"},
                                           {"name", std::string(task_name(key.first)) + "/" + std::string(regime_name(key.second))},
                                           {"path", "artifacts/" + tmpl->hash() + ".txt"}};
    manifest["templates"].push_back({{"task", task_name(key.first)},
                                     {"regime", regime_name(key.second)},
                                     {"version", tmpl->version()},
                                     {"hash", tmpl->hash()}});
  }
  const auto cells_json = [&](bool final) {
    ordered_json arr = ordered_json::array();
    for (const auto& c : cells) {
      ordered_json j;
      j["id"] = c->id;
      j["layout"] = layouts[c->layout].name;
      j["task"] = task_name(c->task);
      j["regime"] = c->regime ? ordered_json(regime_name(*c->regime)) : ordered_json(nullptr);
      j["policy"] = c->endpoint ? "llm" : "random";
      j["model"] = c->endpoint ? config.endpoints[*c->endpoint].name : std::string(kRandomRowLabel);
      j["endpoint"] = c->endpoint ? ordered_json(config.endpoints[*c->endpoint].name) : ordered_json(nullptr);
      j["episodes"] = c->episodes;
      j["seeds"] = c->seeds;
      j["traces"] = c->traces;
      j["status"] = !final ? "pending" : (c->failed ? "failed" : "ok");
      j["error"] = final && c->failed ? ordered_json(c->error) : ordered_json(nullptr);
      arr.push_back(j);
    }
    return arr;
  };
  manifest["cells"] = cells_json(false);
  write_file(run_dir / "manifest.json", manifest.dump(2) + "\n");

  // Episodes.
  std::map<std::string, std::shared_ptr<RateLimiter>> limiters;
  for (const auto& e : config.endpoints) {
    limiters[e.name] = std::make_shared<RateLimiter>(e.requests_per_minute);
  }
  struct Job {
    CellPlan* cell;
    int episode;
  };
  std::vector<Job> jobs;
  for (const auto& c : cells) {
    for (int i = 0; i < c->episodes; ++i) jobs.push_back({c.get(), i});
  }
  std::mutex log_mu;
  const auto log = [&](const std::string& line) {
    if (!options.log) return;
    std::lock_guard lock(log_mu);
    *options.log << line << "\n";
  };

  std::atomic<std::size_t> next{0};
  std::atomic<int> written{0};
  const auto worker = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= jobs.size()) return;
      CellPlan& cell = *jobs[k].cell;
      const int ep = jobs[k].episode;
      const auto& layout = layouts[cell.layout];
      const std::uint64_t seed = cell.seeds[static_cast<std::size_t>(ep)];
      try {
        std::unique_ptr<Policy> policy;
        if (cell.endpoint) {
          const auto& ecfg = config.endpoints[*cell.endpoint];
          auto gateway = std::make_shared<LlmGateway>(ecfg, options.transport(ecfg, seed),
                                                      limiters.at(ecfg.name), options.sleeper);
          policy = std::make_unique<LlmPolicy>(gateway, templates.at({cell.task, *cell.regime}),
                                               config.max_rejections);
        } else {
          policy = std::make_unique<RandomPolicy>(seed);
        }
        const EpisodeTrace trace =
            run_episode(layout.map, *policy, TaskSpec::for_map(*layout.map, cell.task), seed,
                        bounds.at({cell.layout, cell.task}), {config.on_parse_failure});
        write_trace(run_dir / cell.traces[static_cast<std::size_t>(ep)], trace);
        ++written;
        if (trace.result.aborted && trace.result.abort_reason &&
            !trace.result.abort_reason->starts_with("parse failure")) {
          cell.fail("episode " + std::to_string(ep) + ": " + *trace.result.abort_reason);
        }
      } catch (const std::exception& e) {
        cell.fail("episode " + std::to_string(ep) + ": " + e.what());
      }
      bool finished = false;
      {
        std::lock_guard lock(cell.mu);
        finished = ++cell.done == cell.episodes;
      }
      if (finished) log(cell.id + ": " + (cell.failed ? "failed (" + cell.error + ")" : "ok"));
    }
  };
  int n_workers = config.workers == 0 ? static_cast<int>(std::thread::hardware_concurrency())
                                      : config.workers;
  n_workers = std::clamp(n_workers, 1, std::max(1, static_cast<int>(jobs.size())));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  RunSummary summary;
  summary.run_dir = run_dir;
  summary.cells = static_cast<int>(cells.size());
  summary.traces = written.load();
  for (const auto& c : cells) summary.failed_cells += c->failed ? 1 : 0;

  manifest["cells"] = cells_json(true);
  manifest["status"] = summary.failed_cells > 0 ? "partial" : "complete";
  write_file(run_dir / "manifest.json", manifest.dump(2) + "\n");

  const auto md = cmd_report(run_dir, ReportFormat::Markdown);
  write_file(run_dir / "report.md", md.document);
  write_file(run_dir / "report.csv", cmd_report(run_dir, ReportFormat::Csv).document);
  for (const auto& p : md.problems) log("report: " + p);
  return summary;
}

// ---------------------------------------------------------------------------
// report

ReportOutput cmd_report(const fs::path& run_dir, ReportFormat format) {
  const fs::path manifest_path = run_dir / "manifest.json";
  if (!fs::exists(manifest_path)) throw UsageError("no manifest.json in " + run_dir.string());
  const auto manifest = ordered_json::parse(read_file(manifest_path), nullptr, false);
  if (manifest.is_discarded() || !manifest.contains("cells")) {
    throw ValidationError("manifest.json in " + run_dir.string() + " is corrupt");
  }

  ReportOutput out;
  std::vector<EpisodeTrace> traces;
  for (const auto& cell : manifest["cells"]) {
    const auto status = cell.value("status", std::string("pending"));
    if (status == "failed") {
      GroupKey key;
      key.model = cell.at("model").get<std::string>();
      key.layout = cell.at("layout").get<std::string>();
      key.task = task_from_name(cell.at("task").get<std::string>()).value_or(TaskKind::Exploration);
      if (!cell.at("regime").is_null()) key.regime = regime_from_name(cell.at("regime").get<std::string>());
      out.table.failed.push_back(key);
      continue;
    }
    for (const auto& rel : cell.at("traces")) {
      const fs::path p = run_dir / rel.get<std::string>();
      if (!fs::exists(p)) {
        out.problems.push_back("missing trace " + rel.get<std::string>());
        continue;
      }
      try {
        traces.push_back(read_trace(p));
      } catch (const std::exception& e) {
        out.problems.push_back("unreadable trace " + rel.get<std::string>() + ": " + e.what());
      }
    }
  }
  auto failed = std::move(out.table.failed);
  out.table = aggregate(traces);
  out.table.failed = std::move(failed);
  std::sort(out.table.failed.begin(), out.table.failed.end());
  out.document = emit_report(out.table, format);
  return out;
}

// ---------------------------------------------------------------------------
// oracle / random baseline / validate

std::string cmd_oracle(const std::string& layout, TaskKind task) {
  const LoadedLayout l = load_layout(layout, /*allow_unreachable_goal=*/true);
  const OracleBound b = oracle_bounds(*l.map, task);
  std::string out = "layout: " + l.name + " (" + std::to_string(l.map->rows()) + "x" +
                    std::to_string(l.map->cols()) + ")\n";
  out += "task: " + std::string(task_name(task)) + "\n";
  if (l.map->goal()) {
    out += "shortest_path_len: " +
           (b.shortest_path_len ? std::to_string(*b.shortest_path_len) : std::string("unreachable")) + "\n";
    if (b.witness_path) out += "witness: " + path_direction_string(*b.witness_path) + "\n";
  }
  out += "max_coverage: " + fixed(b.max_coverage, 4) + " (" + std::to_string(b.max_revealable) + "/" +
         std::to_string(l.map->cell_count()) + " cells)\n";
  return out;
}

BaselineSummary cmd_random_baseline(const std::string& layout, TaskKind task, int episodes,
                                    std::uint64_t seed) {
  if (episodes <= 0) throw UsageError("episodes must be >= 1");
  const LoadedLayout l = load_layout(layout);
  const OracleBound bounds = oracle_bounds(*l.map, task);
  const TaskSpec spec = TaskSpec::for_map(*l.map, task);
  const std::string id = cell_id(l.name, task, std::nullopt, "");
  std::vector<EpisodeTrace> traces;
  traces.reserve(static_cast<std::size_t>(episodes));
  for (int i = 0; i < episodes; ++i) {
    const std::uint64_t s = episode_seed(seed, id, i);
    RandomPolicy policy(s);
    traces.push_back(run_episode(l.map, policy, spec, s, bounds));
  }
  const MetricsTable table = aggregate(traces);
  BaselineSummary out;
  out.row = table.rows.at(0);
  const auto& r = out.row;
  out.text = std::string(kRandomRowLabel) + " | " + l.name + " | " + std::string(task_name(task)) +
             " | n=" + std::to_string(r.n) + "\n";
  out.text += "cell: " +
              (task == TaskKind::Exploration ? format_percent(r.coverage_mean) : format_navigation_cell(r)) +
              "\n";
  out.text += "coverage_mean: " + format_percent(r.coverage_mean) + "\n";
  out.text += "success_rate: " + format_percent(r.success_rate) + " (" + std::to_string(r.successes) + "/" +
              std::to_string(r.n) + ")\n";
  out.text += "avg_steps_successful: " +
              (r.avg_steps_successful ? fixed(*r.avg_steps_successful, 2) : std::string("inf")) + "\n";
  out.text += "collisions_mean: " + fixed(r.collisions_mean, 2) + "\n";
  return out;
}

ValidationOutput cmd_validate_map(const std::string& layout) {
  const std::string text = layout_text(layout);
  ValidationOutput out;
  out.diagnostics = validate_map_document(text);
  if (out.diagnostics.empty()) {
    const GridMap map = parse_map(text, layout_name(layout));
    out.text = "ok: " + map.name() + " (" + std::to_string(map.rows()) + "x" + std::to_string(map.cols()) +
               "), start " + to_string(map.start()) +
               (map.goal() ? ", goal " + to_string(*map.goal()) : std::string(", no goal")) + "\n";
  } else {
    out.text = format_diagnostics(out.diagnostics);
  }
  return out;
}

// ---------------------------------------------------------------------------
// render

namespace {

std::shared_ptr<const GridMap> resolve_trace_map(const fs::path& trace_path, const TraceHeader& h,
                                                 const std::optional<std::string>& layout) {
  if (layout) return load_layout(*layout, true).map;
  fs::path dir = fs::absolute(trace_path).parent_path();
  for (int up = 0; up < 4 && !dir.empty(); ++up) {
    const fs::path candidate = dir / "artifacts" / (h.map_hash + ".txt");
    if (fs::exists(candidate)) {
      return std::make_shared<const GridMap>(parse_map(read_file(candidate), h.map_name));
    }
    if (dir == dir.parent_path()) break;
    dir = dir.parent_path();
  }
  for (const auto& name : shipped_layout_names()) {
    auto map = shipped_layout(name);
    if (map_hash(*map) == h.map_hash) return map;
  }
  throw ValidationError("cannot locate the map with hash " + h.map_hash + "; pass --map");
}

std::string step_caption(const StepRecord& rec) {
  const std::string head = "## Step " + std::to_string(rec.index + 1) + ": ";
  if (!rec.action || !rec.outcome) return head + "no valid action (" + to_string(rec.parse_status) + "), no-op";
  const auto& o = *rec.outcome;
  const std::string act = std::string(action_name(*rec.action));
  if (o.collision) {
    return head + act + " -> invalid (wall) at " + to_string(step_toward(o.from, *rec.action)) +
           ", position unchanged";
  }
  return head + act + " -> moved " + to_string(o.from) + " -> " + to_string(o.to) + ", revealed " +
         std::to_string(o.newly_revealed) + " new cells";
}

}  // namespace

std::string cmd_render(const fs::path& trace_path, const std::optional<std::string>& layout) {
  const EpisodeTrace trace = read_trace(trace_path);
  const auto map = resolve_trace_map(trace_path, trace.header, layout);
  const auto& h = trace.header;

  std::string out = "# Trace: " + h.map_name + " / " + std::string(task_name(h.task)) + " / " + h.model +
                    (h.regime ? " / " + std::string(regime_label(*h.regime)) : std::string()) +
                    " (seed " + std::to_string(h.seed) + ")\n";
  const int cells = map->cell_count();
  const auto frame = [&](const WorldState& s, const StepRecord* rec) {
    out += "\n" + (rec ? step_caption(*rec) : std::string("## Step 0: initial")) + "\n";
    out += "position " + to_string(s.pos()) + " | revealed " + std::to_string(s.revealed_count()) + "/" +
           std::to_string(cells) + " | coverage " + format_percent(coverage(s)) + "\n";
    out += "```grid\n" + render_observation(s) + "```\n";
  };
  const EpisodeResult replayed = replay_frames(trace, map, frame);
  if (replayed != trace.result) {
    throw ReplayDivergence(static_cast<int>(trace.steps.size()),
                           std::string(episode_status_name(trace.result.status)) + " after " +
                               std::to_string(trace.result.steps_used) + " steps",
                           std::string(episode_status_name(replayed.status)) + " after " +
                               std::to_string(replayed.steps_used) + " steps");
  }
  out += "\nResult: " + std::string(episode_status_name(replayed.status)) + " after " +
         std::to_string(replayed.steps_used) + " steps, coverage " + format_percent(replayed.final_coverage) +
         ", collisions " + std::to_string(replayed.collisions) + ", parse failures " +
         std::to_string(replayed.parse_failures) + (replayed.aborted ? ", aborted" : "") + "\n";
  return out;
}

}  // namespace gridbench
