#include "gridbench/episode.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gridbench/assets.hpp"

namespace gridbench {

using nlohmann::ordered_json;

TaskSpec TaskSpec::for_map(const GridMap& map, TaskKind kind) {
  return {kind, map.cell_count() + 1};
}

std::string_view episode_status_name(EpisodeStatus s) {
  switch (s) {
    case EpisodeStatus::Running:
      return "Running";
    case EpisodeStatus::Success:
      return "Success";
    case EpisodeStatus::Truncated:
      return "Truncated";
  }
  return "Running";
}

std::optional<EpisodeStatus> episode_status_from_name(std::string_view name) {
  if (name == "Running") return EpisodeStatus::Running;
  if (name == "Success") return EpisodeStatus::Success;
  if (name == "Truncated") return EpisodeStatus::Truncated;
  return std::nullopt;
}

EpisodeStatus check_termination(const WorldState& state, const TaskSpec& spec,
                                const OracleBound& bounds) {
  if (spec.kind == TaskKind::Navigation) {
    if (state.map().goal() && state.pos() == *state.map().goal()) return EpisodeStatus::Success;
  } else if (state.revealed_count() >= bounds.max_revealable) {
    return EpisodeStatus::Success;
  }
  return state.steps_taken() >= spec.t_max ? EpisodeStatus::Truncated : EpisodeStatus::Running;
}

std::string map_hash(const GridMap& map) { return sha256_hex(render_map(map)); }

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t episode_seed(std::uint64_t master, std::string_view cell_id, int episode) {
  return splitmix64(splitmix64(master ^ fnv1a64(cell_id)) + static_cast<std::uint64_t>(episode));
}

namespace {

EpisodeResult summarize(const WorldState& state, const std::vector<StepRecord>& steps,
                        EpisodeStatus status) {
  EpisodeResult r;
  r.status = status;
  r.steps_used = state.steps_taken();
  r.final_coverage = coverage(state);
  r.revealed = state.revealed_count();
  r.final_pos = state.pos();
  for (const auto& s : steps) {
    if (!s.action) ++r.parse_failures;
    if (s.outcome && s.outcome->collision) ++r.collisions;
  }
  return r;
}

}  // namespace

EpisodeTrace run_episode(std::shared_ptr<const GridMap> map, Policy& policy, const TaskSpec& spec,
                         std::uint64_t seed, const OracleBound& bounds,
                         const EpisodeOptions& options) {
  if (spec.t_max < 1) throw std::invalid_argument("t_max must be >= 1");
  const PolicyInfo info = policy.describe();

  EpisodeTrace trace;
  TraceHeader& h = trace.header;
  h.map_name = map->name();
  h.map_hash = map_hash(*map);
  h.rows = map->rows();
  h.cols = map->cols();
  h.template_hash = info.template_hash;
  h.template_version = info.template_version;
  h.policy_kind = info.kind;
  h.model = info.model;
  h.endpoint = info.endpoint;
  h.task = spec.kind;
  h.regime = info.regime;
  h.seed = seed;
  h.t_max = spec.t_max;
  h.oracle_path_len = bounds.shortest_path_len;
  h.oracle_max_coverage = bounds.max_coverage;
  h.oracle_max_revealable = bounds.max_revealable;

  WorldState state = initial_state(map, spec.kind);
  std::optional<WorldState> previous;
  std::optional<Action> last_action;
  bool last_failed = false;
  EpisodeStatus status = check_termination(state, spec, bounds);
  std::optional<std::string> abort_reason;

  while (status == EpisodeStatus::Running) {
    const ObservationContext ctx =
        make_context(state, previous ? &*previous : nullptr, spec.kind, last_action, last_failed);
    ActionDecision decision = policy.decide(ctx);

    StepRecord rec;
    rec.index = state.steps_taken();
    rec.parse_status = decision.parse_status;
    rec.raw_output = std::move(decision.raw_output);
    rec.calls = std::move(decision.calls);
    rec.latency_ms = decision.latency_ms;
    rec.token_usage = decision.token_usage;
    for (const auto& call : rec.calls) {
      for (const auto& d : call.dropped_params) {
        if (std::find(h.dropped_params.begin(), h.dropped_params.end(), d) ==
            h.dropped_params.end()) {
          h.dropped_params.push_back(d);
        }
      }
    }

    if (decision.transport_error) {
      abort_reason = *decision.transport_error;
      break;
    }

    WorldState next = state;
    if (decision.action) {
      auto [after, outcome] = apply_action(state, *decision.action);
      next = std::move(after);
      rec.action = decision.action;
      rec.outcome = outcome;
      last_failed = false;
    } else {
      rec.parse_status = ParseStatus::failed();
      next = skip_step(state);
      last_failed = true;
    }
    last_action = decision.action;
    previous = std::move(state);
    state = std::move(next);

    rec.pos = state.pos();
    rec.revealed = state.revealed_count();
    rec.coverage = coverage(state);
    trace.steps.push_back(std::move(rec));

    if (!decision.action && options.on_parse_failure == ParseFailureMode::Abort) {
      abort_reason = "parse failure at step " + std::to_string(trace.steps.back().index);
      break;
    }
    status = check_termination(state, spec, bounds);
  }

  if (abort_reason) status = EpisodeStatus::Truncated;
  trace.result = summarize(state, trace.steps, status);
  trace.result.aborted = abort_reason.has_value();
  trace.result.abort_reason = abort_reason;
  return trace;
}

// ---------------------------------------------------------------------------
// JSONL

namespace {

ordered_json coord_json(Coord c) { return ordered_json::array({c.row, c.col}); }

Coord coord_from(const ordered_json& j) { return {j.at(0).get<int>(), j.at(1).get<int>()}; }

template <typename T, typename F>
ordered_json opt_json(const std::optional<T>& v, F&& f) {
  return v ? f(*v) : ordered_json(nullptr);
}

ordered_json usage_json(const TokenUsage& u) {
  return {{"prompt_tokens", u.prompt_tokens}, {"completion_tokens", u.completion_tokens}};
}

std::optional<TokenUsage> usage_from(const ordered_json& j) {
  if (j.is_null()) return std::nullopt;
  return TokenUsage{j.at("prompt_tokens").get<int>(), j.at("completion_tokens").get<int>()};
}

ordered_json header_json(const TraceHeader& h) {
  ordered_json j;
  j["record"] = "header";
  j["format"] = h.format;
  j["map_name"] = h.map_name;
  j["map_hash"] = h.map_hash;
  j["rows"] = h.rows;
  j["cols"] = h.cols;
  j["template_hash"] = h.template_hash;
  j["template_version"] = h.template_version;
  j["policy"] = h.policy_kind;
  j["model"] = h.model;
  j["endpoint"] = h.endpoint;
  j["task"] = task_name(h.task);
  j["regime"] = opt_json(h.regime, [](Regime r) { return ordered_json(regime_name(r)); });
  j["seed"] = h.seed;
  j["t_max"] = h.t_max;
  j["oracle"] = {
      {"shortest_path_len", opt_json(h.oracle_path_len, [](int v) { return ordered_json(v); })},
      {"max_coverage", h.oracle_max_coverage},
      {"max_revealable", h.oracle_max_revealable}};
  j["dropped_params"] = h.dropped_params;
  return j;
}

ordered_json call_json(const CallRecord& c) {
  ordered_json j;
  j["prompt_hash"] = c.prompt_hash;
  j["raw_output"] = c.raw_output;
  j["parse_error"] = opt_json(c.parse_error, [](const std::string& s) { return ordered_json(s); });
  j["latency_ms"] = c.latency_ms;
  j["usage"] = opt_json(c.usage, usage_json);
  j["transport_retries"] = c.transport_retries;
  j["dropped_params"] = c.dropped_params;
  return j;
}

ordered_json step_json(const StepRecord& s) {
  ordered_json j;
  j["record"] = "step";
  j["index"] = s.index;
  j["action"] = opt_json(s.action, [](Action a) { return ordered_json(action_name(a)); });
  j["action_int"] = opt_json(s.action, [](Action a) { return ordered_json(wire_int(a)); });
  j["parse_status"] = to_string(s.parse_status);
  j["raw_output"] = s.raw_output;
  j["calls"] = ordered_json::array();
  for (const auto& c : s.calls) j["calls"].push_back(call_json(c));
  j["latency_ms"] = s.latency_ms;
  j["token_usage"] = opt_json(s.token_usage, usage_json);
  j["outcome"] = opt_json(s.outcome, [](const StepOutcome& o) {
    return ordered_json{{"moved", o.moved},
                        {"collision", o.collision},
                        {"newly_revealed", o.newly_revealed},
                        {"from", coord_json(o.from)},
                        {"to", coord_json(o.to)}};
  });
  j["pos"] = coord_json(s.pos);
  j["revealed"] = s.revealed;
  j["coverage"] = s.coverage;
  return j;
}

ordered_json result_json(const EpisodeResult& r) {
  ordered_json j;
  j["record"] = "result";
  j["status"] = episode_status_name(r.status);
  j["steps_used"] = r.steps_used;
  j["final_coverage"] = r.final_coverage;
  j["revealed"] = r.revealed;
  j["final_pos"] = coord_json(r.final_pos);
  j["collisions"] = r.collisions;
  j["parse_failures"] = r.parse_failures;
  j["aborted"] = r.aborted;
  j["abort_reason"] =
      opt_json(r.abort_reason, [](const std::string& s) { return ordered_json(s); });
  return j;
}

template <typename T>
T required(std::optional<T> v, std::string_view what) {
  if (!v) throw TraceFormatError("bad value for " + std::string(what));
  return *v;
}

TraceHeader header_from(const ordered_json& j) {
  TraceHeader h;
  h.format = j.at("format").get<std::string>();
  if (h.format != kTraceFormat) throw TraceFormatError("unsupported trace format " + h.format);
  h.map_name = j.at("map_name").get<std::string>();
  h.map_hash = j.at("map_hash").get<std::string>();
  h.rows = j.at("rows").get<int>();
  h.cols = j.at("cols").get<int>();
  h.template_hash = j.at("template_hash").get<std::string>();
  h.template_version = j.at("template_version").get<std::string>();
  h.policy_kind = j.at("policy").get<std::string>();
  h.model = j.at("model").get<std::string>();
  h.endpoint = j.at("endpoint").get<std::string>();
  h.task = required(task_from_name(j.at("task").get<std::string>()), "task");
  if (!j.at("regime").is_null()) {
    h.regime = required(regime_from_name(j.at("regime").get<std::string>()), "regime");
  }
  h.seed = j.at("seed").get<std::uint64_t>();
  h.t_max = j.at("t_max").get<int>();
  const auto& o = j.at("oracle");
  if (!o.at("shortest_path_len").is_null()) h.oracle_path_len = o.at("shortest_path_len").get<int>();
  h.oracle_max_coverage = o.at("max_coverage").get<double>();
  h.oracle_max_revealable = o.at("max_revealable").get<int>();
  h.dropped_params = j.at("dropped_params").get<std::vector<std::string>>();
  return h;
}

CallRecord call_from(const ordered_json& j) {
  CallRecord c;
  c.prompt_hash = j.at("prompt_hash").get<std::string>();
  c.raw_output = j.at("raw_output").get<std::string>();
  if (!j.at("parse_error").is_null()) c.parse_error = j.at("parse_error").get<std::string>();
  c.latency_ms = j.at("latency_ms").get<double>();
  c.usage = usage_from(j.at("usage"));
  c.transport_retries = j.at("transport_retries").get<int>();
  c.dropped_params = j.at("dropped_params").get<std::vector<std::string>>();
  return c;
}

StepRecord step_from(const ordered_json& j) {
  StepRecord s;
  s.index = j.at("index").get<int>();
  if (!j.at("action").is_null()) {
    const auto by_name = required(action_from_name(j.at("action").get<std::string>()), "action");
    const auto by_int = required(action_from_wire(j.at("action_int").get<int>()), "action_int");
    if (by_name != by_int) throw TraceFormatError("action and action_int disagree");
    s.action = by_name;
  }
  s.parse_status =
      required(parse_status_from_string(j.at("parse_status").get<std::string>()), "parse_status");
  s.raw_output = j.at("raw_output").get<std::string>();
  for (const auto& c : j.at("calls")) s.calls.push_back(call_from(c));
  s.latency_ms = j.at("latency_ms").get<double>();
  s.token_usage = usage_from(j.at("token_usage"));
  if (const auto& o = j.at("outcome"); !o.is_null()) {
    s.outcome = StepOutcome{o.at("moved").get<bool>(), o.at("collision").get<bool>(),
                            o.at("newly_revealed").get<int>(), coord_from(o.at("from")),
                            coord_from(o.at("to"))};
  }
  s.pos = coord_from(j.at("pos"));
  s.revealed = j.at("revealed").get<int>();
  s.coverage = j.at("coverage").get<double>();
  return s;
}

EpisodeResult result_from(const ordered_json& j) {
  EpisodeResult r;
  r.status = required(episode_status_from_name(j.at("status").get<std::string>()), "status");
  r.steps_used = j.at("steps_used").get<int>();
  r.final_coverage = j.at("final_coverage").get<double>();
  r.revealed = j.at("revealed").get<int>();
  r.final_pos = coord_from(j.at("final_pos"));
  r.collisions = j.at("collisions").get<int>();
  r.parse_failures = j.at("parse_failures").get<int>();
  r.aborted = j.at("aborted").get<bool>();
  if (!j.at("abort_reason").is_null()) r.abort_reason = j.at("abort_reason").get<std::string>();
  return r;
}

}  // namespace

std::string trace_to_jsonl(const EpisodeTrace& trace) {
  std::string out = header_json(trace.header).dump() + "\n";
  for (const auto& s : trace.steps) out += step_json(s).dump() + "\n";
  out += result_json(trace.result).dump() + "\n";
  return out;
}

EpisodeTrace trace_from_jsonl(std::string_view text) {
  EpisodeTrace trace;
  bool have_header = false;
  bool have_result = false;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (line.empty()) continue;
    const auto where = "line " + std::to_string(line_no);
    const auto j = ordered_json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw TraceFormatError(where + ": not a JSON object");
    if (have_result) throw TraceFormatError(where + ": record after result");
    try {
      const auto kind = j.at("record").get<std::string>();
      if (kind == "header") {
        if (have_header) throw TraceFormatError(where + ": second header");
        trace.header = header_from(j);
        have_header = true;
      } else if (!have_header) {
        throw TraceFormatError(where + ": missing header");
      } else if (kind == "step") {
        trace.steps.push_back(step_from(j));
        if (trace.steps.back().index != static_cast<int>(trace.steps.size()) - 1) {
          throw TraceFormatError(where + ": step indices are not dense");
        }
      } else if (kind == "result") {
        trace.result = result_from(j);
        have_result = true;
      } else {
        throw TraceFormatError(where + ": unknown record " + kind);
      }
    } catch (const nlohmann::json::exception& e) {
      throw TraceFormatError(where + ": " + e.what());
    }
  }
  if (!have_header) throw TraceFormatError("trace has no header");
  if (!have_result) throw TraceFormatError("trace has no result record");
  return trace;
}

void write_trace(const std::filesystem::path& path, const EpisodeTrace& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << trace_to_jsonl(trace);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

EpisodeTrace read_trace(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return trace_from_jsonl(buf.str());
}

// ---------------------------------------------------------------------------
// Replay

ReplayDivergence::ReplayDivergence(int index, std::string expected, std::string observed)
    : std::runtime_error("replay diverged at step " + std::to_string(index) + ": expected " +
                         expected + ", observed " + observed),
      index_(index),
      expected_(std::move(expected)),
      observed_(std::move(observed)) {}

namespace {

std::string describe(const std::optional<StepOutcome>& o, Coord pos, int revealed) {
  std::string s = "pos " + to_string(pos) + " revealed " + std::to_string(revealed);
  if (o) {
    s += o->collision ? " collision" : (o->moved ? " moved" : " stayed");
    s += " " + to_string(o->from) + "->" + to_string(o->to) + " +" +
         std::to_string(o->newly_revealed);
  } else {
    s += " no-op";
  }
  return s;
}

}  // namespace

EpisodeResult replay_frames(
    const EpisodeTrace& trace, std::shared_ptr<const GridMap> map,
    const std::function<void(const WorldState&, const StepRecord*)>& frame) {
  if (map_hash(*map) != trace.header.map_hash) {
    throw MapHashMismatch("trace was recorded on map " + trace.header.map_hash + ", got " +
                          map_hash(*map));
  }
  const TaskSpec spec{trace.header.task, trace.header.t_max};
  const OracleBound bounds = oracle_bounds(*map, spec.kind);

  WorldState state = initial_state(map, spec.kind);
  if (frame) frame(state, nullptr);
  EpisodeStatus status = check_termination(state, spec, bounds);
  for (const auto& rec : trace.steps) {
    if (status != EpisodeStatus::Running) {
      throw ReplayDivergence(rec.index, "no further steps", "episode already terminated");
    }
    std::optional<StepOutcome> outcome;
    if (rec.action) {
      auto [after, o] = apply_action(state, *rec.action);
      state = std::move(after);
      outcome = o;
    } else {
      state = skip_step(state);
    }
    if (outcome != rec.outcome || state.pos() != rec.pos || state.revealed_count() != rec.revealed) {
      throw ReplayDivergence(rec.index, describe(rec.outcome, rec.pos, rec.revealed),
                             describe(outcome, state.pos(), state.revealed_count()));
    }
    if (frame) frame(state, &rec);
    status = check_termination(state, spec, bounds);
  }
  if (trace.result.aborted) status = EpisodeStatus::Truncated;
  if (status == EpisodeStatus::Running) {
    throw ReplayDivergence(static_cast<int>(trace.steps.size()), "terminated episode",
                           "episode still running after the last recorded step");
  }
  EpisodeResult r = summarize(state, trace.steps, status);
  r.aborted = trace.result.aborted;
  r.abort_reason = trace.result.abort_reason;
  return r;
}

EpisodeResult replay(const EpisodeTrace& trace, std::shared_ptr<const GridMap> map) {
  return replay_frames(trace, std::move(map), nullptr);
}

}  // namespace gridbench
