import collections
import json

import pytest

import gridbench


def bfs_len(text):
    grid = [row for row in text.splitlines() if row]
    cells = {(r, c): ch for r, row in enumerate(grid) for c, ch in enumerate(row)}
    start = next(p for p, ch in cells.items() if ch == "R")
    goal = next(p for p, ch in cells.items() if ch == "g")
    dist = {start: 0}
    queue = collections.deque([start])
    while queue:
        r, c = queue.popleft()
        for nxt in ((r + 1, c), (r - 1, c), (r, c + 1), (r, c - 1)):
            if cells.get(nxt, "W") != "W" and nxt not in dist:
                dist[nxt] = dist[(r, c)] + 1
                queue.append(nxt)
    return dist.get(goal)


@pytest.mark.parametrize("name", ["easy", "medium", "hard"])
def test_oracle_matches_bfs(name):
    info = gridbench.oracle("builtin:" + name)
    assert info["shortest_path_len"] == bfs_len(gridbench.layout_text(name))
    assert len(info["witness"]) == info["shortest_path_len"]
    assert info["max_coverage"] == 1.0


def test_shipped_layouts():
    assert set(gridbench.shipped_layouts()) >= {"easy", "medium", "hard"}


def test_parse_action_round_trip():
    for d, i in (("DOWN", 0), ("RIGHT", 1), ("UP", 2), ("LEFT", 3)):
        parsed = gridbench.parse_action("thinking... " + gridbench.canonical_payload(d) + " done")
        assert parsed == {"ok": True, "direction_str": d, "direction_int": i}
    bad = gridbench.parse_action('<<ACTION>>{"direction_str":"UP","direction_int":1}<<END>>')
    assert bad["ok"] is False and bad["error"] == "IntStrMismatch"
    assert gridbench.parse_action("UP")["error"] == "NoSentinel"


def test_prompt_shape():
    zero = gridbench.initial_prompt("builtin:easy", "navigation", "zero-shot")
    five = gridbench.initial_prompt("builtin:easy", "navigation", "five-shot")
    assert zero["system"] == five["system"]
    assert zero["template_hash"] != five["template_hash"]
    assert "<<ACTION>>" in zero["system"]


def test_oracle_episode_and_replay():
    jsonl = gridbench.run_episode("builtin:medium", "navigation", policy="oracle")
    header, steps, result = gridbench.load_trace(jsonl)
    assert header["format"] == "gridbench-trace-v1"
    assert result["status"] == "Success"
    assert len(steps) == result["steps_used"] == 25
    assert gridbench.replay(jsonl, "builtin:medium")["matches_recorded"]
    with pytest.raises(gridbench.MapHashMismatch):
        gridbench.replay(jsonl, "builtin:easy")


def test_random_episode_is_seeded():
    a = gridbench.run_episode("builtin:easy", "exploration", seed=3)
    assert a == gridbench.run_episode("builtin:easy", "exploration", seed=3)
    assert a != gridbench.run_episode("builtin:easy", "exploration", seed=4)
    _, steps, result = gridbench.load_trace(a)
    assert result["collisions"] == sum(1 for s in steps if s["outcome"]["collision"])


def test_tampered_trace_diverges():
    jsonl = gridbench.run_episode("builtin:easy", "navigation", policy="oracle")
    lines = jsonl.splitlines()
    step = json.loads(lines[3])
    step["action"], step["action_int"] = "DOWN", 0
    lines[3] = json.dumps(step, separators=(",", ":"))
    with pytest.raises(gridbench.ReplayDivergence):
        gridbench.replay("\n".join(lines) + "\n", "builtin:easy")


def test_errors():
    with pytest.raises(ValueError):
        gridbench.oracle("builtin:nowhere")
    with pytest.raises(ValueError):
        gridbench.random_baseline("builtin:easy", "navigation", episodes=0)
    with pytest.raises(gridbench.MapError):
        gridbench.normalize_map("WWW\nW.W\nWWW\n")


def test_mock_run_and_report(tmp_path):
    config = tmp_path / "suite.yaml"
    config.write_text(
        "layouts: [builtin:easy]\n"
        "tasks: [navigation]\n"
        "regimes: [zero-shot]\n"
        "episodes_per_cell: 2\n"
        "random_baseline_episodes: 3\n"
        "master_seed: 1\n"
        "endpoints:\n"
        "  - {name: mock-a, kind: mock, model_id: mock-a}\n"
    )
    summary = gridbench.run(str(config), output_dir=str(tmp_path / "runs"), run_id="t")
    assert summary["exit_code"] == 0 and summary["traces"] == 5
    rep = gridbench.report(summary["run_dir"])
    assert rep["problems"] == []
    assert "| Random Actions |" in rep["document"]
    assert "| mock-a |" in rep["document"]
