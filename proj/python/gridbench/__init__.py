"""Grid-world benchmark for language-model agents: oracle, episodes, runs and reports."""

import json

from ._core import (
    MapError,
    MapHashMismatch,
    ReplayDivergence,
    TraceFormatError,
    UsageError,
    ValidationError,
    canonical_payload,
    episode_seed,
    initial_prompt,
    layout_text,
    normalize_map,
    oracle,
    parse_action,
    random_baseline,
    replay,
    report,
    run,
    run_episode,
    shipped_layouts,
    validate_map,
)


def load_trace(jsonl):
    """Split a JSONL trace into (header, steps, result) dicts."""
    records = [json.loads(line) for line in jsonl.splitlines() if line.strip()]
    header = next(r for r in records if r["record"] == "header")
    steps = [r for r in records if r["record"] == "step"]
    result = next(r for r in records if r["record"] == "result")
    return header, steps, result


__all__ = [
    "MapError",
    "MapHashMismatch",
    "ReplayDivergence",
    "TraceFormatError",
    "UsageError",
    "ValidationError",
    "canonical_payload",
    "episode_seed",
    "initial_prompt",
    "layout_text",
    "load_trace",
    "normalize_map",
    "oracle",
    "parse_action",
    "random_baseline",
    "replay",
    "report",
    "run",
    "run_episode",
    "shipped_layouts",
    "validate_map",
]
