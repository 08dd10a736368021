#!/usr/bin/env python3
"""Run the reference workload live on the simulated network and print the
headline report numbers next to the prebuilt fixture's.

The live run discovers the channel graph, engages every scripted persona
to termination, and exports the report. Matching numbers mean the replay
fixture and the live pipeline agree end to end.
"""

from __future__ import annotations

import argparse
import json
import tempfile
from pathlib import Path

from decoychat.analytics import export_report
from decoychat.config import load_config
from decoychat.pipeline import run_simulate
from decoychat.store import EventStore, replay

HEADLINE = (
    "total_conversations",
    "success_count",
    "success_rate_pct",
    "premature_count",
    "premature_rate_pct",
    "no_response_count",
    "disclosure_total",
    "median_success_rounds",
)


def summarize(events_path: Path, out_dir: Path) -> dict:
    state = replay(EventStore.read_log(events_path))
    export_report(state, out_dir)
    return json.loads((out_dir / "summary.json").read_text(encoding="utf-8"))


def main(argv: list[str] | None = None) -> int:
    root = Path(__file__).resolve().parent.parent
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--config", default=root / "scenarios" / "workload" / "config.yaml"
    )
    parser.add_argument(
        "--fixture", default=root / "scenarios" / "workload_events.ldjson"
    )
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", default=None, help="defaults to a temp dir")
    args = parser.parse_args(argv)

    cfg = load_config(args.config)
    out = Path(args.out) if args.out else Path(tempfile.mkdtemp(prefix="workload-"))
    paths = run_simulate(cfg, out, seed=args.seed)
    live = json.loads(
        (paths["report"] / "summary.json").read_text(encoding="utf-8")
    )

    fixture_path = Path(args.fixture)
    fixture = (
        summarize(fixture_path, out / "fixture-report")
        if fixture_path.exists()
        else None
    )

    width = max(len(k) for k in HEADLINE)
    for key in HEADLINE:
        line = f"{key:<{width}}  live={live.get(key)}"
        if fixture is not None:
            line += f"  fixture={fixture.get(key)}"
        print(line)
    if fixture is not None:
        same = all(live.get(k) == fixture.get(k) for k in HEADLINE)
        print("match" if same else "MISMATCH")
        return 0 if same else 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
