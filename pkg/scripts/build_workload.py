#!/usr/bin/env python3
"""Regenerate the shipped reference workload.

Writes scenarios/workload/{scenario.yaml,config.yaml,llm_rules.json} and
the prebuilt event log scenarios/workload_events.ldjson. The outputs are
deterministic; rerunning produces byte-identical files.
"""

from __future__ import annotations

import argparse
from pathlib import Path

from decoychat.benchmark import build_example_log, write_workload


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--out",
        default=Path(__file__).resolve().parent.parent / "scenarios",
        type=Path,
        help="directory that receives workload/ and workload_events.ldjson",
    )
    args = parser.parse_args(argv)

    paths = write_workload(args.out / "workload")
    log = build_example_log(args.out / "workload_events.ldjson")
    for name, path in sorted(paths.items()):
        print(f"{name}: {path}")
    print(f"events: {log}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
