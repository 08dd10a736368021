"""Command line entry point.

    decoychat discover --config C --out LOG
    decoychat engage   --config C --out LOG [--actors ids|all-relevant]
                       [--auto-approve]
    decoychat analyze  --log LOG --out DIR [--include-ghosts]
    decoychat serve    --config C [--out LOG]
    decoychat simulate --config C --out DIR [--seed N]

Exit codes: 0 clean, 1 runtime failure, 2 invalid config or usage. The
gateway token comes from the DECOYCHAT_TOKEN environment variable.
"""

from __future__ import annotations

import argparse
import os
import signal
import sys
import time
from pathlib import Path

from .analytics import export_report
from .config import load_config, with_overrides
from .errors import ConfigInvalid, DecoychatError
from .gateway import GatewayServer
from .pipeline import (
    build_context,
    discovery_phase,
    engagement_phase,
    run_simulate,
)
from .store import EventStore, replay


def _open_store(path: Path, fresh: bool) -> EventStore:
    """Fresh truncates any existing log; otherwise an existing log is
    verified and continued."""
    if path.exists() and not fresh:
        return EventStore.open_append(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.exists():
        path.unlink()
    return EventStore(path=path)


def _parse_actors(raw: str | None) -> tuple[str, ...] | None:
    if raw is None:
        return None
    if raw == "all-relevant":
        return ()
    ids = tuple(a.strip() for a in raw.split(",") if a.strip())
    if not ids:
        raise ConfigInvalid("--actors needs ids or the word all-relevant")
    return ids


def cmd_discover(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, enable_live=args.enable_live)
    store = _open_store(Path(args.out), fresh=True)
    try:
        ctx = build_context(cfg, store, seed=args.seed)
        summary = discovery_phase(ctx)
    finally:
        store.close()
    for key in sorted(summary):
        print(f"{key}: {summary[key]}")
    return 0


def cmd_engage(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, enable_live=args.enable_live)
    cfg = with_overrides(
        cfg,
        auto_approve=True if args.auto_approve else None,
        targets=_parse_actors(args.actors),
    )
    log_path = Path(args.out)
    resume = log_path.exists()
    store = _open_store(log_path, fresh=False)
    try:
        ctx = build_context(cfg, store, seed=args.seed)
        if not ctx.state.channels:
            discovery_phase(ctx)
        targets = engagement_phase(ctx)
    finally:
        store.close()
    print(f"engaged {len(targets)} actors" + (" (resumed log)" if resume else ""))
    return 0


def cmd_analyze(args: argparse.Namespace) -> int:
    records = EventStore.read_log(args.log)
    state = replay(records)
    files = export_report(state, args.out, include_ghosts=args.include_ghosts)
    for path in files:
        print(path)
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, enable_live=args.enable_live)
    token = os.environ.get("DECOYCHAT_TOKEN", "")
    if not token:
        raise ConfigInvalid("serve needs the DECOYCHAT_TOKEN environment variable")
    log_path = Path(args.out) if args.out else cfg.store_path
    if log_path is None:
        raise ConfigInvalid("serve needs --out or a store path in the config")
    store = _open_store(Path(log_path), fresh=False)
    gateway = None
    try:
        ctx = build_context(cfg, store, seed=args.seed)
        if not ctx.state.channels and cfg.transport == "simnet":
            discovery_phase(ctx)
        if cfg.engagement.targets:
            engagement_phase(ctx)
        gateway = GatewayServer(
            ctx.engine,
            store,
            ctx.state,
            ctx.transport,
            token=token,
            host=cfg.gateway.host,
            port=cfg.gateway.port,
        )
        gateway.start()
        print(f"listening on {gateway.base_url}", flush=True)
        signal.signal(signal.SIGTERM, lambda *_: sys.exit(0))
        while True:
            time.sleep(0.2)
    except (KeyboardInterrupt, SystemExit):
        return 0
    finally:
        if gateway is not None:
            gateway.stop()
        store.close()


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, enable_live=args.enable_live)
    if args.auto_approve:
        cfg = with_overrides(cfg, auto_approve=True)
    paths = run_simulate(
        cfg, args.out, seed=args.seed, include_ghosts=args.include_ghosts
    )
    print(f"log: {paths['log']}")
    print(f"report: {paths['report']}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="decoychat",
        description="Supervised decoy-conversation pipeline over a "
        "simulated or stubbed messaging backend.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, config: bool = True) -> None:
        if config:
            p.add_argument("--config", required=True, help="run config file")
        p.add_argument("--seed", type=int, default=None, help="override scenario seed")
        p.add_argument(
            "--enable-live",
            action="store_true",
            help="allow the live transport stub",
        )

    p = sub.add_parser("discover", help="walk the network and judge channels")
    common(p)
    p.add_argument("--out", required=True, help="event log to write")
    p.set_defaults(func=cmd_discover)

    p = sub.add_parser("engage", help="open sessions and drive them")
    common(p)
    p.add_argument("--out", required=True, help="event log to write or continue")
    p.add_argument(
        "--actors",
        default=None,
        help="comma-separated actor ids, or all-relevant",
    )
    p.add_argument("--auto-approve", action="store_true")
    p.set_defaults(func=cmd_engage)

    p = sub.add_parser("analyze", help="compute reports from an event log")
    p.add_argument("--log", required=True)
    p.add_argument("--out", required=True, help="report directory")
    p.add_argument("--include-ghosts", action="store_true")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("serve", help="run the operator gateway")
    common(p)
    p.add_argument("--out", default=None, help="event log to write or continue")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("simulate", help="discover, engage, and report end to end")
    common(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--auto-approve", action="store_true")
    p.add_argument("--include-ghosts", action="store_true")
    p.set_defaults(func=cmd_simulate)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DecoychatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
