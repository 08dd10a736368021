"""Phase orchestration shared by the CLI subcommands: channel discovery
with relevance judgment, actor identification, target selection, and the
engagement drive. Each phase appends to the same event store, so any run
can be reconstructed from its log alone.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

from .analytics import export_report
from .config import RunConfig, build_model, build_transport
from .discovery import extract_actors, run_discovery
from .engagement import EngagementEngine
from .errors import ConfigInvalid, NotRelevant, NotSimulated
from .llm import ChatModel
from .models import RelevanceDecision, actor_to_dict
from .relevance import judge_channels
from .store import DerivedState, EventStore, emit, reduce_event
from .transport import Transport
from .vision import build_patterns


@dataclass
class RunContext:
    cfg: RunConfig
    store: EventStore
    state: DerivedState
    transport: Transport
    model: ChatModel
    engine: EngagementEngine


def now_ms(transport: Transport) -> int:
    try:
        return transport.now_ms
    except NotSimulated:
        return int(time.time() * 1000)


def build_context(
    cfg: RunConfig, store: EventStore, seed: int | None = None
) -> RunContext:
    state = DerivedState()
    for rec in store.events():
        reduce_event(state, rec)
    transport = build_transport(cfg, seed=seed)
    model = build_model(cfg)
    engine = EngagementEngine(
        store,
        state,
        transport,
        model,
        cfg.engagement.policy,
        substitutions=cfg.substitutions,
        payment_patterns=build_patterns(cfg.payment_patterns),
    )
    engine.rebuild_counters()
    return RunContext(
        cfg=cfg,
        store=store,
        state=state,
        transport=transport,
        model=model,
        engine=engine,
    )


def discovery_phase(ctx: RunContext) -> dict[str, int]:
    """Walk the network, judge every harvested channel, and identify
    offer-posting actors. Returns summary counts."""
    at = now_ms(ctx.transport)
    before = ctx.store.last_sequence
    result = run_discovery(
        ctx.cfg.discovery, ctx.transport, ctx.model, store=ctx.store, at=at
    )
    for rec in ctx.store.events(before):
        reduce_event(ctx.state, rec)
    verdicts = judge_channels(ctx.store, ctx.state, ctx.model, at=at)
    actors = extract_actors(result.records, ctx.cfg.discovery.offer_patterns)
    for profile in actors:
        emit(
            ctx.store,
            ctx.state,
            "ActorIdentified",
            {"actor": actor_to_dict(profile)},
            at,
        )
    summary = {"channels": len(result.records), "actors": len(actors)}
    summary.update(verdicts)
    return summary


def eligible_actors(state: DerivedState) -> set[str]:
    """Actors with at least one source channel judged relevant."""
    relevant = {
        canonical
        for canonical, record in state.channels.items()
        if record.verdict is not None
        and record.verdict.decision is RelevanceDecision.RELEVANT
    }
    return {
        actor_id
        for actor_id, profile in state.actors.items()
        if any(c in relevant for c in profile.source_channels)
    }


def choose_targets(state: DerivedState, requested: tuple[str, ...]) -> list[str]:
    """Resolve the engagement target list. An empty request means every
    eligible actor; explicit ids must each be eligible."""
    eligible = eligible_actors(state)
    if not requested:
        return sorted(eligible)
    missing = [a for a in requested if a not in eligible]
    if missing:
        raise NotRelevant(
            f"not eligible for engagement (no relevant source channel): {missing}"
        )
    return list(requested)


def engagement_phase(
    ctx: RunContext, requested: tuple[str, ...] | None = None
) -> list[str]:
    """Open one session per target. Under auto-approve the virtual clock
    is driven until every session terminates; otherwise sessions wait for
    operator decisions through the gateway."""
    targets = choose_targets(
        ctx.state, ctx.cfg.engagement.targets if requested is None else requested
    )
    for actor_id in targets:
        cid = ctx.engine.conversation_for_actor(actor_id)
        if cid in ctx.state.sessions:
            continue
        ctx.engine.open_session(actor_id)
    if ctx.cfg.engagement.policy.auto_approve:
        ctx.engine.run_auto()
    return targets


def run_simulate(
    cfg: RunConfig,
    out_dir: str | Path,
    seed: int | None = None,
    include_ghosts: bool = False,
) -> dict[str, Path]:
    """Full pipeline on the simulated network: discover, engage to
    termination, and export the report. Writes {out}/events.ldjson and
    {out}/report/."""
    if cfg.transport != "simnet":
        raise ConfigInvalid("simulate runs on the simnet transport only")
    if not cfg.engagement.policy.auto_approve:
        raise ConfigInvalid("simulate needs engagement.auto_approve: true")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    log_path = out / "events.ldjson"
    if log_path.exists():
        log_path.unlink()
    store = EventStore(path=log_path)
    try:
        ctx = build_context(cfg, store, seed=seed)
        discovery_phase(ctx)
        engagement_phase(ctx)
        report_dir = out / "report"
        export_report(ctx.state, report_dir, include_ghosts=include_ghosts)
    finally:
        store.close()
    return {"log": log_path, "report": out / "report"}
