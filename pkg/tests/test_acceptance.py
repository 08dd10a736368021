"""Acceptance suite: one test per shipped claim, pinned numbers inline.

Criteria 1-3 and 6-7 check the reference workload (fixture log and live
simulated runs). Criteria 4-5 and 8-9 check engine and analytics behavior
that the workload depends on. Tolerances are fixed constants here, never
derived from the code under test.
"""

from __future__ import annotations

import csv
import hashlib
import json
import statistics
import subprocess
import sys
import time
from collections import Counter
from itertools import combinations_with_replacement
from pathlib import Path
from types import SimpleNamespace

import pytest

from decoychat.analytics import (
    export_report,
    first_response_latency_s,
    tukey_hinges,
)
from decoychat.config import load_config
from decoychat.engagement import EngagementEngine, EngagementPolicy
from decoychat.errors import ApprovalRequired, CorruptLog
from decoychat.models import (
    Carrier,
    Classification,
    Direction,
    OutcomeKind,
    PaymentMethod,
    SessionState,
)
from decoychat.pipeline import build_context, discovery_phase, engagement_phase
from decoychat.simnet import SimnetTransport, build_scenario
from decoychat.store import DerivedState, EventStore, replay

ROOT = Path(__file__).resolve().parent.parent
WORKLOAD_CONFIG = ROOT / "scenarios" / "workload" / "config.yaml"
FIXTURE_LOG = ROOT / "scenarios" / "workload_events.ldjson"
START = 1_700_000_000_000

EXPECTED_OUTCOMES = {
    OutcomeKind.PAYMENT_OBTAINED: 30,
    OutcomeKind.NO_RESPONSE: 15,
    OutcomeKind.DISENGAGED: 8,
}
EXPECTED_METHOD_COUNTS = {
    "alipay_image": 16,
    "usdt": 15,
    "wechat": 14,
    "alipay": 12,
    "qq_image": 3,
    "bank": 1,
    "payment_solution": 1,
}
EXPECTED_METHOD_PCTS = {
    "alipay_image": 25.81,
    "usdt": 24.19,
    "wechat": 22.58,
    "alipay": 19.35,
    "qq_image": 4.84,
    "bank": 1.61,
    "payment_solution": 1.61,
}
RATE_TOL = 0.05
PCT_TOL = 0.01


def summary_checks(summary: dict) -> None:
    assert summary["total_conversations"] == 53
    assert summary["success_count"] == 30
    assert summary["no_response_count"] == 15
    assert summary["premature_count"] == 8
    assert summary["disclosure_total"] == 62
    assert abs(summary["success_rate_pct"] - 56.6) <= RATE_TOL
    assert abs(summary["premature_rate_pct"] - 15.1) <= RATE_TOL
    dist = summary["payment_distribution"]
    assert {k: v["count"] for k, v in dist.items()} == EXPECTED_METHOD_COUNTS
    for method, pct in EXPECTED_METHOD_PCTS.items():
        assert abs(dist[method]["pct"] - pct) <= PCT_TOL


def outcome_counts(state: DerivedState) -> Counter:
    return Counter(
        s.conversation.outcome.kind
        for s in state.sessions.values()
        if s.conversation.outcome is not None
    )


@pytest.fixture(scope="module")
def fixture_run(tmp_path_factory):
    t0 = time.perf_counter()
    records = EventStore.read_log(FIXTURE_LOG)
    state = replay(records)
    report_dir = tmp_path_factory.mktemp("fixture_report")
    export_report(state, report_dir)
    elapsed = time.perf_counter() - t0
    summary = json.loads((report_dir / "summary.json").read_text("utf-8"))
    return SimpleNamespace(
        records=records,
        state=state,
        summary=summary,
        report_dir=report_dir,
        elapsed=elapsed,
    )


@pytest.fixture(scope="module")
def live_run(tmp_path_factory):
    base = tmp_path_factory.mktemp("live")
    digests: list[str] = []
    elapsed = 0.0
    for n in range(3):
        out = base / f"run{n}"
        t0 = time.perf_counter()
        proc = subprocess.run(
            [
                sys.executable,
                "-m",
                "decoychat",
                "simulate",
                "--config",
                str(WORKLOAD_CONFIG),
                "--seed",
                "7",
                "--out",
                str(out),
            ],
            capture_output=True,
            text=True,
        )
        elapsed += time.perf_counter() - t0
        assert proc.returncode == 0, proc.stderr
        log = out / "events.ldjson"
        digests.append(hashlib.sha256(log.read_bytes()).hexdigest())
    first = base / "run0"
    records = EventStore.read_log(first / "events.ldjson")
    summary = json.loads(
        (first / "report" / "summary.json").read_text("utf-8")
    )
    return SimpleNamespace(
        digests=digests,
        records=records,
        state=replay(records),
        summary=summary,
        report_dir=first / "report",
        elapsed=elapsed,
    )


def test_criterion_1_fixture_statistics(fixture_run):
    assert outcome_counts(fixture_run.state) == EXPECTED_OUTCOMES
    summary_checks(fixture_run.summary)
    assert fixture_run.elapsed < 5.0


def test_criterion_2_live_simulation_deterministic(live_run):
    assert live_run.summary["relevant_channels"] == 98
    assert live_run.summary["actors_identified"] == 120
    assert outcome_counts(live_run.state) == EXPECTED_OUTCOMES
    summary_checks(live_run.summary)
    assert len(set(live_run.digests)) == 1
    assert live_run.elapsed < 60.0


def test_criterion_3_round_accounting(fixture_run):
    assert fixture_run.summary["median_success_rounds"] == 3.0
    with open(fixture_run.report_dir / "round_cdf.csv", newline="") as fh:
        rows = [(int(r["round"]), float(r["cumulative_fraction"]))
                for r in csv.DictReader(fh)]
    assert rows, "empty round CDF"
    fractions = [f for _, f in rows]
    assert all(a <= b for a, b in zip(fractions, fractions[1:]))
    assert fractions[-1] == 1.0
    assert max(r for r, _ in rows) <= 5


def test_criterion_4_refusal_retry_semantics():
    def build(replies, steps):
        scenario = build_scenario(
            {
                "seed": 3,
                "start_time_ms": START,
                "personas": [
                    {
                        "persona_id": "p1",
                        "kind": "fast_individual",
                        "latency": {"fixed_s": 60},
                        "script": steps,
                    }
                ],
            }
        )
        store = EventStore()
        state = DerivedState()
        engine = EngagementEngine(
            store,
            state,
            SimnetTransport(scenario),
            SimpleNamespace(complete=lambda system, prompt: replies.pop(0)
                            if replies else "sure, sounds good."),
            EngagementPolicy(auto_approve=True),
        )
        return engine, store, state

    engine, store, state = build(
        ["i can't help with that"] * 10,
        [{"text": "nude chat adult fun"}],
    )
    cid = engine.open_session("p1")
    engine.run_auto()
    conv = state.sessions[cid].conversation
    assert conv.outcome is not None
    assert conv.outcome.kind is OutcomeKind.LLM_FAILURE
    assert conv.retry_counter == 3
    assert replay(store.events()) == state

    engine, store, state = build(
        [
            "i can't help with that",
            "ok tell me more",
            "i can't help with that",
            "what is the price",
        ],
        [{"text": "interested?"}, {"text": "still there?"}],
    )
    cid = engine.open_session("p1")
    engine.run_auto()
    conv = state.sessions[cid].conversation
    assert conv.outcome is None or conv.outcome.kind is not OutcomeKind.LLM_FAILURE
    assert engine.retry_count(cid) == 0
    assert replay(store.events()) == state


def assert_every_send_decided(records) -> None:
    decided: set[str] = set()
    for rec in records:
        if rec.kind == "OperatorDecision":
            if rec.payload["decision"] in ("approve", "edit"):
                decided.add(rec.payload["draft_id"])
        elif rec.kind == "MessageSent":
            assert rec.payload["draft_id"] in decided, (
                f"send without prior approval at sequence {rec.sequence}"
            )


def test_criterion_5_approval_gate(fixture_run):
    scenario = build_scenario(
        {
            "seed": 5,
            "start_time_ms": START,
            "personas": [
                {
                    "persona_id": "p1",
                    "kind": "fast_individual",
                    "latency": {"fixed_s": 60},
                    "script": [
                        {"text": "hello dear"},
                        {"text": "T" + "Kd1" * 11 + " usdt only"},
                    ],
                }
            ],
        }
    )
    transport = SimnetTransport(scenario)
    store = EventStore()
    state = DerivedState()
    engine = EngagementEngine(
        store,
        state,
        transport,
        SimpleNamespace(complete=lambda system, prompt: "tell me more"),
        EngagementPolicy(auto_approve=False),
    )
    cid = engine.open_session("p1")

    draft = engine.pending_draft(cid)
    before = len(store.events())
    with pytest.raises(ApprovalRequired):
        engine.send_approved(cid, draft.draft_id, draft.text)
    assert len(store.events()) == before, "failed-closed send left events"

    engine.apply_operator_decision(draft.draft_id, "approve", "op-1")
    transport.advance_time(61)
    engine.drain_events()
    second = engine.pending_draft(cid)
    engine.apply_operator_decision(
        second.draft_id, "edit", "op-1", edited_text="how do i pay you"
    )
    transport.advance_time(61)
    engine.drain_events()
    conv = state.sessions[cid].conversation
    assert conv.outcome is not None
    assert conv.outcome.kind is OutcomeKind.PAYMENT_OBTAINED

    assert_every_send_decided(store.events())
    assert_every_send_decided(fixture_run.records)
    assert replay(store.events()) == state


def test_criterion_6_image_only_payment(fixture_run, live_run):
    for run in (fixture_run, live_run):
        hits = [d for cid, d in run.state.disclosures if cid == "conv-s001"]
        assert len(hits) == 1
        assert hits[0].method is PaymentMethod.ALIPAY_IMAGE
        assert hits[0].carrier is Carrier.IMAGE
        assert hits[0].evidence_ref.media_id == "s001-qr-a"
        conv = run.state.sessions["conv-s001"].conversation
        assert conv.outcome is not None
        assert conv.outcome.kind is OutcomeKind.PAYMENT_OBTAINED


def test_criterion_7_price_bins_and_quartiles(fixture_run):
    with open(fixture_run.report_dir / "price_bins.csv", newline="") as fh:
        rows = {int(r["bin_lo"]): r for r in csv.DictReader(fh)}
    row = rows[30]
    assert int(row["bin_hi"]) == 34
    assert int(row["count"]) == 4
    assert float(row["min"]) == 250.0
    assert float(row["max"]) == 600.0

    pool = (1.0, 2.0, 3.5, 7.0, 10.0)
    checked = 0
    for size in range(1, 9):
        for values in combinations_with_replacement(pool, size):
            s = sorted(values)
            half = (len(s) + 1) // 2
            expected = (
                statistics.median(s[:half]),
                statistics.median(s),
                statistics.median(s[-half:]),
            )
            assert tukey_hinges(values) == expected, values
            checked += 1
    assert checked == 1286


def test_criterion_8_replay_matches_live(tmp_path):
    cfg = load_config(WORKLOAD_CONFIG)
    log_path = tmp_path / "events.ldjson"
    store = EventStore(path=log_path)
    try:
        ctx = build_context(cfg, store, seed=7)
        discovery_phase(ctx)
        engagement_phase(ctx)
    finally:
        store.close()
    live_state = ctx.state
    assert replay(EventStore.read_log(log_path)) == live_state
    assert outcome_counts(live_state) == EXPECTED_OUTCOMES

    lines = log_path.read_text("utf-8").splitlines(keepends=True)
    gapped = tmp_path / "gapped.ldjson"
    gapped.write_text("".join(lines[:40] + lines[41:]), encoding="utf-8")
    with pytest.raises(CorruptLog):
        EventStore.read_log(gapped)


def test_criterion_9_latency_separation_and_label_rule(fixture_run, live_run):
    for run in (fixture_run, live_run):
        state = run.state
        seen = {cls: 0 for cls in Classification}
        for session in state.sessions.values():
            conv = session.conversation
            latency = first_response_latency_s(conv)
            if latency is None:
                continue
            profile = state.actors.get(conv.actor)
            cls = (
                profile.classification
                if profile is not None
                else Classification.UNKNOWN
            )
            seen[cls] += 1
            if cls is Classification.INDIVIDUAL:
                assert latency < 300, (conv.actor, latency)
            elif cls is Classification.PLATFORM:
                assert latency >= 1800, (conv.actor, latency)
        assert seen[Classification.INDIVIDUAL] > 0
        assert seen[Classification.PLATFORM] > 0

        for actor_id, profile in state.actors.items():
            labels = state.actor_labels.get(actor_id, frozenset())
            if len(labels) >= 2:
                assert profile.classification is Classification.PLATFORM
            else:
                assert profile.classification is not Classification.PLATFORM
