"""Post-run views over conversations and disclosures: outcome partition,
round CDF, payment-method distribution, five-minute price bins, actor
classification, response-time views, and a deterministic report export.

Every function here is pure: same inputs, same outputs, no clocks and no
randomness. Percentages round half-up at presentation only; internal
rates stay exact fractions.
"""

from __future__ import annotations

import bisect
import csv
import json
import statistics
from collections import Counter
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .defaults import DEFAULT_RESPONSE_BIN_EDGES_S
from .errors import EmptyInput, IoFailure, UnterminatedInput
from .models import (
    ActorProfile,
    Classification,
    Conversation,
    Direction,
    OutcomeKind,
    PaymentDisclosure,
    PaymentMethod,
    PriceQuote,
    RelevanceDecision,
    SessionState,
)
from .store import DerivedState
from .vision import detect_price_quotes

# Everything that ended before a payment was obtained, replies included.
PREMATURE_KINDS = frozenset(
    {
        OutcomeKind.DISENGAGED,
        OutcomeKind.LLM_FAILURE,
        OutcomeKind.OPERATOR_TERMINATED,
    }
)


@dataclass(frozen=True)
class OutcomeSummary:
    total: int
    success_count: int
    no_response_count: int
    premature_count: int
    success_rate: float
    premature_rate_over_total: float


@dataclass(frozen=True)
class RoundCdf:
    points: tuple[tuple[int, float], ...]


@dataclass(frozen=True)
class PriceBin:
    """Five-minute duration bin [lo, hi] with price spread statistics."""

    lo: int
    hi: int
    count: int
    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float


def percentage(count: int, total: int, places: int = 2) -> float:
    """count/total as a percentage, rounded half-up to `places`."""
    if total <= 0:
        raise EmptyInput("percentage over an empty population")
    quantum = Decimal(1).scaleb(-places)
    value = (Decimal(count) * 100 / Decimal(total)).quantize(
        quantum, rounding=ROUND_HALF_UP
    )
    return float(value)


def outcome_summary(convs: Iterable[Conversation]) -> OutcomeSummary:
    convs = list(convs)
    if not convs:
        raise EmptyInput("no conversations to summarize")
    for c in convs:
        if c.state is not SessionState.TERMINATED or c.outcome is None:
            raise UnterminatedInput(f"conversation not terminated: {c.conversation_id}")
    total = len(convs)
    success = sum(
        1 for c in convs if c.outcome.kind is OutcomeKind.PAYMENT_OBTAINED
    )
    ghosts = sum(1 for c in convs if c.outcome.kind is OutcomeKind.NO_RESPONSE)
    premature = sum(1 for c in convs if c.outcome.kind in PREMATURE_KINDS)
    return OutcomeSummary(
        total=total,
        success_count=success,
        no_response_count=ghosts,
        premature_count=premature,
        success_rate=success / total,
        premature_rate_over_total=premature / total,
    )


def round_cdf(
    convs: Iterable[Conversation], exclude_no_response: bool = True
) -> RoundCdf:
    rounds = [
        c.round_counter
        for c in convs
        if not (
            exclude_no_response
            and c.outcome is not None
            and c.outcome.kind is OutcomeKind.NO_RESPONSE
        )
    ]
    if not rounds:
        raise EmptyInput("no conversations left for the CDF")
    total = len(rounds)
    points = tuple(
        (r, sum(1 for v in rounds if v <= r) / total) for r in sorted(set(rounds))
    )
    return RoundCdf(points=points)


def payment_distribution(
    disclosures: Iterable[PaymentDisclosure],
) -> dict[PaymentMethod, tuple[int, float]]:
    counts = Counter(d.method for d in disclosures)
    total = sum(counts.values())
    if total == 0:
        return {}
    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0].value))
    return {m: (n, percentage(n, total, 2)) for m, n in ordered}


def _median_sorted(s: Sequence[float]) -> float:
    n = len(s)
    mid = n // 2
    if n % 2:
        return float(s[mid])
    return (s[mid - 1] + s[mid]) / 2


def tukey_hinges(values: Iterable[float]) -> tuple[float, float, float]:
    """(q1, median, q3) by the inclusive-median method: each half keeps
    the middle element when the count is odd."""
    s = sorted(values)
    if not s:
        raise EmptyInput("no values for quartiles")
    half = (len(s) + 1) // 2
    return _median_sorted(s[:half]), _median_sorted(s), _median_sorted(s[-half:])


def price_bins(quotes: Iterable[PriceQuote]) -> list[PriceBin]:
    groups: dict[int, list[float]] = {}
    for q in quotes:
        groups.setdefault(int(q.duration_minutes // 5) * 5, []).append(q.price_cny)
    bins = []
    for lo in sorted(groups):
        prices = sorted(groups[lo])
        q1, median, q3 = tukey_hinges(prices)
        bins.append(
            PriceBin(
                lo=lo,
                hi=lo + 4,
                count=len(prices),
                minimum=float(prices[0]),
                q1=q1,
                median=median,
                q3=q3,
                maximum=float(prices[-1]),
            )
        )
    return bins


def classify_actor(
    profile: ActorProfile, labels: Iterable[str]
) -> Classification:
    """Distinct person labels across the actor's media decide the class;
    nothing else enters the rule."""
    distinct = len(set(labels))
    if distinct >= 2:
        return Classification.PLATFORM
    if distinct == 1:
        return Classification.INDIVIDUAL
    return Classification.UNKNOWN


def first_response_latency_s(conv: Conversation) -> float | None:
    first_out = next(
        (m.timestamp for m in conv.messages if m.direction is Direction.OUTBOUND),
        None,
    )
    first_in = next(
        (m.timestamp for m in conv.messages if m.direction is Direction.INBOUND),
        None,
    )
    if first_out is None or first_in is None:
        return None
    return (first_in - first_out) / 1000.0


def first_response_histogram(
    convs: Iterable[Conversation],
    classifications: Mapping[str, Classification],
    bin_edges: Sequence[float] = DEFAULT_RESPONSE_BIN_EDGES_S,
) -> dict[Classification, tuple[int, ...]]:
    """Counts per [edge, next-edge) interval, split by actor class; the
    last bin is open-ended. Conversations with no reply are skipped."""
    edges = tuple(bin_edges)
    counts = {cls: [0] * (len(edges) + 1) for cls in Classification}
    for conv in convs:
        latency = first_response_latency_s(conv)
        if latency is None:
            continue
        cls = classifications.get(conv.actor, Classification.UNKNOWN)
        counts[cls][bisect.bisect_right(edges, latency)] += 1
    return {cls: tuple(v) for cls, v in counts.items()}


def rounds_vs_response_scatter(
    convs: Iterable[Conversation],
) -> list[tuple[int, float]]:
    """One point per answered round: (round index, minutes from the
    outbound to the first reply of that round)."""
    points: list[tuple[int, float]] = []
    for conv in convs:
        last_out = None
        answered: set[int] = set()
        for m in conv.messages:
            if m.direction is Direction.OUTBOUND:
                last_out = m
            elif last_out is not None and last_out.round_index not in answered:
                answered.add(last_out.round_index)
                points.append(
                    (
                        last_out.round_index,
                        (m.timestamp - last_out.timestamp) / 60_000.0,
                    )
                )
    return points


def harvest_quotes(convs: Iterable[Conversation]) -> list[PriceQuote]:
    """Mine price quotes from inbound text and OCR text, conversation id
    order, message order within."""
    quotes: list[PriceQuote] = []
    for conv in sorted(convs, key=lambda c: c.conversation_id):
        for m in conv.messages:
            if m.direction is not Direction.INBOUND:
                continue
            quotes.extend(detect_price_quotes(m.text, m.message_id))
            if m.ocr_text:
                quotes.extend(detect_price_quotes(m.ocr_text, m.message_id))
    return quotes


# -- report export -----------------------------------------------------------


def _fmt_edge(edge: float) -> str:
    return str(int(edge)) if edge == int(edge) else str(edge)


def _bin_labels(edges: Sequence[float]) -> list[str]:
    labels = []
    prev = 0.0
    for e in edges:
        labels.append(f"{_fmt_edge(prev)}-{_fmt_edge(e)}")
        prev = e
    labels.append(f"{_fmt_edge(prev)}+")
    return labels


def export_report(
    state: DerivedState,
    out_dir: str | Path,
    bin_edges: Sequence[float] = DEFAULT_RESPONSE_BIN_EDGES_S,
    include_ghosts: bool = False,
) -> list[Path]:
    """Write one CSV per metric plus summary.json. Output is a pure
    function of the state: reruns produce identical bytes."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create report directory {out}: {exc}") from exc

    convs = [
        state.sessions[cid].conversation for cid in sorted(state.sessions)
    ]
    done = [c for c in convs if c.state is SessionState.TERMINATED and c.outcome]
    disclosures = [d for _, d in state.disclosures]
    quotes = harvest_quotes(done)
    classifications = {a.actor_id: a.classification for a in state.actors.values()}

    files: list[Path] = []

    def write_csv(name: str, header: list[str], rows: list[list]) -> None:
        path = out / name
        try:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(header)
                writer.writerows(rows)
        except OSError as exc:
            raise IoFailure(f"cannot write {path}: {exc}") from exc
        files.append(path)

    outcome_counts = Counter(c.outcome.kind for c in done)
    write_csv(
        "outcomes.csv",
        ["outcome", "count"],
        [
            [kind.value, outcome_counts[kind]]
            for kind in sorted(outcome_counts, key=lambda k: k.value)
        ],
    )

    try:
        cdf = round_cdf(done, exclude_no_response=not include_ghosts)
        cdf_rows = [[r, f] for r, f in cdf.points]
    except EmptyInput:
        cdf_rows = []
    write_csv("round_cdf.csv", ["round", "cumulative_fraction"], cdf_rows)

    dist = payment_distribution(disclosures)
    write_csv(
        "payment_distribution.csv",
        ["method", "count", "percentage"],
        [[m.value, n, p] for m, (n, p) in dist.items()],
    )

    write_csv(
        "price_bins.csv",
        ["bin_lo", "bin_hi", "count", "min", "q1", "median", "q3", "max"],
        [
            [b.lo, b.hi, b.count, b.minimum, b.q1, b.median, b.q3, b.maximum]
            for b in price_bins(quotes)
        ],
    )

    write_csv(
        "classification.csv",
        ["actor_id", "classification", "distinct_labels"],
        [
            [
                actor_id,
                state.actors[actor_id].classification.value,
                len(state.actor_labels.get(actor_id, frozenset())),
            ]
            for actor_id in sorted(state.actors)
        ],
    )

    hist = first_response_histogram(done, classifications, bin_edges)
    labels = _bin_labels(bin_edges)
    write_csv(
        "first_response_histogram.csv",
        ["classification", "bin_seconds", "count"],
        [
            [cls.value, label, hist[cls][i]]
            for cls in sorted(Classification, key=lambda c: c.value)
            for i, label in enumerate(labels)
        ]
        if done
        else [],
    )

    scatter_rows = []
    for conv in done:
        for rnd, minutes in rounds_vs_response_scatter([conv]):
            scatter_rows.append([conv.conversation_id, rnd, minutes])
    write_csv(
        "rounds_vs_response.csv",
        ["conversation_id", "round", "latency_minutes"],
        scatter_rows,
    )

    success_rounds = [
        c.round_counter
        for c in done
        if c.outcome.kind is OutcomeKind.PAYMENT_OBTAINED
    ]
    relevant = sum(
        1
        for ch in state.channels.values()
        if ch.verdict is not None
        and ch.verdict.decision is RelevanceDecision.RELEVANT
    )
    total = len(done)
    summary = {
        "total_conversations": total,
        "success_count": sum(
            1 for c in done if c.outcome.kind is OutcomeKind.PAYMENT_OBTAINED
        ),
        "no_response_count": sum(
            1 for c in done if c.outcome.kind is OutcomeKind.NO_RESPONSE
        ),
        "premature_count": sum(1 for c in done if c.outcome.kind in PREMATURE_KINDS),
        "disclosure_total": len(disclosures),
        "payment_distribution": {
            m.value: {"count": n, "pct": p} for m, (n, p) in dist.items()
        },
        "median_success_rounds": (
            float(statistics.median(success_rounds)) if success_rounds else None
        ),
        "price_min": min((q.price_cny for q in quotes), default=None),
        "price_max": max((q.price_cny for q in quotes), default=None),
        "relevant_channels": relevant,
        "actors_identified": len(state.actors),
    }
    summary["success_rate_pct"] = (
        percentage(summary["success_count"], total, 1) if total else None
    )
    summary["premature_rate_pct"] = (
        percentage(summary["premature_count"], total, 1) if total else None
    )
    summary_path = out / "summary.json"
    try:
        summary_path.write_text(
            json.dumps(summary, sort_keys=True, indent=2, ensure_ascii=False) + "\n",
            encoding="utf-8",
        )
    except OSError as exc:
        raise IoFailure(f"cannot write {summary_path}: {exc}") from exc
    files.append(summary_path)
    return files
