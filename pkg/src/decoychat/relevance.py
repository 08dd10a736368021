"""Channel relevance judgment and the human escalation queue.

A model reads a bounded digest of each harvested channel and answers
yes/no with a rationale. Refusals count as a signal of interest rather
than a failure, and both refusals and unparseable answers land in an
escalation queue that only a human verdict can clear. Human verdicts
always supersede model verdicts.
"""

from __future__ import annotations

from dataclasses import dataclass

from .defaults import DEFAULT_JUDGMENT_PROMPT, DEFAULT_REFUSAL_MARKERS
from .errors import AlreadyResolved, InvalidVerdict, LlmUnavailable
from .llm import ChatModel, is_refusal
from .models import (
    ChannelRecord,
    ChatMessage,
    JudgedBy,
    RelevanceDecision,
    RelevanceVerdict,
    verdict_to_dict,
)
from .store import DerivedState, EventStore, emit

TRUNCATION_MARKER = "…[cut]"


@dataclass(frozen=True)
class ChannelDigest:
    handle: str
    pinned_excerpt: str
    message_excerpt: str
    media_counts: tuple[tuple[str, int], ...]  # (kind, count), sorted

    def render(self) -> str:
        media = ", ".join(f"{kind}: {n}" for kind, n in self.media_counts) or "none"
        return (
            f"channel: {self.handle}\n"
            f"pinned:\n{self.pinned_excerpt or '(none)'}\n"
            f"recent:\n{self.message_excerpt or '(none)'}\n"
            f"media: {media}"
        )


def _clip(text: str, budget: int) -> str:
    if budget <= 0:
        return ""
    if len(text) <= budget:
        return text
    keep = max(0, budget - len(TRUNCATION_MARKER))
    return text[:keep] + TRUNCATION_MARKER


def build_digest(record: ChannelRecord, char_budget: int = 4000) -> ChannelDigest:
    """Bounded digest; pinned posts get the budget first since they carry
    the owner-curated signal."""
    def joined(posts: list[ChatMessage]) -> str:
        return "\n".join(p.text for p in posts if p.text)

    pinned = _clip(joined(record.pinned_posts), char_budget)
    remaining = char_budget - len(pinned)
    messages = _clip(joined(record.recent_messages), remaining)

    counts: dict[str, int] = {}
    for post in record.pinned_posts + record.recent_messages:
        for ref in post.media:
            counts[ref.kind.value] = counts.get(ref.kind.value, 0) + 1

    return ChannelDigest(
        handle=record.handle.canonical,
        pinned_excerpt=pinned,
        message_excerpt=messages,
        media_counts=tuple(sorted(counts.items())),
    )


def judge_relevance(
    digest: ChannelDigest,
    llm: ChatModel,
    prompt_template: str = DEFAULT_JUDGMENT_PROMPT,
    refusal_markers: tuple[str, ...] = DEFAULT_REFUSAL_MARKERS,
) -> RelevanceVerdict:
    """yes -> Relevant, no -> Irrelevant, refusal -> Refusal, anything
    else -> Borderline. Adapter outage maps to Borderline so a human
    still sees the channel."""
    rendered = digest.render()
    if not rendered.strip():
        raise ValueError("digest is empty")
    prompt = prompt_template.format(digest=rendered)
    try:
        reply = llm.complete("", prompt)
    except LlmUnavailable:
        return RelevanceVerdict(
            decision=RelevanceDecision.BORDERLINE,
            rationale="adapter unavailable",
            judged_by=JudgedBy.MODEL,
        )
    if is_refusal(reply, refusal_markers):
        return RelevanceVerdict(
            decision=RelevanceDecision.REFUSAL,
            rationale=reply.strip(),
            judged_by=JudgedBy.MODEL,
        )
    lines = [ln.strip() for ln in reply.strip().splitlines() if ln.strip()]
    head = lines[0].lower() if lines else ""
    rationale = " ".join(lines[1:]) if len(lines) > 1 else (lines[0] if lines else "")
    if head.startswith("yes"):
        decision = RelevanceDecision.RELEVANT
    elif head.startswith("no"):
        decision = RelevanceDecision.IRRELEVANT
    else:
        decision = RelevanceDecision.BORDERLINE
    return RelevanceVerdict(
        decision=decision, rationale=rationale, judged_by=JudgedBy.MODEL
    )


def enqueue_escalation(
    store: EventStore,
    state: DerivedState,
    verdict: RelevanceVerdict,
    canonical: str,
    at: int,
) -> str:
    """Queue a Borderline or Refusal verdict for human adjudication."""
    if verdict.decision not in (RelevanceDecision.BORDERLINE, RelevanceDecision.REFUSAL):
        raise InvalidVerdict(
            f"only borderline/refusal verdicts escalate, got {verdict.decision.value}"
        )
    escalation_id = f"esc-{canonical}"
    emit(
        store,
        state,
        "EscalationQueued",
        {
            "escalation_id": escalation_id,
            "canonical": canonical,
            "verdict": verdict_to_dict(verdict),
        },
        at,
    )
    return escalation_id


def apply_human_verdict(
    store: EventStore,
    state: DerivedState,
    escalation_id: str,
    decision: RelevanceDecision,
    rationale: str,
    at: int,
) -> ChannelRecord:
    """Resolve one escalation item; the human verdict replaces the
    channel's verdict."""
    if decision not in (RelevanceDecision.RELEVANT, RelevanceDecision.IRRELEVANT):
        raise InvalidVerdict(f"human verdict must be relevant/irrelevant, got {decision.value}")
    item = state.escalations.get(escalation_id)
    if item is None:
        raise InvalidVerdict(f"unknown escalation: {escalation_id}")
    if item.resolved is not None:
        raise AlreadyResolved(f"escalation already resolved: {escalation_id}")
    verdict = RelevanceVerdict(
        decision=decision, rationale=rationale, judged_by=JudgedBy.HUMAN
    )
    emit(
        store,
        state,
        "EscalationResolved",
        {"escalation_id": escalation_id, "verdict": verdict_to_dict(verdict)},
        at,
    )
    emit(
        store,
        state,
        "ChannelJudged",
        {"canonical": item.canonical, "verdict": verdict_to_dict(verdict)},
        at,
    )
    return state.channels[item.canonical]


def override_verdict(
    store: EventStore,
    state: DerivedState,
    canonical: str,
    decision: RelevanceDecision,
    rationale: str,
    at: int,
) -> ChannelRecord:
    """Direct human re-judgment outside the escalation queue."""
    verdict = RelevanceVerdict(
        decision=decision, rationale=rationale, judged_by=JudgedBy.HUMAN
    )
    emit(
        store,
        state,
        "ChannelJudged",
        {"canonical": canonical, "verdict": verdict_to_dict(verdict)},
        at,
    )
    return state.channels[canonical]


def judge_channels(
    store: EventStore,
    state: DerivedState,
    llm: ChatModel,
    at: int,
    char_budget: int = 4000,
    prompt_template: str = DEFAULT_JUDGMENT_PROMPT,
    refusal_markers: tuple[str, ...] = DEFAULT_REFUSAL_MARKERS,
) -> dict[str, int]:
    """Judge every unjudged channel in state; escalate refusals and
    borderlines. Returns decision counts."""
    counts: dict[str, int] = {}
    for canonical in sorted(state.channels):
        record = state.channels[canonical]
        if record.verdict is not None:
            continue
        digest = build_digest(record, char_budget)
        verdict = judge_relevance(digest, llm, prompt_template, refusal_markers)
        emit(
            store,
            state,
            "ChannelJudged",
            {"canonical": canonical, "verdict": verdict_to_dict(verdict)},
            at,
        )
        if verdict.decision in (RelevanceDecision.BORDERLINE, RelevanceDecision.REFUSAL):
            enqueue_escalation(store, state, verdict, canonical, at)
        counts[verdict.decision.value] = counts.get(verdict.decision.value, 0) + 1
    return counts
