"""Core domain types shared by every other module.

All types here are plain values: construction never touches I/O, and the
only operations are pure validation / normalization. Canonical wire form
is a JSON-compatible dict with snake_case field names matching the
dataclass fields exactly; records serialize one-per-line (UTF-8).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable

from .errors import EmptyHandle

# ---------------------------------------------------------------------------
# Enums
# ---------------------------------------------------------------------------


class Direction(str, Enum):
    INBOUND = "inbound"
    OUTBOUND = "outbound"


class MediaKind(str, Enum):
    IMAGE = "image"
    OTHER = "other"


class RelevanceDecision(str, Enum):
    RELEVANT = "relevant"
    IRRELEVANT = "irrelevant"
    REFUSAL = "refusal"
    BORDERLINE = "borderline"


class JudgedBy(str, Enum):
    MODEL = "model"
    HUMAN = "human"


class Classification(str, Enum):
    INDIVIDUAL = "individual"
    PLATFORM = "platform"
    UNKNOWN = "unknown"


class SessionState(str, Enum):
    IDLE = "idle"
    CONTACT_SENT = "contact_sent"
    AWAITING_REPLY = "awaiting_reply"
    DRAFTING = "drafting"
    PENDING_APPROVAL = "pending_approval"
    TERMINATED = "terminated"


class OutcomeKind(str, Enum):
    PAYMENT_OBTAINED = "payment_obtained"
    NO_RESPONSE = "no_response"
    DISENGAGED = "disengaged"
    LLM_FAILURE = "llm_failure"
    OPERATOR_TERMINATED = "operator_terminated"


class PaymentMethod(str, Enum):
    ALIPAY = "alipay"
    ALIPAY_IMAGE = "alipay_image"
    WECHAT = "wechat"
    USDT = "usdt"
    QQ_IMAGE = "qq_image"
    BANK = "bank"
    PAYMENT_SOLUTION = "payment_solution"


class Carrier(str, Enum):
    TEXT = "text"
    IMAGE = "image"


class SourceKind(str, Enum):
    DIRECTORY_QUERY = "directory_query"
    CROSS_LINK = "cross_link"
    SEED_CONFIG = "seed_config"


# Legal session-state transitions, Terminated reachable from anywhere.
LEGAL_TRANSITIONS: dict[SessionState, frozenset[SessionState]] = {
    SessionState.IDLE: frozenset({SessionState.CONTACT_SENT, SessionState.TERMINATED}),
    SessionState.CONTACT_SENT: frozenset(
        {SessionState.AWAITING_REPLY, SessionState.TERMINATED}
    ),
    SessionState.AWAITING_REPLY: frozenset(
        {SessionState.DRAFTING, SessionState.TERMINATED}
    ),
    SessionState.DRAFTING: frozenset(
        {SessionState.PENDING_APPROVAL, SessionState.TERMINATED}
    ),
    SessionState.PENDING_APPROVAL: frozenset(
        {SessionState.AWAITING_REPLY, SessionState.DRAFTING, SessionState.TERMINATED}
    ),
    SessionState.TERMINATED: frozenset(),
}


# ---------------------------------------------------------------------------
# Handles and channels
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChannelHandle:
    """A channel handle as typed by its source plus the canonical form."""

    raw: str
    canonical: str


def canonicalize_handle(raw: str) -> ChannelHandle:
    """Normalize a handle: trim, drop whitespace, strip leading '@', lowercase.

    Idempotent: canonicalize(h.canonical).canonical == h.canonical.
    Raises EmptyHandle when nothing remains.
    """
    trimmed = raw.strip()
    if not trimmed:
        raise EmptyHandle(f"handle is empty: {raw!r}")
    squeezed = "".join(ch for ch in trimmed if not ch.isspace())
    canonical = squeezed.lstrip("@").lower()
    if not canonical:
        raise EmptyHandle(f"handle has no content: {raw!r}")
    return ChannelHandle(raw=raw, canonical=canonical)


@dataclass(frozen=True)
class DiscoverySource:
    """How a channel was found: directory keyword, cross-link parent, or seed."""

    kind: SourceKind
    detail: str = ""


@dataclass(frozen=True)
class RelevanceVerdict:
    decision: RelevanceDecision
    rationale: str
    judged_by: JudgedBy


@dataclass(frozen=True)
class MediaRef:
    media_id: str
    kind: MediaKind
    person_labels: tuple[str, ...] = ()


@dataclass(frozen=True)
class ChatMessage:
    """One message, either direction; channel posts carry an author key."""

    message_id: str
    direction: Direction
    timestamp: int  # epoch milliseconds, UTC
    text: str
    media: tuple[MediaRef, ...] = ()
    ocr_text: str | None = None
    round_index: int = 0
    author: str | None = None


@dataclass
class ChannelRecord:
    handle: ChannelHandle
    title: str
    discovery_source: DiscoverySource
    depth: int
    pinned_posts: list[ChatMessage] = field(default_factory=list)
    recent_messages: list[ChatMessage] = field(default_factory=list)
    verdict: RelevanceVerdict | None = None  # None = unjudged


@dataclass
class ActorProfile:
    actor_id: str
    source_channels: tuple[str, ...] = ()  # canonical handles, sorted
    classification: Classification = Classification.UNKNOWN
    first_response_latencies: tuple[float, ...] = ()  # seconds


# ---------------------------------------------------------------------------
# Conversations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EvidenceRef:
    message_id: str
    media_id: str | None = None


@dataclass(frozen=True)
class PaymentDisclosure:
    method: PaymentMethod
    carrier: Carrier
    evidence_ref: EvidenceRef
    detail: str


@dataclass(frozen=True)
class PriceQuote:
    duration_minutes: int
    price_cny: float
    evidence_ref: str  # message id


@dataclass(frozen=True)
class EngagementOutcome:
    kind: OutcomeKind
    evidence: tuple[PaymentDisclosure, ...] = ()


@dataclass
class Conversation:
    conversation_id: str
    actor: str
    state: SessionState = SessionState.IDLE
    messages: list[ChatMessage] = field(default_factory=list)
    round_counter: int = 0
    retry_counter: int = 0
    outcome: EngagementOutcome | None = None  # None = pending


def recompute_rounds(messages: Iterable[ChatMessage]) -> int:
    """Count completed rounds: an outbound followed by >=1 inbound before
    the next outbound; consecutive inbounds collapse into one round."""
    rounds = 0
    outbound_open = False
    for m in messages:
        if m.direction is Direction.OUTBOUND:
            outbound_open = True
        elif outbound_open:
            rounds += 1
            outbound_open = False
    return rounds


def validate_conversation(c: Conversation) -> list[str]:
    """Return a description per violated invariant; empty list iff valid."""
    violations: list[str] = []

    last_ts: int | None = None
    for m in c.messages:
        if last_ts is not None and m.timestamp <= last_ts:
            violations.append("ordering violated: messages not strictly ordered by timestamp")
            break
        last_ts = m.timestamp

    for m in c.messages:
        if not m.text and not m.media:
            violations.append(f"empty message without media: {m.message_id}")
        if m.ocr_text is not None and not m.media:
            violations.append(f"ocr_text present without media: {m.message_id}")

    seen_media: set[str] = set()
    for m in c.messages:
        for ref in m.media:
            if ref.media_id in seen_media:
                violations.append(f"duplicate media_id in conversation: {ref.media_id}")
            seen_media.add(ref.media_id)

    expected_rounds = recompute_rounds(c.messages)
    if c.round_counter != expected_rounds:
        violations.append(
            f"round counter mismatch: stored {c.round_counter}, recomputed {expected_rounds}"
        )

    if not 0 <= c.retry_counter <= 3:
        violations.append(f"retry counter out of range: {c.retry_counter}")

    if c.state is SessionState.TERMINATED and c.outcome is None:
        violations.append("outcome-state mismatch: terminated without outcome")
    if c.state is not SessionState.TERMINATED and c.outcome is not None:
        violations.append("outcome-state mismatch: outcome set before termination")

    if c.outcome is not None:
        if c.outcome.kind is OutcomeKind.PAYMENT_OBTAINED and not c.outcome.evidence:
            violations.append("payment_obtained without disclosure evidence")
        if c.outcome.kind is not OutcomeKind.PAYMENT_OBTAINED and c.outcome.evidence:
            violations.append("disclosure evidence on a non-payment outcome")

    return violations


# ---------------------------------------------------------------------------
# Serialization (dict <-> dataclass, snake_case field names)
# ---------------------------------------------------------------------------


def handle_to_dict(h: ChannelHandle) -> dict[str, Any]:
    return {"raw": h.raw, "canonical": h.canonical}


def handle_from_dict(d: dict[str, Any]) -> ChannelHandle:
    return ChannelHandle(raw=d["raw"], canonical=d["canonical"])


def media_to_dict(m: MediaRef) -> dict[str, Any]:
    return {
        "media_id": m.media_id,
        "kind": m.kind.value,
        "person_labels": list(m.person_labels),
    }


def media_from_dict(d: dict[str, Any]) -> MediaRef:
    return MediaRef(
        media_id=d["media_id"],
        kind=MediaKind(d["kind"]),
        person_labels=tuple(d.get("person_labels", ())),
    )


def message_to_dict(m: ChatMessage) -> dict[str, Any]:
    return {
        "message_id": m.message_id,
        "direction": m.direction.value,
        "timestamp": m.timestamp,
        "text": m.text,
        "media": [media_to_dict(x) for x in m.media],
        "ocr_text": m.ocr_text,
        "round_index": m.round_index,
        "author": m.author,
    }


def message_from_dict(d: dict[str, Any]) -> ChatMessage:
    return ChatMessage(
        message_id=d["message_id"],
        direction=Direction(d["direction"]),
        timestamp=d["timestamp"],
        text=d["text"],
        media=tuple(media_from_dict(x) for x in d.get("media", ())),
        ocr_text=d.get("ocr_text"),
        round_index=d.get("round_index", 0),
        author=d.get("author"),
    )


def verdict_to_dict(v: RelevanceVerdict) -> dict[str, Any]:
    return {
        "decision": v.decision.value,
        "rationale": v.rationale,
        "judged_by": v.judged_by.value,
    }


def verdict_from_dict(d: dict[str, Any]) -> RelevanceVerdict:
    return RelevanceVerdict(
        decision=RelevanceDecision(d["decision"]),
        rationale=d["rationale"],
        judged_by=JudgedBy(d["judged_by"]),
    )


def channel_to_dict(r: ChannelRecord) -> dict[str, Any]:
    return {
        "handle": handle_to_dict(r.handle),
        "title": r.title,
        "discovery_source": {
            "kind": r.discovery_source.kind.value,
            "detail": r.discovery_source.detail,
        },
        "depth": r.depth,
        "pinned_posts": [message_to_dict(m) for m in r.pinned_posts],
        "recent_messages": [message_to_dict(m) for m in r.recent_messages],
        "verdict": verdict_to_dict(r.verdict) if r.verdict else None,
    }


def channel_from_dict(d: dict[str, Any]) -> ChannelRecord:
    src = d["discovery_source"]
    return ChannelRecord(
        handle=handle_from_dict(d["handle"]),
        title=d["title"],
        discovery_source=DiscoverySource(SourceKind(src["kind"]), src.get("detail", "")),
        depth=d["depth"],
        pinned_posts=[message_from_dict(m) for m in d.get("pinned_posts", ())],
        recent_messages=[message_from_dict(m) for m in d.get("recent_messages", ())],
        verdict=verdict_from_dict(d["verdict"]) if d.get("verdict") else None,
    )


def actor_to_dict(a: ActorProfile) -> dict[str, Any]:
    return {
        "actor_id": a.actor_id,
        "source_channels": list(a.source_channels),
        "classification": a.classification.value,
        "first_response_latencies": list(a.first_response_latencies),
    }


def actor_from_dict(d: dict[str, Any]) -> ActorProfile:
    return ActorProfile(
        actor_id=d["actor_id"],
        source_channels=tuple(d.get("source_channels", ())),
        classification=Classification(d.get("classification", "unknown")),
        first_response_latencies=tuple(d.get("first_response_latencies", ())),
    )


def disclosure_to_dict(p: PaymentDisclosure) -> dict[str, Any]:
    return {
        "method": p.method.value,
        "carrier": p.carrier.value,
        "evidence_ref": {
            "message_id": p.evidence_ref.message_id,
            "media_id": p.evidence_ref.media_id,
        },
        "detail": p.detail,
    }


def disclosure_from_dict(d: dict[str, Any]) -> PaymentDisclosure:
    ref = d["evidence_ref"]
    return PaymentDisclosure(
        method=PaymentMethod(d["method"]),
        carrier=Carrier(d["carrier"]),
        evidence_ref=EvidenceRef(ref["message_id"], ref.get("media_id")),
        detail=d["detail"],
    )


def outcome_to_dict(o: EngagementOutcome) -> dict[str, Any]:
    return {
        "kind": o.kind.value,
        "evidence": [disclosure_to_dict(p) for p in o.evidence],
    }


def outcome_from_dict(d: dict[str, Any]) -> EngagementOutcome:
    return EngagementOutcome(
        kind=OutcomeKind(d["kind"]),
        evidence=tuple(disclosure_from_dict(p) for p in d.get("evidence", ())),
    )


def conversation_to_dict(c: Conversation) -> dict[str, Any]:
    return {
        "conversation_id": c.conversation_id,
        "actor": c.actor,
        "state": c.state.value,
        "messages": [message_to_dict(m) for m in c.messages],
        "round_counter": c.round_counter,
        "retry_counter": c.retry_counter,
        "outcome": outcome_to_dict(c.outcome) if c.outcome else None,
    }


def conversation_from_dict(d: dict[str, Any]) -> Conversation:
    return Conversation(
        conversation_id=d["conversation_id"],
        actor=d["actor"],
        state=SessionState(d["state"]),
        messages=[message_from_dict(m) for m in d.get("messages", ())],
        round_counter=d.get("round_counter", 0),
        retry_counter=d.get("retry_counter", 0),
        outcome=outcome_from_dict(d["outcome"]) if d.get("outcome") else None,
    )


def quote_to_dict(q: PriceQuote) -> dict[str, Any]:
    return {
        "duration_minutes": q.duration_minutes,
        "price_cny": q.price_cny,
        "evidence_ref": q.evidence_ref,
    }
