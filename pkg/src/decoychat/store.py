"""Append-only event log and the reducer that derives all live state.

The log is the single source of truth: every mutation anywhere in the
system is an appended event, and both the live process and `replay` build
state by folding the same reducer over the same records. That makes
replay equivalence structural rather than something to chase.

Format: one JSON object per line, UTF-8, sorted keys, with a truncated
sha256 checksum over the canonical encoding of the record body. Sequence
numbers are gap-free from 1.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Iterable

from .errors import CorruptLog, IoFailure, ValidationFailure
from .models import (
    ActorProfile,
    ChannelRecord,
    Classification,
    Conversation,
    Direction,
    PaymentDisclosure,
    RelevanceVerdict,
    SessionState,
    actor_from_dict,
    channel_from_dict,
    disclosure_from_dict,
    message_from_dict,
    outcome_from_dict,
    recompute_rounds,
    verdict_from_dict,
)

KINDS = frozenset(
    {
        "ChannelDiscovered",
        "ChannelJudged",
        "EscalationQueued",
        "EscalationResolved",
        "ActorIdentified",
        "SessionOpened",
        "DraftCreated",
        "OperatorDecision",
        "MessageSent",
        "MessageReceived",
        "OcrAttached",
        "DisclosureFound",
        "SessionTerminated",
    }
)

# Minimal payload schema per kind: keys that must be present.
_REQUIRED: dict[str, tuple[str, ...]] = {
    "ChannelDiscovered": ("channel",),
    "ChannelJudged": ("canonical", "verdict"),
    "EscalationQueued": ("escalation_id", "canonical", "verdict"),
    "EscalationResolved": ("escalation_id", "verdict"),
    "ActorIdentified": ("actor",),
    "SessionOpened": ("conversation_id", "actor_id", "transport_key"),
    "DraftCreated": ("conversation_id", "draft_id", "text"),
    "OperatorDecision": ("conversation_id", "draft_id", "decision", "operator_id"),
    "MessageSent": ("conversation_id", "draft_id", "message"),
    "MessageReceived": ("conversation_id", "message"),
    "OcrAttached": ("conversation_id", "message_id", "media_id", "text", "engine_tag"),
    "DisclosureFound": ("conversation_id", "disclosure"),
    "SessionTerminated": ("conversation_id", "outcome", "retry_counter"),
}

_DECISIONS = frozenset({"approve", "edit", "reject", "terminate"})


@dataclass(frozen=True)
class EventRecord:
    sequence: int
    kind: str
    at: int  # epoch milliseconds
    payload: dict[str, Any]


def _canonical(sequence: int, kind: str, at: int, payload: dict[str, Any]) -> str:
    return json.dumps(
        {"sequence": sequence, "kind": kind, "at": at, "payload": payload},
        sort_keys=True,
        ensure_ascii=False,
        separators=(",", ":"),
    )


def _checksum(body: str) -> str:
    return hashlib.sha256(body.encode("utf-8")).hexdigest()[:12]


def encode_line(rec: EventRecord) -> str:
    body = _canonical(rec.sequence, rec.kind, rec.at, rec.payload)
    return json.dumps(
        {
            "sequence": rec.sequence,
            "kind": rec.kind,
            "at": rec.at,
            "payload": rec.payload,
            "checksum": _checksum(body),
        },
        sort_keys=True,
        ensure_ascii=False,
        separators=(",", ":"),
    )


def validate_payload(kind: str, payload: dict[str, Any]) -> None:
    if kind not in KINDS:
        raise ValidationFailure(f"unknown event kind: {kind}")
    missing = [k for k in _REQUIRED[kind] if k not in payload]
    if missing:
        raise ValidationFailure(f"{kind} payload missing {missing}")
    if kind == "OperatorDecision" and payload["decision"] not in _DECISIONS:
        raise ValidationFailure(f"unknown decision: {payload['decision']}")


class EventStore:
    """Single-writer append log; optional backing file. Readers iterate
    over the immutable prefix they grabbed."""

    def __init__(self, path: str | Path | None = None):
        self._path = Path(path) if path is not None else None
        self._events: list[EventRecord] = []
        self._lock = threading.Lock()
        self._fh = None
        if self._path is not None:
            try:
                self._fh = open(self._path, "a", encoding="utf-8")
            except OSError as exc:
                raise IoFailure(f"cannot open log {self._path}: {exc}") from exc

    def append(self, kind: str, payload: dict[str, Any], at: int) -> int:
        validate_payload(kind, payload)
        with self._lock:
            seq = len(self._events) + 1
            rec = EventRecord(sequence=seq, kind=kind, at=at, payload=payload)
            if self._fh is not None:
                try:
                    self._fh.write(encode_line(rec) + "\n")
                    self._fh.flush()
                except OSError as exc:
                    raise IoFailure(f"append failed: {exc}") from exc
            self._events.append(rec)
            return seq

    def close(self) -> None:
        with self._lock:
            if self._fh is not None:
                self._fh.close()
                self._fh = None

    @property
    def last_sequence(self) -> int:
        with self._lock:
            return len(self._events)

    def events(self, since: int = 0) -> list[EventRecord]:
        """All records with sequence > since, in order."""
        with self._lock:
            return self._events[since:]

    @staticmethod
    def read_log(path: str | Path) -> list[EventRecord]:
        """Parse and verify a log file; CorruptLog names the first bad
        sequence (gap, parse failure, or checksum mismatch)."""
        records: list[EventRecord] = []
        expected = 1
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise IoFailure(f"cannot read log {path}: {exc}") from exc
        for line in text.splitlines():
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                seq = obj["sequence"]
                kind = obj["kind"]
                at = obj["at"]
                payload = obj["payload"]
                stated = obj["checksum"]
            except (ValueError, KeyError, TypeError) as exc:
                raise CorruptLog(
                    f"unparseable record at sequence {expected}: {exc}",
                    first_bad_sequence=expected,
                ) from exc
            if seq != expected:
                raise CorruptLog(
                    f"sequence gap: expected {expected}, found {seq}",
                    first_bad_sequence=expected,
                )
            if _checksum(_canonical(seq, kind, at, payload)) != stated:
                raise CorruptLog(
                    f"checksum mismatch at sequence {seq}",
                    first_bad_sequence=seq,
                )
            records.append(EventRecord(sequence=seq, kind=kind, at=at, payload=payload))
            expected += 1
        return records

    @classmethod
    def load(cls, path: str | Path) -> "EventStore":
        records = cls.read_log(path)
        store = cls(path=None)
        store._events = records
        store._path = Path(path)
        return store

    @classmethod
    def open_append(cls, path: str | Path) -> "EventStore":
        """Verify an existing log and reopen it for appending; sequence
        numbering continues where the file left off."""
        store = cls.load(path)
        try:
            store._fh = open(path, "a", encoding="utf-8")
        except OSError as exc:
            raise IoFailure(f"cannot open log {path}: {exc}") from exc
        return store


# ---------------------------------------------------------------------------
# Derived state
# ---------------------------------------------------------------------------


@dataclass
class DraftInfo:
    draft_id: str
    conversation_id: str
    text: str
    created_at: int
    decided: bool = False


@dataclass
class SessionRecord:
    conversation: Conversation
    transport_key: str
    opened_at: int
    last_outbound_at: int | None = None
    first_inbound_at: int | None = None
    active_draft_id: str | None = None


@dataclass
class EscalationRecord:
    escalation_id: str
    canonical: str
    model_verdict: RelevanceVerdict
    queued_at: int
    resolved: RelevanceVerdict | None = None


@dataclass
class DerivedState:
    channels: dict[str, ChannelRecord] = field(default_factory=dict)
    actors: dict[str, ActorProfile] = field(default_factory=dict)
    sessions: dict[str, SessionRecord] = field(default_factory=dict)
    drafts: dict[str, DraftInfo] = field(default_factory=dict)
    escalations: dict[str, EscalationRecord] = field(default_factory=dict)
    disclosures: list[tuple[str, PaymentDisclosure]] = field(default_factory=list)
    actor_labels: dict[str, frozenset[str]] = field(default_factory=dict)
    last_sequence: int = 0


def _classify(label_count: int) -> Classification:
    if label_count >= 2:
        return Classification.PLATFORM
    if label_count == 1:
        return Classification.INDIVIDUAL
    return Classification.UNKNOWN


def reduce_event(state: DerivedState, rec: EventRecord) -> None:
    """Fold one record into state. Mechanical by design: business rules
    live in the modules that append events, not here."""
    p = rec.payload
    kind = rec.kind

    if kind == "ChannelDiscovered":
        channel = channel_from_dict(p["channel"])
        state.channels[channel.handle.canonical] = channel

    elif kind == "ChannelJudged":
        channel = state.channels.get(p["canonical"])
        if channel is not None:
            channel.verdict = verdict_from_dict(p["verdict"])

    elif kind == "EscalationQueued":
        state.escalations[p["escalation_id"]] = EscalationRecord(
            escalation_id=p["escalation_id"],
            canonical=p["canonical"],
            model_verdict=verdict_from_dict(p["verdict"]),
            queued_at=rec.at,
        )

    elif kind == "EscalationResolved":
        item = state.escalations.get(p["escalation_id"])
        if item is not None:
            item.resolved = verdict_from_dict(p["verdict"])

    elif kind == "ActorIdentified":
        actor = actor_from_dict(p["actor"])
        state.actors[actor.actor_id] = actor

    elif kind == "SessionOpened":
        cid = p["conversation_id"]
        state.sessions[cid] = SessionRecord(
            conversation=Conversation(
                conversation_id=cid,
                actor=p["actor_id"],
                state=SessionState.CONTACT_SENT,
            ),
            transport_key=p["transport_key"],
            opened_at=rec.at,
        )

    elif kind == "DraftCreated":
        cid = p["conversation_id"]
        draft = DraftInfo(
            draft_id=p["draft_id"],
            conversation_id=cid,
            text=p["text"],
            created_at=rec.at,
        )
        state.drafts[draft.draft_id] = draft
        session = state.sessions.get(cid)
        if session is not None:
            session.active_draft_id = draft.draft_id
            conv = session.conversation
            if conv.state in (SessionState.AWAITING_REPLY, SessionState.DRAFTING):
                conv.state = SessionState.PENDING_APPROVAL

    elif kind == "OperatorDecision":
        draft = state.drafts.get(p["draft_id"])
        if draft is not None:
            draft.decided = True
        session = state.sessions.get(p["conversation_id"])
        if session is not None and p["decision"] == "reject":
            session.active_draft_id = None
            conv = session.conversation
            if conv.state is SessionState.PENDING_APPROVAL:
                conv.state = SessionState.DRAFTING

    elif kind == "MessageSent":
        session = state.sessions.get(p["conversation_id"])
        if session is not None:
            msg = message_from_dict(p["message"])
            conv = session.conversation
            conv.messages.append(msg)
            conv.round_counter = recompute_rounds(conv.messages)
            session.last_outbound_at = msg.timestamp
            session.active_draft_id = None
            if conv.state is not SessionState.CONTACT_SENT:
                conv.state = SessionState.AWAITING_REPLY

    elif kind == "MessageReceived":
        session = state.sessions.get(p["conversation_id"])
        if session is not None:
            msg = message_from_dict(p["message"])
            conv = session.conversation
            conv.messages.append(msg)
            conv.round_counter = recompute_rounds(conv.messages)
            if conv.state is SessionState.CONTACT_SENT:
                conv.state = SessionState.AWAITING_REPLY
            if session.first_inbound_at is None:
                session.first_inbound_at = msg.timestamp
                _record_first_latency(state, session)
            _absorb_labels(state, conv.actor, msg)

    elif kind == "OcrAttached":
        session = state.sessions.get(p["conversation_id"])
        if session is not None:
            conv = session.conversation
            for i, msg in enumerate(conv.messages):
                if msg.message_id == p["message_id"]:
                    # Several images on one message: texts accumulate in
                    # event order.
                    joined = (
                        msg.ocr_text + "\n" + p["text"] if msg.ocr_text else p["text"]
                    )
                    conv.messages[i] = replace(msg, ocr_text=joined)
                    break

    elif kind == "DisclosureFound":
        state.disclosures.append(
            (p["conversation_id"], disclosure_from_dict(p["disclosure"]))
        )

    elif kind == "SessionTerminated":
        session = state.sessions.get(p["conversation_id"])
        if session is not None:
            conv = session.conversation
            conv.state = SessionState.TERMINATED
            conv.outcome = outcome_from_dict(p["outcome"])
            conv.retry_counter = p["retry_counter"]
            session.active_draft_id = None

    state.last_sequence = rec.sequence


def _record_first_latency(state: DerivedState, session: SessionRecord) -> None:
    conv = session.conversation
    first_out = next(
        (m.timestamp for m in conv.messages if m.direction is Direction.OUTBOUND), None
    )
    if first_out is None or session.first_inbound_at is None:
        return
    latency_s = (session.first_inbound_at - first_out) / 1000.0
    actor = state.actors.get(conv.actor)
    if actor is not None:
        actor.first_response_latencies = actor.first_response_latencies + (latency_s,)


def _absorb_labels(state: DerivedState, actor_id: str, msg) -> None:
    labels = {label for ref in msg.media for label in ref.person_labels}
    merged = state.actor_labels.get(actor_id, frozenset()) | labels
    state.actor_labels[actor_id] = merged
    actor = state.actors.get(actor_id)
    if actor is not None:
        actor.classification = _classify(len(merged))


def replay(records: Iterable[EventRecord]) -> DerivedState:
    state = DerivedState()
    for rec in records:
        reduce_event(state, rec)
    return state


def emit(
    store: EventStore,
    state: DerivedState,
    kind: str,
    payload: dict[str, Any],
    at: int,
) -> EventRecord:
    """Append an event and fold it into live state in one step. This is
    the only mutation path above the store, which is what makes live
    state equal replayed state by construction."""
    seq = store.append(kind, payload, at)
    rec = EventRecord(sequence=seq, kind=kind, at=at, payload=payload)
    reduce_event(state, rec)
    return rec


def snapshot_query(
    state: DerivedState,
    kind: str,
    predicate: Callable[[Any], bool] | None = None,
) -> list[Any]:
    """Read-only view over one snapshot family, deterministically ordered."""
    if kind == "channels":
        items: list[Any] = [state.channels[k] for k in sorted(state.channels)]
    elif kind == "actors":
        items = [state.actors[k] for k in sorted(state.actors)]
    elif kind == "conversations":
        items = [state.sessions[k].conversation for k in sorted(state.sessions)]
    elif kind == "disclosures":
        items = [d for _, d in state.disclosures]
    elif kind == "escalations":
        items = [state.escalations[k] for k in sorted(state.escalations)]
    else:
        raise ValueError(f"unknown snapshot kind: {kind}")
    if predicate is not None:
        items = [x for x in items if predicate(x)]
    return items
