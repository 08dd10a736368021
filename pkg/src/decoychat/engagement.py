"""Per-conversation engagement: opener, drafting with sensitive-word
substitution and OCR context, the approval gate, refusal retries, and
termination.

Every mutation goes through the event store, so live state and replayed
state are the same fold. The in-flight consecutive-refusal count is
engine-internal (refusals produce no events); its final value is written
into the termination event, which is the only point where it matters for
replay.

Softening tiers used after refusals: tier 1 adds the extra substitution
pairs, tier 2 additionally drops quoted partner content from the prompt,
tier 3 falls back to a minimal neutral continuation prompt. With the
default cap of three retries the third refusal terminates, so tier 3 is
reachable only with a raised cap.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .defaults import (
    DEFAULT_DRAFT_SYSTEM_PROMPT,
    DEFAULT_NEUTRAL_PROMPT,
    DEFAULT_OPENER,
    DEFAULT_REFUSAL_MARKERS,
    DEFAULT_SOFTENING_SUBSTITUTIONS,
    DEFAULT_SUBSTITUTIONS,
)
from .errors import (
    ApprovalRequired,
    DuplicateSession,
    EngineUnavailable,
    NotPendingApproval,
    RegenerationLimit,
    SessionTerminated,
    StaleDraft,
    UnknownConversation,
    UnknownDraft,
)
from .llm import ChatModel, is_refusal
from .models import (
    ChatMessage,
    Conversation,
    Direction,
    EngagementOutcome,
    MediaKind,
    OutcomeKind,
    PaymentDisclosure,
    SessionState,
    disclosure_to_dict,
    message_to_dict,
    outcome_to_dict,
)
from .store import DerivedState, DraftInfo, EventStore, SessionRecord, emit
from .transport import InboundEvent, OutboundMessage, Transport
from .vision import IdentityOcrEngine, OcrCache, OcrResult, PaymentPattern, extract_payment

SubstitutionTable = tuple[tuple[str, str], ...]

AUTO_OPERATOR = "auto"


@dataclass(frozen=True)
class EngagementPolicy:
    opener_text: str = DEFAULT_OPENER
    max_retries: int = 3
    no_response_timeout_s: int = 72 * 3600
    max_rounds: int | None = None
    auto_approve: bool = False
    regeneration_cap: int = 5
    context_messages: int = 10


def _substitute_pass(text: str, table: SubstitutionTable) -> str:
    for phrase, replacement in sorted(table, key=lambda p: -len(p[0])):
        text = re.sub(re.escape(phrase), replacement, text, flags=re.IGNORECASE)
    return text


def substitute(text: str, table: SubstitutionTable) -> str:
    """Replace each sensitive phrase, longest first, case-insensitively.
    Replacement boundaries can form new phrases ("sexy sexy chat" loses
    only the inner pair on the first pass), so run to a fixpoint. The
    table invariant that no replacement contains a phrase makes the
    fixpoint reachable; the bound is a guard against bad tables."""
    for _ in range(32):
        rewritten = _substitute_pass(text, table)
        if rewritten == text:
            return text
        text = rewritten
    return text


class EngagementEngine:
    """Owns the conversation lifecycle over one store + transport pair."""

    def __init__(
        self,
        store: EventStore,
        state: DerivedState,
        transport: Transport,
        llm: ChatModel,
        policy: EngagementPolicy,
        substitutions: SubstitutionTable = DEFAULT_SUBSTITUTIONS,
        softening: SubstitutionTable = DEFAULT_SOFTENING_SUBSTITUTIONS,
        refusal_markers: tuple[str, ...] = DEFAULT_REFUSAL_MARKERS,
        payment_patterns: tuple[PaymentPattern, ...] | None = None,
        ocr: OcrCache | None = None,
        system_prompt: str = DEFAULT_DRAFT_SYSTEM_PROMPT,
        neutral_prompt: str = DEFAULT_NEUTRAL_PROMPT,
    ):
        self._store = store
        self._state = state
        self._transport = transport
        self._llm = llm
        self._policy = policy
        self._substitutions = substitutions
        self._softening = softening
        self._refusal_markers = refusal_markers
        self._payment_patterns = payment_patterns
        self._ocr = ocr if ocr is not None else OcrCache(IdentityOcrEngine())
        self._system_prompt = system_prompt
        self._neutral_prompt = neutral_prompt
        self._retries: dict[str, int] = {}
        self._regens: dict[str, int] = {}
        self._draft_counters: dict[str, int] = {}
        self._out_counters: dict[str, int] = {}
        self._poll_cursor = 0

    # -- helpers -----------------------------------------------------------

    def _session(self, conversation_id: str) -> SessionRecord:
        return self._state.sessions[conversation_id]

    def _conversation(self, conversation_id: str) -> Conversation:
        return self._session(conversation_id).conversation

    def retry_count(self, conversation_id: str) -> int:
        return self._retries.get(conversation_id, 0)

    def conversation_for_actor(self, actor_id: str) -> str:
        return f"conv-{actor_id}"

    def _next_draft_id(self, cid: str) -> str:
        n = self._draft_counters.get(cid, 0) + 1
        self._draft_counters[cid] = n
        return f"{cid}-draft-{n}"

    def _stamp(self, cid: str, ts: int) -> int:
        """Strict per-conversation timestamp ordering: never at or before
        the previous message."""
        messages = self._conversation(cid).messages
        if messages and ts <= messages[-1].timestamp:
            return messages[-1].timestamp + 1
        return ts

    # -- opening -----------------------------------------------------------

    def open_session(self, actor_id: str) -> str:
        cid = self.conversation_for_actor(actor_id)
        if cid in self._state.sessions:
            raise DuplicateSession(f"session already exists for {actor_id}")
        now = self._transport.now_ms
        emit(
            self._store,
            self._state,
            "SessionOpened",
            {"conversation_id": cid, "actor_id": actor_id, "transport_key": actor_id},
            now,
        )
        draft_id = self._next_draft_id(cid)
        emit(
            self._store,
            self._state,
            "DraftCreated",
            {"conversation_id": cid, "draft_id": draft_id, "text": self._policy.opener_text},
            now,
        )
        if self._policy.auto_approve:
            self._auto_approve(cid, draft_id)
        return cid

    def _auto_approve(self, cid: str, draft_id: str) -> None:
        emit(
            self._store,
            self._state,
            "OperatorDecision",
            {
                "conversation_id": cid,
                "draft_id": draft_id,
                "decision": "approve",
                "operator_id": AUTO_OPERATOR,
            },
            self._transport.now_ms,
        )
        self.send_approved(cid, draft_id, self._state.drafts[draft_id].text)

    # -- sending (approval gate) -------------------------------------------

    def send_approved(self, cid: str, draft_id: str, text: str) -> None:
        """Hand an approved draft to the transport. Fails closed: without
        a logged approve/edit decision for this draft nothing is sent."""
        draft = self._state.drafts.get(draft_id)
        if draft is None or not draft.decided:
            raise ApprovalRequired(f"no operator decision logged for {draft_id}")
        session = self._session(cid)
        receipt = self._transport.send_message(session.transport_key, OutboundMessage(text))
        n = self._out_counters.get(cid, 0) + 1
        self._out_counters[cid] = n
        message = ChatMessage(
            message_id=f"{cid}-out-{n}",
            direction=Direction.OUTBOUND,
            timestamp=self._stamp(cid, receipt.sent_at),
            text=text,
            round_index=n,
        )
        emit(
            self._store,
            self._state,
            "MessageSent",
            {"conversation_id": cid, "draft_id": draft_id, "message": message_to_dict(message)},
            receipt.sent_at,
        )

    # -- operator decisions ------------------------------------------------

    def pending_draft(self, cid: str) -> DraftInfo:
        """The one draft awaiting a decision, or NotPendingApproval."""
        session = self._state.sessions.get(cid)
        if session is None:
            raise UnknownConversation(f"unknown conversation: {cid}")
        draft = (
            self._state.drafts.get(session.active_draft_id)
            if session.active_draft_id
            else None
        )
        if (
            draft is None
            or draft.decided
            or session.conversation.state is SessionState.TERMINATED
        ):
            raise NotPendingApproval(f"no draft awaiting approval in {cid}")
        return draft

    def apply_operator_decision(
        self,
        draft_id: str,
        decision: str,
        operator_id: str,
        edited_text: str | None = None,
    ) -> None:
        draft = self._state.drafts.get(draft_id)
        if draft is None:
            raise UnknownDraft(f"unknown draft: {draft_id}")
        if draft.decided:
            raise StaleDraft(f"draft already decided: {draft_id}")
        cid = draft.conversation_id
        conv = self._conversation(cid)
        if conv.state is SessionState.TERMINATED:
            raise StaleDraft(f"conversation already terminated: {cid}")
        session = self._session(cid)
        if session.active_draft_id != draft_id:
            raise StaleDraft(f"draft superseded: {draft_id}")
        if decision not in ("approve", "edit", "reject", "terminate"):
            raise ValueError(f"unknown decision: {decision}")

        now = self._transport.now_ms
        payload = {
            "conversation_id": cid,
            "draft_id": draft_id,
            "decision": decision,
            "operator_id": operator_id,
        }
        if decision == "edit":
            if not edited_text:
                raise ValueError("edit decision needs replacement text")
            payload["edited_text"] = edited_text
        emit(self._store, self._state, "OperatorDecision", payload, now)

        if decision == "approve":
            self.send_approved(cid, draft_id, draft.text)
        elif decision == "edit":
            self.send_approved(cid, draft_id, edited_text)
        elif decision == "reject":
            self._regenerate(cid)
        else:
            self._terminate(cid, OutcomeKind.OPERATOR_TERMINATED, now)

    def terminate_conversation(self, cid: str, operator_id: str) -> None:
        """Kill switch; valid in any non-terminated state."""
        if cid not in self._state.sessions:
            raise UnknownConversation(f"unknown conversation: {cid}")
        conv = self._conversation(cid)
        if conv.state is SessionState.TERMINATED:
            raise SessionTerminated(f"already terminated: {cid}")
        session = self._session(cid)
        now = self._transport.now_ms
        emit(
            self._store,
            self._state,
            "OperatorDecision",
            {
                "conversation_id": cid,
                "draft_id": session.active_draft_id or "",
                "decision": "terminate",
                "operator_id": operator_id,
            },
            now,
        )
        self._terminate(cid, OutcomeKind.OPERATOR_TERMINATED, now)

    def _regenerate(self, cid: str) -> None:
        count = self._regens.get(cid, 0) + 1
        self._regens[cid] = count
        if count > self._policy.regeneration_cap:
            raise RegenerationLimit(
                f"regeneration cap reached for {cid}; terminate or edit instead"
            )
        self._draft_reply(cid)

    # -- inbound -----------------------------------------------------------

    def on_inbound(self, event: InboundEvent, draft: bool = True) -> None:
        """Ingest one partner message. With draft=True a reply draft is
        produced immediately; the driver passes False and drafts once per
        batch so burst messages share a single reply."""
        cid = self.conversation_for_actor(event.source)
        session = self._state.sessions.get(cid)
        if session is None:
            return  # message from an actor we never engaged
        conv = session.conversation
        if conv.state is SessionState.TERMINATED:
            raise SessionTerminated(f"inbound after termination: {cid}")

        rounds_completed = self._out_counters.get(cid, 0)
        message = ChatMessage(
            message_id=event.message.message_id,
            direction=Direction.INBOUND,
            timestamp=self._stamp(cid, event.received_at),
            text=event.message.text,
            media=event.message.media,
            round_index=max(rounds_completed, 1),
        )
        emit(
            self._store,
            self._state,
            "MessageReceived",
            {"conversation_id": cid, "message": message_to_dict(message)},
            event.received_at,
        )

        ocr_results = self._attach_ocr(cid, message)
        disclosures = self._extract_disclosures(message, ocr_results)
        if disclosures:
            for d in disclosures:
                emit(
                    self._store,
                    self._state,
                    "DisclosureFound",
                    {"conversation_id": cid, "disclosure": disclosure_to_dict(d)},
                    event.received_at,
                )
            self._terminate(cid, OutcomeKind.PAYMENT_OBTAINED, event.received_at)
            return

        if (
            self._policy.max_rounds is not None
            and conv.round_counter >= self._policy.max_rounds
        ):
            self._terminate(cid, OutcomeKind.DISENGAGED, event.received_at)
            return

        if draft and conv.state is SessionState.AWAITING_REPLY:
            self._draft_reply(cid)

    def _attach_ocr(self, cid: str, message: ChatMessage) -> list[OcrResult]:
        results: list[OcrResult] = []
        for ref in message.media:
            if ref.kind is not MediaKind.IMAGE:
                continue
            payload = self._transport.media_payload(ref.media_id)
            try:
                result = self._ocr.ocr_extract(ref, payload)
            except EngineUnavailable:
                continue
            results.append(result)
            if result.text:
                emit(
                    self._store,
                    self._state,
                    "OcrAttached",
                    {
                        "conversation_id": cid,
                        "message_id": message.message_id,
                        "media_id": ref.media_id,
                        "text": result.text,
                        "engine_tag": result.engine_tag,
                    },
                    message.timestamp,
                )
        return results

    def _extract_disclosures(
        self, message: ChatMessage, ocr_results: list[OcrResult]
    ) -> list[PaymentDisclosure]:
        found = extract_payment(
            message.text, None, message.message_id, self._payment_patterns
        )
        for result in ocr_results:
            found.extend(
                extract_payment("", result, message.message_id, self._payment_patterns)
            )
        unique: list[PaymentDisclosure] = []
        seen: set[tuple] = set()
        for d in found:
            key = (d.method, d.detail)
            if key not in seen:
                seen.add(key)
                unique.append(d)
        return unique

    # -- drafting ----------------------------------------------------------

    def _build_prompt(self, cid: str, tier: int) -> tuple[str, str]:
        if tier >= 3:
            return self._system_prompt, self._neutral_prompt
        table = (
            self._substitutions
            if tier == 0
            else self._substitutions + self._softening
        )
        conv = self._conversation(cid)
        lines: list[str] = []
        for m in conv.messages[-self._policy.context_messages:]:
            if m.direction is Direction.OUTBOUND:
                lines.append(f"you: {m.text}")
            elif tier < 2:
                lines.append(f"them: {m.text}")
                if m.ocr_text:
                    lines.append(f"them (image text): {m.ocr_text}")
        context = substitute("\n".join(lines), table)
        prompt = f"Conversation so far:\n{context}\n\nWrite your next message."
        return self._system_prompt, prompt

    def handle_refusal(self, cid: str) -> str:
        """Returns "retry" or "terminated"."""
        count = self._retries.get(cid, 0) + 1
        self._retries[cid] = count
        if count >= self._policy.max_retries:
            self._terminate(cid, OutcomeKind.LLM_FAILURE, self._transport.now_ms)
            return "terminated"
        return "retry"

    def _draft_reply(self, cid: str) -> None:
        while True:
            tier = min(self._retries.get(cid, 0), 3)
            system, prompt = self._build_prompt(cid, tier)
            reply = self._llm.complete(system, prompt)
            if is_refusal(reply, self._refusal_markers):
                if self.handle_refusal(cid) == "terminated":
                    return
                continue
            self._retries[cid] = 0
            break
        draft_id = self._next_draft_id(cid)
        emit(
            self._store,
            self._state,
            "DraftCreated",
            {"conversation_id": cid, "draft_id": draft_id, "text": reply},
            self._transport.now_ms,
        )
        if self._policy.auto_approve:
            self._auto_approve(cid, draft_id)

    # -- timeouts and termination ------------------------------------------

    def check_timeouts(self, now: int) -> list[str]:
        timeout_ms = self._policy.no_response_timeout_s * 1000
        terminated: list[str] = []
        for cid in sorted(self._state.sessions):
            session = self._state.sessions[cid]
            conv = session.conversation
            if conv.state not in (SessionState.CONTACT_SENT, SessionState.AWAITING_REPLY):
                continue
            if session.last_outbound_at is None:
                continue
            if now - session.last_outbound_at < timeout_ms:
                continue
            had_reply = any(m.direction is Direction.INBOUND for m in conv.messages)
            kind = OutcomeKind.DISENGAGED if had_reply else OutcomeKind.NO_RESPONSE
            self._terminate(cid, kind, now)
            terminated.append(cid)
        return terminated

    def _terminate(self, cid: str, kind: OutcomeKind, at: int) -> None:
        evidence: tuple[PaymentDisclosure, ...] = ()
        if kind is OutcomeKind.PAYMENT_OBTAINED:
            evidence = tuple(d for c, d in self._state.disclosures if c == cid)
        outcome = EngagementOutcome(kind=kind, evidence=evidence)
        emit(
            self._store,
            self._state,
            "SessionTerminated",
            {
                "conversation_id": cid,
                "outcome": outcome_to_dict(outcome),
                "retry_counter": self._retries.get(cid, 0),
            },
            at,
        )

    # -- driver ------------------------------------------------------------

    def rebuild_counters(self) -> None:
        """Restore per-conversation counters from replayed state so an
        interrupted run can keep appending to its log. Mid-flight refusal
        and regeneration counts are not recoverable from events and
        restart at zero."""
        for cid, session in self._state.sessions.items():
            outs = sum(
                1
                for m in session.conversation.messages
                if m.direction is Direction.OUTBOUND
            )
            if outs:
                self._out_counters[cid] = outs
            for m in session.conversation.messages:
                if m.direction is Direction.INBOUND:
                    self._poll_cursor = max(self._poll_cursor, m.timestamp)
        for draft_id, draft in self._state.drafts.items():
            prefix = f"{draft.conversation_id}-draft-"
            if not draft_id.startswith(prefix):
                continue
            try:
                n = int(draft_id[len(prefix):])
            except ValueError:
                continue
            cid = draft.conversation_id
            self._draft_counters[cid] = max(self._draft_counters.get(cid, 0), n)

    def drain_events(self) -> int:
        """Process every simnet event not yet consumed, in order. Replies
        are drafted once per conversation after the whole batch, so a burst
        gets one answer, not one per message."""
        processed = 0
        touched: list[str] = []
        for event in self._transport.poll_events(self._poll_cursor):
            self._poll_cursor = max(self._poll_cursor, event.received_at)
            cid = self.conversation_for_actor(event.source)
            session = self._state.sessions.get(cid)
            if session is None or session.conversation.state is SessionState.TERMINATED:
                continue  # stray reply after termination
            self.on_inbound(event, draft=False)
            if cid not in touched:
                touched.append(cid)
            processed += 1
        for cid in touched:
            if self._conversation(cid).state is SessionState.AWAITING_REPLY:
                self._draft_reply(cid)
        return processed

    # Timers closer together than this are treated as one turn. Scenario
    # latencies must stay above it or distinct turns will merge.
    BURST_WINDOW_MS = 250

    def run_auto(self) -> None:
        """Drive every open session to termination on the virtual clock.
        Requires auto_approve; otherwise pending drafts would stall."""
        timeout_ms = self._policy.no_response_timeout_s * 1000
        while True:
            self.drain_events()
            self.check_timeouts(self._transport.now_ms)
            active = [
                s
                for s in self._state.sessions.values()
                if s.conversation.state is not SessionState.TERMINATED
            ]
            if not active:
                return
            now = self._transport.now_ms
            targets = []
            next_timer = self._transport.next_timer_at()
            if next_timer is not None:
                targets.append(next_timer)
            for session in active:
                if session.conversation.state in (
                    SessionState.CONTACT_SENT,
                    SessionState.AWAITING_REPLY,
                ) and session.last_outbound_at is not None:
                    targets.append(session.last_outbound_at + timeout_ms)
            future = [t for t in targets if t > now]
            if not future:
                return  # nothing left that time can resolve
            self._transport.advance_time((min(future) - now) / 1000)
            while True:
                pending = self._transport.next_timer_at()
                gap = (
                    None
                    if pending is None
                    else pending - self._transport.now_ms
                )
                if gap is None or gap > self.BURST_WINDOW_MS:
                    break
                self._transport.advance_time(gap / 1000)
