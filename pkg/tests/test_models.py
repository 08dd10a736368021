"""Domain type invariants: handle canonicalization, serialization round
trips, and conversation validation."""

import pytest
from hypothesis import given, strategies as st

from decoychat.errors import EmptyHandle
from decoychat.models import (
    Carrier,
    ChatMessage,
    Conversation,
    Direction,
    EngagementOutcome,
    EvidenceRef,
    MediaKind,
    MediaRef,
    OutcomeKind,
    PaymentDisclosure,
    PaymentMethod,
    SessionState,
    canonicalize_handle,
    conversation_from_dict,
    conversation_to_dict,
    message_from_dict,
    message_to_dict,
    recompute_rounds,
    validate_conversation,
)


class TestCanonicalizeHandle:
    def test_at_prefix_and_case(self):
        assert canonicalize_handle("@secretgirlsVIP").canonical == "secretgirlsvip"

    def test_interior_whitespace_and_trim(self):
        assert canonicalize_handle(" @A_B ").canonical == "a_b"
        assert canonicalize_handle("a b\tc").canonical == "abc"

    def test_multiple_at_prefixes(self):
        assert canonicalize_handle("@@x").canonical == "x"

    def test_raw_preserved(self):
        h = canonicalize_handle(" @Foo ")
        assert h.raw == " @Foo "

    def test_empty_raises(self):
        with pytest.raises(EmptyHandle):
            canonicalize_handle("   ")

    def test_only_at_signs_raises(self):
        with pytest.raises(EmptyHandle):
            canonicalize_handle("@@@")

    @given(st.text(min_size=1, max_size=40))
    def test_idempotent(self, raw):
        try:
            once = canonicalize_handle(raw)
        except EmptyHandle:
            return
        twice = canonicalize_handle(once.canonical)
        assert twice.canonical == once.canonical

    @given(st.text(min_size=1, max_size=40))
    def test_canonical_has_no_whitespace_or_at_prefix(self, raw):
        try:
            h = canonicalize_handle(raw)
        except EmptyHandle:
            return
        assert not any(ch.isspace() for ch in h.canonical)
        assert not h.canonical.startswith("@")
        assert h.canonical == h.canonical.lower()


def _msg(mid, direction, ts, text="hello", **kw):
    return ChatMessage(message_id=mid, direction=direction, timestamp=ts, text=text, **kw)


class TestRounds:
    def test_empty(self):
        assert recompute_rounds([]) == 0

    def test_single_exchange(self):
        msgs = [
            _msg("m1", Direction.OUTBOUND, 1000),
            _msg("m2", Direction.INBOUND, 2000),
        ]
        assert recompute_rounds(msgs) == 1

    def test_consecutive_inbounds_collapse(self):
        msgs = [
            _msg("m1", Direction.OUTBOUND, 1000),
            _msg("m2", Direction.INBOUND, 2000),
            _msg("m3", Direction.INBOUND, 3000),
            _msg("m4", Direction.OUTBOUND, 4000),
            _msg("m5", Direction.INBOUND, 5000),
        ]
        assert recompute_rounds(msgs) == 2

    def test_unanswered_outbound_not_counted(self):
        msgs = [
            _msg("m1", Direction.OUTBOUND, 1000),
            _msg("m2", Direction.INBOUND, 2000),
            _msg("m3", Direction.OUTBOUND, 3000),
        ]
        assert recompute_rounds(msgs) == 1

    def test_inbound_before_any_outbound_ignored(self):
        msgs = [
            _msg("m1", Direction.INBOUND, 1000),
            _msg("m2", Direction.OUTBOUND, 2000),
            _msg("m3", Direction.INBOUND, 3000),
        ]
        assert recompute_rounds(msgs) == 1


class TestValidateConversation:
    def _valid(self):
        msgs = [
            _msg("m1", Direction.OUTBOUND, 1000, round_index=1),
            _msg("m2", Direction.INBOUND, 2000, round_index=1),
        ]
        return Conversation(
            conversation_id="c1", actor="a1",
            state=SessionState.AWAITING_REPLY, messages=msgs, round_counter=1,
        )

    def test_valid_passes(self):
        assert validate_conversation(self._valid()) == []

    def test_non_monotonic_timestamps_flagged(self):
        c = self._valid()
        c.messages[1] = _msg("m2", Direction.INBOUND, 1000, round_index=1)
        assert any("ordering" in v for v in validate_conversation(c))

    def test_round_counter_mismatch_flagged(self):
        c = self._valid()
        c.round_counter = 5
        assert any("round counter" in v for v in validate_conversation(c))

    def test_retry_counter_range(self):
        c = self._valid()
        c.retry_counter = 4
        assert any("retry" in v for v in validate_conversation(c))

    def test_terminated_without_outcome_flagged(self):
        c = self._valid()
        c.state = SessionState.TERMINATED
        assert any("outcome-state" in v for v in validate_conversation(c))

    def test_outcome_without_termination_flagged(self):
        c = self._valid()
        c.outcome = EngagementOutcome(kind=OutcomeKind.DISENGAGED)
        assert any("outcome-state" in v for v in validate_conversation(c))

    def test_payment_outcome_needs_evidence(self):
        c = self._valid()
        c.state = SessionState.TERMINATED
        c.outcome = EngagementOutcome(kind=OutcomeKind.PAYMENT_OBTAINED)
        assert any("evidence" in v for v in validate_conversation(c))

    def test_payment_outcome_with_evidence_ok(self):
        c = self._valid()
        c.state = SessionState.TERMINATED
        c.outcome = EngagementOutcome(
            kind=OutcomeKind.PAYMENT_OBTAINED,
            evidence=(
                PaymentDisclosure(
                    method=PaymentMethod.USDT,
                    carrier=Carrier.TEXT,
                    evidence_ref=EvidenceRef("m2"),
                    detail="TXYZa" + "b" * 29,
                ),
            ),
        )
        assert validate_conversation(c) == []

    def test_empty_text_requires_media(self):
        c = self._valid()
        c.messages.append(_msg("m3", Direction.INBOUND, 3000, text="", round_index=1))
        assert any("empty message" in v for v in validate_conversation(c))

    def test_empty_text_with_media_ok(self):
        c = self._valid()
        c.messages.append(
            _msg(
                "m3", Direction.INBOUND, 3000, text="", round_index=1,
                media=(MediaRef("img1", MediaKind.IMAGE),),
            )
        )
        assert validate_conversation(c) == []

    def test_ocr_without_media_flagged(self):
        c = self._valid()
        c.messages.append(
            _msg("m3", Direction.INBOUND, 3000, text="x", round_index=1, ocr_text="pay")
        )
        assert any("ocr_text" in v for v in validate_conversation(c))

    def test_duplicate_media_id_flagged(self):
        c = self._valid()
        c.messages.append(
            _msg(
                "m3", Direction.INBOUND, 3000, text="a", round_index=1,
                media=(MediaRef("img1", MediaKind.IMAGE),),
            )
        )
        c.messages.append(
            _msg(
                "m4", Direction.INBOUND, 4000, text="b", round_index=1,
                media=(MediaRef("img1", MediaKind.IMAGE),),
            )
        )
        assert any("duplicate media_id" in v for v in validate_conversation(c))


class TestSerialization:
    def test_message_round_trip(self):
        m = ChatMessage(
            message_id="m1",
            direction=Direction.INBOUND,
            timestamp=1234,
            text="scan this",
            media=(MediaRef("img9", MediaKind.IMAGE, ("face_a",)),),
            ocr_text="alipay 133",
            round_index=2,
            author="seller_007",
        )
        assert message_from_dict(message_to_dict(m)) == m

    def test_conversation_round_trip(self):
        c = Conversation(
            conversation_id="c9",
            actor="seller_009",
            state=SessionState.TERMINATED,
            messages=[
                _msg("m1", Direction.OUTBOUND, 1000, round_index=1),
                _msg("m2", Direction.INBOUND, 2000, round_index=1),
            ],
            round_counter=1,
            outcome=EngagementOutcome(
                kind=OutcomeKind.PAYMENT_OBTAINED,
                evidence=(
                    PaymentDisclosure(
                        method=PaymentMethod.ALIPAY_IMAGE,
                        carrier=Carrier.IMAGE,
                        evidence_ref=EvidenceRef("m2", "img1"),
                        detail="alipay qr payload",
                    ),
                ),
            ),
        )
        d = conversation_to_dict(c)
        back = conversation_from_dict(d)
        assert back == c
        assert d["state"] == "terminated"
        assert d["outcome"]["evidence"][0]["method"] == "alipay_image"

    @given(
        st.lists(
            st.tuples(
                st.sampled_from([Direction.INBOUND, Direction.OUTBOUND]),
                st.text(min_size=1, max_size=10),
            ),
            max_size=8,
        )
    )
    def test_message_list_round_trip(self, pairs):
        msgs = [
            _msg(f"m{i}", d, 1000 + i * 10, text=t) for i, (d, t) in enumerate(pairs)
        ]
        c = Conversation(
            conversation_id="c1", actor="a",
            state=SessionState.AWAITING_REPLY, messages=msgs,
            round_counter=recompute_rounds(msgs),
        )
        assert conversation_from_dict(conversation_to_dict(c)) == c
