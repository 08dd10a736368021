"""Digest budget, verdict parsing, escalation lifecycle."""

import pytest

from decoychat.errors import AlreadyResolved, InvalidVerdict, LlmUnavailable
from decoychat.llm import ScriptedChatModel, ScriptRule
from decoychat.models import (
    ChannelRecord,
    ChatMessage,
    Direction,
    DiscoverySource,
    JudgedBy,
    MediaKind,
    MediaRef,
    RelevanceDecision,
    RelevanceVerdict,
    SourceKind,
    canonicalize_handle,
)
from decoychat.relevance import (
    TRUNCATION_MARKER,
    apply_human_verdict,
    build_digest,
    enqueue_escalation,
    judge_channels,
    judge_relevance,
    override_verdict,
)
from decoychat.store import DerivedState, EventStore, replay


def make_record(pins=(), msgs=(), handle="@chan1"):
    def mk(i, text, media=()):
        return ChatMessage(
            message_id=f"p{i}",
            direction=Direction.INBOUND,
            timestamp=1000 + i,
            text=text,
            media=media,
            author="owner",
        )

    return ChannelRecord(
        handle=canonicalize_handle(handle),
        title="Chan",
        discovery_source=DiscoverySource(SourceKind.SEED_CONFIG, ""),
        depth=0,
        pinned_posts=[mk(i, t) for i, t in enumerate(pins)],
        recent_messages=[
            mk(100 + i, t, media=m) for i, (t, m) in enumerate(msgs)
        ],
    )


class TestDigest:
    def test_pins_take_budget_first(self):
        record = make_record(
            pins=["P" * 3990], msgs=[("M" * 100, ())]
        )
        digest = build_digest(record, char_budget=4000)
        assert digest.pinned_excerpt == "P" * 3990
        assert len(digest.message_excerpt) <= 10
        assert digest.message_excerpt.endswith(TRUNCATION_MARKER)

    def test_truncation_marker_on_overflow(self):
        record = make_record(pins=["X" * 5000])
        digest = build_digest(record, char_budget=4000)
        assert len(digest.pinned_excerpt) == 4000
        assert digest.pinned_excerpt.endswith(TRUNCATION_MARKER)

    def test_media_counts_by_kind(self):
        media = (
            MediaRef("a", MediaKind.IMAGE),
            MediaRef("b", MediaKind.IMAGE),
            MediaRef("c", MediaKind.OTHER),
        )
        record = make_record(msgs=[("look", media)])
        digest = build_digest(record)
        assert digest.media_counts == (("image", 2), ("other", 1))

    def test_render_contains_handle(self):
        digest = build_digest(make_record(pins=["hello"]))
        assert "chan1" in digest.render()
        assert "hello" in digest.render()


class TestJudgeRelevance:
    def _digest(self):
        return build_digest(make_record(pins=["chat for hire, pay to chat"]))

    def test_yes_maps_to_relevant(self):
        model = ScriptedChatModel(rules=(ScriptRule("chan1", "yes\nclearly an ad"),))
        v = judge_relevance(self._digest(), model)
        assert v.decision is RelevanceDecision.RELEVANT
        assert v.judged_by is JudgedBy.MODEL
        assert v.rationale == "clearly an ad"

    def test_no_maps_to_irrelevant(self):
        model = ScriptedChatModel(rules=(ScriptRule("chan1", "No.\nrecipes only"),))
        v = judge_relevance(self._digest(), model)
        assert v.decision is RelevanceDecision.IRRELEVANT

    def test_refusal_maps_to_refusal_with_reply_as_rationale(self):
        model = ScriptedChatModel(
            rules=(ScriptRule("chan1", "I can't help with that."),)
        )
        v = judge_relevance(self._digest(), model)
        assert v.decision is RelevanceDecision.REFUSAL
        assert "can't help" in v.rationale

    def test_unparseable_maps_to_borderline(self):
        model = ScriptedChatModel(rules=(ScriptRule("chan1", "perhaps, hard to say"),))
        v = judge_relevance(self._digest(), model)
        assert v.decision is RelevanceDecision.BORDERLINE

    def test_adapter_outage_maps_to_borderline(self):
        class Down:
            def complete(self, system, prompt):
                raise LlmUnavailable("down")

        v = judge_relevance(self._digest(), Down())
        assert v.decision is RelevanceDecision.BORDERLINE
        assert v.rationale == "adapter unavailable"


def _model_verdict(decision):
    return RelevanceVerdict(
        decision=decision, rationale="r", judged_by=JudgedBy.MODEL
    )


class TestEscalation:
    def test_borderline_queued_unresolved(self):
        store, state = EventStore(), DerivedState()
        eid = enqueue_escalation(
            store, state, _model_verdict(RelevanceDecision.BORDERLINE), "chan1", at=5
        )
        assert state.escalations[eid].resolved is None
        assert state.escalations[eid].canonical == "chan1"

    def test_relevant_verdict_rejected(self):
        store, state = EventStore(), DerivedState()
        with pytest.raises(InvalidVerdict):
            enqueue_escalation(
                store, state, _model_verdict(RelevanceDecision.RELEVANT), "chan1", at=5
            )

    def test_refusal_carries_rationale(self):
        store, state = EventStore(), DerivedState()
        eid = enqueue_escalation(
            store, state, _model_verdict(RelevanceDecision.REFUSAL), "chan1", at=5
        )
        assert state.escalations[eid].model_verdict.rationale == "r"

    def test_human_resolution_updates_channel(self):
        store, state = EventStore(), DerivedState()
        record = make_record(pins=["ad"])
        from decoychat.models import channel_to_dict

        store_state_channel = channel_to_dict(record)
        from decoychat.store import emit

        emit(store, state, "ChannelDiscovered", {"channel": store_state_channel}, 1)
        eid = enqueue_escalation(
            store, state, _model_verdict(RelevanceDecision.REFUSAL), "chan1", at=5
        )
        updated = apply_human_verdict(
            store, state, eid, RelevanceDecision.RELEVANT, "clear ad", at=9
        )
        assert updated.verdict.decision is RelevanceDecision.RELEVANT
        assert updated.verdict.judged_by is JudgedBy.HUMAN
        assert state.escalations[eid].resolved is not None

    def test_double_resolution_rejected(self):
        store, state = EventStore(), DerivedState()
        from decoychat.models import channel_to_dict
        from decoychat.store import emit

        emit(store, state, "ChannelDiscovered", {"channel": channel_to_dict(make_record())}, 1)
        eid = enqueue_escalation(
            store, state, _model_verdict(RelevanceDecision.BORDERLINE), "chan1", at=5
        )
        apply_human_verdict(store, state, eid, RelevanceDecision.IRRELEVANT, "x", at=9)
        with pytest.raises(AlreadyResolved):
            apply_human_verdict(store, state, eid, RelevanceDecision.RELEVANT, "y", at=10)

    def test_human_override_replaces_model_relevant(self):
        store, state = EventStore(), DerivedState()
        from decoychat.models import channel_to_dict, verdict_to_dict
        from decoychat.store import emit

        emit(store, state, "ChannelDiscovered", {"channel": channel_to_dict(make_record())}, 1)
        emit(
            store,
            state,
            "ChannelJudged",
            {
                "canonical": "chan1",
                "verdict": verdict_to_dict(_model_verdict(RelevanceDecision.RELEVANT)),
            },
            2,
        )
        updated = override_verdict(
            store, state, "chan1", RelevanceDecision.IRRELEVANT, "false positive", at=3
        )
        assert updated.verdict.decision is RelevanceDecision.IRRELEVANT
        assert updated.verdict.judged_by is JudgedBy.HUMAN


class TestJudgeChannels:
    def test_bulk_judgment_escalates_and_replays(self):
        from decoychat.models import channel_to_dict
        from decoychat.store import emit

        store, state = EventStore(), DerivedState()
        ads = make_record(pins=["pay to chat girls"], handle="@ads")
        food = make_record(pins=["best noodle recipes"], handle="@food")
        odd = make_record(pins=["????"], handle="@odd")
        for rec in (ads, food, odd):
            emit(store, state, "ChannelDiscovered", {"channel": channel_to_dict(rec)}, 1)

        model = ScriptedChatModel(
            rules=(
                ScriptRule("pay to chat", "yes\nad"),
                ScriptRule("noodle", "no\nfood"),
            )
        )
        model.fallback = "hmm, unclear"
        counts = judge_channels(store, state, model, at=2)
        assert counts == {"relevant": 1, "irrelevant": 1, "borderline": 1}
        assert state.channels["ads"].verdict.decision is RelevanceDecision.RELEVANT
        assert state.channels["food"].verdict.decision is RelevanceDecision.IRRELEVANT
        assert len(state.escalations) == 1
        assert replay(store.events()) == state
