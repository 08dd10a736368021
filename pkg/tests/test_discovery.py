"""Discovery walk, link mining, keyword expansion, actor extraction."""

import pytest

from decoychat.discovery import (
    DiscoveryConfig,
    expand_keywords,
    extract_actors,
    extract_links,
    run_discovery,
)
from decoychat.errors import BackendUnavailable, ConfigInvalid, LlmUnavailable
from decoychat.llm import ScriptedChatModel, ScriptRule
from decoychat.simnet import SimnetTransport, build_scenario
from decoychat.store import EventStore, replay


class DownModel:
    def complete(self, system, prompt):
        raise LlmUnavailable("down")


class TestExpandKeywords:
    def test_zero_fanout_returns_seeds(self):
        out = expand_keywords(["sexy chat"], 0, DownModel())
        assert out.terms == ("sexy chat",)
        assert not out.degraded

    def test_scripted_synonyms_added(self):
        model = ScriptedChatModel(
            rules=(ScriptRule("nude video chat", "cam show\nvideo girls"),)
        )
        out = expand_keywords(["nude video chat"], 2, model)
        assert out.terms == ("nude video chat", "cam show", "video girls")

    def test_duplicates_are_dropped_case_insensitively(self):
        model = ScriptedChatModel(rules=(ScriptRule("seed", "SEED\nother"),))
        out = expand_keywords(["seed"], 2, model)
        assert out.terms == ("seed", "other")

    def test_fanout_caps_suggestions(self):
        model = ScriptedChatModel(rules=(ScriptRule("seed", "a\nb\nc\nd"),))
        out = expand_keywords(["seed"], 2, model)
        assert out.terms == ("seed", "a", "b")

    def test_unavailable_adapter_degrades_to_seeds(self):
        out = expand_keywords(["one", "two"], 3, DownModel())
        assert out.terms == ("one", "two")
        assert out.degraded


class TestExtractLinks:
    def test_at_handle(self):
        out = extract_links("For more information, please enter @secretgirlsVIP")
        assert [h.canonical for h in out] == ["secretgirlsvip"]

    def test_empty_text(self):
        assert extract_links("") == []

    def test_first_occurrence_dedup(self):
        out = extract_links("@a @b @a")
        assert [h.canonical for h in out] == ["a", "b"]

    def test_tme_links_and_order(self):
        out = extract_links("join t.me/zeta then ping @alpha or https://t.me/joinchat/Beta9")
        assert [h.canonical for h in out] == ["zeta", "alpha", "beta9"]

    def test_email_not_treated_as_handle(self):
        assert extract_links("mail me: someone@example.com") == []


def graph_scenario():
    """Two directory seeds; seed1 links to c and d, d links back to seed1
    (cycle) and to a dead handle; e only reachable at depth 2."""
    channels = [
        {
            "handle": "@seed1",
            "title": "Seed One",
            "pinned": [{"author": "s1", "text": "pay to chat! book at @c_chan"}],
            "messages": [{"author": "s1", "text": "also see @d_chan"}],
        },
        {
            "handle": "@seed2",
            "title": "Seed Two",
            "messages": [{"author": "s2", "text": "pay to chat here"}],
        },
        {
            "handle": "@c_chan",
            "messages": [{"author": "s3", "text": "nothing to see"}],
        },
        {
            "handle": "@d_chan",
            "messages": [
                {"author": "s1", "text": "back to @seed1 and @ghost_chan"},
                {"author": "s4", "text": "deeper: @e_chan"},
            ],
        },
        {
            "handle": "@e_chan",
            "messages": [{"author": "s5", "text": "pay to chat, dm me"}],
        },
    ]
    return build_scenario(
        {
            "seed": 5,
            "start_time_ms": 1_700_000_000_000,
            "directory": {"nude video chat": ["@seed1", "@seed2"]},
            "channels": channels,
            "personas": [],
        }
    )


def make_config(**over):
    base = dict(seed_keywords=("nude video chat",), depth_cap=3)
    base.update(over)
    return DiscoveryConfig(**base)


class TestRunDiscovery:
    def test_full_walk_visits_reachable_once(self):
        net = SimnetTransport(graph_scenario())
        result = run_discovery(make_config(), net, ScriptedChatModel())
        names = [r.handle.canonical for r in result.records]
        assert names == ["c_chan", "d_chan", "e_chan", "seed1", "seed2"]
        assert not result.aborted

    def test_depths_and_sources(self):
        net = SimnetTransport(graph_scenario())
        result = run_discovery(make_config(), net, ScriptedChatModel())
        by_name = {r.handle.canonical: r for r in result.records}
        assert by_name["seed1"].depth == 0
        assert by_name["seed1"].discovery_source.kind.value == "directory_query"
        assert by_name["c_chan"].depth == 1
        assert by_name["c_chan"].discovery_source.detail == "seed1"
        assert by_name["e_chan"].depth == 2

    def test_depth_cap_zero_keeps_seeds_only(self):
        net = SimnetTransport(graph_scenario())
        result = run_discovery(make_config(depth_cap=0), net, ScriptedChatModel())
        names = [r.handle.canonical for r in result.records]
        assert names == ["seed1", "seed2"]

    def test_dead_links_skipped(self):
        net = SimnetTransport(graph_scenario())
        result = run_discovery(make_config(), net, ScriptedChatModel())
        assert "ghost_chan" not in [r.handle.canonical for r in result.records]

    def test_rerun_is_identical(self):
        a = run_discovery(
            make_config(), SimnetTransport(graph_scenario()), ScriptedChatModel()
        )
        b = run_discovery(
            make_config(), SimnetTransport(graph_scenario()), ScriptedChatModel()
        )
        assert a.records == b.records

    def test_events_rebuild_same_channel_set(self):
        net = SimnetTransport(graph_scenario())
        store = EventStore()
        result = run_discovery(make_config(), net, ScriptedChatModel(), store=store, at=7)
        state = replay(store.events())
        assert sorted(state.channels) == [r.handle.canonical for r in result.records]
        assert state.channels["seed1"].title == "Seed One"

    def test_backend_failure_flags_partial(self):
        class Dying:
            def __init__(self, inner, joins_allowed):
                self._inner = inner
                self._left = joins_allowed

            def __getattr__(self, name):
                return getattr(self._inner, name)

            def join_channel(self, h):
                if self._left <= 0:
                    raise BackendUnavailable("gone")
                self._left -= 1
                return self._inner.join_channel(h)

        net = Dying(SimnetTransport(graph_scenario()), joins_allowed=2)
        result = run_discovery(make_config(), net, ScriptedChatModel())
        assert result.aborted
        assert len(result.records) == 2


class TestConfigValidation:
    def test_needs_seeds(self):
        with pytest.raises(ConfigInvalid):
            DiscoveryConfig(seed_keywords=())

    def test_negative_depth_rejected(self):
        with pytest.raises(ConfigInvalid):
            make_config(depth_cap=-1)

    def test_zero_harvest_rejected(self):
        with pytest.raises(ConfigInvalid):
            make_config(harvest_limit=0)


class TestExtractActors:
    def test_offer_authors_profiled_with_sources(self):
        net = SimnetTransport(graph_scenario())
        result = run_discovery(make_config(), net, ScriptedChatModel())
        actors = extract_actors(result.records)
        ids = [a.actor_id for a in actors]
        assert ids == ["s1", "s2", "s5"]
        s1 = actors[0]
        assert s1.source_channels == ("seed1",)

    def test_channel_without_offers_contributes_nothing(self):
        net = SimnetTransport(graph_scenario())
        result = run_discovery(make_config(), net, ScriptedChatModel())
        actors = extract_actors(result.records)
        assert "s3" not in [a.actor_id for a in actors]

    def test_cross_channel_author_merged(self):
        records = run_discovery(
            make_config(),
            SimnetTransport(
                build_scenario(
                    {
                        "seed": 1,
                        "start_time_ms": 1_700_000_000_000,
                        "directory": {"nude video chat": ["@x", "@y"]},
                        "channels": [
                            {
                                "handle": "@x",
                                "messages": [{"author": "dual", "text": "pay to chat"}],
                            },
                            {
                                "handle": "@y",
                                "messages": [{"author": "dual", "text": "Pay To Chat!"}],
                            },
                        ],
                        "personas": [],
                    }
                )
            ),
            ScriptedChatModel(),
        ).records
        actors = extract_actors(records)
        assert len(actors) == 1
        assert actors[0].source_channels == ("x", "y")
