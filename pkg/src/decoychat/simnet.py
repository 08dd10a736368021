"""Deterministic simulated messaging network.

Everything runs on a virtual clock that only moves through advance_time.
Persona replies are scheduled when an outbound message arrives: the
latency is sampled from the persona's spec with the scenario-seeded RNG,
so a fixed (scenario, seed, caller action sequence) triple always yields
the same event log, byte for byte.

Timers fire in (fire_at, persona, schedule order) order; burst messages
within one script step are staggered one millisecond apart to keep all
timestamps distinct. Sampled latencies are clamped to at least 1 ms so an
event never lands exactly on an already-consumed poll boundary.
"""

from __future__ import annotations

import heapq
import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .errors import (
    Blocked,
    ConfigInvalid,
    JoinRejected,
    NotJoined,
    UnknownChannel,
)
from .models import (
    ChannelHandle,
    ChatMessage,
    Direction,
    MediaKind,
    MediaRef,
    canonicalize_handle,
)
from .transport import DirectoryQuery, InboundEvent, OutboundMessage, SendReceipt

PERSONA_KINDS = frozenset(
    {
        "fast_individual",
        "slow_platform",
        "bot_greeter",
        "ghost",
        "disengager",
        "upseller",
    }
)


@dataclass(frozen=True)
class LatencySpec:
    fixed_ms: int | None = None
    uniform_ms: tuple[int, int] | None = None

    def sample(self, rng: random.Random) -> int:
        if self.fixed_ms is not None:
            return max(1, self.fixed_ms)
        assert self.uniform_ms is not None
        lo, hi = self.uniform_ms
        return max(1, rng.randint(lo, hi))


@dataclass(frozen=True)
class ScriptMessage:
    text: str = ""
    media: tuple[MediaRef, ...] = ()


@dataclass(frozen=True)
class ScriptStep:
    """One reply turn; multiple messages make a burst."""

    messages: tuple[ScriptMessage, ...]


@dataclass
class PersonaScript:
    persona_id: str
    kind: str
    latency: LatencySpec
    script: tuple[ScriptStep, ...] = ()
    disengage_after: int | None = None
    greeting: str | None = None
    blocks: bool = False


@dataclass
class SimChannel:
    handle: ChannelHandle
    title: str
    pinned: list[ChatMessage] = field(default_factory=list)
    messages: list[ChatMessage] = field(default_factory=list)  # oldest first
    join_rejected: bool = False


@dataclass
class Scenario:
    seed: int
    start_time_ms: int
    directory: dict[str, list[ChannelHandle]]  # normalized keyword -> handles
    channels: dict[str, SimChannel]  # canonical -> channel
    personas: dict[str, PersonaScript]
    payloads: dict[str, str]  # media_id -> image text payload


def _parse_media(items: Any, payloads: dict[str, str]) -> tuple[MediaRef, ...]:
    refs = []
    for item in items or ():
        ref = MediaRef(
            media_id=item["media_id"],
            kind=MediaKind(item.get("kind", "image")),
            person_labels=tuple(item.get("person_labels", ())),
        )
        refs.append(ref)
        if "payload" in item:
            payloads[ref.media_id] = item["payload"]
    return tuple(refs)


def _parse_script_message(item: Any, payloads: dict[str, str]) -> ScriptMessage:
    return ScriptMessage(
        text=item.get("text", ""),
        media=_parse_media(item.get("media"), payloads),
    )


def _parse_step(item: Any, payloads: dict[str, str]) -> ScriptStep:
    if "burst" in item:
        messages = tuple(_parse_script_message(m, payloads) for m in item["burst"])
    else:
        messages = (_parse_script_message(item, payloads),)
    if not messages:
        raise ConfigInvalid("script step with no messages")
    return ScriptStep(messages=messages)


def _parse_latency(item: Any) -> LatencySpec:
    if "fixed_s" in item:
        return LatencySpec(fixed_ms=int(item["fixed_s"] * 1000))
    if "uniform_s" in item:
        lo, hi = item["uniform_s"]
        if lo > hi:
            raise ConfigInvalid(f"latency range inverted: {item}")
        return LatencySpec(uniform_ms=(int(lo * 1000), int(hi * 1000)))
    raise ConfigInvalid(f"latency spec needs fixed_s or uniform_s: {item}")


def _parse_persona(item: Any, payloads: dict[str, str]) -> PersonaScript:
    kind = item.get("kind", "")
    if kind not in PERSONA_KINDS:
        raise ConfigInvalid(f"unknown persona kind: {kind!r}")
    script = tuple(_parse_step(s, payloads) for s in item.get("script", ()))
    if kind == "ghost" and script:
        raise ConfigInvalid(f"ghost persona {item['persona_id']} must have no script")
    if kind == "disengager" and item.get("disengage_after") is None:
        raise ConfigInvalid(f"disengager {item['persona_id']} needs disengage_after")
    if kind == "ghost":
        latency = LatencySpec(fixed_ms=1)
    else:
        if "latency" not in item:
            raise ConfigInvalid(f"persona {item['persona_id']} needs a latency spec")
        latency = _parse_latency(item["latency"])
    return PersonaScript(
        persona_id=item["persona_id"],
        kind=kind,
        latency=latency,
        script=script,
        disengage_after=item.get("disengage_after"),
        greeting=item.get("greeting"),
        blocks=bool(item.get("blocks", False)),
    )


def _parse_channel_posts(
    raw: Any, canonical: str, tag: str, payloads: dict[str, str]
) -> list[dict[str, Any]]:
    out = []
    for i, item in enumerate(raw or ()):
        out.append(
            {
                "message_id": item.get("message_id", f"{canonical}-{tag}-{i}"),
                "author": item.get("author"),
                "text": item.get("text", ""),
                "media": _parse_media(item.get("media"), payloads),
            }
        )
    return out


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
        data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except OSError as exc:
        raise ConfigInvalid(f"cannot read scenario {path}: {exc}") from exc
    except (ValueError, yaml.YAMLError) as exc:
        raise ConfigInvalid(f"cannot parse scenario {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigInvalid("scenario root must be a mapping")
    try:
        return build_scenario(data)
    except (KeyError, TypeError) as exc:
        raise ConfigInvalid(f"malformed scenario: {exc!r}") from exc


def build_scenario(data: dict[str, Any]) -> Scenario:
    payloads: dict[str, str] = {}
    seed = int(data.get("seed", 0))
    start_time_ms = int(data.get("start_time_ms", 1_600_000_000_000))

    channels: dict[str, SimChannel] = {}
    for item in data.get("channels", ()):
        handle = canonicalize_handle(item["handle"])
        pinned_raw = _parse_channel_posts(
            item.get("pinned"), handle.canonical, "pin", payloads
        )
        msgs_raw = _parse_channel_posts(
            item.get("messages"), handle.canonical, "msg", payloads
        )
        # Posts are timestamped backwards from the scenario start, oldest
        # first, one minute apart; pins predate ordinary messages.
        total = len(pinned_raw) + len(msgs_raw)
        posts: list[ChatMessage] = []
        for i, raw in enumerate(pinned_raw + msgs_raw):
            posts.append(
                ChatMessage(
                    message_id=raw["message_id"],
                    direction=Direction.INBOUND,
                    timestamp=start_time_ms - (total - i) * 60_000,
                    text=raw["text"],
                    media=raw["media"],
                    author=raw["author"],
                )
            )
        channels[handle.canonical] = SimChannel(
            handle=handle,
            title=item.get("title", handle.canonical),
            pinned=posts[: len(pinned_raw)],
            messages=posts[len(pinned_raw):],
            join_rejected=bool(item.get("join_rejected", False)),
        )

    personas: dict[str, PersonaScript] = {}
    for item in data.get("personas", ()):
        persona = _parse_persona(item, payloads)
        if persona.persona_id in personas:
            raise ConfigInvalid(f"duplicate persona_id: {persona.persona_id}")
        personas[persona.persona_id] = persona

    directory: dict[str, list[ChannelHandle]] = {}
    for keyword, raw_handles in (data.get("directory") or {}).items():
        normalized = " ".join(keyword.strip().lower().split())
        directory[normalized] = [canonicalize_handle(h) for h in raw_handles]

    return Scenario(
        seed=seed,
        start_time_ms=start_time_ms,
        directory=directory,
        channels=channels,
        personas=personas,
        payloads=payloads,
    )


class SimnetTransport:
    """Transport implementation over a Scenario. Single-threaded by
    contract: advance_time must not interleave with sends."""

    def __init__(self, scenario: Scenario):
        self._scenario = scenario
        self._rng = random.Random(scenario.seed)
        self._clock = scenario.start_time_ms
        self._joined: set[str] = set()
        # heap entries: (fire_at, persona_id, schedule_seq, message)
        self._timers: list[tuple[int, str, int, ChatMessage]] = []
        self._schedule_seq = 0
        self._events: list[InboundEvent] = []
        self._event_seq = 0
        self._outbound_counts: dict[str, int] = {}
        self._reply_counters: dict[str, int] = {}

    @property
    def now_ms(self) -> int:
        return self._clock

    # -- channels ----------------------------------------------------------

    def query_directory(self, q: DirectoryQuery) -> list[ChannelHandle]:
        normalized = " ".join(q.keyword.strip().lower().split())
        handles = self._scenario.directory.get(normalized, [])
        unique: dict[str, ChannelHandle] = {}
        for h in handles:
            unique.setdefault(h.canonical, h)
        ordered = [unique[k] for k in sorted(unique)]
        return ordered[: q.max_results]

    def join_channel(self, h: ChannelHandle) -> bool:
        channel = self._scenario.channels.get(h.canonical)
        if channel is None:
            raise UnknownChannel(f"no such channel: {h.canonical}")
        if channel.join_rejected:
            raise JoinRejected(f"join rejected: {h.canonical}")
        self._joined.add(h.canonical)
        return True

    def fetch_history(
        self, h: ChannelHandle, limit: int
    ) -> tuple[list[ChatMessage], list[ChatMessage]]:
        if h.canonical not in self._joined:
            raise NotJoined(f"not joined: {h.canonical}")
        channel = self._scenario.channels[h.canonical]
        newest_first = list(reversed(channel.messages))[:limit]
        return newest_first, list(channel.pinned)

    def channel_title(self, h: ChannelHandle) -> str:
        channel = self._scenario.channels.get(h.canonical)
        if channel is None:
            raise UnknownChannel(f"no such channel: {h.canonical}")
        return channel.title

    # -- direct messages ---------------------------------------------------

    def send_message(self, target: str, m: OutboundMessage) -> SendReceipt:
        persona = self._scenario.personas.get(target)
        if persona is None:
            raise UnknownChannel(f"no such persona: {target}")
        if persona.blocks:
            raise Blocked(f"persona blocks sender: {target}")
        receipt = SendReceipt(target=target, sent_at=self._clock)
        count = self._outbound_counts.get(target, 0) + 1
        self._outbound_counts[target] = count

        if count == 1 and persona.greeting is not None:
            self._schedule(persona, ScriptMessage(text=persona.greeting), 1000)

        if persona.disengage_after is not None and count > persona.disengage_after:
            return receipt
        if count > len(persona.script):
            return receipt

        step = persona.script[count - 1]
        base = persona.latency.sample(self._rng)
        for offset, sm in enumerate(step.messages):
            self._schedule(persona, sm, base + offset)
        return receipt

    def _schedule(self, persona: PersonaScript, sm: ScriptMessage, delay_ms: int) -> None:
        fire_at = self._clock + delay_ms
        n = self._reply_counters.get(persona.persona_id, 0) + 1
        self._reply_counters[persona.persona_id] = n
        msg = ChatMessage(
            message_id=f"sim-{persona.persona_id}-{n}",
            direction=Direction.INBOUND,
            timestamp=fire_at,
            text=sm.text,
            media=sm.media,
        )
        self._schedule_seq += 1
        heapq.heappush(
            self._timers, (fire_at, persona.persona_id, self._schedule_seq, msg)
        )

    # -- clock -------------------------------------------------------------

    def advance_time(self, delta_s: float) -> int:
        if delta_s < 0:
            raise ValueError("cannot advance time backwards")
        target = self._clock + int(round(delta_s * 1000))
        fired = 0
        while self._timers and self._timers[0][0] <= target:
            fire_at, persona_id, _, msg = heapq.heappop(self._timers)
            self._clock = max(self._clock, fire_at)
            self._event_seq += 1
            self._events.append(
                InboundEvent(
                    source=persona_id,
                    message=msg,
                    received_at=fire_at,
                    seq=self._event_seq,
                )
            )
            fired += 1
        self._clock = target
        return fired

    def next_timer_at(self) -> int | None:
        return self._timers[0][0] if self._timers else None

    def poll_events(self, since: int) -> list[InboundEvent]:
        return [e for e in self._events if e.received_at > since]

    def media_payload(self, media_id: str) -> str:
        return self._scenario.payloads.get(media_id, "")
