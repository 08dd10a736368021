"""Reference workload shared by the shipped scenario files, the prebuilt
example log, and the end-to-end tests.

One cohort table drives everything: the simulated network scenario, the
run config that engages it, and a direct event-log writer that describes
the same population without running the engine. Keeping both artifacts on
one table means the live pipeline and the prebuilt log agree on every
aggregate by construction.

Cohort shape: 120 seller accounts post offers across a 98-channel link
graph. 53 of them are engaged; 30 disclose payment details, 8 stop
replying mid-conversation, 15 never answer. The remaining 67 are
identified but never contacted.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .defaults import DEFAULT_OPENER
from .models import (
    ChannelRecord,
    DiscoverySource,
    JudgedBy,
    OutcomeKind,
    RelevanceDecision,
    RelevanceVerdict,
    SourceKind,
    actor_to_dict,
    canonicalize_handle,
    channel_to_dict,
    disclosure_to_dict,
    verdict_to_dict,
)
from .store import DerivedState, EventStore, emit
from .vision import OcrResult, extract_payment

START_MS = 1_700_000_000_000
SEED = 7
TIMEOUT_MS = 72 * 3600 * 1000

# Trigger substring for the scripted judgment rule; it appears in the
# channel-review prompt and nowhere in conversation drafting prompts.
JUDGE_TRIGGER = "You review digests"
JUDGE_REPLY = "yes\nadvertises paid chat services"
DRAFT_FALLBACK = "sounds good, tell me more."

ENGAGED_COUNT = 53
SUCCESS_COUNT = 30
DISENGAGED_COUNT = 8
GHOST_COUNT = 15
ACTOR_COUNT = 120
CHANNEL_COUNT = 98

_FILLERS = (
    "what do you want to see",
    "i am online now",
    "tell me what you like",
    "we can start any time",
)

# (actor index, round carrying the quote, quote line). Durations cover
# six five-minute bins; the 30-34 bin spans the widest price spread.
_QUOTES: dict[int, tuple[int, str]] = {
    5: (1, "30 min 250 yuan only today"),
    6: (1, "30 min 300 yuan only today"),
    7: (1, "32 min 400 yuan only today"),
    8: (1, "33 min 600 yuan only today"),
    9: (1, "40 min 650 yuan only today"),
    10: (1, "42 min 620 yuan only today"),
    11: (1, "44 min 680 yuan only today"),
    12: (1, "25 min 288 yuan only today"),
    13: (2, "45 min 500 yuan only today"),
    14: (2, "50 min 560 yuan only today"),
    15: (2, "1小时 680元"),
}

_DISENGAGED_ROUNDS = {31: 1, 32: 1, 33: 2, 34: 2, 35: 3, 36: 3, 37: 4, 38: 5}


@dataclass(frozen=True)
class ActorPlan:
    """Everything the builders need to know about one cohort member."""

    actor_id: str
    index: int
    group: str  # success | disengaged | ghost | bystander
    rounds: int
    speed: str  # fast | slow | mid | ""
    label_count: int
    bundle: tuple[str, ...]  # method codes in the closing reply
    quote: tuple[int, str] | None
    kind: str  # simnet persona kind, "" for bystanders


def _success_rounds(i: int) -> int:
    if i <= 4:
        return 1
    if i <= 12:
        return 2
    if i <= 24:
        return 3
    if i <= 28:
        return 4
    return 5


def _success_bundle(i: int) -> tuple[str, ...]:
    if i == 1:
        return ("AI",)
    if i == 2:
        return ("AI", "U")
    if i <= 16:
        return ("AI", "W")
    if i <= 27:
        return ("U", "A")
    if i == 28:
        return ("U", "A", "QI")
    if i == 29:
        return ("U", "QI", "B")
    return ("U", "QI", "PS")


def _speed(i: int) -> str:
    if i <= 14 or 31 <= i <= 34:
        return "fast"
    if i <= 24 or 35 <= i <= 36:
        return "slow"
    return "mid"


def cohort_plan() -> tuple[ActorPlan, ...]:
    plans: list[ActorPlan] = []
    for i in range(1, ACTOR_COUNT + 1):
        actor = f"s{i:03d}"
        if i <= SUCCESS_COUNT:
            speed = _speed(i)
            kind = "upseller" if i == 1 else (
                "slow_platform" if speed == "slow" else "fast_individual"
            )
            plans.append(
                ActorPlan(
                    actor_id=actor,
                    index=i,
                    group="success",
                    rounds=_success_rounds(i),
                    speed=speed,
                    label_count={"fast": 1, "slow": 2, "mid": 0}[speed],
                    bundle=_success_bundle(i),
                    quote=_QUOTES.get(i),
                    kind=kind,
                )
            )
        elif i <= SUCCESS_COUNT + DISENGAGED_COUNT:
            speed = _speed(i)
            plans.append(
                ActorPlan(
                    actor_id=actor,
                    index=i,
                    group="disengaged",
                    rounds=_DISENGAGED_ROUNDS[i],
                    speed=speed,
                    label_count={"fast": 1, "slow": 2, "mid": 0}[speed],
                    bundle=(),
                    quote=None,
                    kind="disengager",
                )
            )
        elif i <= ENGAGED_COUNT:
            plans.append(
                ActorPlan(actor, i, "ghost", 0, "", 0, (), None, "ghost")
            )
        else:
            plans.append(ActorPlan(actor, i, "bystander", 0, "", 0, (), None, ""))
    return tuple(plans)


def engaged_ids() -> list[str]:
    return [p.actor_id for p in cohort_plan() if p.group != "bystander"]


# -- payment detail realizations ---------------------------------------------


def tron_address(i: int) -> str:
    """Valid-shape wallet string, unique per index, letters only so no
    price pattern can fire on it."""
    digits = "".join("abcdefghjk"[int(c)] for c in f"{i:03d}")
    return "T" + "w" * 30 + digits


def alipay_qr(i: int) -> str:
    return f"https://qr.alipay.com/x{i:03d}"


def qq_qr(i: int) -> str:
    return f"https://qm.qq.com/q/{i:03d}"


def _labels(plan: ActorPlan) -> list[str]:
    return [f"{plan.actor_id}-a", f"{plan.actor_id}-b"][: plan.label_count]


def _closing_reply(plan: ActorPlan) -> tuple[str, list[dict]]:
    """Text and media items for the reply that discloses payment."""
    i, actor = plan.index, plan.actor_id
    parts: list[str] = []
    media: list[dict] = []
    if "U" in plan.bundle:
        parts.append(f"usdt trc20 wallet {tron_address(i)}")
    if "W" in plan.bundle:
        parts.append(f"add my wechat {actor}w")
    if "A" in plan.bundle:
        parts.append(f"or alipay account {actor}@pay.example")
    if "B" in plan.bundle:
        parts.append(f"bank transfer to card 6222 4455 {i:04d}")
    if "PS" in plan.bundle:
        parts.append(f"paypal link pay.example/{actor}")
    if "AI" in plan.bundle:
        media.append(
            {"media_id": f"{actor}-qr-a", "kind": "image", "payload": alipay_qr(i)}
        )
    if "QI" in plan.bundle:
        media.append(
            {"media_id": f"{actor}-qr-q", "kind": "image", "payload": qq_qr(i)}
        )
    return ("; ".join(parts) if parts else "scan this code to pay"), media


def reply_script(plan: ActorPlan) -> list[dict]:
    """Per-round reply items {text, media}; the persona script and the
    prebuilt log both render from this."""
    steps: list[dict] = []
    for r in range(1, plan.rounds + 1):
        closing = plan.group == "success" and r == plan.rounds
        if closing:
            text, media = _closing_reply(plan)
        else:
            media = []
            if plan.quote is not None and plan.quote[0] == r:
                text = plan.quote[1]
            else:
                text = _FILLERS[(plan.index + r) % len(_FILLERS)]
        if r == 1 and plan.label_count:
            if media:
                media[0] = dict(media[0], person_labels=_labels(plan))
            else:
                media = [
                    {
                        "media_id": f"{plan.actor_id}-intro",
                        "kind": "image",
                        "person_labels": _labels(plan),
                    }
                ]
        step = {"text": text}
        if media:
            step["media"] = media
        steps.append(step)
    return steps


# -- channel graph -----------------------------------------------------------


def channel_names() -> list[str]:
    return (
        [f"hub{i:02d}" for i in range(1, 11)]
        + [f"ring{i:02d}" for i in range(1, 51)]
        + [f"cell{i:02d}" for i in range(1, 31)]
        + [f"vault{i:02d}" for i in range(1, 9)]
    )


def actor_channels(i: int) -> tuple[str, ...]:
    """Where actor i posts its offer; a few actors post in two places."""
    names = channel_names()
    chans = {names[(i - 1) % CHANNEL_COUNT]}
    if i <= 22:
        chans.add(names[(i * 7 + 13) % CHANNEL_COUNT])
    return tuple(sorted(chans))


def _channel_meta(name: str) -> tuple[int, str, str]:
    """(depth, source kind, source detail) for one channel."""
    n = int(name[-2:])
    if name.startswith("hub"):
        keyword = "nude video chat" if n <= 5 else "sexy chat"
        return 0, "directory_query", keyword
    if name.startswith("ring"):
        return 1, "cross_link", f"hub{(n - 1) // 5 + 1:02d}"
    if name.startswith("cell"):
        return 2, "cross_link", f"ring{n:02d}"
    return 3, "cross_link", f"cell{n:02d}"


def _link_pin(name: str) -> str | None:
    n = int(name[-2:])
    if name.startswith("hub"):
        rings = " ".join(f"@ring{j:02d}" for j in range(5 * n - 4, 5 * n + 1))
        return f"rooms: {rings}"
    if name.startswith("ring") and n <= 30:
        return f"backup @cell{n:02d}"
    if name.startswith("cell") and n <= 8:
        return f"vip @vault{n:02d}"
    return None


def _offers_by_channel() -> dict[str, list[str]]:
    posts: dict[str, list[str]] = {name: [] for name in channel_names()}
    for plan in cohort_plan():
        for chan in actor_channels(plan.index):
            posts[chan].append(plan.actor_id)
    return posts


# -- scenario, config, and rules ---------------------------------------------


def build_scenario_data(seed: int = SEED) -> dict:
    """Scenario mapping for the simulated network loader."""
    offers = _offers_by_channel()
    channels = []
    for name in channel_names():
        item: dict = {"handle": name, "title": f"{name} room"}
        pin = _link_pin(name)
        if pin is not None:
            item["pinned"] = [{"text": pin}]
        item["messages"] = [
            {"author": actor, "text": f"pay to chat, ask for {actor}"}
            for actor in offers[name]
        ]
        channels.append(item)

    personas = []
    for plan in cohort_plan():
        if not plan.kind:
            continue
        persona: dict = {"persona_id": plan.actor_id, "kind": plan.kind}
        if plan.kind == "ghost":
            personas.append(persona)
            continue
        if plan.speed == "fast":
            persona["latency"] = {"fixed_s": 60}
        elif plan.speed == "mid":
            persona["latency"] = {"fixed_s": 90}
        else:
            persona["latency"] = {"uniform_s": [1800, 7200]}
        persona["script"] = reply_script(plan)
        if plan.kind == "disengager":
            persona["disengage_after"] = plan.rounds
        personas.append(persona)

    return {
        "seed": seed,
        "start_time_ms": START_MS,
        "directory": {
            "nude video chat": [f"hub{i:02d}" for i in range(1, 6)],
            "sexy chat": [f"hub{i:02d}" for i in range(6, 11)],
        },
        "channels": channels,
        "personas": personas,
    }


def build_run_config(
    scenario_file: str = "scenario.yaml", rules_file: str = "llm_rules.json"
) -> dict:
    return {
        "transport": "simnet",
        "scenario": scenario_file,
        "llm": {"adapter": "scripted", "script": rules_file},
        "discovery": {
            "seed_keywords": ["nude video chat", "sexy chat"],
            "synonym_fanout": 0,
            "depth_cap": 3,
        },
        "engagement": {"auto_approve": True, "targets": engaged_ids()},
    }


def build_llm_rules() -> dict:
    return {
        "rules": [{"if_contains": JUDGE_TRIGGER, "respond": JUDGE_REPLY}],
        "fallback": DRAFT_FALLBACK,
    }


def write_workload(out_dir: str | Path, seed: int = SEED) -> dict[str, Path]:
    """Write scenario.yaml, config.yaml, and llm_rules.json."""
    import json

    import yaml

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "scenario": out / "scenario.yaml",
        "config": out / "config.yaml",
        "rules": out / "llm_rules.json",
    }
    paths["scenario"].write_text(
        yaml.safe_dump(build_scenario_data(seed), allow_unicode=True, width=100),
        encoding="utf-8",
    )
    paths["config"].write_text(
        yaml.safe_dump(build_run_config(), allow_unicode=True, width=100),
        encoding="utf-8",
    )
    paths["rules"].write_text(
        json.dumps(build_llm_rules(), indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
    return paths


# -- prebuilt event log ------------------------------------------------------


def _fixture_latency_ms(plan: ActorPlan, r: int) -> int:
    if plan.speed == "fast":
        return 60_000
    if plan.speed == "mid":
        return 90_000
    return 1_800_000 + ((plan.index * 7 + r * 13) % 90) * 60_000


def _message_media(items: list[dict]) -> list[dict]:
    return [
        {
            "media_id": m["media_id"],
            "kind": m.get("kind", "image"),
            "person_labels": list(m.get("person_labels", ())),
        }
        for m in items
    ]


def _disclosures(text: str, media_items: list[dict], message_id: str) -> list:
    found = extract_payment(text, None, message_id)
    for item in media_items:
        payload = item.get("payload")
        if payload:
            found.extend(
                extract_payment(
                    "", OcrResult(item["media_id"], payload, "identity"), message_id
                )
            )
    unique, seen = [], set()
    for d in found:
        key = (d.method, d.detail)
        if key not in seen:
            seen.add(key)
            unique.append(d)
    return unique


def _message_dict(
    message_id: str, direction: str, ts: int, text: str, media: list[dict], rnd: int
) -> dict:
    return {
        "message_id": message_id,
        "direction": direction,
        "timestamp": ts,
        "text": text,
        "media": media,
        "ocr_text": None,
        "round_index": rnd,
        "author": None,
    }


def build_example_log(path: str | Path) -> Path:
    """Write a ready-made event log for the cohort: discovery, judgment,
    and one fully recorded conversation per engaged actor. Channel posts
    are omitted from the discovery records to keep the file small; actor
    and conversation data carry everything the reports read."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.exists():
        path.unlink()
    store = EventStore(path=path)
    state = DerivedState()
    verdict = RelevanceVerdict(
        decision=RelevanceDecision.RELEVANT,
        rationale="advertises paid chat services",
        judged_by=JudgedBy.MODEL,
    )

    for name in channel_names():
        depth, kind, detail = _channel_meta(name)
        record = ChannelRecord(
            handle=canonicalize_handle(name),
            title=f"{name} room",
            discovery_source=DiscoverySource(SourceKind(kind), detail),
            depth=depth,
        )
        emit(
            store, state, "ChannelDiscovered", {"channel": channel_to_dict(record)}, START_MS
        )
    for name in channel_names():
        emit(
            store,
            state,
            "ChannelJudged",
            {"canonical": name, "verdict": verdict_to_dict(verdict)},
            START_MS,
        )
    from .models import ActorProfile

    for plan in cohort_plan():
        profile = ActorProfile(
            actor_id=plan.actor_id, source_channels=actor_channels(plan.index)
        )
        emit(store, state, "ActorIdentified", {"actor": actor_to_dict(profile)}, START_MS)

    for plan in cohort_plan():
        if plan.group == "bystander":
            continue
        _emit_conversation(store, state, plan)

    store.close()
    return path


def _emit_conversation(store: EventStore, state: DerivedState, plan: ActorPlan) -> None:
    cid = f"conv-{plan.actor_id}"
    t = START_MS + plan.index * 1000
    emit(
        store,
        state,
        "SessionOpened",
        {"conversation_id": cid, "actor_id": plan.actor_id, "transport_key": plan.actor_id},
        t,
    )

    def send(n: int, text: str, ts: int) -> None:
        draft_id = f"{cid}-draft-{n}"
        emit(
            store,
            state,
            "DraftCreated",
            {"conversation_id": cid, "draft_id": draft_id, "text": text},
            ts,
        )
        emit(
            store,
            state,
            "OperatorDecision",
            {
                "conversation_id": cid,
                "draft_id": draft_id,
                "decision": "approve",
                "operator_id": "auto",
            },
            ts,
        )
        emit(
            store,
            state,
            "MessageSent",
            {
                "conversation_id": cid,
                "draft_id": draft_id,
                "message": _message_dict(
                    f"{cid}-out-{n}", "outbound", ts, text, [], n
                ),
            },
            ts,
        )

    send(1, DEFAULT_OPENER, t)
    out_ts = t

    if plan.group == "ghost":
        _terminate(store, state, cid, OutcomeKind.NO_RESPONSE, [], t + TIMEOUT_MS)
        return

    steps = reply_script(plan)
    for r in range(1, plan.rounds + 1):
        step = steps[r - 1]
        media_items = step.get("media", [])
        in_ts = out_ts + _fixture_latency_ms(plan, r)
        message_id = f"{cid}-in-{r}"
        emit(
            store,
            state,
            "MessageReceived",
            {
                "conversation_id": cid,
                "message": _message_dict(
                    message_id,
                    "inbound",
                    in_ts,
                    step["text"],
                    _message_media(media_items),
                    r,
                ),
            },
            in_ts,
        )
        for item in media_items:
            payload = item.get("payload")
            if payload:
                emit(
                    store,
                    state,
                    "OcrAttached",
                    {
                        "conversation_id": cid,
                        "message_id": message_id,
                        "media_id": item["media_id"],
                        "text": payload,
                        "engine_tag": "identity",
                    },
                    in_ts,
                )
        closing = plan.group == "success" and r == plan.rounds
        if closing:
            found = _disclosures(step["text"], media_items, message_id)
            for d in found:
                emit(
                    store,
                    state,
                    "DisclosureFound",
                    {"conversation_id": cid, "disclosure": disclosure_to_dict(d)},
                    in_ts,
                )
            _terminate(store, state, cid, OutcomeKind.PAYMENT_OBTAINED, found, in_ts)
            return
        send(r + 1, DRAFT_FALLBACK, in_ts + 5000)
        out_ts = in_ts + 5000

    _terminate(store, state, cid, OutcomeKind.DISENGAGED, [], out_ts + TIMEOUT_MS)


def _terminate(
    store: EventStore,
    state: DerivedState,
    cid: str,
    kind: OutcomeKind,
    evidence: list,
    at: int,
) -> None:
    emit(
        store,
        state,
        "SessionTerminated",
        {
            "conversation_id": cid,
            "outcome": {
                "kind": kind.value,
                "evidence": [disclosure_to_dict(d) for d in evidence],
            },
            "retry_counter": 0,
        },
        at,
    )
