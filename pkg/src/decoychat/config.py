"""Run configuration: file schema, validation guards, and builders that
turn a parsed config into live transport/model/policy objects.

A run config is one YAML or JSON mapping:

    transport: simnet | live
    scenario: path              # required for simnet
    store: path                 # optional default event-log location
    substitutions: [[phrase, replacement], ...]        # optional, inline
    substitutions_path: path                           # or from a file
    payment_patterns: [[method, kind, expression, carrier|null], ...]
    discovery: {seed_keywords, synonym_fanout, depth_cap, harvest_limit,
                directory_max_results, offer_patterns}
    engagement: {opener_text, max_retries, no_response_timeout_s,
                 max_rounds, auto_approve, regeneration_cap,
                 context_messages, targets}
    gateway: {host, port}
    llm: {adapter: scripted | http, script: path, endpoint, model}

Relative paths are resolved against the config file's directory. Two
guards are hard errors: auto_approve is only legal on the simulated
transport, and the live transport stub must be opted into explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import yaml

from .defaults import (
    DEFAULT_OFFER_PATTERNS,
    DEFAULT_OPENER,
    DEFAULT_PAYMENT_PATTERNS,
    DEFAULT_SEED_KEYWORDS,
    DEFAULT_SUBSTITUTIONS,
    PatternRow,
)
from .discovery import DiscoveryConfig
from .engagement import EngagementPolicy, SubstitutionTable
from .errors import ConfigInvalid
from .llm import ChatModel, HttpChatModel, ScriptedChatModel, load_script
from .models import Carrier, PaymentMethod
from .simnet import SimnetTransport, build_scenario
from .transport import LiveStubTransport, Transport


@dataclass(frozen=True)
class LlmSettings:
    adapter: str = "scripted"
    script_path: Path | None = None
    endpoint: str | None = None
    model_name: str | None = None


@dataclass(frozen=True)
class GatewaySettings:
    host: str = "127.0.0.1"
    port: int = 0


@dataclass(frozen=True)
class EngagementSettings:
    policy: EngagementPolicy = field(default_factory=EngagementPolicy)
    targets: tuple[str, ...] = ()  # empty means engage every relevant actor


@dataclass(frozen=True)
class RunConfig:
    transport: str = "simnet"
    scenario_path: Path | None = None
    store_path: Path | None = None
    substitutions: SubstitutionTable = DEFAULT_SUBSTITUTIONS
    payment_patterns: tuple[PatternRow, ...] = DEFAULT_PAYMENT_PATTERNS
    discovery: DiscoveryConfig = field(
        default_factory=lambda: DiscoveryConfig(seed_keywords=DEFAULT_SEED_KEYWORDS)
    )
    engagement: EngagementSettings = field(default_factory=EngagementSettings)
    gateway: GatewaySettings = field(default_factory=GatewaySettings)
    llm: LlmSettings = field(default_factory=LlmSettings)


_TOP_KEYS = {
    "transport",
    "scenario",
    "store",
    "substitutions",
    "substitutions_path",
    "payment_patterns",
    "discovery",
    "engagement",
    "gateway",
    "llm",
}

_ENGAGEMENT_KEYS = {
    "opener_text",
    "max_retries",
    "no_response_timeout_s",
    "max_rounds",
    "auto_approve",
    "regeneration_cap",
    "context_messages",
    "targets",
}

_DISCOVERY_KEYS = {
    "seed_keywords",
    "synonym_fanout",
    "depth_cap",
    "harvest_limit",
    "directory_max_results",
    "offer_patterns",
}


def load_mapping(path: str | Path) -> dict[str, Any]:
    """Parse a YAML or JSON file (by suffix) into a mapping."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigInvalid(f"cannot read {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigInvalid(f"cannot parse {path}: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigInvalid(f"{path}: top level must be a mapping")
    return data


def _reject_unknown(section: str, data: dict[str, Any], allowed: set[str]) -> None:
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigInvalid(f"unknown {section} keys: {', '.join(unknown)}")


def _resolve(base: Path, value: Any) -> Path:
    p = Path(str(value))
    return p if p.is_absolute() else base / p


def _parse_substitutions(raw: Any) -> SubstitutionTable:
    out = []
    for item in raw or ():
        if not isinstance(item, (list, tuple)) or len(item) != 2:
            raise ConfigInvalid(f"substitution rows are [phrase, replacement]: {item}")
        out.append((str(item[0]), str(item[1])))
    return tuple(out)


def _parse_payment_patterns(raw: Any) -> tuple[PatternRow, ...]:
    rows: list[PatternRow] = []
    for item in raw or ():
        if not isinstance(item, (list, tuple)) or len(item) != 4:
            raise ConfigInvalid(
                f"payment pattern rows are [method, kind, expression, carrier]: {item}"
            )
        method_raw, kind, expression, carrier_raw = item
        try:
            method = PaymentMethod(method_raw)
            carrier = None if carrier_raw is None else Carrier(carrier_raw)
        except ValueError as exc:
            raise ConfigInvalid(f"bad payment pattern row {item}: {exc}") from exc
        rows.append((method, str(kind), str(expression), carrier))
    return tuple(rows)


def _parse_discovery(raw: dict[str, Any]) -> DiscoveryConfig:
    _reject_unknown("discovery", raw, _DISCOVERY_KEYS)
    kwargs: dict[str, Any] = {}
    if "seed_keywords" in raw:
        kwargs["seed_keywords"] = tuple(str(k) for k in raw["seed_keywords"])
    else:
        kwargs["seed_keywords"] = DEFAULT_SEED_KEYWORDS
    for key in ("synonym_fanout", "depth_cap", "harvest_limit", "directory_max_results"):
        if key in raw:
            kwargs[key] = int(raw[key])
    if "offer_patterns" in raw:
        kwargs["offer_patterns"] = tuple(str(p) for p in raw["offer_patterns"])
    return DiscoveryConfig(**kwargs)


def _parse_engagement(raw: dict[str, Any]) -> EngagementSettings:
    _reject_unknown("engagement", raw, _ENGAGEMENT_KEYS)
    policy_kwargs: dict[str, Any] = {}
    for key in _ENGAGEMENT_KEYS - {"targets"}:
        if key in raw:
            policy_kwargs[key] = raw[key]
    try:
        policy = EngagementPolicy(**policy_kwargs)
    except TypeError as exc:
        raise ConfigInvalid(f"bad engagement settings: {exc}") from exc
    targets = tuple(str(t) for t in raw.get("targets", ()))
    return EngagementSettings(policy=policy, targets=targets)


def load_config(path: str | Path, enable_live: bool = False) -> RunConfig:
    """Parse and validate a run config file. `enable_live` mirrors the
    --enable-live flag; without it a live-transport config is rejected."""
    path = Path(path)
    data = load_mapping(path)
    _reject_unknown("config", data, _TOP_KEYS)
    base = path.parent

    transport = str(data.get("transport", "simnet"))
    if transport not in ("simnet", "live"):
        raise ConfigInvalid(f"transport must be simnet or live, got {transport!r}")
    if transport == "live" and not enable_live:
        raise ConfigInvalid("live transport requires the --enable-live flag")

    scenario_path = (
        _resolve(base, data["scenario"]) if data.get("scenario") is not None else None
    )
    if transport == "simnet" and scenario_path is None:
        raise ConfigInvalid("simnet transport needs a scenario path")
    store_path = (
        _resolve(base, data["store"]) if data.get("store") is not None else None
    )

    if "substitutions" in data and "substitutions_path" in data:
        raise ConfigInvalid("give substitutions inline or by path, not both")
    if "substitutions_path" in data:
        sub_raw = load_mapping(_resolve(base, data["substitutions_path"]))
        substitutions = _parse_substitutions(sub_raw.get("substitutions"))
    elif "substitutions" in data:
        substitutions = _parse_substitutions(data["substitutions"])
    else:
        substitutions = DEFAULT_SUBSTITUTIONS

    if "payment_patterns" in data:
        payment_patterns = _parse_payment_patterns(data["payment_patterns"])
    else:
        payment_patterns = DEFAULT_PAYMENT_PATTERNS

    discovery = _parse_discovery(dict(data.get("discovery") or {}))
    engagement = _parse_engagement(dict(data.get("engagement") or {}))

    if engagement.policy.auto_approve and transport != "simnet":
        raise ConfigInvalid("auto_approve is only legal on the simnet transport")

    gw_raw = dict(data.get("gateway") or {})
    _reject_unknown("gateway", gw_raw, {"host", "port"})
    gateway = GatewaySettings(
        host=str(gw_raw.get("host", "127.0.0.1")), port=int(gw_raw.get("port", 0))
    )

    llm_raw = dict(data.get("llm") or {})
    _reject_unknown("llm", llm_raw, {"adapter", "script", "endpoint", "model"})
    adapter = str(llm_raw.get("adapter", "scripted"))
    if adapter not in ("scripted", "http"):
        raise ConfigInvalid(f"llm adapter must be scripted or http, got {adapter!r}")
    if adapter == "http" and not (llm_raw.get("endpoint") and llm_raw.get("model")):
        raise ConfigInvalid("http llm adapter needs endpoint and model")
    llm = LlmSettings(
        adapter=adapter,
        script_path=(
            _resolve(base, llm_raw["script"]) if llm_raw.get("script") else None
        ),
        endpoint=llm_raw.get("endpoint"),
        model_name=llm_raw.get("model"),
    )

    return RunConfig(
        transport=transport,
        scenario_path=scenario_path,
        store_path=store_path,
        substitutions=substitutions,
        payment_patterns=payment_patterns,
        discovery=discovery,
        engagement=engagement,
        gateway=gateway,
        llm=llm,
    )


def with_overrides(
    cfg: RunConfig,
    auto_approve: bool | None = None,
    targets: tuple[str, ...] | None = None,
) -> RunConfig:
    """Apply CLI-level overrides, re-checking the auto-approve guard."""
    engagement = cfg.engagement
    if auto_approve is not None:
        engagement = replace(
            engagement, policy=replace(engagement.policy, auto_approve=auto_approve)
        )
    if targets is not None:
        engagement = replace(engagement, targets=targets)
    if engagement.policy.auto_approve and cfg.transport != "simnet":
        raise ConfigInvalid("auto_approve is only legal on the simnet transport")
    return replace(cfg, engagement=engagement)


def build_transport(cfg: RunConfig, seed: int | None = None) -> Transport:
    if cfg.transport == "live":
        if seed is not None:
            raise ConfigInvalid("--seed only applies to the simnet transport")
        return LiveStubTransport()
    data = load_mapping(cfg.scenario_path)
    if seed is not None:
        data["seed"] = seed
    try:
        return SimnetTransport(build_scenario(data))
    except (KeyError, TypeError) as exc:
        raise ConfigInvalid(f"malformed scenario: {exc!r}") from exc


def build_model(cfg: RunConfig) -> ChatModel:
    if cfg.llm.adapter == "http":
        return HttpChatModel(endpoint=cfg.llm.endpoint, model_name=cfg.llm.model_name)
    if cfg.llm.script_path is not None:
        try:
            return load_script(cfg.llm.script_path)
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigInvalid(
                f"cannot load llm script {cfg.llm.script_path}: {exc}"
            ) from exc
    return ScriptedChatModel()
