"""Chat-completion adapters.

Two implementations of one tiny protocol: a deterministic scripted model
for offline runs and tests, and a thin HTTP client for a real endpoint.
Refusal detection is a heuristic over the reply text; adapters that know
better can raise LlmRefusal themselves.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import requests

from .defaults import DEFAULT_REFUSAL_MARKERS
from .errors import LlmUnavailable


class ChatModel(Protocol):
    def complete(self, system: str, prompt: str) -> str: ...


def is_refusal(reply: str, markers: tuple[str, ...] = DEFAULT_REFUSAL_MARKERS) -> bool:
    """Substring heuristic over the reply; case-insensitive."""
    low = reply.lower()
    return any(m.lower() in low for m in markers)


@dataclass(frozen=True)
class ScriptRule:
    """First rule whose trigger appears in system+prompt wins."""

    if_contains: str
    respond: str


@dataclass
class ScriptedChatModel:
    """Deterministic rule table; records every call for assertions."""

    rules: tuple[ScriptRule, ...] = ()
    fallback: str = "sounds good, tell me more."
    calls: list[tuple[str, str]] = field(default_factory=list)

    def complete(self, system: str, prompt: str) -> str:
        self.calls.append((system, prompt))
        haystack = f"{system}\n{prompt}".lower()
        for rule in self.rules:
            if rule.if_contains.lower() in haystack:
                return rule.respond
        return self.fallback


def load_script(path: str | Path) -> ScriptedChatModel:
    """Build a scripted model from a JSON file:
    {"rules": [{"if_contains": ..., "respond": ...}], "fallback": ...}."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    rules = tuple(
        ScriptRule(if_contains=r["if_contains"], respond=r["respond"])
        for r in data.get("rules", ())
    )
    model = ScriptedChatModel(rules=rules)
    if "fallback" in data:
        model.fallback = data["fallback"]
    return model


@dataclass
class HttpChatModel:
    """Minimal client for an OpenAI-style chat completion endpoint."""

    endpoint: str
    model_name: str
    timeout_s: float = 30.0

    def complete(self, system: str, prompt: str) -> str:
        body = {
            "model": self.model_name,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": prompt},
            ],
        }
        try:
            resp = requests.post(self.endpoint, json=body, timeout=self.timeout_s)
            resp.raise_for_status()
            payload = resp.json()
            return payload["choices"][0]["message"]["content"]
        except (requests.RequestException, KeyError, IndexError, ValueError) as exc:
            raise LlmUnavailable(f"chat endpoint failed: {exc}") from exc
