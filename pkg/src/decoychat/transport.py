"""Messaging backend interface shared by the simulated network and the
live stub.

Targets are opaque string keys: a persona/actor key for direct messages,
a canonical channel handle for channel operations. Timestamps are epoch
milliseconds on the backend's clock.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

from .errors import BackendUnavailable, NotSimulated
from .models import ChannelHandle, ChatMessage


@dataclass(frozen=True)
class DirectoryQuery:
    keyword: str
    max_results: int = 50

    def __post_init__(self) -> None:
        if not self.keyword.strip():
            raise ValueError("directory keyword must be non-empty")
        if self.max_results < 1:
            raise ValueError("max_results must be positive")


@dataclass(frozen=True)
class OutboundMessage:
    text: str


@dataclass(frozen=True)
class SendReceipt:
    target: str
    sent_at: int


@dataclass(frozen=True)
class InboundEvent:
    source: str  # persona key (direct message) or canonical channel handle
    message: ChatMessage
    received_at: int
    seq: int


class Transport(Protocol):
    def query_directory(self, q: DirectoryQuery) -> list[ChannelHandle]: ...

    def join_channel(self, h: ChannelHandle) -> bool: ...

    def fetch_history(
        self, h: ChannelHandle, limit: int
    ) -> tuple[list[ChatMessage], list[ChatMessage]]: ...

    def channel_title(self, h: ChannelHandle) -> str: ...

    def send_message(self, target: str, m: OutboundMessage) -> SendReceipt: ...

    def poll_events(self, since: int) -> list[InboundEvent]: ...

    def media_payload(self, media_id: str) -> str: ...

    def advance_time(self, delta_s: float) -> int: ...

    def next_timer_at(self) -> int | None: ...

    @property
    def now_ms(self) -> int: ...


class LiveStubTransport:
    """Placeholder for a real backend. Ships unconfigured and refuses
    every operation; time control is meaningless here."""

    def __init__(self, configured: bool = False):
        self._configured = configured

    def _refuse(self) -> None:
        raise BackendUnavailable(
            "live transport is a stub; no backend credentials are shipped"
        )

    def query_directory(self, q: DirectoryQuery) -> list[ChannelHandle]:
        self._refuse()
        raise AssertionError  # unreachable

    def join_channel(self, h: ChannelHandle) -> bool:
        self._refuse()
        raise AssertionError

    def fetch_history(self, h, limit):
        self._refuse()
        raise AssertionError

    def channel_title(self, h):
        self._refuse()
        raise AssertionError

    def send_message(self, target, m):
        self._refuse()
        raise AssertionError

    def poll_events(self, since):
        self._refuse()
        raise AssertionError

    def media_payload(self, media_id):
        self._refuse()
        raise AssertionError

    def advance_time(self, delta_s: float) -> int:
        raise NotSimulated("advance_time requires the simulated backend")

    def next_timer_at(self):
        raise NotSimulated("timer introspection requires the simulated backend")

    @property
    def now_ms(self) -> int:
        raise NotSimulated("virtual clock requires the simulated backend")
