"""Channel discovery: directory bootstrap, recursive cross-link walk,
harvest, and seller-account extraction.

The walk is breadth-first with a visited set over canonical handles, so
any finite link graph terminates and every channel is harvested at most
once. Model-driven keyword expansion degrades to the seed list when the
adapter is down; discovery itself never requires a model.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable

from .defaults import DEFAULT_OFFER_PATTERNS, DEFAULT_SYNONYM_PROMPT
from .errors import (
    BackendUnavailable,
    ConfigInvalid,
    EmptyHandle,
    JoinRejected,
    LlmUnavailable,
    UnknownChannel,
)
from .llm import ChatModel
from .models import (
    ActorProfile,
    ChannelHandle,
    ChannelRecord,
    ChatMessage,
    DiscoverySource,
    SourceKind,
    canonicalize_handle,
    channel_to_dict,
)
from .store import EventStore
from .transport import DirectoryQuery, Transport

_AT_HANDLE = re.compile(r"(?<![\w@])@([A-Za-z0-9_]+)")
_TME_LINK = re.compile(r"\bt\.me/(?:joinchat/)?([A-Za-z0-9_+\-]+)", re.IGNORECASE)


@dataclass(frozen=True)
class DiscoveryConfig:
    seed_keywords: tuple[str, ...]
    synonym_fanout: int = 0
    depth_cap: int = 3
    harvest_limit: int = 1000
    directory_max_results: int = 50
    offer_patterns: tuple[str, ...] = DEFAULT_OFFER_PATTERNS

    def __post_init__(self) -> None:
        if not self.seed_keywords:
            raise ConfigInvalid("discovery needs at least one seed keyword")
        if self.synonym_fanout < 0:
            raise ConfigInvalid("synonym_fanout must be non-negative")
        if self.depth_cap < 0:
            raise ConfigInvalid("depth_cap must be non-negative")
        if self.harvest_limit < 1:
            raise ConfigInvalid("harvest_limit must be positive")


@dataclass(frozen=True)
class KeywordExpansion:
    terms: tuple[str, ...]
    degraded: bool  # adapter was unavailable; terms are the seeds only


@dataclass
class DiscoveryResult:
    records: list[ChannelRecord]
    keyword_expansion: KeywordExpansion
    aborted: bool  # backend died mid-walk; records are a prefix


def expand_keywords(
    seeds: Iterable[str], fanout: int, llm: ChatModel
) -> KeywordExpansion:
    """Seeds plus up to `fanout` model-suggested synonyms per seed,
    deduplicated case-insensitively, in first-occurrence order."""
    terms: list[str] = []
    seen: set[str] = set()

    def add(term: str) -> None:
        cleaned = term.strip()
        if cleaned and cleaned.lower() not in seen:
            seen.add(cleaned.lower())
            terms.append(cleaned)

    degraded = False
    for seed in seeds:
        add(seed)
        if fanout <= 0 or degraded:
            continue
        prompt = DEFAULT_SYNONYM_PROMPT.format(fanout=fanout, seed=seed)
        try:
            reply = llm.complete("", prompt)
        except LlmUnavailable:
            degraded = True
            continue
        suggestions = [line for line in reply.splitlines() if line.strip()]
        for line in suggestions[:fanout]:
            add(line)
    return KeywordExpansion(terms=tuple(terms), degraded=degraded)


def extract_links(text: str) -> list[ChannelHandle]:
    """All @handle tokens and t.me-style links, canonical, deduplicated,
    in first-occurrence order."""
    raw: list[tuple[int, str]] = []
    for m in _AT_HANDLE.finditer(text):
        raw.append((m.start(), m.group(1)))
    for m in _TME_LINK.finditer(text):
        raw.append((m.start(), m.group(1)))
    raw.sort(key=lambda pair: pair[0])
    out: list[ChannelHandle] = []
    seen: set[str] = set()
    for _, token in raw:
        try:
            handle = canonicalize_handle(token)
        except EmptyHandle:
            continue
        if handle.canonical not in seen:
            seen.add(handle.canonical)
            out.append(handle)
    return out


def _harvest(
    transport: Transport, handle: ChannelHandle, limit: int, depth: int,
    source: DiscoverySource,
) -> ChannelRecord | None:
    """Join and pull history; None when the channel does not exist or
    refuses entry."""
    try:
        transport.join_channel(handle)
    except (UnknownChannel, JoinRejected):
        return None
    messages, pins = transport.fetch_history(handle, limit)
    return ChannelRecord(
        handle=handle,
        title=transport.channel_title(handle),
        discovery_source=source,
        depth=depth,
        pinned_posts=pins,
        recent_messages=messages,
    )


def run_discovery(
    cfg: DiscoveryConfig,
    transport: Transport,
    llm: ChatModel,
    store: EventStore | None = None,
    at: int = 0,
) -> DiscoveryResult:
    """Breadth-first walk from directory hits, following cross-links in
    harvested text up to depth_cap. Appends one ChannelDiscovered event
    per record when a store is given. Returned records are sorted by
    canonical handle."""
    expansion = expand_keywords(cfg.seed_keywords, cfg.synonym_fanout, llm)

    queue: list[tuple[ChannelHandle, int, DiscoverySource]] = []
    visited: set[str] = set()
    records: list[ChannelRecord] = []
    aborted = False

    try:
        for term in expansion.terms:
            query = DirectoryQuery(keyword=term, max_results=cfg.directory_max_results)
            for handle in transport.query_directory(query):
                if handle.canonical not in visited:
                    visited.add(handle.canonical)
                    queue.append(
                        (handle, 0, DiscoverySource(SourceKind.DIRECTORY_QUERY, term))
                    )

        head = 0
        while head < len(queue):
            handle, depth, source = queue[head]
            head += 1
            record = _harvest(transport, handle, cfg.harvest_limit, depth, source)
            if record is None:
                continue
            records.append(record)
            if store is not None:
                store.append("ChannelDiscovered", {"channel": channel_to_dict(record)}, at)
            if depth >= cfg.depth_cap:
                continue
            for post in record.pinned_posts + record.recent_messages:
                for link in extract_links(post.text):
                    if link.canonical not in visited:
                        visited.add(link.canonical)
                        queue.append(
                            (
                                link,
                                depth + 1,
                                DiscoverySource(
                                    SourceKind.CROSS_LINK, handle.canonical
                                ),
                            )
                        )
    except BackendUnavailable:
        aborted = True

    records.sort(key=lambda r: r.handle.canonical)
    return DiscoveryResult(
        records=records, keyword_expansion=expansion, aborted=aborted
    )


def _matches_offer(text: str, patterns: tuple[str, ...]) -> bool:
    low = text.lower()
    return any(p.lower() in low for p in patterns)


def extract_actors(
    records: Iterable[ChannelRecord],
    offer_patterns: tuple[str, ...] = DEFAULT_OFFER_PATTERNS,
) -> list[ActorProfile]:
    """One profile per distinct author with at least one offer-matching
    post; source_channels lists every channel where that happened."""
    sources: dict[str, set[str]] = {}
    for record in records:
        posts: list[ChatMessage] = record.pinned_posts + record.recent_messages
        for post in posts:
            if post.author is None:
                continue
            if _matches_offer(post.text, offer_patterns):
                sources.setdefault(post.author, set()).add(record.handle.canonical)
    return [
        ActorProfile(actor_id=actor_id, source_channels=tuple(sorted(chans)))
        for actor_id, chans in sorted(sources.items())
    ]
