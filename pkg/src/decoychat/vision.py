"""Image-text extraction and content mining.

OCR sits behind a tiny engine adapter; the shipped engine is an identity
mock that treats the simulated image payload as the recognized text, so
every result is bit-reproducible. On top of that sit three pure miners:
payment-detail extraction, price-quote detection, and distinct-person
counting over media labels.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Protocol

from .defaults import (
    DEFAULT_PAYMENT_PATTERNS,
    DEFAULT_PRICE_BAND,
    DEFAULT_PRICE_PATTERNS,
    PatternRow,
)
from .errors import EngineUnavailable
from .models import (
    Carrier,
    EvidenceRef,
    MediaKind,
    MediaRef,
    PaymentDisclosure,
    PaymentMethod,
    PriceQuote,
)

# ---------------------------------------------------------------------------
# OCR
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OcrResult:
    media_id: str
    text: str
    engine_tag: str


class OcrEngine(Protocol):
    tag: str

    def read(self, media: MediaRef, payload: str) -> str: ...


class IdentityOcrEngine:
    """Returns the payload unchanged; the deterministic test engine."""

    tag = "identity"

    def read(self, media: MediaRef, payload: str) -> str:
        return payload


class FailingOcrEngine:
    """Always unavailable; exercises the degraded path."""

    tag = "failing"

    def read(self, media: MediaRef, payload: str) -> str:
        raise EngineUnavailable("no OCR engine configured")


@dataclass
class OcrCache:
    """Caches one result per media_id; repeat extractions are free."""

    engine: OcrEngine
    _by_media: dict[str, OcrResult] = field(default_factory=dict)

    def ocr_extract(self, media: MediaRef, payload: str) -> OcrResult:
        if media.kind is not MediaKind.IMAGE:
            raise ValueError(f"ocr requires image media, got {media.kind.value}")
        cached = self._by_media.get(media.media_id)
        if cached is not None:
            return cached
        result = OcrResult(
            media_id=media.media_id,
            text=self.engine.read(media, payload),
            engine_tag=self.engine.tag,
        )
        self._by_media[media.media_id] = result
        return result


# ---------------------------------------------------------------------------
# Payment extraction
# ---------------------------------------------------------------------------

_KIND_PRIORITY = {"address_regex": 0, "qr_payload_prefix": 1, "keyword_set": 2}


@dataclass(frozen=True)
class PaymentPattern:
    method: PaymentMethod
    kind: str  # address_regex | qr_payload_prefix | keyword_set
    expression: str
    carrier_constraint: Carrier | None = None

    def __post_init__(self) -> None:
        if self.kind not in _KIND_PRIORITY:
            raise ValueError(f"unknown pattern kind: {self.kind}")


def build_patterns(rows: Iterable[PatternRow] = DEFAULT_PAYMENT_PATTERNS) -> tuple[PaymentPattern, ...]:
    return tuple(PaymentPattern(*row) for row in rows)


def _find_matches(text: str, pattern: PaymentPattern) -> list[tuple[int, str]]:
    """(position, detail) pairs for one pattern over one text source."""
    out: list[tuple[int, str]] = []
    if pattern.kind == "address_regex":
        for m in re.finditer(pattern.expression, text):
            out.append((m.start(), m.group(0)))
    elif pattern.kind == "qr_payload_prefix":
        prefix = pattern.expression.lower()
        pos = 0
        for token in text.split():
            at = text.find(token, pos)
            pos = at + len(token)
            if token.lower().startswith(prefix):
                out.append((at, token))
    else:
        low = text.lower()
        for keyword in pattern.expression.split("|"):
            at = low.find(keyword.lower())
            if at >= 0:
                out.append((at, keyword.lower()))
    return out


def _image_variant(method: PaymentMethod) -> PaymentMethod:
    if method is PaymentMethod.ALIPAY:
        return PaymentMethod.ALIPAY_IMAGE
    return method


def extract_payment(
    text: str,
    ocr: OcrResult | None,
    origin_message_id: str,
    patterns: tuple[PaymentPattern, ...] | None = None,
) -> list[PaymentDisclosure]:
    """Find payment disclosures in a message body plus optional image text.

    Matches from the image text carry carrier=image and shift method to its
    image variant where one exists. Within one final method, keyword hits
    are dropped when a structured (address or payload) hit is also present.
    Output is deduplicated by (method, detail), ordered by pattern priority
    then source then position.
    """
    pats = build_patterns() if patterns is None else patterns
    sources: list[tuple[str, Carrier, str | None]] = [(text, Carrier.TEXT, None)]
    if ocr is not None and ocr.text:
        sources.append((ocr.text, Carrier.IMAGE, ocr.media_id))

    raw: list[tuple[int, int, int, PaymentMethod, Carrier, str | None, str, str]] = []
    for src_idx, (body, carrier, media_id) in enumerate(sources):
        if not body:
            continue
        for pat in pats:
            if pat.carrier_constraint is not None and pat.carrier_constraint is not carrier:
                continue
            for pos, detail in _find_matches(body, pat):
                method = pat.method
                if carrier is Carrier.IMAGE:
                    method = _image_variant(method)
                raw.append(
                    (
                        _KIND_PRIORITY[pat.kind],
                        src_idx,
                        pos,
                        method,
                        carrier,
                        media_id,
                        detail,
                        pat.kind,
                    )
                )

    structured = {m for prio, _, _, m, _, _, _, kind in raw if kind != "keyword_set"}
    raw = [r for r in raw if not (r[7] == "keyword_set" and r[3] in structured)]
    raw.sort(key=lambda r: (r[0], r[1], r[2], r[3].value))

    seen: set[tuple[PaymentMethod, str]] = set()
    out: list[PaymentDisclosure] = []
    for _, _, _, method, carrier, media_id, detail, _ in raw:
        key = (method, detail)
        if key in seen:
            continue
        seen.add(key)
        out.append(
            PaymentDisclosure(
                method=method,
                carrier=carrier,
                evidence_ref=EvidenceRef(origin_message_id, media_id),
                detail=detail,
            )
        )
    return out


# ---------------------------------------------------------------------------
# Price quotes
# ---------------------------------------------------------------------------


def detect_price_quotes(
    text: str,
    evidence_ref: str = "",
    patterns: tuple[tuple[str, int], ...] = DEFAULT_PRICE_PATTERNS,
    band: tuple[float, float] = DEFAULT_PRICE_BAND,
) -> list[PriceQuote]:
    """Mine (duration, price) pairs; hour-denominated quotes convert to
    minutes; prices outside the sanity band are dropped."""
    found: list[PriceQuote] = []
    seen: set[tuple[int, float]] = set()
    for expr, multiplier in patterns:
        for m in re.finditer(expr, text, flags=re.IGNORECASE):
            duration = int(m.group("dur")) * multiplier
            price = float(m.group("price"))
            if duration <= 0 or not band[0] <= price <= band[1]:
                continue
            key = (duration, price)
            if key in seen:
                continue
            seen.add(key)
            found.append(
                PriceQuote(
                    duration_minutes=duration,
                    price_cny=price,
                    evidence_ref=evidence_ref,
                )
            )
    return found


def count_distinct_persons(media: Iterable[MediaRef]) -> int:
    labels = {label for m in media for label in m.person_labels}
    return len(labels)
