"""Shipped default tables: substitutions, refusal markers, detection
patterns, and prompt templates.

Everything here is plain data. All of it can be replaced through the run
config; these values are the documented out-of-the-box behavior.
"""

from __future__ import annotations

from typing import Final

from .models import Carrier, PaymentMethod

# Ordered (sensitive phrase, replacement) pairs. Applied longest-match-first,
# case-insensitive. No replacement may contain any left-side phrase.
DEFAULT_SUBSTITUTIONS: Final[tuple[tuple[str, str], ...]] = (
    ("nude video chat", "video chat"),
    ("nude chat", "chat"),
    ("sexy chat", "chat"),
    ("nude", "casual"),
    ("naked", "casual"),
)

# Extra pairs layered on top of the base table at softening tier 1.
DEFAULT_SOFTENING_SUBSTITUTIONS: Final[tuple[tuple[str, str], ...]] = (
    ("adult", "general"),
    ("explicit", "plain"),
    ("private show", "session"),
    ("strip", "perform"),
)

# Case-insensitive substrings that mark a model reply as a refusal.
DEFAULT_REFUSAL_MARKERS: Final[tuple[str, ...]] = (
    "i can't help",
    "i cannot help",
    "i can't assist",
    "i cannot assist",
    "i won't engage",
    "i must decline",
    "unable to comply",
    "not able to continue with this request",
    "against my guidelines",
)

# Messages matching any of these (case-insensitive substrings) mark the
# posting account as a service seller during actor extraction.
DEFAULT_OFFER_PATTERNS: Final[tuple[str, ...]] = (
    "pay to chat",
    "paid video chat",
    "付费聊天",
    "dm to book",
    "price list in pins",
)

DEFAULT_SEED_KEYWORDS: Final[tuple[str, ...]] = ("nude video chat", "sexy chat")

# Payment detection patterns as (method, kind, expression, carrier_constraint).
# kind: address_regex | qr_payload_prefix | keyword_set.
# carrier_constraint None means the carrier follows where the match was found
# (body text -> text, extracted image text -> image).
PatternRow = tuple[PaymentMethod, str, str, Carrier | None]

# Address shape for the two common USDT networks. The first alternative is a
# T-prefixed 34-char base58 run (no 0, O, I, l) that must not extend further
# in either direction; the second is a 0x-prefixed 40-hex-digit run.
TRON_ADDRESS_RE: Final[str] = (
    r"(?<![1-9A-HJ-NP-Za-km-z])T[1-9A-HJ-NP-Za-km-z]{33}(?![1-9A-HJ-NP-Za-km-z])"
)
ETH_ADDRESS_RE: Final[str] = r"\b0x[0-9a-fA-F]{40}\b"

DEFAULT_PAYMENT_PATTERNS: Final[tuple[PatternRow, ...]] = (
    (PaymentMethod.USDT, "address_regex", TRON_ADDRESS_RE, None),
    (PaymentMethod.USDT, "address_regex", ETH_ADDRESS_RE, None),
    (PaymentMethod.ALIPAY, "qr_payload_prefix", "https://qr.alipay.com/", None),
    (PaymentMethod.WECHAT, "qr_payload_prefix", "wxp://", None),
    (PaymentMethod.QQ_IMAGE, "qr_payload_prefix", "https://qm.qq.com/", Carrier.IMAGE),
    (PaymentMethod.ALIPAY, "keyword_set", "支付宝|alipay", None),
    (PaymentMethod.WECHAT, "keyword_set", "微信|wechat|weixin", None),
    (PaymentMethod.QQ_IMAGE, "keyword_set", "qq号|qq:", Carrier.IMAGE),
    (PaymentMethod.USDT, "keyword_set", "usdt|trc20|erc20", None),
    (PaymentMethod.BANK, "keyword_set", "bank transfer|bank card|银行卡|收款银行", None),
    (
        PaymentMethod.PAYMENT_SOLUTION,
        "keyword_set",
        "paypal|payment link|收款链接|第三方收款",
        None,
    ),
)

# Price quote mining: (regex with dur/price groups, minutes multiplier).
# Chinese unit words double as the separator cue, so no currency suffix is
# required there; bare English number pairs require one.
DEFAULT_PRICE_PATTERNS: Final[tuple[tuple[str, int], ...]] = (
    (r"(?P<dur>\d+)\s*分钟\D{0,8}?(?P<price>\d+(?:\.\d+)?)", 1),
    (r"(?P<dur>\d+)\s*小时\D{0,8}?(?P<price>\d+(?:\.\d+)?)", 60),
    (
        r"(?P<dur>\d+)\s*(?:min|mins|minutes)\b\D{0,8}?"
        r"(?P<price>\d+(?:\.\d+)?)\s*(?:元|cny|rmb|yuan|块)",
        1,
    ),
    (
        r"(?P<dur>\d+)\s*(?:hr|hrs|hour|hours)\b\D{0,8}?"
        r"(?P<price>\d+(?:\.\d+)?)\s*(?:元|cny|rmb|yuan|块)",
        60,
    ),
)

# Quotes outside this CNY band are discarded as mis-parses.
DEFAULT_RESPONSE_BIN_EDGES_S: tuple[float, ...] = (120.0, 600.0, 1800.0, 3600.0)

DEFAULT_PRICE_BAND: Final[tuple[float, float]] = (10.0, 10000.0)

DEFAULT_OPENER: Final[str] = "Hi, how much do your services cost?"

# Prompt templates are deliberate approximations: they encode the required
# behavior in our own words and are replaceable via config files.
DEFAULT_DRAFT_SYSTEM_PROMPT: Final[str] = (
    "You play a curious, casual customer chatting with an online seller. "
    "Keep replies short and colloquial. Ask practical questions and steer "
    "the conversation toward completing a purchase. Never volunteer "
    "personal details and never agree to move to another platform."
)

DEFAULT_NEUTRAL_PROMPT: Final[str] = (
    "Write one short, neutral, friendly sentence that keeps this chat going."
)

DEFAULT_JUDGMENT_PROMPT: Final[str] = (
    "You review digests of public chat channels. Decide whether the channel "
    "advertises chat-for-hire adult services. Answer with 'yes' or 'no' on "
    "the first line, then one short line of rationale.\n\nDigest:\n{digest}"
)

DEFAULT_SYNONYM_PROMPT: Final[str] = (
    "List up to {fanout} short search phrases closely synonymous with "
    "'{seed}', one per line, no numbering."
)
