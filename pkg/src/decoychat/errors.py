"""Shared exception types.

Every module raises subclasses of DecoychatError so callers can catch at
whatever granularity they need; the CLI maps them onto exit codes.
"""

from __future__ import annotations


class DecoychatError(Exception):
    """Base class for all errors raised by this package."""


class ConfigInvalid(DecoychatError):
    """A run or scenario config failed validation (CLI exit code 2)."""


# --- domain ---------------------------------------------------------------

class EmptyHandle(DecoychatError):
    """Channel handle was empty or whitespace-only after trimming."""


# --- transport ------------------------------------------------------------

class BackendUnavailable(DecoychatError):
    pass


class UnknownChannel(DecoychatError):
    pass


class JoinRejected(DecoychatError):
    pass


class NotJoined(DecoychatError):
    pass


class Blocked(DecoychatError):
    """The counterparty has blocked the sending account."""


class NotSimulated(DecoychatError):
    """A simulation-only operation was invoked on a live transport."""


# --- llm adapter ----------------------------------------------------------

class LlmUnavailable(DecoychatError):
    pass


class LlmRefusal(DecoychatError):
    """The model declined to produce a usable completion."""

    def __init__(self, message: str = "model refused", raw_reply: str = ""):
        super().__init__(message)
        self.raw_reply = raw_reply


# --- vision ---------------------------------------------------------------

class EngineUnavailable(DecoychatError):
    pass


# --- relevance filtering --------------------------------------------------

class InvalidVerdict(DecoychatError):
    pass


class AlreadyResolved(DecoychatError):
    pass


# --- engagement -----------------------------------------------------------

class DuplicateSession(DecoychatError):
    pass


class SessionTerminated(DecoychatError):
    """An operation arrived for a conversation that already terminated."""


class NotPendingApproval(DecoychatError):
    pass


class ApprovalRequired(DecoychatError):
    """A send was attempted without a logged operator decision."""


class RegenerationLimit(DecoychatError):
    """Reject-driven regeneration exceeded the per-draft cap."""


class NotRelevant(DecoychatError):
    """Engagement was requested for an actor with no relevant source channel."""


# --- store ----------------------------------------------------------------

class ValidationFailure(DecoychatError):
    pass


class IoFailure(DecoychatError):
    pass


class CorruptLog(DecoychatError):
    def __init__(self, message: str, first_bad_sequence: int | None = None):
        super().__init__(message)
        self.first_bad_sequence = first_bad_sequence


# --- analytics ------------------------------------------------------------

class UnterminatedInput(DecoychatError):
    pass


class EmptyInput(DecoychatError):
    pass


# --- gateway --------------------------------------------------------------

class UnknownDraft(DecoychatError):
    pass


class StaleDraft(DecoychatError):
    """The draft was already decided."""


class Unauthorized(DecoychatError):
    pass


class UnknownConversation(DecoychatError):
    pass


class UnknownEscalation(DecoychatError):
    pass
