"""HTTP service consumed by the operator console: approval queue,
decision submission, transcripts, escalation adjudication, metrics, and
a resumable event stream.

Wire contract:
  GET  /healthz                     liveness, no auth
  GET  /queue                       pending drafts, oldest first
  POST /decisions                   {draft_id|conversation_id, decision,
                                     operator_id, edited_text?}
  GET  /conversations/{id}          full transcript view
  GET  /escalations                 unresolved adjudication items
  POST /escalations/{id}            {decision, rationale}
  GET  /events?since=N              one frame per event, sequence order
  GET  /metrics                     dashboard snapshot
  POST /simnet/advance              {seconds} virtual-clock step

All other routes 404. Auth: `Authorization: Bearer <token>` on every
route but /healthz; 401 otherwise. Unknown ids 404, conflicts
(already-decided, already-resolved, terminated) 409, malformed input 400.

Every mutation funnels through one lock, so decisions apply in
submission order and the store stays single-writer.
"""

from __future__ import annotations

import json
import threading
import time
from collections import Counter
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any
from urllib.parse import parse_qs, urlparse

from .analytics import payment_distribution
from .engagement import EngagementEngine
from .errors import (
    AlreadyResolved,
    InvalidVerdict,
    NotPendingApproval,
    NotSimulated,
    RegenerationLimit,
    SessionTerminated,
    StaleDraft,
    UnknownConversation,
    UnknownDraft,
    UnknownEscalation,
)
from .models import (
    RelevanceDecision,
    SessionState,
    disclosure_to_dict,
    message_to_dict,
    outcome_to_dict,
    verdict_to_dict,
)
from .relevance import apply_human_verdict
from .store import EventStore
from .transport import Transport

CONTEXT_MESSAGES = 10

_STATUS: tuple[tuple[type[Exception], int], ...] = (
    (UnknownDraft, 404),
    (UnknownConversation, 404),
    (UnknownEscalation, 404),
    (StaleDraft, 409),
    (NotPendingApproval, 409),
    (AlreadyResolved, 409),
    (SessionTerminated, 409),
    (RegenerationLimit, 409),
    (NotSimulated, 409),
    (InvalidVerdict, 400),
    (ValueError, 400),
)


def _status_for(exc: Exception) -> int:
    for cls, code in _STATUS:
        if isinstance(exc, cls):
            return code
    return 500


class GatewayServer:
    """Owns the HTTP listener plus the engine/store/transport trio it
    exposes. Start binds and serves on a daemon thread; stop is clean."""

    def __init__(
        self,
        engine: EngagementEngine,
        store: EventStore,
        state,
        transport: Transport,
        token: str,
        host: str = "127.0.0.1",
        port: int = 0,
    ):
        self.engine = engine
        self.store = store
        self.state = state
        self.transport = transport
        self.token = token
        self.lock = threading.RLock()
        self._stopping = threading.Event()
        self.httpd = _Server((host, port), _Handler)
        self.httpd.gateway = self
        self.host = self.httpd.server_address[0]
        self.port = self.httpd.server_address[1]
        self._thread: threading.Thread | None = None

    @property
    def base_url(self) -> str:
        return f"http://{self.host}:{self.port}"

    def start(self) -> None:
        self._thread = threading.Thread(
            target=self.httpd.serve_forever, kwargs={"poll_interval": 0.05}, daemon=True
        )
        self._thread.start()

    def stop(self) -> None:
        self._stopping.set()
        self.httpd.shutdown()
        self.httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    # -- views -------------------------------------------------------------

    def _now(self) -> int:
        try:
            return self.transport.now_ms
        except NotSimulated:
            return int(time.time() * 1000)

    def list_pending(self) -> list[dict[str, Any]]:
        with self.lock:
            pending = []
            for cid in self.state.sessions:
                try:
                    draft = self.engine.pending_draft(cid)
                except (NotPendingApproval, UnknownConversation):
                    continue
                conv = self.state.sessions[cid].conversation
                pending.append(
                    {
                        "draft_id": draft.draft_id,
                        "conversation_id": cid,
                        "text": draft.text,
                        "created_at": draft.created_at,
                        "context": [
                            message_to_dict(m)
                            for m in conv.messages[-CONTEXT_MESSAGES:]
                        ],
                    }
                )
            pending.sort(key=lambda p: (p["created_at"], p["draft_id"]))
            return pending

    def submit_decision(self, body: dict[str, Any]) -> dict[str, Any]:
        decision = body.get("decision")
        if decision not in ("approve", "edit", "reject", "terminate"):
            raise ValueError(f"unknown decision: {decision!r}")
        operator = body.get("operator_id") or "operator"
        with self.lock:
            if decision == "terminate" and not body.get("draft_id"):
                cid = body.get("conversation_id")
                if not cid:
                    raise ValueError("terminate needs a draft_id or conversation_id")
                self.engine.terminate_conversation(cid, operator)
            else:
                draft_id = body.get("draft_id")
                if not draft_id:
                    raise ValueError("draft_id required")
                self.engine.apply_operator_decision(
                    draft_id,
                    decision,
                    operator,
                    edited_text=body.get("edited_text"),
                )
            return {"ok": True, "last_sequence": self.store.last_sequence}

    def transcript(self, cid: str) -> dict[str, Any]:
        with self.lock:
            session = self.state.sessions.get(cid)
            if session is None:
                raise UnknownConversation(f"unknown conversation: {cid}")
            conv = session.conversation
            return {
                "conversation_id": cid,
                "actor_id": conv.actor,
                "transport_key": session.transport_key,
                "state": conv.state.value,
                "round_counter": conv.round_counter,
                "retry_counter": conv.retry_counter,
                "outcome": outcome_to_dict(conv.outcome) if conv.outcome else None,
                "messages": [message_to_dict(m) for m in conv.messages],
                "disclosures": [
                    disclosure_to_dict(d)
                    for c, d in self.state.disclosures
                    if c == cid
                ],
            }

    def list_escalations(self) -> list[dict[str, Any]]:
        with self.lock:
            items = []
            for esc_id in sorted(self.state.escalations):
                item = self.state.escalations[esc_id]
                if item.resolved is not None:
                    continue
                items.append(
                    {
                        "escalation_id": esc_id,
                        "canonical": item.canonical,
                        "queued_at": item.queued_at,
                        "model_verdict": verdict_to_dict(item.model_verdict),
                    }
                )
            return items

    def resolve_escalation(self, esc_id: str, body: dict[str, Any]) -> dict[str, Any]:
        with self.lock:
            if esc_id not in self.state.escalations:
                raise UnknownEscalation(f"unknown escalation: {esc_id}")
            raw = body.get("decision", "")
            try:
                decision = RelevanceDecision(raw)
            except ValueError as exc:
                raise ValueError(f"bad decision: {raw!r}") from exc
            channel = apply_human_verdict(
                self.store,
                self.state,
                esc_id,
                decision,
                body.get("rationale", ""),
                self._now(),
            )
            return {"ok": True, "canonical": channel.handle.canonical}

    def advance(self, body: dict[str, Any]) -> dict[str, Any]:
        seconds = float(body.get("seconds", 0))
        if seconds < 0:
            raise ValueError("seconds must be non-negative")
        with self.lock:
            fired = self.transport.advance_time(seconds)
            self.engine.drain_events()
            self.engine.check_timeouts(self.transport.now_ms)
            return {"now_ms": self.transport.now_ms, "fired": fired}

    def metrics(self) -> dict[str, Any]:
        with self.lock:
            convs = [s.conversation for s in self.state.sessions.values()]
            outcome_counts = Counter(
                c.outcome.kind.value for c in convs if c.outcome is not None
            )
            dist = payment_distribution([d for _, d in self.state.disclosures])
            return {
                "last_sequence": self.store.last_sequence,
                "sessions_total": len(convs),
                "sessions_active": sum(
                    1 for c in convs if c.state is not SessionState.TERMINATED
                ),
                "pending_drafts": len(self.list_pending()),
                "escalations_open": len(self.list_escalations()),
                "outcomes": dict(sorted(outcome_counts.items())),
                "disclosure_total": len(self.state.disclosures),
                "payment_distribution": {
                    m.value: {"count": n, "pct": p} for m, (n, p) in dist.items()
                },
                "actors": len(self.state.actors),
                "channels": len(self.state.channels),
            }


class _Server(ThreadingHTTPServer):
    daemon_threads = True
    allow_reuse_address = True
    gateway: GatewayServer


class _Handler(BaseHTTPRequestHandler):
    # One connection per request; the stream endpoint writes until the
    # client hangs up, everything else sends Content-Length.
    protocol_version = "HTTP/1.0"

    def log_message(self, *args) -> None:
        pass

    @property
    def gateway(self) -> GatewayServer:
        return self.server.gateway  # type: ignore[attr-defined]

    def _send_json(self, code: int, obj: Any) -> None:
        body = (json.dumps(obj, sort_keys=True, ensure_ascii=False) + "\n").encode(
            "utf-8"
        )
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _send_error_for(self, exc: Exception) -> None:
        self._send_json(
            _status_for(exc), {"error": type(exc).__name__, "message": str(exc)}
        )

    def _authorized(self) -> bool:
        return self.headers.get("Authorization", "") == f"Bearer {self.gateway.token}"

    def _read_body(self) -> dict[str, Any]:
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length > 0 else b""
        if not raw:
            return {}
        try:
            parsed = json.loads(raw)
        except ValueError as exc:
            raise ValueError("request body is not valid JSON") from exc
        if not isinstance(parsed, dict):
            raise ValueError("request body must be a JSON object")
        return parsed

    def do_GET(self) -> None:
        parsed = urlparse(self.path)
        path = parsed.path
        if path == "/healthz":
            self._send_json(200, {"status": "ok"})
            return
        if not self._authorized():
            self._send_json(401, {"error": "Unauthorized"})
            return
        try:
            if path == "/queue":
                self._send_json(200, self.gateway.list_pending())
            elif path == "/escalations":
                self._send_json(200, self.gateway.list_escalations())
            elif path == "/metrics":
                self._send_json(200, self.gateway.metrics())
            elif path.startswith("/conversations/"):
                cid = path[len("/conversations/"):]
                self._send_json(200, self.gateway.transcript(cid))
            elif path == "/events":
                query = parse_qs(parsed.query)
                since = int(query.get("since", ["0"])[0])
                self._stream(since)
            else:
                self._send_json(404, {"error": "UnknownRoute"})
        except Exception as exc:  # mapped to a wire status
            self._send_error_for(exc)

    def do_POST(self) -> None:
        path = urlparse(self.path).path
        if not self._authorized():
            self._send_json(401, {"error": "Unauthorized"})
            return
        try:
            body = self._read_body()
            if path == "/decisions":
                self._send_json(200, self.gateway.submit_decision(body))
            elif path.startswith("/escalations/"):
                esc_id = path[len("/escalations/"):]
                self._send_json(200, self.gateway.resolve_escalation(esc_id, body))
            elif path == "/simnet/advance":
                self._send_json(200, self.gateway.advance(body))
            else:
                self._send_json(404, {"error": "UnknownRoute"})
        except Exception as exc:
            self._send_error_for(exc)

    def _stream(self, since: int) -> None:
        """Server-sent-events style feed: `id:` carries the sequence so a
        client can resume exactly where it stopped."""
        self.send_response(200)
        self.send_header("Content-Type", "text/event-stream")
        self.send_header("Cache-Control", "no-cache")
        self.end_headers()
        gw = self.gateway
        cursor = since
        try:
            while not gw._stopping.is_set():
                batch = gw.store.events(cursor)
                for rec in batch:
                    payload = {
                        "sequence": rec.sequence,
                        "kind": rec.kind,
                        "at": rec.at,
                        "payload": rec.payload,
                    }
                    frame = (
                        f"id: {rec.sequence}\n"
                        f"data: {json.dumps(payload, sort_keys=True, ensure_ascii=False)}\n\n"
                    )
                    self.wfile.write(frame.encode("utf-8"))
                    self.wfile.flush()
                    cursor = rec.sequence
                if not batch:
                    time.sleep(0.05)
        except (BrokenPipeError, ConnectionResetError, TimeoutError):
            pass
