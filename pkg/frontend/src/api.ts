/** Thin typed client over the gateway's HTTP API. Every call returns
 * parsed JSON or throws GatewayError with the wire status attached. */

import type {
  EscalationItem,
  Metrics,
  QueueItem,
  Transcript,
} from "./types.js";

export class GatewayError extends Error {
  constructor(
    readonly status: number,
    readonly errorKind: string,
    message: string,
  ) {
    super(message);
    this.name = "GatewayError";
  }
}

export interface DecisionBody {
  decision: "approve" | "edit" | "reject" | "terminate";
  draft_id?: string;
  conversation_id?: string;
  edited_text?: string;
  operator_id: string;
}

export interface GatewayApi {
  queue(): Promise<QueueItem[]>;
  transcript(conversationId: string): Promise<Transcript>;
  escalations(): Promise<EscalationItem[]>;
  metrics(): Promise<Metrics>;
  submitDecision(body: DecisionBody): Promise<{ ok: boolean; last_sequence: number }>;
  resolveEscalation(
    escalationId: string,
    decision: string,
    rationale: string,
  ): Promise<{ ok: boolean; canonical: string }>;
}

export class GatewayClient implements GatewayApi {
  constructor(
    readonly baseUrl: string,
    private readonly token: string,
  ) {}

  headers(): Record<string, string> {
    return {
      Authorization: `Bearer ${this.token}`,
      "Content-Type": "application/json",
    };
  }

  private async call<T>(method: string, path: string, body?: unknown): Promise<T> {
    const resp = await fetch(`${this.baseUrl}${path}`, {
      method,
      headers: this.headers(),
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const text = await resp.text();
    let parsed: unknown = null;
    try {
      parsed = text ? JSON.parse(text) : null;
    } catch {
      parsed = null;
    }
    if (!resp.ok) {
      const err = parsed as { error?: string; message?: string } | null;
      throw new GatewayError(
        resp.status,
        err?.error ?? "UnknownError",
        err?.message ?? `${method} ${path} failed with ${resp.status}`,
      );
    }
    return parsed as T;
  }

  queue(): Promise<QueueItem[]> {
    return this.call("GET", "/queue");
  }

  transcript(conversationId: string): Promise<Transcript> {
    return this.call("GET", `/conversations/${conversationId}`);
  }

  escalations(): Promise<EscalationItem[]> {
    return this.call("GET", "/escalations");
  }

  metrics(): Promise<Metrics> {
    return this.call("GET", "/metrics");
  }

  submitDecision(body: DecisionBody): Promise<{ ok: boolean; last_sequence: number }> {
    return this.call("POST", "/decisions", body);
  }

  resolveEscalation(
    escalationId: string,
    decision: string,
    rationale: string,
  ): Promise<{ ok: boolean; canonical: string }> {
    return this.call("POST", `/escalations/${escalationId}`, {
      decision,
      rationale,
    });
  }

  /** Simulated-clock control; the server answers 409 on live transports. */
  advance(seconds: number): Promise<{ now_ms: number; fired: number }> {
    return this.call("POST", "/simnet/advance", { seconds });
  }
}
