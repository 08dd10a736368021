/** Wire shapes of the gateway API. These mirror the server's JSON
 * exactly; the console never builds domain objects of its own. */

export interface WireMedia {
  media_id: string;
  kind: string;
  person_labels: string[];
}

export interface WireMessage {
  message_id: string;
  direction: "outbound" | "inbound";
  timestamp: number;
  text: string;
  media: WireMedia[];
  ocr_text: string | null;
  round_index: number;
  author: string | null;
}

export interface QueueItem {
  draft_id: string;
  conversation_id: string;
  text: string;
  created_at: number;
  context: WireMessage[];
}

export interface EvidenceRef {
  message_id: string;
  media_id: string | null;
}

export interface Disclosure {
  method: string;
  carrier: string;
  evidence_ref: EvidenceRef;
  detail: string;
}

export interface Outcome {
  kind: string;
  evidence: Disclosure[];
}

export interface Transcript {
  conversation_id: string;
  actor_id: string;
  transport_key: string;
  state: string;
  round_counter: number;
  retry_counter: number;
  outcome: Outcome | null;
  messages: WireMessage[];
  disclosures: Disclosure[];
}

export interface ModelVerdict {
  decision: string;
  rationale: string;
  judged_by: string;
}

export interface EscalationItem {
  escalation_id: string;
  canonical: string;
  queued_at: number;
  model_verdict: ModelVerdict;
}

export interface Metrics {
  last_sequence: number;
  sessions_total: number;
  sessions_active: number;
  pending_drafts: number;
  escalations_open: number;
  outcomes: Record<string, number>;
  disclosure_total: number;
  payment_distribution: Record<string, { count: number; pct: number }>;
  actors: number;
  channels: number;
}

export interface StreamEvent {
  sequence: number;
  kind: string;
  at: number;
  payload: Record<string, unknown>;
}

export type ConnectionState = "idle" | "connecting" | "open" | "reconnecting" | "closed";

export interface Notice {
  level: "info" | "warn" | "error";
  text: string;
  at: number;
}
