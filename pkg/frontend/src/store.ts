/** Console view-model store. All domain data comes from gateway
 * responses and the event stream; the only mutations here are view
 * bookkeeping (optimistic removals, notices, connection state).
 *
 * Decision flow is optimistic: the affected row leaves the view at
 * once, the gateway call follows. A 409 means another operator got
 * there first; the server wins and the row set is refetched. Any other
 * failure rolls the row back. The Edit decision is the single path
 * that carries operator-written outbound text.
 */

import { GatewayError, type GatewayApi } from "./api.js";
import type {
  ConnectionState,
  EscalationItem,
  Metrics,
  Notice,
  QueueItem,
  StreamEvent,
  Transcript,
} from "./types.js";

const QUEUE_KINDS = new Set([
  "DraftCreated",
  "OperatorDecision",
  "MessageSent",
  "SessionTerminated",
]);
const ESCALATION_KINDS = new Set(["EscalationQueued", "EscalationResolved"]);
const METRIC_KINDS = new Set(["SessionTerminated", "DisclosureFound"]);
const MAX_NOTICES = 20;
const MAX_EVENT_ROWS = 500;

export interface ViewModel {
  queue: QueueItem[];
  escalations: EscalationItem[];
  transcript: Transcript | null;
  metrics: Metrics | null;
  connection: ConnectionState;
  notices: Notice[];
  eventLog: StreamEvent[];
}

export class ConsoleStore {
  readonly vm: ViewModel = {
    queue: [],
    escalations: [],
    transcript: null,
    metrics: null,
    connection: "idle",
    notices: [],
    eventLog: [],
  };

  private lastApplied = 0;
  private listeners: Array<() => void> = [];
  private applyChain: Promise<void> = Promise.resolve();

  // Ids the server has already settled. Refetches race decisions, so a
  // stale in-flight response could otherwise resurrect a row the
  // operator just acted on. Draft ids and terminated conversations
  // never become pending again, so suppression is permanent.
  private readonly settledDrafts = new Set<string>();
  private readonly settledConversations = new Set<string>();
  private readonly settledEscalations = new Set<string>();

  constructor(
    private readonly api: GatewayApi,
    private readonly operatorId: string = "console",
  ) {}

  subscribe(fn: () => void): void {
    this.listeners.push(fn);
  }

  private changed(): void {
    for (const fn of this.listeners) fn();
  }

  notice(level: Notice["level"], text: string): void {
    this.vm.notices.push({ level, text, at: Date.now() });
    if (this.vm.notices.length > MAX_NOTICES) this.vm.notices.shift();
    this.changed();
  }

  setConnection(state: ConnectionState): void {
    this.vm.connection = state;
    this.changed();
  }

  async refreshQueue(): Promise<void> {
    const fetched = await this.api.queue();
    this.vm.queue = fetched.filter(
      (q) =>
        !this.settledDrafts.has(q.draft_id) &&
        !this.settledConversations.has(q.conversation_id),
    );
    this.changed();
  }

  async refreshEscalations(): Promise<void> {
    const fetched = await this.api.escalations();
    this.vm.escalations = fetched.filter(
      (e) => !this.settledEscalations.has(e.escalation_id),
    );
    this.changed();
  }

  async refreshMetrics(): Promise<void> {
    this.vm.metrics = await this.api.metrics();
    this.changed();
  }

  async openTranscript(conversationId: string): Promise<void> {
    this.vm.transcript = await this.api.transcript(conversationId);
    this.changed();
  }

  closeTranscript(): void {
    this.vm.transcript = null;
    this.changed();
  }

  /** Stream events drive refetches; nothing in the payload is copied
   * into the view model directly. Duplicate sequences are dropped and
   * refetches are serialized so a slow response for event N can never
   * overwrite the state fetched for event N+1. */
  applyEvent(ev: StreamEvent): Promise<void> {
    this.applyChain = this.applyChain.then(() => this.reactTo(ev));
    return this.applyChain;
  }

  private async reactTo(ev: StreamEvent): Promise<void> {
    if (ev.sequence <= this.lastApplied) return;
    this.lastApplied = ev.sequence;
    this.vm.eventLog.push(ev);
    if (this.vm.eventLog.length > MAX_EVENT_ROWS) this.vm.eventLog.shift();
    try {
      if (QUEUE_KINDS.has(ev.kind)) {
        await this.refreshQueue();
        const cid = ev.payload["conversation_id"];
        if (this.vm.transcript && this.vm.transcript.conversation_id === cid) {
          await this.openTranscript(this.vm.transcript.conversation_id);
        }
      }
      if (ESCALATION_KINDS.has(ev.kind)) {
        await this.refreshEscalations();
      }
      if (METRIC_KINDS.has(ev.kind) && this.vm.metrics !== null) {
        await this.refreshMetrics();
      }
    } catch {
      this.notice("warn", `refresh after ${ev.kind} #${ev.sequence} failed`);
    }
    this.changed();
  }

  approve(draftId: string): Promise<boolean> {
    return this.decide(draftId, { decision: "approve", draft_id: draftId });
  }

  editAndApprove(draftId: string, editedText: string): Promise<boolean> {
    return this.decide(draftId, {
      decision: "edit",
      draft_id: draftId,
      edited_text: editedText,
    });
  }

  reject(draftId: string): Promise<boolean> {
    return this.decide(draftId, { decision: "reject", draft_id: draftId });
  }

  terminateDraft(draftId: string): Promise<boolean> {
    return this.decide(draftId, { decision: "terminate", draft_id: draftId });
  }

  async terminateConversation(conversationId: string): Promise<boolean> {
    try {
      await this.api.submitDecision({
        decision: "terminate",
        conversation_id: conversationId,
        operator_id: this.operatorId,
      });
      this.settledConversations.add(conversationId);
      this.vm.queue = this.vm.queue.filter(
        (q) => q.conversation_id !== conversationId,
      );
      this.notice("info", `terminated ${conversationId}`);
      this.changed();
      return true;
    } catch (err) {
      this.surface(err, `terminate ${conversationId}`);
      await this.recoverQueue();
      return false;
    }
  }

  private async decide(
    draftId: string,
    body: { decision: "approve" | "edit" | "reject" | "terminate"; draft_id: string; edited_text?: string },
  ): Promise<boolean> {
    const before = this.vm.queue;
    this.vm.queue = before.filter((q) => q.draft_id !== draftId);
    this.changed();
    try {
      await this.api.submitDecision({ ...body, operator_id: this.operatorId });
      this.settledDrafts.add(draftId);
      this.vm.queue = this.vm.queue.filter((q) => q.draft_id !== draftId);
      this.changed();
      return true;
    } catch (err) {
      if (err instanceof GatewayError && err.status === 409) {
        this.settledDrafts.add(draftId);
        this.surface(err, body.decision);
        await this.recoverQueue();
      } else {
        this.vm.queue = before;
        this.surface(err, body.decision);
        this.changed();
      }
      return false;
    }
  }

  async adjudicate(
    escalationId: string,
    decision: string,
    rationale: string,
  ): Promise<boolean> {
    const before = this.vm.escalations;
    this.vm.escalations = before.filter(
      (e) => e.escalation_id !== escalationId,
    );
    this.changed();
    try {
      await this.api.resolveEscalation(escalationId, decision, rationale);
      this.settledEscalations.add(escalationId);
      this.vm.escalations = this.vm.escalations.filter(
        (e) => e.escalation_id !== escalationId,
      );
      this.changed();
      return true;
    } catch (err) {
      if (err instanceof GatewayError && err.status === 409) {
        this.settledEscalations.add(escalationId);
        this.surface(err, `resolve ${escalationId}`);
        try {
          await this.refreshEscalations();
        } catch {
          // keep the optimistic view if the refetch also fails
        }
      } else {
        this.vm.escalations = before;
        this.surface(err, `resolve ${escalationId}`);
        this.changed();
      }
      return false;
    }
  }

  /** Server state wins after a conflict; a failed refetch keeps the
   * optimistic view rather than guessing. */
  private async recoverQueue(): Promise<void> {
    try {
      await this.refreshQueue();
    } catch {
      // leave the view as-is
    }
  }

  private surface(err: unknown, action: string): void {
    if (err instanceof GatewayError) {
      if (err.status === 409) {
        this.notice("warn", `${action}: already handled elsewhere (${err.errorKind})`);
      } else if (err.status === 401) {
        this.notice("error", `${action}: unauthorized, check the token`);
      } else if (err.status === 404) {
        this.notice("warn", `${action}: not found (${err.errorKind})`);
      } else {
        this.notice("error", `${action}: ${err.message}`);
      }
    } else {
      this.notice("error", `${action}: ${String(err)}`);
    }
  }
}
