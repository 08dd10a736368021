/** Event-stream client. One connection at a time; reconnects resume
 * from the last seen sequence so the consumer sees every event exactly
 * once, in order, across arbitrary connection drops. */

import type { ConnectionState, StreamEvent } from "./types.js";

export interface ParsedFrames {
  events: StreamEvent[];
  rest: string;
}

/** Split a text buffer into complete `id:`/`data:` frames; whatever
 * trails the last blank line is returned as the unconsumed rest. */
export function parseFrames(buffer: string): ParsedFrames {
  const events: StreamEvent[] = [];
  const chunks = buffer.split("\n\n");
  const rest = chunks.pop() ?? "";
  for (const chunk of chunks) {
    let data = "";
    for (const line of chunk.split("\n")) {
      if (line.startsWith("data:")) {
        data += line.slice(5).trimStart();
      }
    }
    if (!data) continue;
    events.push(JSON.parse(data) as StreamEvent);
  }
  return { events, rest };
}

export interface EventStreamOptions {
  since?: number;
  retryDelayMs?: number;
}

export class EventStream {
  lastSequence: number;
  state: ConnectionState = "idle";
  delivered = 0;

  private stopped = false;
  private controller: AbortController | null = null;
  private loopDone: Promise<void> | null = null;
  private readonly retryDelayMs: number;

  constructor(
    private readonly baseUrl: string,
    private readonly token: string,
    private readonly onEvent: (ev: StreamEvent) => void,
    private readonly onState: (s: ConnectionState) => void = () => {},
    options: EventStreamOptions = {},
  ) {
    this.lastSequence = options.since ?? 0;
    this.retryDelayMs = options.retryDelayMs ?? 200;
  }

  start(): void {
    if (this.loopDone) return;
    this.stopped = false;
    this.loopDone = this.loop();
  }

  async stop(): Promise<void> {
    this.stopped = true;
    this.controller?.abort();
    await this.loopDone;
    this.loopDone = null;
    this.setState("closed");
  }

  /** Test hook: kill the current connection without stopping the
   * client, forcing the resume path. */
  dropConnection(): void {
    this.controller?.abort();
  }

  private setState(s: ConnectionState): void {
    if (this.state !== s) {
      this.state = s;
      this.onState(s);
    }
  }

  private async loop(): Promise<void> {
    let first = true;
    while (!this.stopped) {
      this.setState(first ? "connecting" : "reconnecting");
      first = false;
      try {
        await this.consumeOnce();
      } catch {
        // Dropped or refused; fall through to the retry delay.
      }
      if (this.stopped) break;
      await new Promise((r) => setTimeout(r, this.retryDelayMs));
    }
  }

  private async consumeOnce(): Promise<void> {
    this.controller = new AbortController();
    const resp = await fetch(
      `${this.baseUrl}/events?since=${this.lastSequence}`,
      {
        headers: { Authorization: `Bearer ${this.token}` },
        signal: this.controller.signal,
      },
    );
    if (!resp.ok || !resp.body) {
      throw new Error(`stream rejected: ${resp.status}`);
    }
    this.setState("open");
    const reader = resp.body.getReader();
    const decoder = new TextDecoder();
    let buffer = "";
    for (;;) {
      const { done, value } = await reader.read();
      if (done) break;
      buffer += decoder.decode(value, { stream: true });
      const { events, rest } = parseFrames(buffer);
      buffer = rest;
      for (const ev of events) {
        if (ev.sequence <= this.lastSequence) continue;
        this.lastSequence = ev.sequence;
        this.delivered += 1;
        this.onEvent(ev);
      }
    }
  }
}
