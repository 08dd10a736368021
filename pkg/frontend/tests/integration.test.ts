/** End-to-end tests against a real gateway process driving the
 * simulated network. Tests share one gateway and must run in file
 * order; each one advances the same scripted scenario. */

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { GatewayClient } from "../src/api.js";
import { ConsoleStore } from "../src/store.js";
import { EventStream } from "../src/stream.js";
import { renderApp } from "../src/ui.js";
import type { ConnectionState } from "../src/types.js";
import { startGateway, waitFor, TOKEN, type RunningGateway } from "./helpers.js";

let gw: RunningGateway;
let client: GatewayClient;
let store: ConsoleStore;
let stream: EventStream;
const states: ConnectionState[] = [];

beforeAll(async () => {
  gw = await startGateway();
  client = new GatewayClient(gw.baseUrl, TOKEN);
  store = new ConsoleStore(client, "itest-op");
  stream = new EventStream(
    gw.baseUrl,
    TOKEN,
    (ev) => void store.applyEvent(ev),
    (s) => {
      states.push(s);
      store.setConnection(s);
    },
    { retryDelayMs: 50 },
  );
  stream.start();
  await store.refreshQueue();
  await store.refreshEscalations();
  await waitFor(() => stream.state === "open", "stream open");
});

afterAll(async () => {
  await stream?.stop();
  await gw?.stop();
});

describe("operator round trip", () => {
  it("starts with one opener draft per target", () => {
    const cids = store.vm.queue.map((q) => q.conversation_id).sort();
    expect(cids).toEqual(["conv-c1", "conv-c2", "conv-c3", "conv-c4", "conv-c5"]);
    for (const q of store.vm.queue) {
      expect(q.draft_id).toBe(`${q.conversation_id}-draft-1`);
      expect(q.text).toBe("Hi, how much do your services cost?");
    }
  });

  it("approve sends the draft and the reply comes back as a new draft", async () => {
    const opener = store.vm.queue.find((q) => q.conversation_id === "conv-c1");
    expect(opener).toBeDefined();

    const ok = await store.approve(opener!.draft_id);
    expect(ok).toBe(true);
    expect(store.vm.queue.some((q) => q.conversation_id === "conv-c1")).toBe(false);

    await client.advance(61);
    await waitFor(
      () => store.vm.queue.some((q) => q.draft_id === "conv-c1-draft-2"),
      "reply draft for conv-c1",
    );
    const next = store.vm.queue.find((q) => q.draft_id === "conv-c1-draft-2");
    expect(next?.text).toBe("ok, tell me more.");
    expect(next?.context.map((m) => m.text)).toContain("hello i am here");
  });

  it("edit replaces the outbound text and the QR reply closes the conversation", async () => {
    const opener = store.vm.queue.find((q) => q.conversation_id === "conv-c2");
    expect(await store.editAndApprove(opener!.draft_id, "how do i pay you")).toBe(true);

    await client.advance(61);
    await waitFor(
      () => store.vm.queue.some((q) => q.draft_id === "conv-c2-draft-2"),
      "reply draft for conv-c2",
    );
    expect(await store.approve("conv-c2-draft-2")).toBe(true);
    await client.advance(61);
    await waitFor(async () => {
      const t = await client.transcript("conv-c2");
      return t.outcome !== null;
    }, "conv-c2 outcome");

    await store.openTranscript("conv-c2");
    const t = store.vm.transcript;
    expect(t?.outcome?.kind).toBe("payment_obtained");
    expect(
      t?.messages.some((m) => m.direction === "outbound" && m.text === "how do i pay you"),
    ).toBe(true);

    expect(t?.disclosures).toHaveLength(1);
    const hit = t!.disclosures[0]!;
    expect(hit.method).toBe("alipay_image");
    expect(hit.carrier).toBe("image");
    expect(hit.detail).toBe("https://qr.alipay.com/xdemo");
    expect(hit.evidence_ref.media_id).toBe("c2-qr");

    const qr = t!.messages.find((m) => m.message_id === hit.evidence_ref.message_id);
    expect(qr?.ocr_text).toBe("https://qr.alipay.com/xdemo");
    expect(qr?.media[0]?.person_labels).toEqual(["c2-face"]);

    const html = renderApp(store.vm);
    expect(html).toContain("outcome-payment_obtained");
    expect(html).toContain("https://qr.alipay.com/xdemo");
    expect(html).toContain("persons: c2-face");
  });

  it("reject regenerates a fresh draft without sending anything", async () => {
    const opener = store.vm.queue.find((q) => q.conversation_id === "conv-c3");
    expect(opener?.draft_id).toBe("conv-c3-draft-1");
    expect(await store.reject(opener!.draft_id)).toBe(true);

    await waitFor(
      () => store.vm.queue.some((q) => q.draft_id === "conv-c3-draft-2"),
      "regenerated draft for conv-c3",
    );
    const redo = store.vm.queue.find((q) => q.conversation_id === "conv-c3");
    expect(redo?.draft_id).toBe("conv-c3-draft-2");
    expect(redo?.text).toBe("ok, tell me more.");
    const t = await client.transcript("conv-c3");
    expect(t.messages).toHaveLength(0);
  });

  it("kill switch terminates a conversation and clears its draft", async () => {
    expect(store.vm.queue.some((q) => q.conversation_id === "conv-c4")).toBe(true);
    expect(await store.terminateConversation("conv-c4")).toBe(true);

    await waitFor(
      () => !store.vm.queue.some((q) => q.conversation_id === "conv-c4"),
      "conv-c4 draft cleared",
    );
    await store.openTranscript("conv-c4");
    expect(store.vm.transcript?.outcome?.kind).toBe("operator_terminated");
  });
});

describe("conflicts", () => {
  it("a decision that lost the race surfaces a conflict notice", async () => {
    const rival = new GatewayClient(gw.baseUrl, TOKEN);
    await rival.submitDecision({
      decision: "approve",
      draft_id: "conv-c5-draft-1",
      operator_id: "rival",
    });

    const ok = await store.approve("conv-c5-draft-1");
    expect(ok).toBe(false);
    const notice = store.vm.notices.at(-1);
    expect(notice?.level).toBe("warn");
    expect(notice?.text).toContain("already handled elsewhere");
    expect(notice?.text).toContain("StaleDraft");
    expect(store.vm.queue.some((q) => q.draft_id === "conv-c5-draft-1")).toBe(false);
  });

  it("escalations resolve once; the second verdict is rejected", async () => {
    expect(store.vm.escalations.map((e) => e.escalation_id)).toEqual(["esc-denb"]);
    expect(store.vm.escalations[0]?.model_verdict.decision).toBe("refusal");

    expect(await store.adjudicate("esc-denb", "relevant", "paid chat ads")).toBe(true);
    expect(store.vm.escalations).toEqual([]);

    await expect(
      client.resolveEscalation("esc-denb", "irrelevant", "second look"),
    ).rejects.toMatchObject({ status: 409, errorKind: "AlreadyResolved" });

    expect(await store.adjudicate("esc-denb", "irrelevant", "again")).toBe(false);
    expect(store.vm.notices.at(-1)?.text).toContain("already handled elsewhere");
  });
});

describe("stream continuity", () => {
  it("resumes after a dropped connection with no duplicate or missing events", async () => {
    const seen = states.length;
    stream.dropConnection();
    await waitFor(
      () => states.slice(seen).includes("reconnecting"),
      "reconnect transition",
    );
    await waitFor(() => stream.state === "open", "stream reopen");

    await client.advance(3600);
    const target = (await client.metrics()).last_sequence;
    await waitFor(
      () => (store.vm.eventLog.at(-1)?.sequence ?? 0) >= target,
      "stream caught up",
    );
    // Sequence 0 is below every real event; awaiting it just flushes
    // the serialized apply chain.
    await store.applyEvent({ sequence: 0, kind: "noop", at: 0, payload: {} });

    const seqs = store.vm.eventLog.map((e) => e.sequence);
    expect(seqs.length).toBeGreaterThan(10);
    expect(seqs).toEqual(Array.from({ length: seqs.length }, (_, i) => i + 1));
    expect(stream.delivered).toBe(seqs.length);

    const html = renderApp(store.vm);
    for (const s of seqs.slice(-50)) {
      expect(html.split(`data-sequence="${s}"`).length - 1).toBe(1);
    }
    expect(html).toContain("conn-open");
  });
});
