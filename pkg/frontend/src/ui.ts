/** HTML renderers: pure functions from the view model to markup.
 * main.ts swaps the result into the page and wires click handlers by
 * data attributes; nothing here touches the DOM or the network. */

import type { ViewModel } from "./store.js";
import type {
  EscalationItem,
  Metrics,
  Notice,
  QueueItem,
  StreamEvent,
  Transcript,
  WireMessage,
} from "./types.js";

export function escapeHtml(s: string): string {
  return s
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

function fmtTime(ms: number): string {
  return new Date(ms).toISOString().replace("T", " ").slice(0, 19);
}

export function renderQueue(items: QueueItem[]): string {
  if (items.length === 0) {
    return `<section id="queue"><h2>Approval queue</h2><p class="empty">nothing pending</p></section>`;
  }
  const rows = items
    .map(
      (q) => `
  <article class="draft" data-draft="${escapeHtml(q.draft_id)}" data-conversation="${escapeHtml(q.conversation_id)}">
    <header>${escapeHtml(q.conversation_id)} · ${fmtTime(q.created_at)}</header>
    <blockquote>${escapeHtml(q.text)}</blockquote>
    <div class="actions">
      <button data-action="approve">Approve</button>
      <button data-action="edit">Edit &amp; approve</button>
      <button data-action="reject">Reject</button>
      <button data-action="terminate">Terminate</button>
      <button data-action="transcript">Transcript</button>
    </div>
  </article>`,
    )
    .join("\n");
  return `<section id="queue"><h2>Approval queue (${items.length})</h2>${rows}</section>`;
}

function renderMessage(m: WireMessage, highlighted: Set<string>): string {
  const cls = m.direction === "outbound" ? "out" : "in";
  const mark = highlighted.has(m.message_id) ? " disclosure" : "";
  const media = m.media
    .map(
      (ref) => `
    <figure class="media">
      <span class="placeholder">[${escapeHtml(ref.kind)} ${escapeHtml(ref.media_id)}]</span>
      ${ref.person_labels.length ? `<span class="labels">persons: ${ref.person_labels.map(escapeHtml).join(", ")}</span>` : ""}
      ${m.ocr_text ? `<figcaption class="ocr">${escapeHtml(m.ocr_text)}</figcaption>` : ""}
    </figure>`,
    )
    .join("");
  return `
  <li class="msg ${cls}${mark}" data-message="${escapeHtml(m.message_id)}">
    <span class="when">${fmtTime(m.timestamp)}</span>
    <span class="text">${escapeHtml(m.text)}</span>${media}
  </li>`;
}

export function renderTranscript(t: Transcript | null): string {
  if (t === null) {
    return `<section id="transcript"><h2>Transcript</h2><p class="empty">no conversation open</p></section>`;
  }
  const highlighted = new Set(
    t.disclosures.map((d) => d.evidence_ref.message_id),
  );
  const badge = t.outcome
    ? `<span class="badge outcome-${escapeHtml(t.outcome.kind)}">${escapeHtml(t.outcome.kind)}</span>`
    : `<span class="badge live">${escapeHtml(t.state)}</span>`;
  const disclosures = t.disclosures
    .map(
      (d) =>
        `<li class="hit">${escapeHtml(d.method)} via ${escapeHtml(d.carrier)}: <code>${escapeHtml(d.detail)}</code></li>`,
    )
    .join("");
  return `
<section id="transcript" data-conversation="${escapeHtml(t.conversation_id)}">
  <h2>Transcript ${escapeHtml(t.conversation_id)} ${badge}</h2>
  <p class="meta">actor ${escapeHtml(t.actor_id)} · round ${t.round_counter} · retries ${t.retry_counter}</p>
  <div class="actions"><button data-action="kill" data-conversation="${escapeHtml(t.conversation_id)}">Terminate conversation</button></div>
  ${disclosures ? `<ul class="disclosures">${disclosures}</ul>` : ""}
  <ul class="messages">${t.messages.map((m) => renderMessage(m, highlighted)).join("\n")}</ul>
</section>`;
}

export function renderEscalations(items: EscalationItem[]): string {
  if (items.length === 0) {
    return `<section id="escalations"><h2>Escalations</h2><p class="empty">queue clear</p></section>`;
  }
  const rows = items
    .map(
      (e) => `
  <article class="escalation" data-escalation="${escapeHtml(e.escalation_id)}">
    <header>${escapeHtml(e.canonical)} · ${fmtTime(e.queued_at)}</header>
    <p>model said: ${escapeHtml(e.model_verdict.decision)} (${escapeHtml(e.model_verdict.rationale)})</p>
    <div class="actions">
      <button data-action="resolve-relevant">Relevant</button>
      <button data-action="resolve-irrelevant">Irrelevant</button>
    </div>
  </article>`,
    )
    .join("\n");
  return `<section id="escalations"><h2>Escalations (${items.length})</h2>${rows}</section>`;
}

export function renderMetrics(m: Metrics | null): string {
  if (m === null) {
    return `<section id="metrics"><h2>Metrics</h2><p class="empty">not loaded</p></section>`;
  }
  const outcomes = Object.entries(m.outcomes)
    .map(([k, v]) => `<li>${escapeHtml(k)}: ${v}</li>`)
    .join("");
  const payments = Object.entries(m.payment_distribution)
    .map(([k, v]) => `<li>${escapeHtml(k)}: ${v.count} (${v.pct}%)</li>`)
    .join("");
  return `
<section id="metrics">
  <h2>Metrics</h2>
  <ul class="counters">
    <li>sessions ${m.sessions_active}/${m.sessions_total} active</li>
    <li>pending drafts ${m.pending_drafts}</li>
    <li>open escalations ${m.escalations_open}</li>
    <li>disclosures ${m.disclosure_total}</li>
    <li>actors ${m.actors} · channels ${m.channels}</li>
  </ul>
  ${outcomes ? `<h3>Outcomes</h3><ul>${outcomes}</ul>` : ""}
  ${payments ? `<h3>Payment methods</h3><ul>${payments}</ul>` : ""}
</section>`;
}

export function renderNotices(notices: Notice[]): string {
  const rows = [...notices]
    .reverse()
    .map(
      (n) =>
        `<li class="notice ${n.level}">${fmtTime(n.at)} ${escapeHtml(n.text)}</li>`,
    )
    .join("");
  return `<aside id="notices"><ul>${rows}</ul></aside>`;
}

export function renderEventLog(events: StreamEvent[]): string {
  const rows = events
    .slice(-50)
    .reverse()
    .map(
      (ev) =>
        `<li data-sequence="${ev.sequence}"><code>#${ev.sequence}</code> ${escapeHtml(ev.kind)} ${fmtTime(ev.at)}</li>`,
    )
    .join("");
  return `<section id="activity"><h2>Activity</h2><ul>${rows}</ul></section>`;
}

export function renderApp(vm: ViewModel): string {
  return `
<header id="top">
  <h1>decoychat console</h1>
  <span id="connection" class="conn-${vm.connection}">${vm.connection}</span>
</header>
${renderNotices(vm.notices)}
<main>
${renderQueue(vm.queue)}
${renderEscalations(vm.escalations)}
${renderTranscript(vm.transcript)}
${renderMetrics(vm.metrics)}
${renderEventLog(vm.eventLog)}
</main>`;
}
