/** Page bootstrap: read gateway settings, wire store + stream + render
 * loop, and translate clicks into store operations. */

import { GatewayClient } from "./api.js";
import { ConsoleStore } from "./store.js";
import { EventStream } from "./stream.js";
import { renderApp } from "./ui.js";

function settings(): { baseUrl: string; token: string } {
  const params = new URLSearchParams(window.location.search);
  const baseUrl =
    params.get("gateway") ??
    localStorage.getItem("decoychat.gateway") ??
    "http://127.0.0.1:8787";
  const token =
    params.get("token") ?? localStorage.getItem("decoychat.token") ?? "";
  localStorage.setItem("decoychat.gateway", baseUrl);
  if (token) localStorage.setItem("decoychat.token", token);
  return { baseUrl, token };
}

export function boot(root: HTMLElement): void {
  const { baseUrl, token } = settings();
  const client = new GatewayClient(baseUrl, token);
  const store = new ConsoleStore(client, "console-operator");

  let scheduled = false;
  const render = () => {
    if (scheduled) return;
    scheduled = true;
    queueMicrotask(() => {
      scheduled = false;
      root.innerHTML = renderApp(store.vm);
    });
  };
  store.subscribe(render);

  const stream = new EventStream(
    baseUrl,
    token,
    (ev) => void store.applyEvent(ev),
    (state) => store.setConnection(state),
  );
  stream.start();

  void store.refreshQueue().catch((e) => store.notice("error", String(e)));
  void store.refreshEscalations().catch(() => {});
  void store.refreshMetrics().catch(() => {});

  root.addEventListener("click", (raw) => {
    const target = raw.target as HTMLElement | null;
    const button = target?.closest("button[data-action]");
    if (!(button instanceof HTMLButtonElement)) return;
    const action = button.dataset["action"];
    const draftCard = button.closest("[data-draft]") as HTMLElement | null;
    const draftId = draftCard?.dataset["draft"];
    const conversationId =
      (button.closest("[data-conversation]") as HTMLElement | null)?.dataset[
        "conversation"
      ] ?? "";
    const escalationId = (
      button.closest("[data-escalation]") as HTMLElement | null
    )?.dataset["escalation"];

    switch (action) {
      case "approve":
        if (draftId) void store.approve(draftId);
        break;
      case "edit": {
        if (!draftId) break;
        const current =
          draftCard?.querySelector("blockquote")?.textContent ?? "";
        const replacement = window.prompt("Edited message", current);
        if (replacement) void store.editAndApprove(draftId, replacement);
        break;
      }
      case "reject":
        if (draftId) void store.reject(draftId);
        break;
      case "terminate":
        if (draftId) void store.terminateDraft(draftId);
        break;
      case "kill":
        if (conversationId) void store.terminateConversation(conversationId);
        break;
      case "transcript":
        if (conversationId) void store.openTranscript(conversationId);
        break;
      case "resolve-relevant":
        if (escalationId)
          void store.adjudicate(escalationId, "relevant", "operator review");
        break;
      case "resolve-irrelevant":
        if (escalationId)
          void store.adjudicate(escalationId, "irrelevant", "operator review");
        break;
    }
  });
}

if (typeof document !== "undefined") {
  const root = document.getElementById("app");
  if (root) boot(root);
}
