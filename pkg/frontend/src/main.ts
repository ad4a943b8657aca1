/**
 * Chat page bootstrap.
 *
 * URL parameters:
 *   ?api=http://127.0.0.1:8008   service base URL (default: same origin)
 *   ?session=<id>                resume an existing session
 *   ?seed=<seed_id>&system=s2    create a new session
 *   ?debug=1                     show think traces and delays (development)
 */

import { StepchatApi } from "./api.js";
import { ChatRenderer } from "./chat.js";
import { consumeEvents } from "./sse.js";
import { initialView, reduce } from "./state.js";
import type { UiSessionView } from "./types.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

async function bootstrap(): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  const api = new StepchatApi(params.get("api") ?? "");
  const debug = params.get("debug") === "1";

  let sessionId = params.get("session");
  if (!sessionId) {
    const seedId = params.get("seed");
    if (!seedId) {
      el<HTMLElement>("status-line").textContent =
        "open with ?session=<id> or ?seed=<seed_id>";
      return;
    }
    const created = await api.createSession(seedId, params.get("system") ?? "s2");
    sessionId = created.session_id;
    params.set("session", sessionId);
    params.delete("seed");
    history.replaceState(null, "", `?${params.toString()}`);
  }

  const info = await api.sessionInfo(sessionId);
  el<HTMLElement>("topic-line").textContent = `talking about: ${info.topic}`;

  const renderer = new ChatRenderer(
    {
      messageList: el("message-list"),
      typingIndicator: el("typing-indicator"),
      statusLine: el("status-line"),
      input: el<HTMLInputElement>("chat-input"),
      sendButton: el<HTMLButtonElement>("send-button"),
    },
    info.human_name,
  );

  let view: UiSessionView = initialView();
  renderer.render(view);

  const input = el<HTMLInputElement>("chat-input");
  const send = async () => {
    const text = input.value.trim();
    if (!text || view.closed) return;
    input.value = "";
    try {
      await api.postMessage(sessionId as string, text);
    } catch (err) {
      el<HTMLElement>("status-line").textContent = `send failed: ${err}`;
    }
  };
  el<HTMLButtonElement>("send-button").addEventListener("click", send);
  input.addEventListener("keydown", (ev) => {
    if (ev.key === "Enter") void send();
  });

  if (debug) {
    const panel = el<HTMLElement>("debug-panel");
    panel.classList.add("visible");
    setInterval(async () => {
      const { records } = await api.sessionRecords(sessionId as string);
      panel.textContent = records
        .filter((record) => record["type"] === "agent_step")
        .map((record) =>
          `#${record["seq"]} ${record["action"]} delay=${Number(record["delay_s"]).toFixed(2)}s think: ${record["think"]}`)
        .join("\n");
    }, 2000);
  }

  await consumeEvents(
    { baseUrl: api.baseUrl, sessionId },
    (ev) => {
      view = reduce(view, ev);
      renderer.render(view);
    },
  );
}

bootstrap().catch((err) => {
  const status = document.getElementById("status-line");
  if (status) status.textContent = String(err);
});
