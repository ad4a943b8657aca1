/**
 * Pure reducer turning the ordered session event stream into the view model.
 *
 * Pacing is entirely server-driven: a bubble appears only when its `message`
 * event arrives, never earlier. Events are deduplicated by sequence number,
 * so replaying a window after a reconnect is idempotent.
 */

import type { AgentStatus, ChatBubble, SessionEvent, UiSessionView } from "./types.js";

export function initialView(): UiSessionView {
  return {
    messages: [],
    status: "idle",
    lastSeq: 0,
    closed: false,
    inputEnabled: true,
    agentName: null,
  };
}

function bubbleOf(ev: SessionEvent): ChatBubble {
  return {
    seq: ev.seq,
    role: ev.role ?? "?",
    content: ev.content ?? "",
    timestamp: ev.timestamp ?? 0,
    fromAgent: ev.step_seq !== undefined,
  };
}

export function reduce(view: UiSessionView, ev: SessionEvent): UiSessionView {
  if (ev.seq <= view.lastSeq) {
    return view; // replayed event: already applied
  }
  const next: UiSessionView = { ...view, messages: view.messages, lastSeq: ev.seq };
  switch (ev.type) {
    case "message": {
      next.messages = [...view.messages, bubbleOf(ev)];
      if (ev.step_seq !== undefined) {
        next.agentName = ev.role ?? next.agentName;
      }
      // after any message the agent's next move is undecided
      next.status = next.closed ? "idle" : "thinking";
      break;
    }
    case "typing_started": {
      next.status = "typing";
      next.agentName = ev.role ?? next.agentName;
      break;
    }
    case "waiting": {
      next.status = "waiting";
      next.agentName = ev.role ?? next.agentName;
      break;
    }
    case "closed": {
      next.status = "idle";
      next.closed = true;
      next.inputEnabled = false;
      break;
    }
  }
  return next;
}

export function reduceAll(view: UiSessionView, events: SessionEvent[]): UiSessionView {
  return events.reduce(reduce, view);
}

/** True while the UI should show a typing indicator. Waiting is silent. */
export function showTypingIndicator(status: AgentStatus): boolean {
  return status === "typing";
}
