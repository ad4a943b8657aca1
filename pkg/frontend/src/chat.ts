/**
 * DOM rendering for the chat view. The renderer only appends bubbles for
 * message events already folded into the view model -- it adds no timing of
 * its own, so pacing stays entirely server-driven.
 */

import { showTypingIndicator } from "./state.js";
import type { UiSessionView } from "./types.js";

export interface ChatElements {
  messageList: HTMLElement;
  typingIndicator: HTMLElement;
  statusLine: HTMLElement;
  input: HTMLInputElement;
  sendButton: HTMLButtonElement;
}

export class ChatRenderer {
  private renderedSeqs = new Set<number>();

  constructor(private readonly el: ChatElements, private readonly humanName: string) {}

  render(view: UiSessionView): void {
    for (const bubble of view.messages) {
      if (this.renderedSeqs.has(bubble.seq)) continue;
      this.renderedSeqs.add(bubble.seq);
      const item = document.createElement("div");
      item.className = bubble.role === this.humanName ? "bubble mine" : "bubble theirs";
      item.dataset.seq = String(bubble.seq);
      const sender = document.createElement("span");
      sender.className = "sender";
      sender.textContent = bubble.role;
      const text = document.createElement("span");
      text.className = "text";
      text.textContent = bubble.content;
      item.append(sender, text);
      this.el.messageList.appendChild(item);
    }
    this.el.messageList.scrollTop = this.el.messageList.scrollHeight;

    const typing = showTypingIndicator(view.status);
    this.el.typingIndicator.classList.toggle("visible", typing);
    if (typing && view.agentName) {
      this.el.typingIndicator.textContent = `${view.agentName} is typing…`;
    }

    // waiting is deliberately silent: no indicator, just an enabled input
    this.el.statusLine.textContent = view.closed ? "conversation ended" : "";
    this.el.input.disabled = !view.inputEnabled;
    this.el.sendButton.disabled = !view.inputEnabled;
  }

  renderedCount(): number {
    return this.renderedSeqs.size;
  }
}
