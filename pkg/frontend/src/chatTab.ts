// Student panel chat tab. When the assignment has the assistant turned
// off the tab is not rendered at all (no hidden element, no dead button),
// matching the server which refuses the route outright.

import type { RestClient } from "./api.js";
import type { Assignment, ChatMessage } from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderMessage(
  message: ChatMessage,
  onRate: (messageId: string, rating: "up" | "down") => void,
): HTMLElement {
  const item = el("div", `chat-message from-${message.role}`);
  item.dataset.messageId = message.message_id;
  item.appendChild(el("p", "text", message.text));
  if (message.role === "bot") {
    const controls = el("div", "rating-controls");
    for (const value of ["up", "down"] as const) {
      const button = el("button", `rate rate-${value}`, value === "up" ? "\u{1F44D}" : "\u{1F44E}");
      button.dataset.rating = value;
      const mine = Object.values(message.ratings).find((r) => r.value === value);
      if (mine) button.classList.add("selected");
      button.addEventListener("click", () => onRate(message.message_id, value));
      controls.appendChild(button);
    }
    item.appendChild(controls);
  }
  return item;
}

export interface ChatTabOptions {
  assignment: Assignment;
  client: RestClient;
  /** invoked after every server round trip so the host can re-render */
  onUpdate?: () => void;
}

/**
 * Build the chat tab for one assignment, or return null when the
 * assistant is disabled -- callers must simply not mount anything.
 */
export function createChatTab(options: ChatTabOptions): HTMLElement | null {
  const { assignment, client } = options;
  if (!assignment.chatbot_enabled) {
    return null;
  }

  const root = el("section", "chat-tab");
  root.dataset.testid = "chat-tab";
  const log = el("div", "chat-log");
  const form = el("form", "chat-form");
  const input = el("input") as HTMLInputElement;
  input.type = "text";
  input.placeholder = "Ask about blocks or the assignment";
  const send = el("button", "send", "Send");
  form.appendChild(input);
  form.appendChild(send);
  root.appendChild(log);
  root.appendChild(form);

  const notice = el("p", "notice");
  notice.hidden = true;
  root.appendChild(notice);

  const rate = async (messageId: string, rating: "up" | "down") => {
    await client.rateMessage(messageId, rating);
    await refresh();
  };

  const appendMessage = (message: ChatMessage) => {
    log.appendChild(renderMessage(message, (id, value) => void rate(id, value)));
  };

  const refresh = async () => {
    const history = await client.chatHistory(assignment.assignment_id);
    log.replaceChildren();
    for (const message of history.messages) appendMessage(message);
    options.onUpdate?.();
  };

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const text = input.value.trim();
    if (!text) return;
    input.value = "";
    notice.hidden = true;
    client
      .sendChatMessage(assignment.assignment_id, text)
      .then((turn) => {
        appendMessage(turn.student_message);
        if (turn.bot_message) appendMessage(turn.bot_message);
        options.onUpdate?.();
      })
      .catch((error) => {
        notice.hidden = false;
        if (error?.code === "provider_unavailable" || error?.code === "provider_timeout") {
          notice.textContent = "The assistant is busy; your question was saved. Try again.";
        } else if (error?.code === "flagged_before_send") {
          notice.textContent = "That message was flagged and your teacher was notified.";
        } else {
          notice.textContent = "Could not send right now.";
        }
        options.onUpdate?.();
      });
  });

  void refresh();
  return root;
}

/** Teacher variant: read-only history plus the latest five-minute summary. */
export function createTeacherChatView(
  client: RestClient,
  assignmentId: string,
  student: string,
): HTMLElement {
  const root = el("section", "chat-review");
  root.dataset.testid = "chat-review";
  const summaryBlock = el("blockquote", "chat-summary");
  summaryBlock.dataset.testid = "chat-summary";
  const log = el("div", "chat-log");
  root.appendChild(summaryBlock);
  root.appendChild(log);

  void client.chatHistory(assignmentId, student).then((history) => {
    log.replaceChildren();
    for (const message of history.messages) {
      log.appendChild(renderMessage(message, () => void client.rateMessage));
    }
  });
  void client.chatSummary(assignmentId, student).then(({ latest }) => {
    summaryBlock.textContent = latest ? latest.text : "(no summary yet)";
  });

  return root;
}

/** Patch the summary block in place when a summary_update push arrives. */
export function applySummaryUpdate(root: HTMLElement, text: string): void {
  const block = root.querySelector<HTMLElement>("[data-testid=chat-summary]");
  if (block) block.textContent = text;
}
