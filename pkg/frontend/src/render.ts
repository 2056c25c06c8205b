// DOM renderers for the teacher dashboard. Framework-free: every function
// builds or patches plain elements from the projected view state.

import type { DashboardViewState } from "./store.js";

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

export function renderRoster(state: DashboardViewState): HTMLElement {
  const table = el("table", "roster");
  table.dataset.testid = "roster";
  const head = el("tr");
  for (const column of ["", "student", "status", "blocks", "progress", "hand"]) {
    head.appendChild(el("th", undefined, column));
  }
  table.appendChild(head);

  const students = [...state.roster.keys()].sort();
  for (const student of students) {
    const row = state.roster.get(student)!;
    const tr = el("tr", `roster-row status-${row.status}`);
    tr.dataset.student = student;
    if (row.status === "idle") tr.classList.add("is-idle");

    const dot = el("td", "status-dot");
    dot.appendChild(el("span", `dot dot-${row.status}`));
    tr.appendChild(dot);
    tr.appendChild(el("td", "student", student));
    tr.appendChild(el("td", "status", row.status));
    tr.appendChild(el("td", "blocks", String(row.blockCount)));
    const progress = el(
      "td",
      row.progressDelta < 0 ? "progress below-starter" : "progress",
      row.progressDelta >= 0 ? `+${row.progressDelta}` : String(row.progressDelta),
    );
    tr.appendChild(progress);
    tr.appendChild(el("td", "hand", row.handRaised ? "✋" : ""));
    table.appendChild(tr);
  }
  return table;
}

export function renderQueue(state: DashboardViewState): HTMLElement {
  const panel = el("ol", "hand-queue");
  panel.dataset.testid = "hand-queue";
  for (const entry of state.queue) {
    const item = el("li", "queue-entry", entry.student);
    item.dataset.student = entry.student;
    panel.appendChild(item);
  }
  return panel;
}

export function renderAlerts(state: DashboardViewState): HTMLElement {
  const feed = el("ul", "alert-feed");
  feed.dataset.testid = "alert-feed";
  for (const alert of state.alerts) {
    const item = el("li", `alert alert-${alert.kind}`, `${alert.student}: ${alert.detail}`);
    feed.appendChild(item);
  }
  return feed;
}

export function renderConnectionBadge(state: DashboardViewState): HTMLElement {
  const badge = el("span", `connection ${state.connection}`, state.connection);
  badge.dataset.testid = "connection";
  return badge;
}

/** Re-render the dashboard into a container (simple replace-on-change). */
export function renderDashboard(state: DashboardViewState, container: HTMLElement): void {
  container.replaceChildren(
    renderConnectionBadge(state),
    renderRoster(state),
    renderQueue(state),
    renderAlerts(state),
  );
}
