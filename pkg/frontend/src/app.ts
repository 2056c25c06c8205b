// Browser entry point: login, then mount the teacher dashboard or the
// student panel. The view layer holds no authoritative state; everything
// on screen is a projection of REST fetches plus the push stream, so a
// dropped connection only ever costs a refetch.

import { RestClient } from "./api.js";
import { createChatTab } from "./chatTab.js";
import { PushChannel } from "./push.js";
import { renderDashboard } from "./render.js";
import { DashboardStore } from "./store.js";
import type { Assignment } from "./types.js";

export async function startTeacherDashboard(
  container: HTMLElement,
  client: RestClient,
  pushBase: string,
  token: string,
  sectionId: string,
): Promise<{ store: DashboardStore; channel: PushChannel }> {
  const store = new DashboardStore(sectionId, () => {
    // seq gap: one refetch reconciles, buffered pushes replay after
    void client.sectionActivity(sectionId).then((snapshot) => {
      store.rehydrate(snapshot, channel.lastSeenSeq);
    });
  });
  store.subscribe(() => renderDashboard(store.state, container));

  const channel = new PushChannel({ baseUrl: pushBase, token, section: sectionId });
  channel.onEnvelope((envelope) => store.applyEnvelope(envelope));
  channel.connect();

  const snapshot = await client.sectionActivity(sectionId);
  store.rehydrate(snapshot, channel.lastSeenSeq);
  renderDashboard(store.state, container);
  return { store, channel };
}

export interface StudentPanelHandles {
  raiseHand: () => void;
  lowerHand: () => void;
}

export function startStudentPanel(
  container: HTMLElement,
  client: RestClient,
  channel: PushChannel,
  assignment: Assignment,
): StudentPanelHandles {
  let seq = 0;
  const nextSeq = () => ++seq;

  container.replaceChildren();
  const header = document.createElement("header");
  header.textContent = `${assignment.name} — ${assignment.description}`;
  container.appendChild(header);

  const instructions = document.createElement("pre");
  instructions.className = "starter-preview";
  void client.starter(assignment.assignment_id).then(({ project_xml }) => {
    instructions.textContent = project_xml;
  });
  container.appendChild(instructions);

  const handButton = document.createElement("button");
  handButton.className = "raise-hand";
  handButton.dataset.testid = "raise-hand";
  handButton.textContent = "Raise hand";
  let raised = false;
  handButton.addEventListener("click", () => {
    // optimistic toggle; the server echo reconciles via presence pushes
    raised = !raised;
    handButton.textContent = raised ? "Lower hand" : "Raise hand";
    channel.send({
      type: "event",
      kind: raised ? "hand_raise" : "hand_lower",
      assignment: assignment.assignment_id,
      seq: nextSeq(),
      client_at: Date.now(),
    });
  });
  container.appendChild(handButton);

  const chatTab = createChatTab({ assignment, client });
  if (chatTab) container.appendChild(chatTab);

  const heartbeat = () => {
    channel.send({
      type: "event",
      kind: "heartbeat",
      assignment: assignment.assignment_id,
      seq: nextSeq(),
      client_at: Date.now(),
    });
  };
  setInterval(heartbeat, 15_000);

  return {
    raiseHand: () => {
      if (!raised) handButton.click();
    },
    lowerHand: () => {
      if (raised) handButton.click();
    },
  };
}

export async function main(): Promise<void> {
  const root = document.getElementById("app");
  if (!root) return;
  const client = new RestClient("");
  const params = new URLSearchParams(window.location.search);
  const username = params.get("user") ?? "teacher";
  const secret = params.get("secret") ?? "teacher-pass";
  const login = await client.login(username, secret);

  const wsBase = (location.protocol === "https:" ? "wss://" : "ws://") + location.host;
  if (login.role === "teacher") {
    const courses = await client.courses();
    const section = params.get("section") ?? courses.courses[0]?.sections[0]?.section_id;
    if (!section) {
      root.textContent = "No sections yet; seed the classroom first.";
      return;
    }
    await startTeacherDashboard(root, client, wsBase, login.token, section);
  } else {
    const { assignments } = await client.assignments();
    const assignment = assignments.find((a) => a.state === "published");
    if (!assignment) {
      root.textContent = "No published assignments.";
      return;
    }
    const channel = new PushChannel({ baseUrl: wsBase, token: login.token });
    channel.connect();
    startStudentPanel(root, client, channel, assignment);
  }
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  void main();
}
