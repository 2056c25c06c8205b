import { describe, expect, it } from "vitest";

import { renderDashboard, renderQueue, renderRoster } from "../src/render.js";
import { DashboardStore } from "../src/store.js";
import { MockClassroom } from "./mockServer.js";

const STUDENTS = ["student-01", "student-02"];

describe("dashboard rendering", () => {
  it("renders one row per student with idle rows visually distinct", () => {
    const classroom = new MockClassroom("sec-000001", STUDENTS);
    const store = new DashboardStore("sec-000001", () => {});
    store.rehydrate(classroom.snapshot(), classroom.lastSeq);
    store.applyEnvelope(classroom.presence("student-01", "idle", 4, 1));
    store.applyEnvelope(classroom.presence("student-02", "active", 6, 3));

    const table = renderRoster(store.state);
    const rows = table.querySelectorAll("tr.roster-row");
    expect(rows.length).toBe(2);
    const idleRow = table.querySelector('[data-student="student-01"]')!;
    expect(idleRow.classList.contains("is-idle")).toBe(true);
    const activeRow = table.querySelector('[data-student="student-02"]')!;
    expect(activeRow.classList.contains("is-idle")).toBe(false);
    expect(activeRow.querySelector(".progress")!.textContent).toBe("+3");
  });

  it("negative progress is flagged below starter", () => {
    const classroom = new MockClassroom("sec-000001", STUDENTS);
    const store = new DashboardStore("sec-000001", () => {});
    store.applyEnvelope(classroom.presence("student-01", "active", 2, -3));
    const table = renderRoster(store.state);
    const cell = table.querySelector('[data-student="student-01"] .progress')!;
    expect(cell.classList.contains("below-starter")).toBe(true);
    expect(cell.textContent).toBe("-3");
  });

  it("hand_raise push appears in the queue panel within one render cycle (< 1 s)", () => {
    const classroom = new MockClassroom("sec-000001", STUDENTS);
    const container = document.createElement("div");
    const store = new DashboardStore("sec-000001", () => {});
    store.subscribe(() => renderDashboard(store.state, container));
    store.rehydrate(classroom.snapshot(), classroom.lastSeq);

    expect(container.querySelectorAll("[data-testid=hand-queue] li").length).toBe(0);
    const started = performance.now();
    store.applyEnvelope(classroom.raiseHand("student-02"));
    const entry = container.querySelector(
      '[data-testid=hand-queue] li[data-student="student-02"]',
    );
    const elapsed = performance.now() - started;
    expect(entry).not.toBeNull();
    expect(elapsed).toBeLessThan(1000);
  });

  it("queue panel preserves exact server order", () => {
    const classroom = new MockClassroom("sec-000001", ["a", "b", "c"]);
    const store = new DashboardStore("sec-000001", () => {});
    store.applyEnvelope(classroom.raiseHand("c"));
    store.applyEnvelope(classroom.raiseHand("a"));
    store.applyEnvelope(classroom.raiseHand("b"));
    const panel = renderQueue(store.state);
    const order = [...panel.querySelectorAll("li")].map((li) => li.dataset.student);
    expect(order).toEqual(["c", "a", "b"]);
  });
});
