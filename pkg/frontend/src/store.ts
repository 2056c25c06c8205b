// Teacher dashboard view state: a pure projection of (one REST activity
// snapshot) + (push messages replayed in seq order). The store holds no
// authoritative data -- rehydrating from a fresh snapshot must always
// reproduce what incremental pushes built.
//
// Gap handling: pushes carry a per-channel monotone seq. A gap means
// missed messages beyond the replay buffer, so the store signals exactly
// one refetch, buffers pushes that arrive meanwhile, and reconciles after
// rehydrate().

import type {
  ActivitySnapshot,
  ActivityRow,
  HandRaisePayload,
  IdleAlertPayload,
  ModerationAlertPayload,
  PresenceStatus,
  PresenceUpdatePayload,
  PushEnvelope,
  QueueEntry,
  SummaryUpdatePayload,
} from "./types.js";

export interface RosterRowView {
  student: string;
  status: PresenceStatus;
  handRaised: boolean;
  blockCount: number;
  progressDelta: number;
}

export interface AlertItem {
  kind: "idle" | "moderation";
  student: string;
  detail: string;
}

export interface DashboardViewState {
  sectionId: string;
  lastSeq: number;
  connection: "live" | "resyncing";
  roster: Map<string, RosterRowView>;
  queue: QueueEntry[];
  alerts: AlertItem[];
  summaries: Map<string, string>;
  grades: Map<string, number>;
}

const MAX_ALERTS = 50;

export function emptyState(sectionId: string): DashboardViewState {
  return {
    sectionId,
    lastSeq: 0,
    connection: "live",
    roster: new Map(),
    queue: [],
    alerts: [],
    summaries: new Map(),
    grades: new Map(),
  };
}

/**
 * The snapshot-reconstructible projection: exactly what one REST activity
 * fetch plus ordered push replay determines. Alert history, summaries, and
 * grade panels are fetched on demand and excluded on purpose.
 */
export function snapshotOf(state: DashboardViewState): Record<string, unknown> {
  return {
    sectionId: state.sectionId,
    roster: [...state.roster.entries()].sort(([a], [b]) => a.localeCompare(b)),
    queue: state.queue.map((entry) => entry.student),
  };
}

export class DashboardStore {
  state: DashboardViewState;
  private pendingRefetch = false;
  private buffered: PushEnvelope[] = [];
  private listeners: (() => void)[] = [];

  constructor(
    sectionId: string,
    private onGap: () => void,
  ) {
    this.state = emptyState(sectionId);
  }

  subscribe(listener: () => void): void {
    this.listeners.push(listener);
  }

  private emitChange(): void {
    for (const listener of this.listeners) listener();
  }

  /** Feed one push envelope; detects seq gaps and requests one refetch. */
  applyEnvelope(envelope: PushEnvelope): void {
    if (envelope.channel !== `section:${this.state.sectionId}`) return;
    if (this.pendingRefetch) {
      this.buffered.push(envelope);
      return;
    }
    if (this.state.lastSeq > 0 && envelope.seq > this.state.lastSeq + 1) {
      // missed messages: hold incoming pushes and ask for a snapshot once
      this.pendingRefetch = true;
      this.state.connection = "resyncing";
      this.buffered.push(envelope);
      this.onGap();
      this.emitChange();
      return;
    }
    if (envelope.seq <= this.state.lastSeq) return; // duplicate replay
    this.reduce(envelope);
    this.state.lastSeq = envelope.seq;
    this.emitChange();
  }

  /** Replace projected state with a REST snapshot, then drain the buffer. */
  rehydrate(snapshot: ActivitySnapshot, channelSeq: number): void {
    const state = emptyState(this.state.sectionId);
    state.lastSeq = channelSeq;
    for (const row of snapshot.rows) {
      state.roster.set(row.student, fromActivityRow(row));
    }
    state.queue = [...snapshot.hand_raise_queue];
    state.alerts = snapshot.idle_alerts.map((alert) => ({
      kind: "idle" as const,
      student: alert.student,
      detail: `idle for ${Math.round(alert.idle_for_ms / 1000)}s`,
    }));
    // summaries/grades arrive by push or on demand; carry them over
    state.summaries = this.state.summaries;
    state.grades = this.state.grades;
    this.state = state;

    this.pendingRefetch = false;
    const backlog = this.buffered;
    this.buffered = [];
    for (const envelope of backlog) {
      if (envelope.seq > this.state.lastSeq) this.applyEnvelope(envelope);
    }
    this.emitChange();
  }

  private row(student: string): RosterRowView {
    let row = this.state.roster.get(student);
    if (!row) {
      row = { student, status: "offline", handRaised: false, blockCount: 0, progressDelta: 0 };
      this.state.roster.set(student, row);
    }
    return row;
  }

  private pushAlert(item: AlertItem): void {
    this.state.alerts.push(item);
    if (this.state.alerts.length > MAX_ALERTS) {
      this.state.alerts.splice(0, this.state.alerts.length - MAX_ALERTS);
    }
  }

  private reduce(envelope: PushEnvelope): void {
    const { type, payload } = envelope.msg;
    switch (type) {
      case "presence_update": {
        const update = payload as unknown as PresenceUpdatePayload;
        const row = this.row(update.student);
        row.status = update.status;
        row.handRaised = update.hand_raised;
        if (update.block_count !== null) row.blockCount = update.block_count;
        if (update.progress_delta !== null) row.progressDelta = update.progress_delta;
        break;
      }
      case "hand_raise": {
        const update = payload as unknown as HandRaisePayload;
        this.state.queue = [...update.queue]; // server order is authoritative
        const row = this.row(update.student);
        row.handRaised = update.action === "raised";
        break;
      }
      case "idle_alert": {
        const alert = payload as unknown as IdleAlertPayload;
        this.pushAlert({
          kind: "idle",
          student: alert.student,
          detail: `idle for ${Math.round(alert.idle_for_ms / 1000)}s`,
        });
        break;
      }
      case "moderation_alert": {
        const alert = payload as unknown as ModerationAlertPayload;
        this.pushAlert({
          kind: "moderation",
          student: alert.student,
          detail: `${alert.reason}: ${alert.detail}`,
        });
        break;
      }
      case "summary_update": {
        const update = payload as unknown as SummaryUpdatePayload;
        this.state.summaries.set(update.student, update.text);
        break;
      }
      case "grade_update": {
        const update = payload as unknown as { submission_id: string; total: number };
        this.state.grades.set(update.submission_id, update.total);
        break;
      }
    }
  }
}

function fromActivityRow(row: ActivityRow): RosterRowView {
  return {
    student: row.student,
    status: row.status,
    handRaised: row.hand_raised,
    blockCount: row.block_count,
    progressDelta: row.progress_delta,
  };
}
