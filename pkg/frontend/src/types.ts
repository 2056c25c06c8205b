// Wire types for the blockclass REST + WebSocket contract. Field names
// mirror the server JSON exactly; snake_case is the wire, camelCase stays
// out of these interfaces on purpose.

export type PresenceStatus = "active" | "idle" | "offline";

export type PushMessageType =
  | "presence_update"
  | "hand_raise"
  | "idle_alert"
  | "moderation_alert"
  | "summary_update"
  | "grade_update";

export interface PushEnvelope {
  type: "push";
  channel: string;
  seq: number;
  msg: {
    type: PushMessageType;
    payload: Record<string, unknown>;
  };
}

export interface PresenceUpdatePayload {
  student: string;
  status: PresenceStatus;
  block_count: number | null;
  progress_delta: number | null;
  hand_raised: boolean;
  at: number;
}

export interface QueueEntry {
  student: string;
  raised_at: number;
}

export interface HandRaisePayload {
  action: "raised" | "lowered";
  student: string;
  section_id: string;
  queue: QueueEntry[];
}

export interface IdleAlertPayload {
  student: string;
  idle_for_ms: number;
  section_id: string;
}

export interface ModerationAlertPayload {
  student: string;
  assignment_id: string;
  message_id: string;
  reason: string;
  detail: string;
}

export interface SummaryUpdatePayload {
  session_id: string;
  student: string;
  assignment_id: string;
  text: string;
  generated_at: number;
}

export interface GradeUpdatePayload {
  submission_id: string;
  student: string;
  assignment_id: string;
  version: number;
  total: number;
}

// ── REST documents ─────────────────────────────────────────────────────

export interface LoginResponse {
  token: string;
  user_id: string;
  role: "teacher" | "student";
  expires_at: string;
}

export interface SectionInfo {
  section_id: string;
  name: string;
}

export interface CourseInfo {
  course_id: string;
  title: string;
  owner: string;
  sections: SectionInfo[];
}

export interface Assignment {
  assignment_id: string;
  section_id: string;
  name: string;
  description: string;
  starter_levels: string[];
  chatbot_enabled: boolean;
  rubric_id: string | null;
  due_at: string | null;
  state: "draft" | "published" | "closed";
}

export interface ActivityRow {
  student: string;
  status: PresenceStatus;
  hand_raised: boolean;
  block_count: number;
  progress_delta: number;
}

export interface ActivitySnapshot {
  section_id: string;
  rows: ActivityRow[];
  generated_at: string;
  hand_raise_queue: QueueEntry[];
  idle_alerts: { student: string; idle_for_ms: number }[];
}

export interface RubricRow {
  row_id: string;
  criterion: string;
  description: string;
  max_points: number;
  machine_check: {
    opcode: string;
    comparator: ">=" | "<=" | "=";
    threshold: number;
  } | null;
  provenance: "human" | "ai" | "ai_regenerated";
}

export interface Rubric {
  rubric_id: string;
  name: string;
  description: string;
  source: "scratch" | "template" | "ai";
  rows: RubricRow[];
  saved_as_template: boolean;
}

export interface Rating {
  rater: string;
  value: "up" | "down";
  comment: string | null;
}

export interface ChatMessage {
  message_id: string;
  role: "student" | "bot";
  text: string;
  at: string;
  retrieved_chunk_ids: string[];
  ratings: Record<string, Rating>;
}

export interface ChatHistory {
  session_id: string | null;
  student: string;
  assignment_id: string;
  messages: ChatMessage[];
  flags: {
    flag_id: string;
    message_id: string;
    reason: string;
    detail: string;
    acknowledged_by: string | null;
  }[];
}

export interface ChatSummaryDoc {
  covering_until: string;
  text: string;
  generated_at: string;
}

export interface SuggestedScore {
  row_id: string;
  suggested: number | null;
  rationale: string;
  machine_checked: boolean;
}
