"""Live student telemetry: presence status, hand-raise queues, idle episodes.

State is a fold over the per-student event stream plus the query clock.
Status is a pure function of (now, last_event_at, last_edit_at):

    offline   now - last_event_at > offline_after (no contact)
    idle      online, but no edit within idle_after; a student who has
              never edited is measured from first contact instead
    active    otherwise

Sequence numbers are strictly increasing per student connection; anything
at or below the last seen seq is dropped as stale and counted. Idle alerts
are edge-triggered per episode: one alert when a student is first seen
idle, re-armed only when an edit makes them active again.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

DEFAULT_HEARTBEAT_MS = 15_000
DEFAULT_OFFLINE_AFTER_MS = 45_000
DEFAULT_IDLE_AFTER_MS = 120_000


class EventKind(str, Enum):
    HEARTBEAT = "heartbeat"
    EDIT = "edit"
    HAND_RAISE = "hand_raise"
    HAND_LOWER = "hand_lower"
    FOCUS = "focus"
    BLUR = "blur"


class PresenceStatus(str, Enum):
    ACTIVE = "active"
    IDLE = "idle"
    OFFLINE = "offline"


@dataclass
class StudentEvent:
    student: str
    kind: EventKind
    at: int
    seq: int
    assignment_id: str | None = None
    conn: str = "default"
    client_at: int | None = None


@dataclass
class PresenceRecord:
    student: str
    conn_seqs: dict[str, int] = field(default_factory=dict)
    first_event_at: int | None = None
    last_event_at: int | None = None
    last_edit_at: int | None = None
    active_assignment: str | None = None
    current_block_count: int | None = None
    raised_section: str | None = None
    raised_at: int | None = None
    raised_seq: int | None = None
    idle_alerted: bool = False
    stale_count: int = 0

    def to_dict(self) -> dict:
        return {
            "student": self.student,
            "conn_seqs": dict(sorted(self.conn_seqs.items())),
            "first_event_at": self.first_event_at,
            "last_event_at": self.last_event_at,
            "last_edit_at": self.last_edit_at,
            "active_assignment": self.active_assignment,
            "current_block_count": self.current_block_count,
            "raised_section": self.raised_section,
            "raised_at": self.raised_at,
            "raised_seq": self.raised_seq,
            "idle_alerted": self.idle_alerted,
            "stale_count": self.stale_count,
        }

    @classmethod
    def from_dict(cls, data: dict) -> PresenceRecord:
        rec = cls(student=data["student"])
        rec.conn_seqs = dict(data["conn_seqs"])
        rec.first_event_at = data["first_event_at"]
        rec.last_event_at = data["last_event_at"]
        rec.last_edit_at = data["last_edit_at"]
        rec.active_assignment = data["active_assignment"]
        rec.current_block_count = data["current_block_count"]
        rec.raised_section = data["raised_section"]
        rec.raised_at = data["raised_at"]
        rec.raised_seq = data["raised_seq"]
        rec.idle_alerted = data["idle_alerted"]
        rec.stale_count = data["stale_count"]
        return rec


@dataclass
class QueueEntry:
    student: str
    raised_at: int
    seq: int


@dataclass
class PresenceState:
    """Point-in-time view of one student's presence."""

    student: str
    status: PresenceStatus
    last_event_at: int | None
    last_edit_at: int | None
    current_block_count: int | None
    hand_raised: bool


@dataclass
class ApplyResult:
    stale: bool
    queue_change: str | None = None  # "raised" | "lowered" | None


class PresenceTracker:
    def __init__(
        self,
        offline_after_ms: int = DEFAULT_OFFLINE_AFTER_MS,
        idle_after_ms: int = DEFAULT_IDLE_AFTER_MS,
    ):
        self.offline_after_ms = offline_after_ms
        self.idle_after_ms = idle_after_ms
        self.records: dict[str, PresenceRecord] = {}
        self.queues: dict[str, list[QueueEntry]] = {}

    # ── event fold ─────────────────────────────────────────────────────

    def record_for(self, student: str) -> PresenceRecord:
        rec = self.records.get(student)
        if rec is None:
            rec = PresenceRecord(student=student)
            self.records[student] = rec
        return rec

    def is_stale(self, student: str, conn: str, seq: int) -> bool:
        rec = self.records.get(student)
        if rec is None:
            return False
        last = rec.conn_seqs.get(conn)
        return last is not None and seq <= last

    def apply_event(
        self,
        event: StudentEvent,
        section_id: str | None,
        block_count: int | None = None,
    ) -> ApplyResult:
        """Fold one event into the state.

        Stale events (seq <= last seen on the connection) only bump the
        student's stale counter. block_count is the refreshed count for
        edit events; the caller resolves it from the snapshot history.
        """
        rec = self.record_for(event.student)
        last = rec.conn_seqs.get(event.conn)
        if last is not None and event.seq <= last:
            rec.stale_count += 1
            return ApplyResult(stale=True)

        rec.conn_seqs[event.conn] = event.seq
        if rec.first_event_at is None:
            rec.first_event_at = event.at
        rec.last_event_at = event.at
        if event.assignment_id is not None:
            rec.active_assignment = event.assignment_id

        queue_change: str | None = None
        if event.kind is EventKind.EDIT:
            rec.last_edit_at = event.at
            rec.idle_alerted = False  # active again: re-arm the idle alert
            if block_count is not None:
                rec.current_block_count = block_count
        elif event.kind is EventKind.HAND_RAISE:
            if rec.raised_section is None and section_id is not None:
                rec.raised_section = section_id
                rec.raised_at = event.at
                rec.raised_seq = event.seq
                self._queue_insert(section_id, QueueEntry(event.student, event.at, event.seq))
                queue_change = "raised"
            # duplicate raise: idempotent, original position kept
        elif event.kind is EventKind.HAND_LOWER:
            if rec.raised_section is not None:
                self._queue_remove(rec.raised_section, event.student)
                rec.raised_section = None
                rec.raised_at = None
                rec.raised_seq = None
                queue_change = "lowered"

        return ApplyResult(stale=False, queue_change=queue_change)

    def _queue_insert(self, section_id: str, entry: QueueEntry) -> None:
        queue = self.queues.setdefault(section_id, [])
        key = (entry.raised_at, entry.seq, entry.student)
        pos = len(queue)
        for i, existing in enumerate(queue):
            if (existing.raised_at, existing.seq, existing.student) > key:
                pos = i
                break
        queue.insert(pos, entry)

    def _queue_remove(self, section_id: str, student: str) -> None:
        queue = self.queues.get(section_id, [])
        self.queues[section_id] = [e for e in queue if e.student != student]

    # ── pure views ─────────────────────────────────────────────────────

    def status_of(self, student: str, now: int) -> PresenceStatus:
        rec = self.records.get(student)
        if rec is None or rec.last_event_at is None:
            return PresenceStatus.OFFLINE
        if now - rec.last_event_at > self.offline_after_ms:
            return PresenceStatus.OFFLINE
        anchor = rec.last_edit_at if rec.last_edit_at is not None else rec.first_event_at
        if anchor is None or now - anchor > self.idle_after_ms:
            return PresenceStatus.IDLE
        return PresenceStatus.ACTIVE

    def idle_for_ms(self, student: str, now: int) -> int:
        rec = self.records[student]
        anchor = rec.last_edit_at if rec.last_edit_at is not None else rec.first_event_at
        return now - anchor if anchor is not None else 0

    def presence_state(self, student: str, now: int) -> PresenceState:
        rec = self.records.get(student)
        return PresenceState(
            student=student,
            status=self.status_of(student, now),
            last_event_at=rec.last_event_at if rec else None,
            last_edit_at=rec.last_edit_at if rec else None,
            current_block_count=rec.current_block_count if rec else None,
            hand_raised=bool(rec and rec.raised_section is not None),
        )

    def queue(self, section_id: str) -> list[QueueEntry]:
        return list(self.queues.get(section_id, []))

    def stale_total(self) -> int:
        return sum(r.stale_count for r in self.records.values())

    # ── serialization ──────────────────────────────────────────────────

    def to_dict(self) -> dict:
        return {
            "records": {k: r.to_dict() for k, r in sorted(self.records.items())},
            "queues": {
                sec: [{"student": e.student, "raised_at": e.raised_at, "seq": e.seq} for e in q]
                for sec, q in sorted(self.queues.items())
            },
        }

    def load_dict(self, data: dict) -> None:
        self.records = {k: PresenceRecord.from_dict(v) for k, v in data["records"].items()}
        self.queues = {
            sec: [QueueEntry(e["student"], e["raised_at"], e["seq"]) for e in q]
            for sec, q in data["queues"].items()
        }
