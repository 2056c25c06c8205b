"""Materialized classroom state.

Everything the event log determines lives here; ``dump()`` produces a
canonical plain-dict form whose SHA-256 is the state hash used by replay
verification, and ``load()`` restores it exactly. Derived structures (the
retrieval index, the message-to-session map) are rebuilt, not stored.

Composite dict keys use ``"::"`` between id parts.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from blockclass.domain.model import (
    Assignment,
    Course,
    RosterEntry,
    Section,
    Submission,
    User,
)
from blockclass.chat.sessions import ChatSession
from blockclass.grading.model import GradeRecord, Rubric
from blockclass.presence.tracker import PresenceTracker
from blockclass.projects.snapshots import SnapshotLog


def pair_key(a: str, b: str) -> str:
    return f"{a}::{b}"


@dataclass
class ClassroomState:
    users: dict[str, User] = field(default_factory=dict)
    courses: dict[str, Course] = field(default_factory=dict)
    sections: dict[str, Section] = field(default_factory=dict)
    roster: dict[str, RosterEntry] = field(default_factory=dict)  # student::section
    assignments: dict[str, Assignment] = field(default_factory=dict)
    submissions: dict[str, Submission] = field(default_factory=dict)
    submission_index: dict[str, str] = field(default_factory=dict)  # assignment::student -> id
    snapshot_logs: dict[str, SnapshotLog] = field(default_factory=dict)  # student::assignment
    rubrics: dict[str, Rubric] = field(default_factory=dict)
    grades: dict[str, list[GradeRecord]] = field(default_factory=dict)  # submission -> versions
    sessions: dict[str, ChatSession] = field(default_factory=dict)
    session_index: dict[str, str] = field(default_factory=dict)  # student::assignment -> id
    manual_text: str | None = None
    chunk_target_words: int = 300
    presence: PresenceTracker = field(default_factory=PresenceTracker)
    id_seq: dict[str, int] = field(default_factory=dict)

    # rebuilt, never persisted
    message_index: dict[str, str] = field(default_factory=dict)  # message -> session

    # ── relationship helpers ───────────────────────────────────────────

    def roster_of_section(self, section_id: str) -> list[RosterEntry]:
        entries = [e for e in self.roster.values() if e.section_id == section_id]
        entries.sort(key=lambda e: e.student)
        return entries

    def roster_entry(self, student: str, section_id: str) -> RosterEntry | None:
        return self.roster.get(pair_key(student, section_id))

    def sections_of_student(self, student: str) -> list[str]:
        return sorted(e.section_id for e in self.roster.values() if e.student == student)

    def teacher_of_section(self, section_id: str) -> str | None:
        section = self.sections.get(section_id)
        if section is None:
            return None
        course = self.courses.get(section.course_id)
        return course.owner if course else None

    def assignments_of_section(self, section_id: str) -> list[Assignment]:
        out = [a for a in self.assignments.values() if a.section_id == section_id]
        out.sort(key=lambda a: a.assignment_id)
        return out

    def submissions_of_assignment(self, assignment_id: str) -> list[Submission]:
        out = [s for s in self.submissions.values() if s.assignment_id == assignment_id]
        out.sort(key=lambda s: s.submission_id)
        return out

    def rebuild_message_index(self) -> None:
        self.message_index = {}
        for session in self.sessions.values():
            for message in session.messages:
                self.message_index[message.message_id] = session.session_id

    def rubric_has_finalized_grade(self, rubric_id: str) -> bool:
        for submission_id in self.grades:
            submission = self.submissions.get(submission_id)
            if submission is None:
                continue
            assignment = self.assignments.get(submission.assignment_id)
            if assignment is not None and assignment.rubric_id == rubric_id:
                return True
        return False

    # ── canonical dump / load / hash ───────────────────────────────────

    def dump(self) -> dict:
        return {
            "users": {k: u.to_dict() for k, u in sorted(self.users.items())},
            "courses": {k: c.to_dict() for k, c in sorted(self.courses.items())},
            "sections": {k: s.to_dict() for k, s in sorted(self.sections.items())},
            "roster": {k: e.to_dict() for k, e in sorted(self.roster.items())},
            "assignments": {k: a.to_dict() for k, a in sorted(self.assignments.items())},
            "submissions": {k: s.to_dict() for k, s in sorted(self.submissions.items())},
            "submission_index": dict(sorted(self.submission_index.items())),
            "snapshot_logs": {k: log.to_dict() for k, log in sorted(self.snapshot_logs.items())},
            "rubrics": {k: r.to_dict() for k, r in sorted(self.rubrics.items())},
            "grades": {
                k: [g.to_dict() for g in versions] for k, versions in sorted(self.grades.items())
            },
            "sessions": {k: s.to_dict() for k, s in sorted(self.sessions.items())},
            "session_index": dict(sorted(self.session_index.items())),
            "manual_text": self.manual_text,
            "chunk_target_words": self.chunk_target_words,
            "presence": self.presence.to_dict(),
            "id_seq": dict(sorted(self.id_seq.items())),
        }

    def load(self, data: dict) -> None:
        self.users = {k: User.from_dict(v) for k, v in data["users"].items()}
        self.courses = {k: Course.from_dict(v) for k, v in data["courses"].items()}
        self.sections = {k: Section.from_dict(v) for k, v in data["sections"].items()}
        self.roster = {k: RosterEntry.from_dict(v) for k, v in data["roster"].items()}
        self.assignments = {k: Assignment.from_dict(v) for k, v in data["assignments"].items()}
        self.submissions = {k: Submission.from_dict(v) for k, v in data["submissions"].items()}
        self.submission_index = dict(data["submission_index"])
        self.snapshot_logs = {
            k: SnapshotLog.from_dict(v) for k, v in data["snapshot_logs"].items()
        }
        self.rubrics = {k: Rubric.from_dict(v) for k, v in data["rubrics"].items()}
        self.grades = {
            k: [GradeRecord.from_dict(g) for g in versions]
            for k, versions in data["grades"].items()
        }
        self.sessions = {k: ChatSession.from_dict(v) for k, v in data["sessions"].items()}
        self.session_index = dict(data["session_index"])
        self.manual_text = data["manual_text"]
        self.chunk_target_words = data["chunk_target_words"]
        self.presence.load_dict(data["presence"])
        self.id_seq = dict(data["id_seq"])
        self.rebuild_message_index()

    def state_hash(self) -> str:
        canonical = json.dumps(self.dump(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
