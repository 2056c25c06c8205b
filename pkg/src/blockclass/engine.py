"""Event-sourced classroom engine.

Every mutation is a command: validate against current state, capture all
nondeterminism (ids, timestamps, provider output) in an event record,
apply the event to the materialized state, then append it to the log.
Replaying the log through the same apply functions reproduces the state
bit-for-bit; interspersed checkpoints carry state hashes that replay
re-verifies.

Commands serialize on one engine lock. Provider calls happen in the
command phase and never during apply, so replay runs offline.
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from blockclass.chat.chunking import chunk_manual
from blockclass.chat.moderation import Denylist, moderate_text
from blockclass.chat.retrieval import RetrievalIndex, build_index, require_index
from blockclass.chat.sessions import (
    CONTEXT_WINDOW_MESSAGES,
    SUMMARY_INTERVAL_MS,
    SUMMARY_MAX_WORDS,
    ChatMessage,
    ChatSession,
    ChatSummary,
    ModerationFlag,
    Rating,
    summary_due,
)
from blockclass.clock import Clock, WallClock
from blockclass.domain.model import (
    Assignment,
    AssignmentState,
    AssignmentStatusSummary,
    Course,
    Role,
    RosterEntry,
    Section,
    SkillLevel,
    Submission,
    User,
    resolve_starter_variant,
)
from blockclass.errors import (
    AssignmentClosed,
    AssignmentImmutable,
    AssignmentNotPublished,
    BlockClassError,
    ChatbotDisabled,
    EmptyPrompt,
    FlaggedBeforeSend,
    Forbidden,
    InvalidProject,
    InvalidStarterProject,
    MalformedProviderOutput,
    NotAuthorized,
    NotBotMessage,
    NotEnrolled,
    NotTeacher,
    ProviderUnavailable,
    RowNotFound,
    RubricFinalized,
    SchemaValidationFailed,
    ScoreOutOfRange,
    StaleEvent,
    UnknownAssignment,
    UnknownCourse,
    UnknownMessage,
    UnknownRubric,
    UnknownSection,
    UnknownSession,
    UnknownSnapshot,
    UnknownStudent,
    UnknownSubmission,
    UnknownUser,
)
from blockclass.grading.model import (
    RUBRIC_ROWS_SCHEMA,
    SCORE_SCHEMA,
    SINGLE_ROW_SCHEMA,
    GradeRecord,
    MachineCheck,
    RowProvenance,
    RowScore,
    Rubric,
    RubricGenRequest,
    RubricRow,
    RubricSource,
    SuggestedScore,
    evaluate_machine_check,
)
from blockclass.llm.config import ProviderConfig
from blockclass.llm.gateway import ChatRequest, LlmGateway
from blockclass.llm.prompts import render
from blockclass.persist.eventlog import EventLog, HashMismatch, read_records
from blockclass.presence.tracker import (
    EventKind,
    PresenceState,
    PresenceStatus,
    PresenceTracker,
    StudentEvent,
)
from blockclass.projects.model import ProjectDocument, count_blocks
from blockclass.projects.snapshots import Snapshot, SnapshotLog, SnapshotReason
from blockclass.projects.xmlio import parse_project, serialize_project
from blockclass.security import hash_secret
from blockclass.state import ClassroomState, pair_key

logger = logging.getLogger(__name__)

DEFAULT_CHECKPOINT_EVERY = 200

# notifier(section_id, student_id, message_type, payload)
Notifier = Callable[[str | None, str | None, str, dict], None]


@dataclass
class SummaryRow:
    student: str
    status: PresenceStatus
    hand_raised: bool
    block_count: int
    progress_delta: int

    def to_dict(self) -> dict:
        return {
            "student": self.student,
            "status": self.status.value,
            "hand_raised": self.hand_raised,
            "block_count": self.block_count,
            "progress_delta": self.progress_delta,
        }


@dataclass
class ActivitySummary:
    section_id: str
    rows: list[SummaryRow]
    generated_at: int

    def to_dict(self) -> dict:
        return {
            "section_id": self.section_id,
            "rows": [r.to_dict() for r in self.rows],
            "generated_at": self.generated_at,
        }


@dataclass
class SuggestResult:
    scores: list[SuggestedScore]
    partial: bool = False


@dataclass
class ChatTurn:
    session_id: str
    student_message: ChatMessage
    bot_message: ChatMessage | None = None
    flag: ModerationFlag | None = None


@dataclass
class IngestResult:
    state: PresenceState
    queue_change: str | None = None


class ClassroomEngine:
    def __init__(
        self,
        clock: Clock | None = None,
        gateway: LlmGateway | None = None,
        denylist: Denylist | None = None,
        rng: random.Random | None = None,
        notifier: Notifier | None = None,
        offline_after_ms: int | None = None,
        idle_after_ms: int | None = None,
        summary_interval_ms: int = SUMMARY_INTERVAL_MS,
        checkpoint_every: int = DEFAULT_CHECKPOINT_EVERY,
    ):
        self.clock: Clock = clock if clock is not None else WallClock()
        self.gateway = gateway if gateway is not None else LlmGateway(ProviderConfig())
        self.denylist = denylist if denylist is not None else Denylist()
        self.rng: random.Random = rng if rng is not None else random.SystemRandom()  # type: ignore[assignment]
        self.notifier = notifier
        self.summary_interval_ms = summary_interval_ms
        self.checkpoint_every = checkpoint_every

        tracker_kwargs = {}
        if offline_after_ms is not None:
            tracker_kwargs["offline_after_ms"] = offline_after_ms
        if idle_after_ms is not None:
            tracker_kwargs["idle_after_ms"] = idle_after_ms
        self.state = ClassroomState(presence=PresenceTracker(**tracker_kwargs))
        self.index: RetrievalIndex | None = None

        self.log: EventLog | None = None
        self.lock = threading.RLock()
        self._applied = 0
        self._since_checkpoint = 0
        self._replaying = False

    # ── plumbing ───────────────────────────────────────────────────────

    def _now(self) -> int:
        return self.clock.now_ms()

    def _peek_id(self, prefix: str, ahead: int = 0) -> str:
        return f"{prefix}-{self.state.id_seq.get(prefix, 0) + 1 + ahead:06d}"

    def _register_id(self, prefix: str, id_str: str) -> None:
        num = int(id_str.rsplit("-", 1)[1])
        if num > self.state.id_seq.get(prefix, 0):
            self.state.id_seq[prefix] = num

    def _emit(self, op: str, data: dict) -> Any:
        result = self._apply(op, data)
        self._applied += 1
        if self.log is not None:
            self.log.append({"i": self._applied, "op": op, "at": self._now(), "data": data})
            self._since_checkpoint += 1
            if self._since_checkpoint >= self.checkpoint_every:
                self.write_checkpoint()
        return result

    def _apply(self, op: str, data: dict) -> Any:
        handler = getattr(self, f"_apply_{op}", None)
        if handler is None:
            raise ValueError(f"unknown event op {op!r}")
        return handler(data)

    def _notify(self, section_id: str | None, student: str | None, kind: str, payload: dict) -> None:
        if self.notifier is not None and not self._replaying:
            self.notifier(section_id, student, kind, payload)

    def state_hash(self) -> str:
        return self.state.state_hash()

    # ── persistence ────────────────────────────────────────────────────

    def attach_log(self, path: str | Path) -> None:
        self.log = EventLog(path)

    def write_checkpoint(self) -> None:
        if self.log is None:
            return
        self.log.append(
            {"i": self._applied, "op": "checkpoint", "data": {"state_hash": self.state_hash()}}
        )
        self._since_checkpoint = 0

    def close(self) -> None:
        with self.lock:
            if self.log is not None:
                self.write_checkpoint()
                self.log.close()
                self.log = None

    def replay_file(
        self,
        path: str | Path,
        *,
        skip_upto_index: int = 0,
        verify_hashes: bool = True,
    ) -> int:
        """Apply every event in a log file; verifies checkpoint hashes.
        Returns the number of events applied."""
        applied = 0
        self._replaying = True
        try:
            for line_no, record in read_records(path):
                op = record["op"]
                index = record["i"]
                if op == "checkpoint":
                    if index <= skip_upto_index:
                        continue
                    expected = record["data"]["state_hash"]
                    actual = self.state_hash()
                    if verify_hashes and actual != expected:
                        raise HashMismatch(line_no, expected, actual)
                    continue
                if index <= skip_upto_index:
                    continue
                self._apply(op, record["data"])
                self._applied = index
                applied += 1
        finally:
            self._replaying = False
        return applied

    def save_state_snapshot(self, path: str | Path) -> None:
        payload = {"applied": self._applied, "state": self.state.dump()}
        Path(path).write_text(
            json.dumps(payload, sort_keys=True, separators=(",", ":")), encoding="utf-8"
        )

    def load_state_snapshot(self, path: str | Path) -> int:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        self.state.load(payload["state"])
        self._applied = payload["applied"]
        self._rebuild_derived()
        return self._applied

    def _rebuild_derived(self) -> None:
        if self.state.manual_text is not None:
            chunks = chunk_manual(self.state.manual_text, self.state.chunk_target_words)
            self.index = build_index(chunks)
        else:
            self.index = None
        self.state.rebuild_message_index()

    # ── lookups shared by commands ─────────────────────────────────────

    def _user(self, user_id: str) -> User:
        user = self.state.users.get(user_id)
        if user is None:
            raise UnknownUser(f"unknown user {user_id}")
        return user

    def _require_teacher(self, user_id: str) -> User:
        user = self.state.users.get(user_id)
        if user is None or user.role is not Role.TEACHER:
            raise NotTeacher(f"{user_id} is not a teacher")
        return user

    def _require_teaches(self, teacher: str, section_id: str) -> None:
        self._require_teacher(teacher)
        if self.state.teacher_of_section(section_id) != teacher:
            raise NotTeacher(f"{teacher} does not teach section {section_id}")

    def _section(self, section_id: str) -> Section:
        section = self.state.sections.get(section_id)
        if section is None:
            raise UnknownSection(f"unknown section {section_id}")
        return section

    def _assignment(self, assignment_id: str) -> Assignment:
        assignment = self.state.assignments.get(assignment_id)
        if assignment is None:
            raise UnknownAssignment(f"unknown assignment {assignment_id}")
        return assignment

    def _require_enrolled(self, student: str, section_id: str) -> RosterEntry:
        entry = self.state.roster_entry(student, section_id)
        if entry is None:
            raise NotEnrolled(f"{student} is not enrolled in section {section_id}")
        return entry

    def _rubric(self, rubric_id: str) -> Rubric:
        rubric = self.state.rubrics.get(rubric_id)
        if rubric is None:
            raise UnknownRubric(f"unknown rubric {rubric_id}")
        return rubric

    def _submission(self, submission_id: str) -> Submission:
        submission = self.state.submissions.get(submission_id)
        if submission is None:
            raise UnknownSubmission(f"unknown submission {submission_id}")
        return submission

    def _session(self, session_id: str) -> ChatSession:
        session = self.state.sessions.get(session_id)
        if session is None:
            raise UnknownSession(f"unknown session {session_id}")
        return session

    def _section_for_event(self, student: str, assignment_id: str | None) -> str | None:
        if assignment_id is not None:
            assignment = self.state.assignments.get(assignment_id)
            if assignment is not None:
                return assignment.section_id
        sections = self.state.sections_of_student(student)
        return sections[0] if sections else None

    def _latest_block_count(self, student: str, assignment_id: str | None) -> int | None:
        if assignment_id is None:
            return None
        log = self.state.snapshot_logs.get(pair_key(student, assignment_id))
        if log is None or log.latest is None:
            return None
        return log.latest.block_count

    def _starter_count_for(self, student: str, assignment_id: str | None) -> int | None:
        if assignment_id is None:
            return None
        assignment = self.state.assignments.get(assignment_id)
        if assignment is None:
            return None
        entry = self.state.roster_entry(student, assignment.section_id)
        if entry is None:
            return None
        xml = resolve_starter_variant(assignment.starter_xml, entry.skill_level)
        return count_blocks(parse_project(xml)) if xml is not None else 0

    # ═════════════════════════════════════════════════════════════════
    # users / courses / roster
    # ═════════════════════════════════════════════════════════════════

    def create_user(self, display_name: str, role: Role, secret: str, user_id: str | None = None) -> User:
        with self.lock:
            if user_id is None:
                user_id = self._peek_id("u")
            elif user_id in self.state.users:
                raise ValueError(f"user id {user_id} already exists")
            salt = "%032x" % self.rng.getrandbits(128)
            data = {
                "user_id": user_id,
                "display_name": display_name,
                "role": role.value if isinstance(role, Role) else str(role),
                "salt": salt,
                "credential_hash": hash_secret(secret, salt),
            }
            return self._emit("user_created", data)

    def _apply_user_created(self, data: dict) -> User:
        user = User(
            user_id=data["user_id"],
            display_name=data["display_name"],
            role=Role(data["role"]),
            credential_salt=data["salt"],
            credential_hash=data["credential_hash"],
        )
        self.state.users[user.user_id] = user
        if user.user_id.startswith("u-"):
            self._register_id("u", user.user_id)
        return user

    def create_course(self, owner: str, title: str, section_names: list[str]) -> Course:
        with self.lock:
            owner_user = self._user(owner)
            if owner_user.role is not Role.TEACHER:
                raise NotTeacher(f"course owner {owner} must be a teacher")
            course_id = self._peek_id("c")
            sections = [
                {"section_id": self._peek_id("sec", i), "name": name}
                for i, name in enumerate(section_names)
            ]
            data = {"course_id": course_id, "title": title, "owner": owner, "sections": sections}
            return self._emit("course_created", data)

    def _apply_course_created(self, data: dict) -> Course:
        course = Course(
            course_id=data["course_id"],
            title=data["title"],
            owner=data["owner"],
            section_ids=[s["section_id"] for s in data["sections"]],
        )
        self.state.courses[course.course_id] = course
        self._register_id("c", course.course_id)
        for s in data["sections"]:
            self.state.sections[s["section_id"]] = Section(
                section_id=s["section_id"], course_id=course.course_id, name=s["name"]
            )
            self._register_id("sec", s["section_id"])
        return course

    def add_section(self, teacher: str, course_id: str, name: str) -> Section:
        with self.lock:
            course = self.state.courses.get(course_id)
            if course is None:
                raise UnknownCourse(f"unknown course {course_id}")
            if course.owner != teacher:
                raise NotTeacher(f"{teacher} does not own course {course_id}")
            data = {"course_id": course_id, "section_id": self._peek_id("sec"), "name": name}
            return self._emit("section_added", data)

    def _apply_section_added(self, data: dict) -> Section:
        section = Section(
            section_id=data["section_id"], course_id=data["course_id"], name=data["name"]
        )
        self.state.sections[section.section_id] = section
        self.state.courses[data["course_id"]].section_ids.append(section.section_id)
        self._register_id("sec", section.section_id)
        return section

    def add_roster_entry(
        self, teacher: str, section_id: str, student: str, skill_level: SkillLevel
    ) -> RosterEntry:
        with self.lock:
            self._section(section_id)
            self._require_teaches(teacher, section_id)
            student_user = self._user(student)
            if student_user.role is not Role.STUDENT:
                raise ValueError(f"{student} is not a student account")
            if self.state.roster_entry(student, section_id) is not None:
                raise ValueError(f"{student} already on roster of {section_id}")
            data = {
                "section_id": section_id,
                "student": student,
                "skill_level": SkillLevel(skill_level).value,
            }
            return self._emit("roster_added", data)

    def _apply_roster_added(self, data: dict) -> RosterEntry:
        entry = RosterEntry(
            student=data["student"],
            section_id=data["section_id"],
            skill_level=SkillLevel(data["skill_level"]),
        )
        self.state.roster[pair_key(entry.student, entry.section_id)] = entry
        return entry

    def set_skill_level(
        self, teacher: str, student: str, section_id: str, level: SkillLevel
    ) -> RosterEntry:
        """Update a student's scaffold level; takes effect on the next
        starter-code resolution. Setting the current value is a no-op and
        emits no event."""
        with self.lock:
            self._section(section_id)
            self._require_teaches(teacher, section_id)
            entry = self._require_enrolled(student, section_id)
            level = SkillLevel(level)
            if entry.skill_level is level:
                return entry
            data = {"section_id": section_id, "student": student, "skill_level": level.value}
            return self._emit("skill_level_set", data)

    def _apply_skill_level_set(self, data: dict) -> RosterEntry:
        entry = self.state.roster[pair_key(data["student"], data["section_id"])]
        entry.skill_level = SkillLevel(data["skill_level"])
        return entry

    # ═════════════════════════════════════════════════════════════════
    # assignments and submissions
    # ═════════════════════════════════════════════════════════════════

    def create_assignment(
        self,
        teacher: str,
        section_id: str,
        name: str,
        description: str,
        starter_variants: dict[str, str] | None = None,
        chatbot_enabled: bool = True,
        rubric_id: str | None = None,
        due_at: int | None = None,
    ) -> Assignment:
        """Create a draft assignment. starter_variants maps skill level to
        project XML; if any variant is present the beginner variant must be
        too (it is the fallback base)."""
        with self.lock:
            self._section(section_id)
            self._require_teaches(teacher, section_id)
            if rubric_id is not None:
                self._rubric(rubric_id)

            starter_xml: dict[str, str] = {}
            for level_str, xml in (starter_variants or {}).items():
                level = SkillLevel(level_str)
                try:
                    starter_xml[level.value] = serialize_project(parse_project(xml))
                except BlockClassError as exc:
                    raise InvalidStarterProject(level.value, str(exc)) from exc
            if starter_xml and SkillLevel.BEGINNER.value not in starter_xml:
                raise InvalidStarterProject(
                    SkillLevel.BEGINNER.value,
                    "beginner variant is the mandatory base when any variant exists",
                )

            data = {
                "assignment_id": self._peek_id("a"),
                "section_id": section_id,
                "name": name,
                "description": description,
                "starter_xml": starter_xml,
                "chatbot_enabled": bool(chatbot_enabled),
                "rubric_id": rubric_id,
                "due_at": due_at,
            }
            return self._emit("assignment_created", data)

    def _apply_assignment_created(self, data: dict) -> Assignment:
        assignment = Assignment(
            assignment_id=data["assignment_id"],
            section_id=data["section_id"],
            name=data["name"],
            description=data["description"],
            starter_xml={SkillLevel(k): v for k, v in data["starter_xml"].items()},
            chatbot_enabled=data["chatbot_enabled"],
            rubric_id=data["rubric_id"],
            due_at=data["due_at"],
            state=AssignmentState.DRAFT,
        )
        self.state.assignments[assignment.assignment_id] = assignment
        self._register_id("a", assignment.assignment_id)
        return assignment

    def attach_rubric(self, teacher: str, assignment_id: str, rubric_id: str) -> Assignment:
        with self.lock:
            assignment = self._assignment(assignment_id)
            self._require_teaches(teacher, assignment.section_id)
            self._rubric(rubric_id)
            if assignment.state is not AssignmentState.DRAFT:
                raise AssignmentImmutable("rubric can only be attached while draft")
            return self._emit(
                "rubric_attached", {"assignment_id": assignment_id, "rubric_id": rubric_id}
            )

    def _apply_rubric_attached(self, data: dict) -> Assignment:
        assignment = self.state.assignments[data["assignment_id"]]
        assignment.rubric_id = data["rubric_id"]
        return assignment

    def publish_assignment(self, teacher: str, assignment_id: str) -> Assignment:
        with self.lock:
            assignment = self._assignment(assignment_id)
            self._require_teaches(teacher, assignment.section_id)
            if assignment.state is not AssignmentState.DRAFT:
                raise AssignmentImmutable(f"assignment {assignment_id} is not a draft")
            if assignment.rubric_id is not None:
                rubric = self._rubric(assignment.rubric_id)
                if not rubric.rows:
                    raise ValueError("attached rubric must have at least one row")
            return self._emit("assignment_published", {"assignment_id": assignment_id})

    def _apply_assignment_published(self, data: dict) -> Assignment:
        assignment = self.state.assignments[data["assignment_id"]]
        assignment.state = AssignmentState.PUBLISHED
        return assignment

    def close_assignment(self, teacher: str, assignment_id: str) -> Assignment:
        with self.lock:
            assignment = self._assignment(assignment_id)
            self._require_teaches(teacher, assignment.section_id)
            if assignment.state is not AssignmentState.PUBLISHED:
                raise AssignmentNotPublished(f"assignment {assignment_id} is not published")
            return self._emit("assignment_closed", {"assignment_id": assignment_id})

    def _apply_assignment_closed(self, data: dict) -> Assignment:
        assignment = self.state.assignments[data["assignment_id"]]
        assignment.state = AssignmentState.CLOSED
        return assignment

    def set_chatbot_enabled(self, teacher: str, assignment_id: str, enabled: bool) -> Assignment:
        with self.lock:
            assignment = self._assignment(assignment_id)
            self._require_teaches(teacher, assignment.section_id)
            if assignment.chatbot_enabled == bool(enabled):
                return assignment
            return self._emit(
                "chatbot_set", {"assignment_id": assignment_id, "enabled": bool(enabled)}
            )

    def _apply_chatbot_set(self, data: dict) -> Assignment:
        assignment = self.state.assignments[data["assignment_id"]]
        assignment.chatbot_enabled = data["enabled"]
        return assignment

    def set_due_at(self, teacher: str, assignment_id: str, due_at: int | None) -> Assignment:
        with self.lock:
            assignment = self._assignment(assignment_id)
            self._require_teaches(teacher, assignment.section_id)
            if assignment.due_at == due_at:
                return assignment
            return self._emit("due_set", {"assignment_id": assignment_id, "due_at": due_at})

    def _apply_due_set(self, data: dict) -> Assignment:
        assignment = self.state.assignments[data["assignment_id"]]
        assignment.due_at = data["due_at"]
        return assignment

    def resolve_starter_code(self, assignment_id: str, student: str) -> ProjectDocument:
        """Starter project for one student: their level's variant, falling
        down advanced -> intermediate -> beginner; empty project when the
        assignment has no variants."""
        with self.lock:
            assignment = self._assignment(assignment_id)
            if assignment.state is not AssignmentState.PUBLISHED:
                raise AssignmentNotPublished(f"assignment {assignment_id} is not published")
            entry = self._require_enrolled(student, assignment.section_id)
            xml = resolve_starter_variant(assignment.starter_xml, entry.skill_level)
            if xml is None:
                return ProjectDocument(name=assignment.name, sprites=[])
            return parse_project(xml)

    def submit_assignment(self, student: str, assignment_id: str, project_xml: str) -> Submission:
        with self.lock:
            assignment = self._assignment(assignment_id)
            if assignment.state is AssignmentState.CLOSED:
                raise AssignmentClosed(f"assignment {assignment_id} is closed")
            if assignment.state is not AssignmentState.PUBLISHED:
                raise AssignmentNotPublished(f"assignment {assignment_id} is not published")
            self._require_enrolled(student, assignment.section_id)
            try:
                canonical = serialize_project(parse_project(project_xml))
            except BlockClassError as exc:
                raise InvalidProject(str(exc)) from exc

            key = pair_key(assignment_id, student)
            submission_id = self.state.submission_index.get(key) or self._peek_id("sub")
            data = {
                "submission_id": submission_id,
                "assignment_id": assignment_id,
                "student": student,
                "xml": canonical,
                "at": self._now(),
                "snapshot_id": self._peek_id("snap"),
            }
            return self._emit("submission_recorded", data)

    def _apply_submission_recorded(self, data: dict) -> Submission:
        submission = Submission(
            submission_id=data["submission_id"],
            assignment_id=data["assignment_id"],
            student=data["student"],
            project_xml=data["xml"],
            submitted_at=data["at"],
        )
        self.state.submissions[submission.submission_id] = submission
        self.state.submission_index[pair_key(data["assignment_id"], data["student"])] = (
            submission.submission_id
        )
        self._register_id("sub", submission.submission_id)
        log = self._snapshot_log(data["student"], data["assignment_id"])
        log.append(
            data["snapshot_id"], data["at"], SnapshotReason.SUBMISSION, parse_project(data["xml"])
        )
        self._register_id("snap", data["snapshot_id"])
        return submission

    def assignment_status_summary(self, assignment_id: str) -> AssignmentStatusSummary:
        with self.lock:
            assignment = self._assignment(assignment_id)
            enrolled = len(self.state.roster_of_section(assignment.section_id))
            submissions = self.state.submissions_of_assignment(assignment_id)
            graded = sum(1 for s in submissions if self.state.grades.get(s.submission_id))
            return AssignmentStatusSummary(
                assignment_id=assignment_id,
                enrolled=enrolled,
                submitted=len(submissions),
                graded=graded,
            )

    # ═════════════════════════════════════════════════════════════════
    # snapshots
    # ═════════════════════════════════════════════════════════════════

    def _snapshot_log(self, student: str, assignment_id: str) -> SnapshotLog:
        key = pair_key(student, assignment_id)
        log = self.state.snapshot_logs.get(key)
        if log is None:
            log = SnapshotLog(student, assignment_id)
            self.state.snapshot_logs[key] = log
        return log

    def record_snapshot(
        self,
        student: str,
        assignment_id: str,
        project_xml: str,
        reason: SnapshotReason = SnapshotReason.AUTOSAVE,
    ) -> tuple[Snapshot, bool]:
        """Append a snapshot; returns (snapshot, appended). Identical
        consecutive autosaves are deduplicated and emit no event."""
        with self.lock:
            assignment = self._assignment(assignment_id)
            self._require_enrolled(student, assignment.section_id)
            reason = SnapshotReason(reason)
            try:
                canonical = serialize_project(parse_project(project_xml))
            except BlockClassError as exc:
                raise InvalidProject(str(exc)) from exc

            log = self.state.snapshot_logs.get(pair_key(student, assignment_id))
            last = log.latest if log is not None else None
            if (
                last is not None
                and reason is SnapshotReason.AUTOSAVE
                and last.reason is SnapshotReason.AUTOSAVE
                and last.content_hash == hashlib.sha256(canonical.encode("utf-8")).hexdigest()
            ):
                return last, False

            data = {
                "student": student,
                "assignment_id": assignment_id,
                "snapshot_id": self._peek_id("snap"),
                "at": self._now(),
                "reason": reason.value,
                "xml": canonical,
            }
            snapshot = self._emit("snapshot_recorded", data)
            return snapshot, True

    def _apply_snapshot_recorded(self, data: dict) -> Snapshot:
        log = self._snapshot_log(data["student"], data["assignment_id"])
        snapshot, _ = log.append(
            data["snapshot_id"],
            data["at"],
            SnapshotReason(data["reason"]),
            parse_project(data["xml"]),
        )
        self._register_id("snap", data["snapshot_id"])
        return snapshot

    def recover_snapshot(
        self, student: str, assignment_id: str, snapshot_id: str
    ) -> tuple[ProjectDocument, Snapshot]:
        """Return the stored project and append a recovery_point snapshot
        capturing the pre-recovery state."""
        with self.lock:
            log = self.state.snapshot_logs.get(pair_key(student, assignment_id))
            if log is None:
                raise UnknownSnapshot(f"no snapshots for {student} on {assignment_id}")
            log.find(snapshot_id)  # raises UnknownSnapshot
            data = {
                "student": student,
                "assignment_id": assignment_id,
                "target_id": snapshot_id,
                "recovery_id": self._peek_id("snap"),
                "at": self._now(),
            }
            recovery = self._emit("snapshot_recovered", data)
            target = log.find(snapshot_id)
            return parse_project(target.project_xml), recovery

    def _apply_snapshot_recovered(self, data: dict) -> Snapshot:
        log = self._snapshot_log(data["student"], data["assignment_id"])
        current = log.latest
        assert current is not None
        snapshot, _ = log.append(
            data["recovery_id"],
            data["at"],
            SnapshotReason.RECOVERY_POINT,
            parse_project(current.project_xml),
        )
        self._register_id("snap", data["recovery_id"])
        return snapshot

    def snapshot_history(self, student: str, assignment_id: str) -> list[Snapshot]:
        with self.lock:
            log = self.state.snapshot_logs.get(pair_key(student, assignment_id))
            return list(log.entries) if log is not None else []

    # ═════════════════════════════════════════════════════════════════
    # presence telemetry
    # ═════════════════════════════════════════════════════════════════

    def ingest_student_event(
        self,
        student: str,
        kind: EventKind | str,
        seq: int,
        assignment_id: str | None = None,
        conn: str = "default",
        client_at: int | None = None,
    ) -> IngestResult:
        """Fold one telemetry event. The server clock assigns the event
        time; client timestamps are kept as diagnostics only. Raises
        StaleEvent for out-of-order sequence numbers (the drop is counted
        and logged for replay)."""
        with self.lock:
            user = self.state.users.get(student)
            if user is None or user.role is not Role.STUDENT:
                raise UnknownStudent(f"unknown student {student}")
            kind = EventKind(kind)
            if assignment_id is not None:
                self._assignment(assignment_id)
            data = {
                "student": student,
                "kind": kind.value,
                "at": self._now(),
                "seq": int(seq),
                "assignment_id": assignment_id,
                "conn": conn,
                "client_at": client_at,
            }
            result: IngestResult | None = self._emit("student_event", data)
            if result is None:
                raise StaleEvent(f"stale seq {seq} for {student} on connection {conn}")
            return result

    def _apply_student_event(self, data: dict) -> IngestResult | None:
        event = StudentEvent(
            student=data["student"],
            kind=EventKind(data["kind"]),
            at=data["at"],
            seq=data["seq"],
            assignment_id=data["assignment_id"],
            conn=data["conn"],
            client_at=data["client_at"],
        )
        section_id = self._section_for_event(event.student, event.assignment_id)
        block_count: int | None = None
        if event.kind is EventKind.EDIT:
            tracker_rec = self.state.presence.records.get(event.student)
            lookup_assignment = event.assignment_id or (
                tracker_rec.active_assignment if tracker_rec else None
            )
            block_count = self._latest_block_count(event.student, lookup_assignment)
        applied = self.state.presence.apply_event(event, section_id, block_count)
        if applied.stale:
            return None

        view = self.state.presence.presence_state(event.student, event.at)
        progress_delta = None
        if view.current_block_count is not None:
            record = self.state.presence.records[event.student]
            starter = self._starter_count_for(event.student, record.active_assignment)
            if starter is not None:
                progress_delta = view.current_block_count - starter
        self._notify(
            section_id,
            None,
            "presence_update",
            {
                "student": event.student,
                "status": view.status.value,
                "block_count": view.current_block_count,
                "progress_delta": progress_delta,
                "hand_raised": view.hand_raised,
                "at": event.at,
            },
        )
        if applied.queue_change is not None and section_id is not None:
            self._notify(
                section_id,
                None,
                "hand_raise",
                {
                    "action": applied.queue_change,
                    "student": event.student,
                    "section_id": section_id,
                    "queue": [
                        {"student": e.student, "raised_at": e.raised_at}
                        for e in self.state.presence.queue(section_id)
                    ],
                },
            )
        return IngestResult(state=view, queue_change=applied.queue_change)

    def presence_of(self, student: str) -> PresenceStatus:
        with self.lock:
            user = self.state.users.get(student)
            if user is None or user.role is not Role.STUDENT:
                raise UnknownStudent(f"unknown student {student}")
            return self.state.presence.status_of(student, self._now())

    def hand_raise_queue(self, section_id: str) -> list[dict]:
        with self.lock:
            self._section(section_id)
            return [
                {"student": e.student, "raised_at": e.raised_at}
                for e in self.state.presence.queue(section_id)
            ]

    def idle_alerts(self, section_id: str) -> list[tuple[str, int]]:
        """Students currently idle, longest first. Pushes one alert per new
        idle episode (re-armed when the student edits again)."""
        with self.lock:
            self._section(section_id)
            now = self._now()
            tracker = self.state.presence
            idle: list[tuple[str, int]] = []
            newly_alerted: list[dict] = []
            for entry in self.state.roster_of_section(section_id):
                if tracker.status_of(entry.student, now) is not PresenceStatus.IDLE:
                    continue
                idle_for = tracker.idle_for_ms(entry.student, now)
                idle.append((entry.student, idle_for))
                record = tracker.records.get(entry.student)
                if record is not None and not record.idle_alerted:
                    newly_alerted.append({"student": entry.student, "idle_for_ms": idle_for})
            if newly_alerted:
                self._emit(
                    "idle_alerts_fired",
                    {"section_id": section_id, "at": now, "fired": newly_alerted},
                )
            idle.sort(key=lambda pair: (-pair[1], pair[0]))
            return idle

    def _apply_idle_alerts_fired(self, data: dict) -> list[dict]:
        for fired in data["fired"]:
            record = self.state.presence.record_for(fired["student"])
            record.idle_alerted = True
            self._notify(
                data["section_id"],
                None,
                "idle_alert",
                {
                    "student": fired["student"],
                    "idle_for_ms": fired["idle_for_ms"],
                    "section_id": data["section_id"],
                },
            )
        return data["fired"]

    def class_activity_summary(self, section_id: str) -> ActivitySummary:
        """One row per enrolled student; pure read. Offline students keep
        their last-known block count; students with no snapshots yet show
        the starter count for their level."""
        with self.lock:
            self._section(section_id)
            now = self._now()
            tracker = self.state.presence
            published = [
                a
                for a in self.state.assignments_of_section(section_id)
                if a.state is not AssignmentState.DRAFT
            ]
            fallback_assignment = published[-1] if published else None

            rows: list[SummaryRow] = []
            for entry in self.state.roster_of_section(section_id):
                record = tracker.records.get(entry.student)
                assignment = None
                if record is not None and record.active_assignment in self.state.assignments:
                    assignment = self.state.assignments[record.active_assignment]
                if assignment is None:
                    assignment = fallback_assignment

                starter_count = 0
                if assignment is not None:
                    xml = resolve_starter_variant(assignment.starter_xml, entry.skill_level)
                    if xml is not None:
                        starter_count = count_blocks(parse_project(xml))

                if record is not None and record.current_block_count is not None:
                    block_count = record.current_block_count
                else:
                    block_count = starter_count

                rows.append(
                    SummaryRow(
                        student=entry.student,
                        status=tracker.status_of(entry.student, now),
                        hand_raised=bool(record and record.raised_section is not None),
                        block_count=block_count,
                        progress_delta=block_count - starter_count,
                    )
                )
            return ActivitySummary(section_id=section_id, rows=rows, generated_at=now)

    # ═════════════════════════════════════════════════════════════════
    # manual ingestion and retrieval
    # ═════════════════════════════════════════════════════════════════

    def ingest_manual(self, text: str, chunk_target_words: int = 300) -> RetrievalIndex:
        """Chunk and index the reference manual; idempotent for identical
        input (no event appended)."""
        with self.lock:
            chunk_manual(text, chunk_target_words)  # validates, raises EmptyCorpus
            if (
                self.state.manual_text == text
                and self.state.chunk_target_words == chunk_target_words
                and self.index is not None
            ):
                return self.index
            self._emit(
                "manual_ingested", {"text": text, "chunk_target_words": chunk_target_words}
            )
            assert self.index is not None
            return self.index

    def _apply_manual_ingested(self, data: dict) -> RetrievalIndex:
        self.state.manual_text = data["text"]
        self.state.chunk_target_words = data["chunk_target_words"]
        chunks = chunk_manual(data["text"], data["chunk_target_words"])
        self.index = build_index(chunks)  # atomic swap
        return self.index

    def retrieve_chunks(self, query: str, k: int = 4) -> list[tuple[str, float]]:
        with self.lock:
            return require_index(self.index).retrieve(query, k)

    # ═════════════════════════════════════════════════════════════════
    # chat assistant
    # ═════════════════════════════════════════════════════════════════

    def get_or_peek_session(self, student: str, assignment_id: str) -> tuple[str, bool]:
        key = pair_key(student, assignment_id)
        existing = self.state.session_index.get(key)
        if existing is not None:
            return existing, True
        return self._peek_id("sess"), False

    def answer_question(self, student: str, assignment_id: str, text: str) -> ChatTurn:
        """Full assistant pipeline: moderate, retrieve, prompt, reply.

        The student message is logged before the provider is consulted, so
        a provider outage (ProviderUnavailable) or a moderation hit
        (FlaggedBeforeSend) still leaves the transcript intact. A disabled
        chatbot stores nothing and makes no provider call."""
        with self.lock:
            assignment = self._assignment(assignment_id)
            self._require_enrolled(student, assignment.section_id)
            if not assignment.chatbot_enabled:
                raise ChatbotDisabled(f"chatbot is disabled for assignment {assignment_id}")

            session_id, exists = self.get_or_peek_session(student, assignment_id)
            message_id = self._peek_id("msg")
            now = self._now()

            verdict = moderate_text(text, self.denylist, gateway=None)  # tier 1: deterministic
            if verdict is None:
                verdict = moderate_text(text, self.denylist, gateway=self.gateway)  # tier 2

            flag_data = None
            if verdict is not None:
                flag_data = {
                    "flag_id": self._peek_id("flag"),
                    "reason": verdict.reason,
                    "detail": verdict.detail,
                }
            student_msg = self._emit(
                "chat_student_message",
                {
                    "session_id": session_id,
                    "student": student,
                    "assignment_id": assignment_id,
                    "message_id": message_id,
                    "text": text,
                    "at": now,
                    "flag": flag_data,
                },
            )
            turn = ChatTurn(session_id=session_id, student_message=student_msg)
            if flag_data is not None:
                raise FlaggedBeforeSend(message_id)

            retrieved = self.index.retrieve(text, k=4) if self.index is not None else []
            session = self._session(session_id)
            history = session.messages[:-1][-CONTEXT_WINDOW_MESSAGES:]
            prompt = render(
                "chat_answer",
                assignment=f"{assignment.name}: {assignment.description}",
                chunks="\n\n".join(
                    f"[{cid}] {self.index.by_id[cid].text}" for cid, _ in retrieved
                )
                or "(no reference passages available)",
                history="\n".join(f"{m.role}: {m.text}" for m in history) or "(none)",
                question=text,
            )
            response = self.gateway.complete_chat(
                ChatRequest(system=prompt, messages=[{"role": "user", "text": text}])
            )
            bot_msg = self._emit(
                "chat_bot_message",
                {
                    "session_id": session_id,
                    "message_id": self._peek_id("msg"),
                    "text": response.text,
                    "at": self._now(),
                    "retrieved_chunk_ids": [cid for cid, _ in retrieved],
                },
            )
            turn.bot_message = bot_msg
            return turn

    def _apply_chat_student_message(self, data: dict) -> ChatMessage:
        session = self.state.sessions.get(data["session_id"])
        if session is None:
            session = ChatSession(
                session_id=data["session_id"],
                student=data["student"],
                assignment_id=data["assignment_id"],
                created_at=data["at"],
            )
            self.state.sessions[session.session_id] = session
            self.state.session_index[pair_key(data["student"], data["assignment_id"])] = (
                session.session_id
            )
            self._register_id("sess", session.session_id)
        message = ChatMessage(
            message_id=data["message_id"], role="student", text=data["text"], at=data["at"]
        )
        session.append_message(message)
        self.state.message_index[message.message_id] = session.session_id
        self._register_id("msg", message.message_id)

        if data["flag"] is not None:
            flag = ModerationFlag(
                flag_id=data["flag"]["flag_id"],
                message_id=message.message_id,
                reason=data["flag"]["reason"],
                detail=data["flag"]["detail"],
            )
            session.flags.append(flag)
            self._register_id("flag", flag.flag_id)
            assignment = self.state.assignments.get(session.assignment_id)
            self._notify(
                assignment.section_id if assignment else None,
                None,
                "moderation_alert",
                {
                    "student": session.student,
                    "assignment_id": session.assignment_id,
                    "message_id": message.message_id,
                    "reason": flag.reason,
                    "detail": flag.detail,
                },
            )
        return message

    def _apply_chat_bot_message(self, data: dict) -> ChatMessage:
        session = self.state.sessions[data["session_id"]]
        message = ChatMessage(
            message_id=data["message_id"],
            role="bot",
            text=data["text"],
            at=data["at"],
            retrieved_chunk_ids=list(data["retrieved_chunk_ids"]),
        )
        session.append_message(message)
        self.state.message_index[message.message_id] = session.session_id
        self._register_id("msg", message.message_id)
        return message

    def summarize_session(self, session_id: str) -> ChatSummary | None:
        """Generate a rolling summary when one is due (>= 5 min since the
        last, and new messages exist); otherwise return None without
        touching the provider."""
        with self.lock:
            session = self._session(session_id)
            now = self._now()
            if not summary_due(session, now, self.summary_interval_ms):
                return None
            new_messages = session.messages_since(session.covered_until())
            assignment = self.state.assignments.get(session.assignment_id)
            label = (
                f"{assignment.name}: {assignment.description}"
                if assignment
                else session.assignment_id
            )
            response = self.gateway.complete_chat(
                ChatRequest(
                    system=render(
                        "session_summary",
                        assignment=label,
                        history="\n".join(f"{m.role}: {m.text}" for m in new_messages),
                    ),
                    messages=[{"role": "user", "text": "Summarize the transcript."}],
                )
            )
            words = response.text.split()
            text = " ".join(words[:SUMMARY_MAX_WORDS])
            return self._emit(
                "chat_summary",
                {
                    "session_id": session_id,
                    "text": text,
                    "covering_until": new_messages[-1].at,
                    "generated_at": now,
                },
            )

    def _apply_chat_summary(self, data: dict) -> ChatSummary:
        session = self.state.sessions[data["session_id"]]
        summary = ChatSummary(
            covering_until=data["covering_until"],
            text=data["text"],
            generated_at=data["generated_at"],
        )
        session.summaries.append(summary)
        assignment = self.state.assignments.get(session.assignment_id)
        self._notify(
            assignment.section_id if assignment else None,
            None,
            "summary_update",
            {
                "session_id": session.session_id,
                "student": session.student,
                "assignment_id": session.assignment_id,
                "text": summary.text,
                "generated_at": summary.generated_at,
            },
        )
        return summary

    def run_summary_tick(self) -> list[ChatSummary]:
        """Scheduler entry point: try every session; provider outages skip
        the session until the next tick."""
        with self.lock:
            produced = []
            for session_id in sorted(self.state.sessions):
                try:
                    summary = self.summarize_session(session_id)
                except ProviderUnavailable as exc:
                    logger.warning("summary for %s deferred: %s", session_id, exc)
                    continue
                if summary is not None:
                    produced.append(summary)
            return produced

    def rate_response(
        self, rater: str, message_id: str, value: str, comment: str | None = None
    ) -> Rating:
        """Store one rating per (message, rater); re-rating overwrites."""
        with self.lock:
            session_id = self.state.message_index.get(message_id)
            if session_id is None:
                raise UnknownMessage(f"unknown message {message_id}")
            session = self._session(session_id)
            message = next(m for m in session.messages if m.message_id == message_id)
            if message.role != "bot":
                raise NotBotMessage("only bot responses can be rated")
            if value not in ("up", "down"):
                raise ValueError("rating must be 'up' or 'down'")
            assignment = self.state.assignments.get(session.assignment_id)
            teacher = (
                self.state.teacher_of_section(assignment.section_id) if assignment else None
            )
            if rater != session.student and rater != teacher:
                raise NotAuthorized(f"{rater} may not rate messages in this session")
            return self._emit(
                "message_rated",
                {
                    "session_id": session_id,
                    "message_id": message_id,
                    "rater": rater,
                    "value": value,
                    "comment": comment,
                },
            )

    def _apply_message_rated(self, data: dict) -> Rating:
        session = self.state.sessions[data["session_id"]]
        message = next(m for m in session.messages if m.message_id == data["message_id"])
        rating = Rating(rater=data["rater"], value=data["value"], comment=data["comment"])
        message.ratings[rating.rater] = rating
        return rating

    def acknowledge_flag(self, teacher: str, flag_id: str) -> ModerationFlag:
        with self.lock:
            self._require_teacher(teacher)
            for session in self.state.sessions.values():
                for flag in session.flags:
                    if flag.flag_id == flag_id:
                        return self._emit(
                            "flag_acknowledged",
                            {
                                "session_id": session.session_id,
                                "flag_id": flag_id,
                                "teacher": teacher,
                            },
                        )
            raise UnknownMessage(f"unknown flag {flag_id}")

    def _apply_flag_acknowledged(self, data: dict) -> ModerationFlag:
        session = self.state.sessions[data["session_id"]]
        flag = next(f for f in session.flags if f.flag_id == data["flag_id"])
        flag.acknowledged_by = data["teacher"]
        return flag

    def chat_session_for(self, student: str, assignment_id: str) -> ChatSession | None:
        with self.lock:
            session_id = self.state.session_index.get(pair_key(student, assignment_id))
            return self.state.sessions.get(session_id) if session_id else None

    # ═════════════════════════════════════════════════════════════════
    # rubrics and grading
    # ═════════════════════════════════════════════════════════════════

    def _rows_from_specs(self, row_specs: list[dict], provenance: RowProvenance) -> list[dict]:
        rows = []
        for i, spec in enumerate(row_specs):
            machine_check = spec.get("machine_check")
            if machine_check is not None:
                # validates comparator/threshold
                machine_check = MachineCheck.from_dict(machine_check).to_dict()
            rows.append(
                {
                    "row_id": spec.get("row_id") or self._peek_id("row", i),
                    "criterion": spec["criterion"],
                    "description": spec.get("description", ""),
                    "max_points": float(spec["max_points"]),
                    "machine_check": machine_check,
                    "provenance": spec.get("provenance", provenance.value),
                }
            )
        return rows

    def create_rubric(
        self,
        teacher: str,
        name: str,
        description: str,
        row_specs: list[dict],
        source: RubricSource = RubricSource.SCRATCH,
    ) -> Rubric:
        with self.lock:
            self._require_teacher(teacher)
            rubric = {
                "rubric_id": self._peek_id("rub"),
                "name": name,
                "description": description,
                "source": RubricSource(source).value,
                "rows": self._rows_from_specs(row_specs, RowProvenance.HUMAN),
                "saved_as_template": False,
            }
            return self._emit("rubric_created", {"rubric": rubric})

    def _apply_rubric_created(self, data: dict) -> Rubric:
        rubric = Rubric.from_dict(data["rubric"])
        self.state.rubrics[rubric.rubric_id] = rubric
        self._register_id("rub", rubric.rubric_id)
        for row in rubric.rows:
            if row.row_id.startswith("row-"):
                self._register_id("row", row.row_id)
        return rubric

    def update_rubric(
        self, teacher: str, rubric_id: str, name: str, description: str, row_specs: list[dict]
    ) -> Rubric:
        with self.lock:
            self._require_teacher(teacher)
            rubric = self._rubric(rubric_id)
            if rubric.saved_as_template:
                raise Forbidden("template rubrics are frozen; instantiate a copy instead")
            if self.state.rubric_has_finalized_grade(rubric_id):
                raise RubricFinalized(f"rubric {rubric_id} already has finalized grades")
            data = {
                "rubric_id": rubric_id,
                "name": name,
                "description": description,
                "rows": self._rows_from_specs(row_specs, RowProvenance.HUMAN),
            }
            return self._emit("rubric_updated", data)

    def _apply_rubric_updated(self, data: dict) -> Rubric:
        rubric = self.state.rubrics[data["rubric_id"]]
        rubric.name = data["name"]
        rubric.description = data["description"]
        rubric.rows = [RubricRow.from_dict(r) for r in data["rows"]]
        for row in rubric.rows:
            if row.row_id.startswith("row-"):
                self._register_id("row", row.row_id)
        return rubric

    def generate_rubric_ai(self, teacher: str, request: RubricGenRequest) -> Rubric:
        """Generate a rubric via the provider's structured output; every
        row carries ai provenance. Schema-invalid output (after the
        gateway's retries) surfaces as MalformedProviderOutput."""
        with self.lock:
            self._require_teacher(teacher)
            if not request.prompt or not request.prompt.strip():
                raise EmptyPrompt("rubric generation needs a non-empty prompt")
            prompt = render(
                "rubric_generate",
                name=request.name,
                description=request.description,
                prompt=request.prompt,
                objectives="\n".join(request.learning_objectives) or "(none provided)",
                examples="\n\n".join(request.example_solutions) or "(none provided)",
            )
            try:
                response = self.gateway.complete_chat(
                    ChatRequest(
                        system=prompt,
                        messages=[{"role": "user", "text": request.prompt}],
                        json_schema=RUBRIC_ROWS_SCHEMA,
                        temperature=0.0,
                    )
                )
            except SchemaValidationFailed as exc:
                raise MalformedProviderOutput(str(exc)) from exc
            row_payload = json.loads(response.text)
            rows = [
                {
                    "row_id": self._peek_id("row", i),
                    "criterion": r["criterion"],
                    "description": r["description"],
                    "max_points": float(r["max_points"]),
                    "machine_check": None,
                    "provenance": RowProvenance.AI.value,
                }
                for i, r in enumerate(row_payload)
            ]
            rubric = {
                "rubric_id": self._peek_id("rub"),
                "name": request.name,
                "description": request.description,
                "source": RubricSource.AI.value,
                "rows": rows,
                "saved_as_template": False,
            }
            return self._emit("rubric_created", {"rubric": rubric})

    def regenerate_row_ai(
        self, teacher: str, rubric_id: str, row_id: str, additional_prompt: str = ""
    ) -> RubricRow:
        """Replace one row with a regenerated version; all other rows stay
        bit-identical. Blocked once any grade against this rubric is final."""
        with self.lock:
            self._require_teacher(teacher)
            rubric = self._rubric(rubric_id)
            if rubric.saved_as_template:
                raise Forbidden("template rubrics are frozen; instantiate a copy instead")
            if self.state.rubric_has_finalized_grade(rubric_id):
                raise RubricFinalized(f"rubric {rubric_id} already has finalized grades")
            row = rubric.row(row_id)
            if row is None:
                raise RowNotFound(f"row {row_id} not in rubric {rubric_id}")
            prompt = render(
                "row_regenerate",
                criterion=row.criterion,
                description=row.description,
                max_points=str(row.max_points),
                additional_prompt=additional_prompt or "(none; keep the original intent)",
            )
            try:
                response = self.gateway.complete_chat(
                    ChatRequest(
                        system=prompt,
                        messages=[{"role": "user", "text": additional_prompt or row.criterion}],
                        json_schema=SINGLE_ROW_SCHEMA,
                        temperature=0.0,
                    )
                )
            except SchemaValidationFailed as exc:
                raise MalformedProviderOutput(str(exc)) from exc
            generated = json.loads(response.text)
            new_row = {
                "row_id": row_id,
                "criterion": generated["criterion"],
                "description": generated["description"],
                "max_points": float(generated["max_points"]),
                "machine_check": row.machine_check.to_dict() if row.machine_check else None,
                "provenance": RowProvenance.AI_REGENERATED.value,
            }
            return self._emit(
                "row_regenerated", {"rubric_id": rubric_id, "row_id": row_id, "row": new_row}
            )

    def _apply_row_regenerated(self, data: dict) -> RubricRow:
        rubric = self.state.rubrics[data["rubric_id"]]
        new_row = RubricRow.from_dict(data["row"])
        for i, row in enumerate(rubric.rows):
            if row.row_id == data["row_id"]:
                rubric.rows[i] = new_row
                return new_row
        raise RowNotFound(data["row_id"])

    def save_as_template(self, teacher: str, rubric_id: str) -> Rubric:
        """Freeze a deep copy of the rubric for reuse."""
        with self.lock:
            self._require_teacher(teacher)
            source = self._rubric(rubric_id)
            template = source.to_dict()
            template["rubric_id"] = self._peek_id("rub")
            template["saved_as_template"] = True
            return self._emit("rubric_created", {"rubric": template})

    def instantiate_template(self, teacher: str, template_id: str) -> Rubric:
        """Fresh working rubric copied from any existing rubric; the copy
        is recorded as template-sourced."""
        with self.lock:
            self._require_teacher(teacher)
            source = self._rubric(template_id)
            rubric = source.to_dict()
            rubric["rubric_id"] = self._peek_id("rub")
            rubric["source"] = RubricSource.TEMPLATE.value
            rubric["saved_as_template"] = False
            return self._emit("rubric_created", {"rubric": rubric})

    def suggest_scores(self, submission_id: str, rubric_id: str) -> SuggestResult:
        """Two-path score suggestions: machine-checked rows score
        deterministically from opcode counts; free-form rows ask the
        gateway, clamped to [0, max_points]. Provider outages return a
        partial result when any machine-checked row exists."""
        with self.lock:
            submission = self._submission(submission_id)
            rubric = self._rubric(rubric_id)
            project = parse_project(submission.project_xml)
            has_machine = any(r.machine_check is not None for r in rubric.rows)

            scores: list[SuggestedScore] = []
            partial = False
            for row in rubric.rows:
                if row.machine_check is not None:
                    points, rationale = evaluate_machine_check(
                        row.machine_check, project, row.max_points
                    )
                    scores.append(
                        SuggestedScore(
                            row_id=row.row_id,
                            suggested=points,
                            rationale=rationale,
                            machine_checked=True,
                        )
                    )
                    continue
                prompt = render(
                    "score_suggest",
                    criterion=row.criterion,
                    description=row.description,
                    max_points=str(row.max_points),
                    project=submission.project_xml,
                )
                try:
                    response = self.gateway.complete_chat(
                        ChatRequest(
                            system=prompt,
                            messages=[{"role": "user", "text": row.criterion}],
                            json_schema=SCORE_SCHEMA,
                            temperature=0.0,
                        )
                    )
                except (ProviderUnavailable, SchemaValidationFailed) as exc:
                    if not has_machine:
                        if isinstance(exc, SchemaValidationFailed):
                            raise MalformedProviderOutput(str(exc)) from exc
                        raise
                    partial = True
                    scores.append(
                        SuggestedScore(
                            row_id=row.row_id,
                            suggested=None,
                            rationale=f"suggestion unavailable: {exc}",
                            machine_checked=False,
                        )
                    )
                    continue
                payload = json.loads(response.text)
                raw = float(payload["score"])
                rationale = str(payload["rationale"])
                suggested = min(max(raw, 0.0), row.max_points)
                if suggested != raw:
                    rationale += f" (clamped from {raw} to fit 0..{row.max_points})"
                scores.append(
                    SuggestedScore(
                        row_id=row.row_id,
                        suggested=suggested,
                        rationale=rationale,
                        machine_checked=False,
                    )
                )
            return SuggestResult(scores=scores, partial=partial)

    def finalize_grade(
        self, teacher: str, submission_id: str, row_finals: list[dict]
    ) -> GradeRecord:
        """Record a teacher-final grade. row_finals entries: {row_id,
        final, rationale, suggested?}. Records are versioned-immutable;
        corrections append a new version."""
        with self.lock:
            submission = self._submission(submission_id)
            assignment = self._assignment(submission.assignment_id)
            self._require_teaches(teacher, assignment.section_id)
            if assignment.rubric_id is None:
                raise UnknownRubric(f"assignment {assignment.assignment_id} has no rubric")
            rubric = self._rubric(assignment.rubric_id)

            by_row = {}
            for item in row_finals:
                by_row[item["row_id"]] = item
            scores = []
            for row in rubric.rows:
                item = by_row.pop(row.row_id, None)
                if item is None:
                    raise ScoreOutOfRange(row.row_id, f"missing final score for row {row.row_id}")
                final = float(item["final"])
                if final < 0 or final > row.max_points:
                    raise ScoreOutOfRange(
                        row.row_id,
                        f"final {final} outside 0..{row.max_points} for row {row.row_id}",
                    )
                scores.append(
                    {
                        "row_id": row.row_id,
                        "final": final,
                        "rationale": str(item.get("rationale", "")),
                        "suggested": item.get("suggested"),
                    }
                )
            if by_row:
                raise RowNotFound(f"unknown rubric rows: {sorted(by_row)}")

            version = len(self.state.grades.get(submission_id, [])) + 1
            data = {
                "submission_id": submission_id,
                "version": version,
                "scores": scores,
                "grader": teacher,
                "finalized_at": self._now(),
            }
            return self._emit("grade_finalized", data)

    def _apply_grade_finalized(self, data: dict) -> GradeRecord:
        record = GradeRecord(
            submission_id=data["submission_id"],
            version=data["version"],
            scores=[RowScore.from_dict(s) for s in data["scores"]],
            grader=data["grader"],
            finalized_at=data["finalized_at"],
        )
        self.state.grades.setdefault(record.submission_id, []).append(record)
        submission = self.state.submissions.get(record.submission_id)
        assignment = (
            self.state.assignments.get(submission.assignment_id) if submission else None
        )
        self._notify(
            assignment.section_id if assignment else None,
            submission.student if submission else None,
            "grade_update",
            {
                "submission_id": record.submission_id,
                "student": submission.student if submission else None,
                "assignment_id": submission.assignment_id if submission else None,
                "version": record.version,
                "total": record.total(),
            },
        )
        return record

    def grade_versions(self, submission_id: str) -> list[GradeRecord]:
        with self.lock:
            return list(self.state.grades.get(submission_id, []))
