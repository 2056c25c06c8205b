"""HTTP + WebSocket facade over the classroom engine.

Role rules: teacher-only surfaces (rosters, rubric CRUD, grading, chat
history of other students, summaries, assignment toggles) deny students;
students only reach their own sessions, submissions, and snapshots. When a
student probes a resource that is not theirs the reply is 404, never 403,
so resource existence does not leak.

Every mutating route honors an Idempotency-Key header: retrying with the
same key replays the stored response instead of re-executing.

All REST timestamps are ISO-8601 UTC; internal epoch-milliseconds appear
only on the push/event wire.
"""

from __future__ import annotations

import asyncio
import itertools
import logging
import threading
from typing import Any

from fastapi import Depends, FastAPI, Header, Query, Request, Response, WebSocket
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field
from starlette.concurrency import run_in_threadpool
from starlette.middleware.base import BaseHTTPMiddleware
from starlette.websockets import WebSocketDisconnect

from blockclass.api.auth import SessionStore, SessionToken, authenticate
from blockclass.api.push import PushHub
from blockclass.api.ws_protocol import handle_client_message
from blockclass.chat.sessions import ChatSession
from blockclass.clock import iso_utc, parse_iso_utc
from blockclass.domain.model import AssignmentState, Role, SkillLevel
from blockclass.engine import ClassroomEngine
from blockclass.errors import (
    BadCredentials,
    BlockClassError,
    FlaggedBeforeSend,
    Forbidden,
    NotEnrolled,
    TokenExpired,
    UnknownAssignment,
    UnknownSnapshot,
    UnknownSubmission,
    UnknownUser,
)
from blockclass.grading.model import RubricGenRequest
from blockclass.projects.snapshots import Snapshot
from blockclass.projects.xmlio import serialize_project
from blockclass.state import pair_key

logger = logging.getLogger(__name__)

_STATUS_BY_CODE = {
    "bad_credentials": 401,
    "token_expired": 401,
    "forbidden": 403,
    "not_teacher": 403,
    "not_authorized": 403,
    "not_enrolled": 403,
    "chatbot_disabled": 403,
    "unknown_user": 404,
    "unknown_course": 404,
    "unknown_section": 404,
    "unknown_assignment": 404,
    "unknown_submission": 404,
    "unknown_snapshot": 404,
    "unknown_rubric": 404,
    "unknown_student": 404,
    "unknown_session": 404,
    "unknown_message": 404,
    "not_found": 404,
    "assignment_not_published": 409,
    "assignment_closed": 409,
    "assignment_immutable": 409,
    "rubric_finalized": 409,
    "stale_event": 409,
    "malformed_xml": 400,
    "depth_limit_exceeded": 400,
    "duplicate_sprite_name": 400,
    "invalid_project": 422,
    "invalid_starter_project": 422,
    "score_out_of_range": 422,
    "row_not_found": 422,
    "empty_prompt": 422,
    "empty_corpus": 422,
    "flagged_before_send": 422,
    "not_bot_message": 422,
    "index_not_built": 409,
    "provider_unavailable": 503,
    "provider_timeout": 503,
    "schema_validation_failed": 502,
    "malformed_provider_output": 502,
}


class MaskedNotFound(BlockClassError):
    """Cross-student probe: reply 404 with no existence hint."""

    code = "not_found"


# ── request bodies ─────────────────────────────────────────────────────


class LoginBody(BaseModel):
    username: str
    secret: str


class CourseBody(BaseModel):
    title: str
    sections: list[str] = Field(default_factory=list)


class RosterBody(BaseModel):
    student: str
    skill_level: str = "beginner"
    display_name: str | None = None
    secret: str | None = None


class LevelBody(BaseModel):
    section_id: str
    level: str


class AssignmentBody(BaseModel):
    section_id: str
    name: str
    description: str = ""
    starter_variants: dict[str, str] = Field(default_factory=dict)
    chatbot_enabled: bool = True
    rubric_id: str | None = None
    due_at: str | int | None = None


class ChatbotBody(BaseModel):
    enabled: bool


class SubmissionBody(BaseModel):
    assignment_id: str
    project_xml: str


class SnapshotBody(BaseModel):
    assignment_id: str
    project_xml: str


class MachineCheckBody(BaseModel):
    opcode: str
    comparator: str
    threshold: int


class RubricRowBody(BaseModel):
    row_id: str | None = None
    criterion: str
    description: str = ""
    max_points: float
    machine_check: MachineCheckBody | None = None


class RubricBody(BaseModel):
    rubric_id: str | None = None
    name: str
    description: str = ""
    rows: list[RubricRowBody] = Field(default_factory=list)


class RubricGenBody(BaseModel):
    name: str
    description: str = ""
    prompt: str
    example_solutions: list[str] = Field(default_factory=list)
    learning_objectives: list[str] = Field(default_factory=list)


class RegenerateBody(BaseModel):
    additional_prompt: str = ""


class SuggestBody(BaseModel):
    rubric_id: str | None = None


class GradeRowBody(BaseModel):
    row_id: str
    final: float
    rationale: str = ""
    suggested: float | None = None


class GradeBody(BaseModel):
    rows: list[GradeRowBody]


class ChatMessageBody(BaseModel):
    text: str


class RatingBody(BaseModel):
    rating: str
    comment: str | None = None


# ── serializers ────────────────────────────────────────────────────────


def _iso(ms: int | None) -> str | None:
    return iso_utc(ms) if ms is not None else None


def _due_ms(value: str | int | None) -> int | None:
    if value is None:
        return None
    if isinstance(value, int):
        return value
    return parse_iso_utc(value)


def _assignment_json(a, *, include_starter: bool) -> dict:
    doc = {
        "assignment_id": a.assignment_id,
        "section_id": a.section_id,
        "name": a.name,
        "description": a.description,
        "starter_levels": sorted(lvl.value for lvl in a.starter_xml),
        "chatbot_enabled": a.chatbot_enabled,
        "rubric_id": a.rubric_id,
        "due_at": _iso(a.due_at),
        "state": a.state.value,
    }
    if include_starter:
        doc["starter_variants"] = {lvl.value: xml for lvl, xml in sorted(a.starter_xml.items())}
    return doc


def _snapshot_json(s: Snapshot, *, include_project: bool = False) -> dict:
    doc = {
        "snapshot_id": s.snapshot_id,
        "student": s.student,
        "assignment_id": s.assignment_id,
        "taken_at": _iso(s.taken_at),
        "reason": s.reason.value,
        "block_count": s.block_count,
        "content_hash": s.content_hash,
        "chain_hash": s.chain_hash,
    }
    if include_project:
        doc["project_xml"] = s.project_xml
    return doc


def _message_json(m) -> dict:
    return {
        "message_id": m.message_id,
        "role": m.role,
        "text": m.text,
        "at": _iso(m.at),
        "retrieved_chunk_ids": list(m.retrieved_chunk_ids),
        "ratings": {k: r.to_dict() for k, r in sorted(m.ratings.items())},
    }


def _session_json(session: ChatSession) -> dict:
    return {
        "session_id": session.session_id,
        "student": session.student,
        "assignment_id": session.assignment_id,
        "created_at": _iso(session.created_at),
        "messages": [_message_json(m) for m in session.messages],
        "flags": [f.to_dict() for f in session.flags],
    }


def _grade_json(g) -> dict:
    return {
        "submission_id": g.submission_id,
        "version": g.version,
        "scores": [s.to_dict() for s in g.scores],
        "grader": g.grader,
        "finalized_at": _iso(g.finalized_at),
        "total": g.total(),
    }


def _submission_json(s, *, include_project: bool = False) -> dict:
    doc = {
        "submission_id": s.submission_id,
        "assignment_id": s.assignment_id,
        "student": s.student,
        "submitted_at": _iso(s.submitted_at),
    }
    if include_project:
        doc["project_xml"] = s.project_xml
    return doc


# ── idempotency middleware ─────────────────────────────────────────────


class IdempotencyMiddleware(BaseHTTPMiddleware):
    """Replays the stored response for a repeated (method, path, key)."""

    def __init__(self, app):
        super().__init__(app)
        self._cache: dict[tuple[str, str, str], tuple[int, bytes, str]] = {}
        self._lock = threading.Lock()

    async def dispatch(self, request: Request, call_next):
        key_header = request.headers.get("Idempotency-Key")
        if key_header is None or request.method not in ("POST", "PUT", "DELETE"):
            return await call_next(request)
        cache_key = (request.method, request.url.path, key_header)
        with self._lock:
            hit = self._cache.get(cache_key)
        if hit is not None:
            status, body, media_type = hit
            return Response(
                content=body,
                status_code=status,
                media_type=media_type,
                headers={"X-Idempotent-Replay": "true"},
            )
        response = await call_next(request)
        body = b"".join([chunk async for chunk in response.body_iterator])
        if response.status_code < 500:
            with self._lock:
                self._cache[cache_key] = (
                    response.status_code,
                    body,
                    response.media_type or "application/json",
                )
        return Response(
            content=body,
            status_code=response.status_code,
            media_type=response.media_type,
            headers=dict(response.headers),
        )


# ── app factory ────────────────────────────────────────────────────────


def create_app(engine: ClassroomEngine, session_store: SessionStore | None = None) -> FastAPI:
    app = FastAPI(title="blockclass", version="0.1.0")
    store = session_store or SessionStore(engine.clock)
    hub = PushHub()
    ws_conn_counter = itertools.count(1)

    previous_notifier = engine.notifier

    def notifier(section_id, student, kind, payload):
        if previous_notifier is not None:
            previous_notifier(section_id, student, kind, payload)
        if section_id is not None:
            hub.publish(f"section:{section_id}", kind, payload)
        if student is not None:
            hub.publish(f"user:{student}", kind, payload)

    engine.notifier = notifier
    app.state.engine = engine
    app.state.hub = hub
    app.state.sessions = store

    app.add_middleware(IdempotencyMiddleware)

    @app.exception_handler(BlockClassError)
    async def on_domain_error(request: Request, exc: BlockClassError):
        status = _STATUS_BY_CODE.get(exc.code, 400)
        body: dict[str, Any] = {"error": exc.code, "detail": str(exc)}
        if isinstance(exc, FlaggedBeforeSend):
            body["message_id"] = exc.message_id
        return JSONResponse(status_code=status, content=body)

    @app.exception_handler(ValueError)
    async def on_value_error(request: Request, exc: ValueError):
        return JSONResponse(status_code=422, content={"error": "invalid_value", "detail": str(exc)})

    # ── auth helpers ───────────────────────────────────────────────────

    def current_session(authorization: str | None = Header(default=None)) -> SessionToken:
        if not authorization or not authorization.startswith("Bearer "):
            raise BadCredentials("missing bearer token")
        return store.resolve(authorization.removeprefix("Bearer "))

    def teacher_session(session: SessionToken = Depends(current_session)) -> SessionToken:
        if session.role is not Role.TEACHER:
            raise Forbidden("teacher role required")
        return session

    def _teaches(session: SessionToken, section_id: str) -> bool:
        return engine.state.teacher_of_section(section_id) == session.user_id

    def _require_teaches_or_mask(session: SessionToken, section_id: str) -> None:
        """Teacher of the section passes; students get a masked 404."""
        if session.role is Role.TEACHER:
            if not _teaches(session, section_id):
                raise Forbidden("not your section")
            return
        raise MaskedNotFound("no such resource")

    def _scope_student(session: SessionToken, student_param: str | None, section_id: str) -> str:
        """Resolve the target student for dual-audience routes. Students may
        only name themselves (anything else is a masked 404); teachers of
        the section may name anyone."""
        if session.role is Role.STUDENT:
            if student_param is not None and student_param != session.user_id:
                raise MaskedNotFound("no such resource")
            return session.user_id
        if not _teaches(session, section_id):
            raise Forbidden("not your section")
        if student_param is None:
            raise ValueError("student query parameter required for teachers")
        return student_param

    # ── meta ───────────────────────────────────────────────────────────

    @app.get("/health")
    def health() -> dict:
        with engine.lock:
            return {"status": "ok", "state_hash": engine.state_hash()}

    # ── auth ───────────────────────────────────────────────────────────

    @app.post("/auth/login")
    def login(body: LoginBody) -> dict:
        with engine.lock:
            token = authenticate(engine.state.users, store, body.username, body.secret)
        return {
            "token": token.token,
            "user_id": token.user_id,
            "role": token.role.value,
            "expires_at": _iso(token.expires_at),
        }

    # ── courses and rosters ────────────────────────────────────────────

    @app.get("/courses")
    def list_courses(session: SessionToken = Depends(current_session)) -> dict:
        with engine.lock:
            courses = []
            for course in sorted(engine.state.courses.values(), key=lambda c: c.course_id):
                sections = [engine.state.sections[sid] for sid in course.section_ids]
                if session.role is Role.TEACHER:
                    if course.owner != session.user_id:
                        continue
                else:
                    sections = [
                        s
                        for s in sections
                        if engine.state.roster_entry(session.user_id, s.section_id)
                    ]
                    if not sections:
                        continue
                courses.append(
                    {
                        "course_id": course.course_id,
                        "title": course.title,
                        "owner": course.owner,
                        "sections": [
                            {"section_id": s.section_id, "name": s.name} for s in sections
                        ],
                    }
                )
            return {"courses": courses}

    @app.post("/courses", status_code=201)
    def create_course(body: CourseBody, session: SessionToken = Depends(teacher_session)) -> dict:
        course = engine.create_course(session.user_id, body.title, body.sections)
        with engine.lock:
            sections = [engine.state.sections[sid] for sid in course.section_ids]
        return {
            "course_id": course.course_id,
            "title": course.title,
            "owner": course.owner,
            "sections": [{"section_id": s.section_id, "name": s.name} for s in sections],
        }

    @app.get("/sections/{section_id}/roster")
    def get_roster(section_id: str, session: SessionToken = Depends(current_session)) -> dict:
        with engine.lock:
            engine._section(section_id)
            _require_teaches_or_mask(session, section_id)
            rows = []
            for entry in engine.state.roster_of_section(section_id):
                user = engine.state.users.get(entry.student)
                rows.append(
                    {
                        "student": entry.student,
                        "display_name": user.display_name if user else entry.student,
                        "skill_level": entry.skill_level.value,
                    }
                )
            return {"section_id": section_id, "roster": rows}

    @app.post("/sections/{section_id}/roster", status_code=201)
    def add_to_roster(
        section_id: str, body: RosterBody, session: SessionToken = Depends(current_session)
    ) -> dict:
        with engine.lock:
            engine._section(section_id)
            _require_teaches_or_mask(session, section_id)
        with engine.lock:
            exists = body.student in engine.state.users
        if not exists:
            if body.secret is None:
                raise UnknownUser(f"unknown user {body.student}; supply secret to create")
            engine.create_user(
                display_name=body.display_name or body.student,
                role=Role.STUDENT,
                secret=body.secret,
                user_id=body.student,
            )
        entry = engine.add_roster_entry(
            session.user_id, section_id, body.student, SkillLevel(body.skill_level)
        )
        return entry.to_dict()

    @app.put("/roster/{student}/level")
    def set_level(
        student: str, body: LevelBody, session: SessionToken = Depends(current_session)
    ) -> dict:
        with engine.lock:
            engine._section(body.section_id)
            _require_teaches_or_mask(session, body.section_id)
        entry = engine.set_skill_level(
            session.user_id, student, body.section_id, SkillLevel(body.level)
        )
        return entry.to_dict()

    # ── assignments ────────────────────────────────────────────────────

    @app.get("/assignments")
    def list_assignments(
        section: str | None = Query(default=None),
        sort: str = Query(default="id"),
        session: SessionToken = Depends(current_session),
    ) -> dict:
        with engine.lock:
            if session.role is Role.TEACHER:
                section_ids = [
                    s.section_id
                    for s in engine.state.sections.values()
                    if _teaches(session, s.section_id)
                ]
            else:
                section_ids = engine.state.sections_of_student(session.user_id)
            if section is not None:
                section_ids = [s for s in section_ids if s == section]
            items = []
            for sid in sorted(section_ids):
                for a in engine.state.assignments_of_section(sid):
                    if session.role is Role.STUDENT and a.state is AssignmentState.DRAFT:
                        continue
                    items.append(a)
            keys = {
                "name": lambda a: (a.name, a.assignment_id),
                "due": lambda a: (a.due_at is None, a.due_at or 0, a.assignment_id),
                "state": lambda a: (a.state.value, a.assignment_id),
                "id": lambda a: a.assignment_id,
            }
            items.sort(key=keys.get(sort, keys["id"]))
            include_starter = session.role is Role.TEACHER
            return {
                "assignments": [
                    _assignment_json(a, include_starter=include_starter) for a in items
                ]
            }

    @app.post("/assignments", status_code=201)
    def create_assignment(
        body: AssignmentBody, session: SessionToken = Depends(teacher_session)
    ) -> dict:
        assignment = engine.create_assignment(
            teacher=session.user_id,
            section_id=body.section_id,
            name=body.name,
            description=body.description,
            starter_variants=body.starter_variants,
            chatbot_enabled=body.chatbot_enabled,
            rubric_id=body.rubric_id,
            due_at=_due_ms(body.due_at),
        )
        return _assignment_json(assignment, include_starter=True)

    @app.post("/assignments/{assignment_id}/publish")
    def publish_assignment(
        assignment_id: str, session: SessionToken = Depends(current_session)
    ) -> dict:
        with engine.lock:
            assignment = engine._assignment(assignment_id)
            _require_teaches_or_mask(session, assignment.section_id)
        assignment = engine.publish_assignment(session.user_id, assignment_id)
        return _assignment_json(assignment, include_starter=True)

    @app.post("/assignments/{assignment_id}/close")
    def close_assignment(
        assignment_id: str, session: SessionToken = Depends(current_session)
    ) -> dict:
        with engine.lock:
            assignment = engine._assignment(assignment_id)
            _require_teaches_or_mask(session, assignment.section_id)
        assignment = engine.close_assignment(session.user_id, assignment_id)
        return _assignment_json(assignment, include_starter=True)

    @app.put("/assignments/{assignment_id}/chatbot")
    def set_chatbot(
        assignment_id: str, body: ChatbotBody, session: SessionToken = Depends(current_session)
    ) -> dict:
        with engine.lock:
            assignment = engine._assignment(assignment_id)
            _require_teaches_or_mask(session, assignment.section_id)
        assignment = engine.set_chatbot_enabled(session.user_id, assignment_id, body.enabled)
        return _assignment_json(assignment, include_starter=True)

    @app.get("/assignments/{assignment_id}/starter")
    def get_starter(
        assignment_id: str,
        student: str | None = Query(default=None),
        session: SessionToken = Depends(current_session),
    ) -> dict:
        with engine.lock:
            assignment = engine._assignment(assignment_id)
            target = _scope_student(session, student, assignment.section_id)
        project = engine.resolve_starter_code(assignment_id, target)
        return {
            "assignment_id": assignment_id,
            "student": target,
            "project_xml": serialize_project(project),
        }

    @app.get("/assignments/{assignment_id}/status")
    def assignment_status(
        assignment_id: str, session: SessionToken = Depends(current_session)
    ) -> dict:
        with engine.lock:
            assignment = engine._assignment(assignment_id)
            _require_teaches_or_mask(session, assignment.section_id)
        summary = engine.assignment_status_summary(assignment_id)
        return summary.to_dict()

    @app.get("/assignments/{assignment_id}/submissions")
    def list_submissions(
        assignment_id: str, session: SessionToken = Depends(current_session)
    ) -> dict:
        with engine.lock:
            assignment = engine._assignment(assignment_id)
            _require_teaches_or_mask(session, assignment.section_id)
            subs = engine.state.submissions_of_assignment(assignment_id)
            return {
                "assignment_id": assignment_id,
                "submissions": [
                    {
                        **_submission_json(s, include_project=True),
                        "graded": bool(engine.state.grades.get(s.submission_id)),
                    }
                    for s in subs
                ],
            }

    # ── submissions ────────────────────────────────────────────────────

    @app.post("/submissions", status_code=201)
    def submit(body: SubmissionBody, session: SessionToken = Depends(current_session)) -> dict:
        if session.role is not Role.STUDENT:
            raise Forbidden("only students submit assignments")
        submission = engine.submit_assignment(session.user_id, body.assignment_id, body.project_xml)
        return _submission_json(submission)

    @app.get("/submissions/{submission_id}")
    def get_submission(
        submission_id: str, session: SessionToken = Depends(current_session)
    ) -> dict:
        with engine.lock:
            submission = engine.state.submissions.get(submission_id)
            if submission is None:
                raise UnknownSubmission(f"unknown submission {submission_id}")
            assignment = engine._assignment(submission.assignment_id)
            if session.role is Role.STUDENT:
                if submission.student != session.user_id:
                    raise MaskedNotFound("no such resource")
            elif not _teaches(session, assignment.section_id):
                raise Forbidden("not your section")
            grades = engine.state.grades.get(submission_id, [])
            return {
                **_submission_json(submission, include_project=True),
                "grades": [_grade_json(g) for g in grades],
            }

    # ── snapshots ──────────────────────────────────────────────────────

    @app.post("/snapshots", status_code=201)
    def record_snapshot(
        body: SnapshotBody, session: SessionToken = Depends(current_session)
    ) -> dict:
        if session.role is not Role.STUDENT:
            raise Forbidden("snapshots are recorded by students")
        snapshot, appended = engine.record_snapshot(
            session.user_id, body.assignment_id, body.project_xml
        )
        return {**_snapshot_json(snapshot), "appended": appended}

    @app.get("/snapshots")
    def list_snapshots(
        assignment: str,
        student: str | None = Query(default=None),
        session: SessionToken = Depends(current_session),
    ) -> dict:
        with engine.lock:
            a = engine._assignment(assignment)
            target = _scope_student(session, student, a.section_id)
            entries = engine.snapshot_history(target, assignment)
            return {
                "student": target,
                "assignment_id": assignment,
                "snapshots": [_snapshot_json(s) for s in entries],
            }

    @app.post("/snapshots/{snapshot_id}/recover")
    def recover_snapshot(
        snapshot_id: str, session: SessionToken = Depends(current_session)
    ) -> dict:
        with engine.lock:
            owner = None
            for key in sorted(engine.state.snapshot_logs):
                log = engine.state.snapshot_logs[key]
                for entry in log.entries:
                    if entry.snapshot_id == snapshot_id:
                        owner = (log.student, log.assignment_id)
                        break
                if owner:
                    break
            if owner is None:
                raise UnknownSnapshot(f"snapshot {snapshot_id} not found")
            student, assignment_id = owner
            if session.role is Role.STUDENT:
                if student != session.user_id:
                    raise MaskedNotFound("no such resource")
            else:
                a = engine._assignment(assignment_id)
                if not _teaches(session, a.section_id):
                    raise Forbidden("not your section")
        project, recovery = engine.recover_snapshot(student, assignment_id, snapshot_id)
        return {
            "recovered_from": snapshot_id,
            "project_xml": serialize_project(project),
            "recovery_snapshot": _snapshot_json(recovery),
        }

    # ── presence views ─────────────────────────────────────────────────

    @app.get("/sections/{section_id}/activity")
    def section_activity(
        section_id: str, session: SessionToken = Depends(current_session)
    ) -> dict:
        with engine.lock:
            engine._section(section_id)
            _require_teaches_or_mask(session, section_id)
        summary = engine.class_activity_summary(section_id)
        doc = summary.to_dict()
        doc["generated_at"] = _iso(summary.generated_at)
        doc["hand_raise_queue"] = engine.hand_raise_queue(section_id)
        doc["idle_alerts"] = [
            {"student": s, "idle_for_ms": ms} for s, ms in engine.idle_alerts(section_id)
        ]
        return doc

    # ── rubrics and grading ────────────────────────────────────────────

    @app.get("/rubrics")
    def list_rubrics(session: SessionToken = Depends(teacher_session)) -> dict:
        with engine.lock:
            return {
                "rubrics": [
                    r.to_dict()
                    for _, r in sorted(engine.state.rubrics.items())
                ]
            }

    @app.get("/rubrics/{rubric_id}")
    def get_rubric(rubric_id: str, session: SessionToken = Depends(teacher_session)) -> dict:
        with engine.lock:
            return engine._rubric(rubric_id).to_dict()

    @app.post("/rubrics", status_code=201)
    def create_or_update_rubric(
        body: RubricBody, session: SessionToken = Depends(teacher_session)
    ) -> dict:
        rows = [r.model_dump() for r in body.rows]
        if body.rubric_id is not None:
            rubric = engine.update_rubric(
                session.user_id, body.rubric_id, body.name, body.description, rows
            )
        else:
            rubric = engine.create_rubric(session.user_id, body.name, body.description, rows)
        return rubric.to_dict()

    @app.post("/rubrics/generate", status_code=201)
    def generate_rubric(
        body: RubricGenBody, session: SessionToken = Depends(teacher_session)
    ) -> dict:
        rubric = engine.generate_rubric_ai(
            session.user_id,
            RubricGenRequest(
                name=body.name,
                description=body.description,
                prompt=body.prompt,
                example_solutions=body.example_solutions,
                learning_objectives=body.learning_objectives,
            ),
        )
        return rubric.to_dict()

    @app.post("/rubrics/{rubric_id}/rows/{row_id}/regenerate")
    def regenerate_row(
        rubric_id: str,
        row_id: str,
        body: RegenerateBody,
        session: SessionToken = Depends(teacher_session),
    ) -> dict:
        row = engine.regenerate_row_ai(session.user_id, rubric_id, row_id, body.additional_prompt)
        return row.to_dict()

    @app.post("/rubrics/{rubric_id}/template", status_code=201)
    def save_template(rubric_id: str, session: SessionToken = Depends(teacher_session)) -> dict:
        return engine.save_as_template(session.user_id, rubric_id).to_dict()

    @app.post("/rubrics/{rubric_id}/instantiate", status_code=201)
    def instantiate(rubric_id: str, session: SessionToken = Depends(teacher_session)) -> dict:
        return engine.instantiate_template(session.user_id, rubric_id).to_dict()

    @app.post("/submissions/{submission_id}/suggest")
    def suggest(
        submission_id: str,
        body: SuggestBody | None = None,
        session: SessionToken = Depends(current_session),
    ) -> dict:
        with engine.lock:
            submission = engine.state.submissions.get(submission_id)
            if submission is None:
                raise UnknownSubmission(f"unknown submission {submission_id}")
            assignment = engine._assignment(submission.assignment_id)
            _require_teaches_or_mask(session, assignment.section_id)
            rubric_id = (body.rubric_id if body else None) or assignment.rubric_id
        result = engine.suggest_scores(submission_id, rubric_id)
        return {
            "submission_id": submission_id,
            "rubric_id": rubric_id,
            "partial": result.partial,
            "scores": [s.to_dict() for s in result.scores],
        }

    @app.post("/submissions/{submission_id}/grade", status_code=201)
    def grade(
        submission_id: str, body: GradeBody, session: SessionToken = Depends(current_session)
    ) -> dict:
        with engine.lock:
            submission = engine.state.submissions.get(submission_id)
            if submission is None:
                raise UnknownSubmission(f"unknown submission {submission_id}")
            assignment = engine._assignment(submission.assignment_id)
            _require_teaches_or_mask(session, assignment.section_id)
        record = engine.finalize_grade(
            session.user_id, submission_id, [r.model_dump() for r in body.rows]
        )
        return _grade_json(record)

    # ── chat assistant ─────────────────────────────────────────────────

    @app.post("/chat/{assignment_id}/message", status_code=201)
    def chat_message(
        assignment_id: str,
        body: ChatMessageBody,
        session: SessionToken = Depends(current_session),
    ) -> dict:
        if session.role is not Role.STUDENT:
            raise Forbidden("the assistant chats with students")
        turn = engine.answer_question(session.user_id, assignment_id, body.text)
        return {
            "session_id": turn.session_id,
            "student_message": _message_json(turn.student_message),
            "bot_message": _message_json(turn.bot_message) if turn.bot_message else None,
        }

    @app.get("/chat/{assignment_id}/history")
    def chat_history(
        assignment_id: str,
        student: str | None = Query(default=None),
        session: SessionToken = Depends(current_session),
    ) -> dict:
        with engine.lock:
            assignment = engine._assignment(assignment_id)
            target = _scope_student(session, student, assignment.section_id)
            chat = engine.chat_session_for(target, assignment_id)
            if chat is None:
                return {
                    "session_id": None,
                    "student": target,
                    "assignment_id": assignment_id,
                    "messages": [],
                    "flags": [],
                }
            return _session_json(chat)

    @app.get("/chat/{assignment_id}/summary")
    def chat_summary(
        assignment_id: str,
        student: str = Query(...),
        session: SessionToken = Depends(current_session),
    ) -> dict:
        with engine.lock:
            assignment = engine._assignment(assignment_id)
            _require_teaches_or_mask(session, assignment.section_id)
            chat = engine.chat_session_for(student, assignment_id)
            summaries = chat.summaries if chat else []
            return {
                "student": student,
                "assignment_id": assignment_id,
                "summaries": [
                    {
                        "covering_until": _iso(s.covering_until),
                        "text": s.text,
                        "generated_at": _iso(s.generated_at),
                    }
                    for s in summaries
                ],
                "latest": (
                    {
                        "covering_until": _iso(summaries[-1].covering_until),
                        "text": summaries[-1].text,
                        "generated_at": _iso(summaries[-1].generated_at),
                    }
                    if summaries
                    else None
                ),
            }

    @app.post("/chat/messages/{message_id}/rating", status_code=201)
    def rate_message(
        message_id: str, body: RatingBody, session: SessionToken = Depends(current_session)
    ) -> dict:
        rating = engine.rate_response(session.user_id, message_id, body.rating, body.comment)
        return rating.to_dict()

    # ── websocket: events in, pushes out ───────────────────────────────

    @app.websocket("/ws")
    async def websocket_endpoint(websocket: WebSocket):
        token = websocket.query_params.get("token", "")
        try:
            ws_session = store.resolve(token)
        except BlockClassError:
            await websocket.close(code=4401)
            return
        with engine.lock:
            user = engine.state.users.get(ws_session.user_id)
        if user is None:
            await websocket.close(code=4401)
            return

        await websocket.accept()
        conn_id = f"ws-{next(ws_conn_counter)}"
        loop = asyncio.get_running_loop()
        conn = hub.connect(loop)

        requested_section = websocket.query_params.get("section")
        last_seq_raw = websocket.query_params.get("last_seq")
        last_seq = int(last_seq_raw) if last_seq_raw is not None else None

        channels: list[str] = []
        if user.role is Role.TEACHER:
            with engine.lock:
                owned = [
                    s.section_id
                    for s in engine.state.sections.values()
                    if engine.state.teacher_of_section(s.section_id) == user.user_id
                ]
            if requested_section is not None:
                owned = [s for s in owned if s == requested_section]
            channels = [f"section:{sid}" for sid in sorted(owned)]
        else:
            channels = [f"user:{user.user_id}"]

        for channel in channels:
            for missed in hub.subscribe(conn, channel, last_seq):
                await websocket.send_json(missed)

        async def reader():
            while True:
                message = await websocket.receive_json()
                if message.get("type") == "subscribe":
                    channel = message.get("channel", "")
                    allowed = channel in channels or (
                        user.role is Role.TEACHER
                        and channel.startswith("section:")
                        and engine.state.teacher_of_section(channel.split(":", 1)[1])
                        == user.user_id
                    )
                    if not allowed:
                        await websocket.send_json(
                            {"type": "error", "code": "forbidden", "channel": channel}
                        )
                        continue
                    for missed in hub.subscribe(conn, channel, message.get("last_seq")):
                        await websocket.send_json(missed)
                    continue
                reply = await run_in_threadpool(
                    handle_client_message, engine, user, conn_id, message
                )
                await websocket.send_json(reply)

        async def writer():
            while True:
                item = await conn.queue.get()
                await websocket.send_json(item)
                if item.get("type") == "close":
                    await websocket.close(code=4408)
                    return

        try:
            reader_task = asyncio.create_task(reader())
            writer_task = asyncio.create_task(writer())
            done, pending = await asyncio.wait(
                {reader_task, writer_task}, return_when=asyncio.FIRST_COMPLETED
            )
            for task in pending:
                task.cancel()
            for task in done:
                exc = task.exception()
                if exc is not None and not isinstance(exc, WebSocketDisconnect):
                    logger.debug("websocket task ended: %s", exc)
        except WebSocketDisconnect:
            pass
        finally:
            hub.disconnect(conn)

    return app
