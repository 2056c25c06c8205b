"""Shared exception hierarchy.

Every domain error carries a stable ``code`` string that the API layer
maps onto HTTP statuses and that clients can branch on.
"""

from __future__ import annotations


class BlockClassError(Exception):
    """Base class for all domain errors."""

    code = "error"

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)


# ── authorization / identity ───────────────────────────────────────────

class BadCredentials(BlockClassError):
    code = "bad_credentials"


class TokenExpired(BlockClassError):
    code = "token_expired"


class Forbidden(BlockClassError):
    code = "forbidden"


class NotTeacher(BlockClassError):
    code = "not_teacher"


class NotEnrolled(BlockClassError):
    code = "not_enrolled"


class NotAuthorized(BlockClassError):
    code = "not_authorized"


# ── missing entities ───────────────────────────────────────────────────

class UnknownUser(BlockClassError):
    code = "unknown_user"


class UnknownCourse(BlockClassError):
    code = "unknown_course"


class UnknownSection(BlockClassError):
    code = "unknown_section"


class UnknownAssignment(BlockClassError):
    code = "unknown_assignment"


class UnknownSubmission(BlockClassError):
    code = "unknown_submission"


class UnknownSnapshot(BlockClassError):
    code = "unknown_snapshot"


class UnknownRubric(BlockClassError):
    code = "unknown_rubric"


class UnknownStudent(BlockClassError):
    code = "unknown_student"


class UnknownSession(BlockClassError):
    code = "unknown_session"


class UnknownMessage(BlockClassError):
    code = "unknown_message"


# ── assignments and submissions ────────────────────────────────────────

class InvalidStarterProject(BlockClassError):
    code = "invalid_starter_project"

    def __init__(self, level: str, message: str = ""):
        self.level = level
        super().__init__(message or f"invalid starter project for level {level}")


class AssignmentNotPublished(BlockClassError):
    code = "assignment_not_published"


class AssignmentClosed(BlockClassError):
    code = "assignment_closed"


class AssignmentImmutable(BlockClassError):
    code = "assignment_immutable"


class InvalidProject(BlockClassError):
    code = "invalid_project"


# ── project XML ────────────────────────────────────────────────────────

class MalformedXml(BlockClassError):
    code = "malformed_xml"


class DepthLimitExceeded(BlockClassError):
    code = "depth_limit_exceeded"


class DuplicateSpriteName(BlockClassError):
    code = "duplicate_sprite_name"


# ── telemetry ──────────────────────────────────────────────────────────

class StaleEvent(BlockClassError):
    code = "stale_event"


# ── rubrics and grading ────────────────────────────────────────────────

class EmptyPrompt(BlockClassError):
    code = "empty_prompt"


class RowNotFound(BlockClassError):
    code = "row_not_found"


class RubricFinalized(BlockClassError):
    code = "rubric_finalized"


class ScoreOutOfRange(BlockClassError):
    code = "score_out_of_range"

    def __init__(self, row_id: str, message: str = ""):
        self.row_id = row_id
        super().__init__(message or f"score out of range for row {row_id}")


# ── chat assistant ─────────────────────────────────────────────────────

class EmptyCorpus(BlockClassError):
    code = "empty_corpus"


class IndexNotBuilt(BlockClassError):
    code = "index_not_built"


class ChatbotDisabled(BlockClassError):
    code = "chatbot_disabled"


class FlaggedBeforeSend(BlockClassError):
    code = "flagged_before_send"

    def __init__(self, message_id: str, message: str = ""):
        self.message_id = message_id
        super().__init__(message or "message flagged by moderation; not sent")


class NotBotMessage(BlockClassError):
    code = "not_bot_message"


# ── model provider ─────────────────────────────────────────────────────

class ProviderUnavailable(BlockClassError):
    code = "provider_unavailable"


class ProviderTimeout(ProviderUnavailable):
    code = "provider_timeout"


class SchemaValidationFailed(BlockClassError):
    code = "schema_validation_failed"


class MalformedProviderOutput(BlockClassError):
    code = "malformed_provider_output"
