"""Classroom object model: users, courses, rosters, assignments, submissions.

Starter code is differentiated per skill level. Resolution falls down the
chain advanced -> intermediate -> beginner, so the beginner variant is the
mandatory base whenever any variant exists; a student whose level has no
variant gets the nearest one below, and an assignment with no variants at
all serves the empty project.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, TypeVar


class Role(str, Enum):
    TEACHER = "teacher"
    STUDENT = "student"


class SkillLevel(str, Enum):
    BEGINNER = "beginner"
    INTERMEDIATE = "intermediate"
    ADVANCED = "advanced"


class AssignmentState(str, Enum):
    DRAFT = "draft"
    PUBLISHED = "published"
    CLOSED = "closed"


# Resolution order per level, highest preference first.
FALLBACK_CHAIN: dict[SkillLevel, tuple[SkillLevel, ...]] = {
    SkillLevel.ADVANCED: (
        SkillLevel.ADVANCED,
        SkillLevel.INTERMEDIATE,
        SkillLevel.BEGINNER,
    ),
    SkillLevel.INTERMEDIATE: (SkillLevel.INTERMEDIATE, SkillLevel.BEGINNER),
    SkillLevel.BEGINNER: (SkillLevel.BEGINNER,),
}

T = TypeVar("T")


def resolve_starter_variant(variants: Mapping[SkillLevel, T], level: SkillLevel) -> T | None:
    """Pure fallback-chain lookup; None means no variant applies (serve the
    empty project). Total over all 2^3 presence combinations and 3 levels."""
    for candidate in FALLBACK_CHAIN[level]:
        if candidate in variants:
            return variants[candidate]
    return None


@dataclass
class User:
    user_id: str
    display_name: str
    role: Role
    credential_salt: str
    credential_hash: str

    def to_dict(self) -> dict:
        return {
            "user_id": self.user_id,
            "display_name": self.display_name,
            "role": self.role.value,
            "credential_salt": self.credential_salt,
            "credential_hash": self.credential_hash,
        }

    @classmethod
    def from_dict(cls, data: dict) -> User:
        return cls(
            user_id=data["user_id"],
            display_name=data["display_name"],
            role=Role(data["role"]),
            credential_salt=data["credential_salt"],
            credential_hash=data["credential_hash"],
        )


@dataclass
class Section:
    section_id: str
    course_id: str
    name: str

    def to_dict(self) -> dict:
        return {"section_id": self.section_id, "course_id": self.course_id, "name": self.name}

    @classmethod
    def from_dict(cls, data: dict) -> Section:
        return cls(data["section_id"], data["course_id"], data["name"])


@dataclass
class Course:
    course_id: str
    title: str
    owner: str
    section_ids: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "course_id": self.course_id,
            "title": self.title,
            "owner": self.owner,
            "section_ids": list(self.section_ids),
        }

    @classmethod
    def from_dict(cls, data: dict) -> Course:
        return cls(data["course_id"], data["title"], data["owner"], list(data["section_ids"]))


@dataclass
class RosterEntry:
    student: str
    section_id: str
    skill_level: SkillLevel

    def to_dict(self) -> dict:
        return {
            "student": self.student,
            "section_id": self.section_id,
            "skill_level": self.skill_level.value,
        }

    @classmethod
    def from_dict(cls, data: dict) -> RosterEntry:
        return cls(data["student"], data["section_id"], SkillLevel(data["skill_level"]))


@dataclass
class Assignment:
    assignment_id: str
    section_id: str
    name: str
    description: str
    starter_xml: dict[SkillLevel, str] = field(default_factory=dict)
    chatbot_enabled: bool = True
    rubric_id: str | None = None
    due_at: int | None = None
    state: AssignmentState = AssignmentState.DRAFT

    def to_dict(self) -> dict:
        return {
            "assignment_id": self.assignment_id,
            "section_id": self.section_id,
            "name": self.name,
            "description": self.description,
            "starter_xml": {lvl.value: xml for lvl, xml in sorted(self.starter_xml.items())},
            "chatbot_enabled": self.chatbot_enabled,
            "rubric_id": self.rubric_id,
            "due_at": self.due_at,
            "state": self.state.value,
        }

    @classmethod
    def from_dict(cls, data: dict) -> Assignment:
        return cls(
            assignment_id=data["assignment_id"],
            section_id=data["section_id"],
            name=data["name"],
            description=data["description"],
            starter_xml={SkillLevel(k): v for k, v in data["starter_xml"].items()},
            chatbot_enabled=data["chatbot_enabled"],
            rubric_id=data["rubric_id"],
            due_at=data["due_at"],
            state=AssignmentState(data["state"]),
        )


@dataclass
class Submission:
    submission_id: str
    assignment_id: str
    student: str
    project_xml: str
    submitted_at: int

    def to_dict(self) -> dict:
        return {
            "submission_id": self.submission_id,
            "assignment_id": self.assignment_id,
            "student": self.student,
            "project_xml": self.project_xml,
            "submitted_at": self.submitted_at,
        }

    @classmethod
    def from_dict(cls, data: dict) -> Submission:
        return cls(
            submission_id=data["submission_id"],
            assignment_id=data["assignment_id"],
            student=data["student"],
            project_xml=data["project_xml"],
            submitted_at=data["submitted_at"],
        )


@dataclass
class AssignmentStatusSummary:
    assignment_id: str
    enrolled: int
    submitted: int
    graded: int

    def to_dict(self) -> dict:
        return {
            "assignment_id": self.assignment_id,
            "enrolled": self.enrolled,
            "submitted": self.submitted,
            "graded": self.graded,
        }
