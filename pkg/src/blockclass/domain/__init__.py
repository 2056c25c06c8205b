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

__all__ = [
    "Assignment",
    "AssignmentState",
    "AssignmentStatusSummary",
    "Course",
    "Role",
    "RosterEntry",
    "Section",
    "SkillLevel",
    "Submission",
    "User",
    "resolve_starter_variant",
]
