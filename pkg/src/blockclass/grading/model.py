"""Rubric and grading records.

Scoring is two-path: rows with a machine check are scored deterministically
from opcode counts (full points when the predicate holds, zero otherwise),
while free-form rows go to the model gateway. Suggestions are teacher aid
only; grades become real when a teacher finalizes them, and finalized
records are versioned-immutable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from blockclass.projects.model import ProjectDocument, opcode_counts


class RubricSource(str, Enum):
    SCRATCH = "scratch"
    TEMPLATE = "template"
    AI = "ai"


class RowProvenance(str, Enum):
    HUMAN = "human"
    AI = "ai"
    AI_REGENERATED = "ai_regenerated"


class Comparator(str, Enum):
    GE = ">="
    LE = "<="
    EQ = "="


@dataclass
class MachineCheck:
    opcode: str
    comparator: Comparator
    threshold: int

    def __post_init__(self) -> None:
        if self.threshold < 0:
            raise ValueError("machine check threshold must be >= 0")

    def holds(self, count: int) -> bool:
        if self.comparator is Comparator.GE:
            return count >= self.threshold
        if self.comparator is Comparator.LE:
            return count <= self.threshold
        return count == self.threshold

    def to_dict(self) -> dict:
        return {
            "opcode": self.opcode,
            "comparator": self.comparator.value,
            "threshold": self.threshold,
        }

    @classmethod
    def from_dict(cls, data: dict) -> MachineCheck:
        return cls(data["opcode"], Comparator(data["comparator"]), data["threshold"])


@dataclass
class RubricRow:
    row_id: str
    criterion: str
    description: str
    max_points: float
    machine_check: MachineCheck | None = None
    provenance: RowProvenance = RowProvenance.HUMAN

    def __post_init__(self) -> None:
        if self.max_points <= 0:
            raise ValueError("max_points must be positive")

    def to_dict(self) -> dict:
        return {
            "row_id": self.row_id,
            "criterion": self.criterion,
            "description": self.description,
            "max_points": self.max_points,
            "machine_check": self.machine_check.to_dict() if self.machine_check else None,
            "provenance": self.provenance.value,
        }

    @classmethod
    def from_dict(cls, data: dict) -> RubricRow:
        return cls(
            row_id=data["row_id"],
            criterion=data["criterion"],
            description=data["description"],
            max_points=data["max_points"],
            machine_check=(
                MachineCheck.from_dict(data["machine_check"]) if data["machine_check"] else None
            ),
            provenance=RowProvenance(data["provenance"]),
        )


@dataclass
class Rubric:
    rubric_id: str
    name: str
    description: str
    source: RubricSource
    rows: list[RubricRow] = field(default_factory=list)
    saved_as_template: bool = False

    def total_max_points(self) -> float:
        return sum(r.max_points for r in self.rows)

    def row(self, row_id: str) -> RubricRow | None:
        for r in self.rows:
            if r.row_id == row_id:
                return r
        return None

    def to_dict(self) -> dict:
        return {
            "rubric_id": self.rubric_id,
            "name": self.name,
            "description": self.description,
            "source": self.source.value,
            "rows": [r.to_dict() for r in self.rows],
            "saved_as_template": self.saved_as_template,
        }

    @classmethod
    def from_dict(cls, data: dict) -> Rubric:
        return cls(
            rubric_id=data["rubric_id"],
            name=data["name"],
            description=data["description"],
            source=RubricSource(data["source"]),
            rows=[RubricRow.from_dict(r) for r in data["rows"]],
            saved_as_template=data["saved_as_template"],
        )


@dataclass
class RubricGenRequest:
    name: str
    description: str
    prompt: str
    example_solutions: list[str] = field(default_factory=list)  # canonical project XML
    learning_objectives: list[str] = field(default_factory=list)


@dataclass
class RowScore:
    row_id: str
    final: float
    rationale: str
    suggested: float | None = None

    def to_dict(self) -> dict:
        return {
            "row_id": self.row_id,
            "final": self.final,
            "rationale": self.rationale,
            "suggested": self.suggested,
        }

    @classmethod
    def from_dict(cls, data: dict) -> RowScore:
        return cls(data["row_id"], data["final"], data["rationale"], data["suggested"])


@dataclass
class GradeRecord:
    submission_id: str
    version: int
    scores: list[RowScore]
    grader: str
    finalized_at: int

    def total(self) -> float:
        return sum(s.final for s in self.scores)

    def to_dict(self) -> dict:
        return {
            "submission_id": self.submission_id,
            "version": self.version,
            "scores": [s.to_dict() for s in self.scores],
            "grader": self.grader,
            "finalized_at": self.finalized_at,
        }

    @classmethod
    def from_dict(cls, data: dict) -> GradeRecord:
        return cls(
            submission_id=data["submission_id"],
            version=data["version"],
            scores=[RowScore.from_dict(s) for s in data["scores"]],
            grader=data["grader"],
            finalized_at=data["finalized_at"],
        )


@dataclass
class SuggestedScore:
    row_id: str
    suggested: float | None
    rationale: str
    machine_checked: bool

    def to_dict(self) -> dict:
        return {
            "row_id": self.row_id,
            "suggested": self.suggested,
            "rationale": self.rationale,
            "machine_checked": self.machine_checked,
        }


def evaluate_machine_check(check: MachineCheck, project: ProjectDocument, max_points: float) -> tuple[float, str]:
    """Deterministic predicate scoring: full points when the opcode-count
    predicate holds, zero otherwise. The rationale states the observed count."""
    count = opcode_counts(project).get(check.opcode, 0)
    points = max_points if check.holds(count) else 0.0
    rationale = (
        f"found {count} of opcode {check.opcode} "
        f"(check: {check.comparator.value} {check.threshold})"
    )
    return points, rationale


# Provider output contracts for structured rubric generation and scoring.

RUBRIC_ROWS_SCHEMA = {
    "type": "array",
    "minItems": 1,
    "maxItems": 12,
    "items": {
        "type": "object",
        "properties": {
            "criterion": {"type": "string", "title": "Criterion"},
            "description": {"type": "string", "title": "Description"},
            "max_points": {"type": "number", "title": "Max points", "minimum": 1, "maximum": 20},
        },
        "required": ["criterion", "description", "max_points"],
    },
}

SINGLE_ROW_SCHEMA = RUBRIC_ROWS_SCHEMA["items"]

SCORE_SCHEMA = {
    "type": "object",
    "properties": {
        "score": {"type": "number", "title": "Score", "minimum": 0},
        "rationale": {"type": "string", "title": "Rationale"},
    },
    "required": ["score", "rationale"],
}
