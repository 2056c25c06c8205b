from blockclass.grading.model import (
    Comparator,
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

__all__ = [
    "Comparator",
    "GradeRecord",
    "MachineCheck",
    "RowProvenance",
    "RowScore",
    "Rubric",
    "RubricGenRequest",
    "RubricRow",
    "RubricSource",
    "SuggestedScore",
    "evaluate_machine_check",
]
