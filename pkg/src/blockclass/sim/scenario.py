"""Simulation scenario description.

The seed fixes the entire event schedule: behavior assignment, event
timing, chat wording, and retransmission injection all derive from one
seeded RNG, so identical scenarios replay identically byte-for-byte.
"""

from __future__ import annotations

from dataclasses import dataclass, field

BEHAVIORS = ("steady_editor", "idler", "hand_raiser", "chatter")


def default_mix() -> dict[str, float]:
    return {"steady_editor": 0.45, "idler": 0.2, "hand_raiser": 0.15, "chatter": 0.2}


@dataclass
class SimulationScenario:
    student_count: int = 30
    duration_s: int = 600
    mix: dict[str, float] = field(default_factory=default_mix)
    seed: int = 42

    def __post_init__(self) -> None:
        if self.student_count < 0:
            raise ValueError("student_count must be >= 0")
        if self.duration_s <= 0:
            raise ValueError("duration_s must be positive")
        unknown = set(self.mix) - set(BEHAVIORS)
        if unknown:
            raise ValueError(f"unknown behaviors in mix: {sorted(unknown)}")
        for behavior, fraction in self.mix.items():
            if not 0.0 <= fraction <= 1.0:
                raise ValueError(f"mix fraction for {behavior} must be in [0, 1], got {fraction}")
        total = sum(self.mix.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"behavior mix must sum to 1, got {total}")

    def behavior_counts(self) -> dict[str, int]:
        """Largest-remainder apportionment of students to behaviors."""
        if self.student_count == 0:
            return {b: 0 for b in BEHAVIORS}
        exact = {b: self.mix.get(b, 0.0) * self.student_count for b in BEHAVIORS}
        counts = {b: int(exact[b]) for b in BEHAVIORS}
        shortfall = self.student_count - sum(counts.values())
        by_remainder = sorted(BEHAVIORS, key=lambda b: (-(exact[b] - counts[b]), b))
        for b in by_remainder[:shortfall]:
            counts[b] += 1
        return counts

    def to_dict(self) -> dict:
        return {
            "student_count": self.student_count,
            "duration_s": self.duration_s,
            "mix": dict(sorted(self.mix.items())),
            "seed": self.seed,
        }
