"""Chat session records: transcripts, rolling summaries, flags, ratings.

One session exists per (student, assignment). A new summary becomes due
only when both conditions hold: at least five minutes have passed since
the previous summary (or session start), and at least one message arrived
since the last covered point -- silent sessions never burn provider calls.
"""

from __future__ import annotations

from dataclasses import dataclass, field

SUMMARY_INTERVAL_MS = 300_000
SUMMARY_MAX_WORDS = 120
CONTEXT_WINDOW_MESSAGES = 6


@dataclass
class Rating:
    rater: str
    value: str  # "up" | "down"
    comment: str | None = None

    def to_dict(self) -> dict:
        return {"rater": self.rater, "value": self.value, "comment": self.comment}

    @classmethod
    def from_dict(cls, data: dict) -> Rating:
        return cls(data["rater"], data["value"], data["comment"])


@dataclass
class ChatMessage:
    message_id: str
    role: str  # "student" | "bot"
    text: str
    at: int
    retrieved_chunk_ids: list[str] = field(default_factory=list)
    ratings: dict[str, Rating] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "message_id": self.message_id,
            "role": self.role,
            "text": self.text,
            "at": self.at,
            "retrieved_chunk_ids": list(self.retrieved_chunk_ids),
            "ratings": {k: r.to_dict() for k, r in sorted(self.ratings.items())},
        }

    @classmethod
    def from_dict(cls, data: dict) -> ChatMessage:
        msg = cls(
            message_id=data["message_id"],
            role=data["role"],
            text=data["text"],
            at=data["at"],
            retrieved_chunk_ids=list(data["retrieved_chunk_ids"]),
        )
        msg.ratings = {k: Rating.from_dict(v) for k, v in data["ratings"].items()}
        return msg


@dataclass
class ChatSummary:
    covering_until: int
    text: str
    generated_at: int

    def to_dict(self) -> dict:
        return {
            "covering_until": self.covering_until,
            "text": self.text,
            "generated_at": self.generated_at,
        }

    @classmethod
    def from_dict(cls, data: dict) -> ChatSummary:
        return cls(data["covering_until"], data["text"], data["generated_at"])


@dataclass
class ModerationFlag:
    flag_id: str
    message_id: str
    reason: str  # "denylist_term" | "provider_flag"
    detail: str
    acknowledged_by: str | None = None

    def to_dict(self) -> dict:
        return {
            "flag_id": self.flag_id,
            "message_id": self.message_id,
            "reason": self.reason,
            "detail": self.detail,
            "acknowledged_by": self.acknowledged_by,
        }

    @classmethod
    def from_dict(cls, data: dict) -> ModerationFlag:
        return cls(
            data["flag_id"],
            data["message_id"],
            data["reason"],
            data["detail"],
            data["acknowledged_by"],
        )


@dataclass
class ChatSession:
    session_id: str
    student: str
    assignment_id: str
    created_at: int
    messages: list[ChatMessage] = field(default_factory=list)
    summaries: list[ChatSummary] = field(default_factory=list)
    flags: list[ModerationFlag] = field(default_factory=list)

    def append_message(self, message: ChatMessage) -> None:
        if self.messages and message.at <= self.messages[-1].at:
            # transcripts are strictly time-ordered; nudge forward on clock ties
            message.at = self.messages[-1].at + 1
        self.messages.append(message)

    def messages_since(self, at_exclusive: int) -> list[ChatMessage]:
        return [m for m in self.messages if m.at > at_exclusive]

    def covered_until(self) -> int:
        return self.summaries[-1].covering_until if self.summaries else -1

    def last_summary_ref(self) -> int:
        return self.summaries[-1].generated_at if self.summaries else self.created_at

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "student": self.student,
            "assignment_id": self.assignment_id,
            "created_at": self.created_at,
            "messages": [m.to_dict() for m in self.messages],
            "summaries": [s.to_dict() for s in self.summaries],
            "flags": [f.to_dict() for f in self.flags],
        }

    @classmethod
    def from_dict(cls, data: dict) -> ChatSession:
        session = cls(
            session_id=data["session_id"],
            student=data["student"],
            assignment_id=data["assignment_id"],
            created_at=data["created_at"],
        )
        session.messages = [ChatMessage.from_dict(m) for m in data["messages"]]
        session.summaries = [ChatSummary.from_dict(s) for s in data["summaries"]]
        session.flags = [ModerationFlag.from_dict(f) for f in data["flags"]]
        return session


def summary_due(session: ChatSession, now: int, interval_ms: int = SUMMARY_INTERVAL_MS) -> bool:
    if now - session.last_summary_ref() < interval_ms:
        return False
    return bool(session.messages_since(session.covered_until()))
