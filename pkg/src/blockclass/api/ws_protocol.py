"""Wire-level handling of client WebSocket messages.

Kept separate from the socket plumbing so the simulator can drive the
exact same message handling in-process. One JSON object per message:

    {"type": "event", "kind": "edit", "assignment": "a-000001",
     "seq": 7, "client_at": 1690000000000}

The server assigns the authoritative timestamp and ACKs with it; stale
sequence numbers get an error reply and are dropped (and counted).
"""

from __future__ import annotations

from blockclass.domain.model import Role, User
from blockclass.engine import ClassroomEngine
from blockclass.errors import BlockClassError, StaleEvent


def handle_client_message(
    engine: ClassroomEngine, user: User, conn_id: str, message: dict
) -> dict:
    msg_type = message.get("type")
    if msg_type == "event":
        if user.role is not Role.STUDENT:
            return {"type": "error", "code": "not_student", "detail": "only students send events"}
        claimed = message.get("student")
        if claimed is not None and claimed != user.user_id:
            return {
                "type": "error",
                "code": "student_mismatch",
                "detail": "event student does not match the authenticated user",
            }
        try:
            result = engine.ingest_student_event(
                student=user.user_id,
                kind=message.get("kind", ""),
                seq=message.get("seq", 0),
                assignment_id=message.get("assignment"),
                conn=conn_id,
                client_at=message.get("client_at"),
            )
        except StaleEvent:
            return {"type": "error", "code": "stale_event", "seq": message.get("seq")}
        except (BlockClassError, ValueError) as exc:
            code = getattr(exc, "code", "bad_event")
            return {"type": "error", "code": code, "detail": str(exc)}
        return {
            "type": "ack",
            "seq": message.get("seq"),
            "at": result.state.last_event_at,
            "status": result.state.status.value,
        }
    if msg_type == "ping":
        return {"type": "pong"}
    return {"type": "error", "code": "unknown_message_type", "detail": str(msg_type)}
