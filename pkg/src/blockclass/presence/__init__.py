from blockclass.presence.tracker import (
    EventKind,
    PresenceRecord,
    PresenceState,
    PresenceStatus,
    PresenceTracker,
    QueueEntry,
    StudentEvent,
)

__all__ = [
    "EventKind",
    "PresenceRecord",
    "PresenceState",
    "PresenceStatus",
    "PresenceTracker",
    "QueueEntry",
    "StudentEvent",
]
