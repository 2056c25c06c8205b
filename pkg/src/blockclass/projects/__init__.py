from blockclass.projects.model import (
    BlockNode,
    ProjectDocument,
    Script,
    Sprite,
    count_blocks,
    empty_project,
    progress_delta,
    validate_project,
)
from blockclass.projects.snapshots import Snapshot, SnapshotLog, SnapshotReason
from blockclass.projects.xmlio import canonicalize, parse_project, serialize_project

__all__ = [
    "BlockNode",
    "ProjectDocument",
    "Script",
    "Snapshot",
    "SnapshotLog",
    "SnapshotReason",
    "Sprite",
    "canonicalize",
    "count_blocks",
    "empty_project",
    "parse_project",
    "progress_delta",
    "serialize_project",
    "validate_project",
]
