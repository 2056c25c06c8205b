"""Append-only snapshot history with hash-chained integrity.

Each (student, assignment) pair owns one log. Entries are never mutated,
reordered, or deleted; every entry's chain hash covers its predecessor, so
any tampering is detectable by re-walking the chain.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from enum import Enum

from blockclass.errors import UnknownSnapshot
from blockclass.projects.model import ProjectDocument, count_blocks
from blockclass.projects.xmlio import parse_project, serialize_project


class SnapshotReason(str, Enum):
    AUTOSAVE = "autosave"
    SUBMISSION = "submission"
    RECOVERY_POINT = "recovery_point"


def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass
class Snapshot:
    snapshot_id: str
    student: str
    assignment_id: str
    taken_at: int
    reason: SnapshotReason
    project_xml: str
    block_count: int
    content_hash: str
    chain_hash: str

    def project(self) -> ProjectDocument:
        return parse_project(self.project_xml)

    def core_payload(self) -> str:
        return json.dumps(
            {
                "snapshot_id": self.snapshot_id,
                "student": self.student,
                "assignment_id": self.assignment_id,
                "taken_at": self.taken_at,
                "reason": self.reason.value,
                "content_hash": self.content_hash,
                "block_count": self.block_count,
            },
            sort_keys=True,
            separators=(",", ":"),
        )

    def to_dict(self) -> dict:
        return {
            "snapshot_id": self.snapshot_id,
            "student": self.student,
            "assignment_id": self.assignment_id,
            "taken_at": self.taken_at,
            "reason": self.reason.value,
            "project_xml": self.project_xml,
            "block_count": self.block_count,
            "content_hash": self.content_hash,
            "chain_hash": self.chain_hash,
        }

    @classmethod
    def from_dict(cls, data: dict) -> Snapshot:
        return cls(
            snapshot_id=data["snapshot_id"],
            student=data["student"],
            assignment_id=data["assignment_id"],
            taken_at=data["taken_at"],
            reason=SnapshotReason(data["reason"]),
            project_xml=data["project_xml"],
            block_count=data["block_count"],
            content_hash=data["content_hash"],
            chain_hash=data["chain_hash"],
        )


class SnapshotLog:
    """Ordered snapshot entries for one (student, assignment) pair."""

    def __init__(self, student: str, assignment_id: str):
        self.student = student
        self.assignment_id = assignment_id
        self.entries: list[Snapshot] = []

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def latest(self) -> Snapshot | None:
        return self.entries[-1] if self.entries else None

    def append(
        self,
        snapshot_id: str,
        taken_at: int,
        reason: SnapshotReason,
        project: ProjectDocument,
    ) -> tuple[Snapshot, bool]:
        """Append a snapshot; returns (entry, appended).

        Identical consecutive autosaves are a no-op: when both the incoming
        and latest entry are autosaves with the same content hash, the
        existing entry is returned and nothing is appended. Submissions and
        recovery points always append.
        """
        xml = serialize_project(project)
        content_hash = _sha256(xml)

        last = self.latest
        if (
            last is not None
            and reason is SnapshotReason.AUTOSAVE
            and last.reason is SnapshotReason.AUTOSAVE
            and last.content_hash == content_hash
        ):
            return last, False

        entry = Snapshot(
            snapshot_id=snapshot_id,
            student=self.student,
            assignment_id=self.assignment_id,
            taken_at=taken_at,
            reason=reason,
            project_xml=xml,
            block_count=count_blocks(parse_project(xml)),
            content_hash=content_hash,
            chain_hash="",
        )
        prev_hash = last.chain_hash if last is not None else ""
        entry.chain_hash = _sha256(prev_hash + "|" + entry.core_payload())

        if last is not None:
            if (taken_at, snapshot_id) <= (last.taken_at, last.snapshot_id):
                raise ValueError(
                    "snapshot order violation: (taken_at, snapshot_id) must increase"
                )
        self.entries.append(entry)
        return entry, True

    def find(self, snapshot_id: str) -> Snapshot:
        for entry in self.entries:
            if entry.snapshot_id == snapshot_id:
                return entry
        raise UnknownSnapshot(f"snapshot {snapshot_id} not found")

    def validate_chain(self) -> bool:
        """Recompute every link; True iff the chain is intact."""
        prev_hash = ""
        for entry in self.entries:
            if entry.content_hash != _sha256(entry.project_xml):
                return False
            expected = _sha256(prev_hash + "|" + entry.core_payload())
            if entry.chain_hash != expected:
                return False
            prev_hash = entry.chain_hash
        return True

    def to_dict(self) -> dict:
        return {
            "student": self.student,
            "assignment_id": self.assignment_id,
            "entries": [e.to_dict() for e in self.entries],
        }

    @classmethod
    def from_dict(cls, data: dict) -> SnapshotLog:
        log = cls(data["student"], data["assignment_id"])
        log.entries = [Snapshot.from_dict(e) for e in data["entries"]]
        return log
