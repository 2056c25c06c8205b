"""Snapshot history: dedup, recovery, append-only hash chain."""

from __future__ import annotations

import random

import pytest

from blockclass.domain.model import Role, SkillLevel
from blockclass.errors import UnknownSnapshot
from blockclass.projects.snapshots import SnapshotReason
from blockclass.projects.xmlio import parse_project, serialize_project
from conftest import make_engine
from helpers import gen_project, simple_project


@pytest.fixture
def classroom(clock):
    engine = make_engine(clock)
    teacher = engine.create_user("T", Role.TEACHER, "pw", user_id="t1")
    course = engine.create_course("t1", "Course", ["S1"])
    section = course.section_ids[0]
    engine.create_user("A", Role.STUDENT, "pw", user_id="alice")
    engine.add_roster_entry("t1", section, "alice", SkillLevel.BEGINNER)
    assignment = engine.create_assignment("t1", section, "hw", "desc", {})
    engine.publish_assignment("t1", assignment.assignment_id)
    return engine, assignment.assignment_id


def xml_of(opcodes):
    return serialize_project(simple_project(list(opcodes)))


class TestDedup:
    def test_identical_consecutive_autosaves_dedup(self, classroom, clock):
        engine, aid = classroom
        s1, appended1 = engine.record_snapshot("alice", aid, xml_of(["move"]))
        clock.advance(1000)
        s2, appended2 = engine.record_snapshot("alice", aid, xml_of(["move"]))
        assert appended1 and not appended2
        assert s2.snapshot_id == s1.snapshot_id
        assert len(engine.snapshot_history("alice", aid)) == 1

    def test_distinct_content_appends(self, classroom, clock):
        engine, aid = classroom
        engine.record_snapshot("alice", aid, xml_of(["move"]))
        clock.advance(1000)
        engine.record_snapshot("alice", aid, xml_of(["move", "say"]))
        assert len(engine.snapshot_history("alice", aid)) == 2

    def test_submission_appends_even_if_identical_to_autosave(self, classroom, clock):
        engine, aid = classroom
        engine.record_snapshot("alice", aid, xml_of(["move"]))
        clock.advance(1000)
        engine.submit_assignment("alice", aid, xml_of(["move"]))
        history = engine.snapshot_history("alice", aid)
        assert len(history) == 2
        assert history[-1].reason is SnapshotReason.SUBMISSION


class TestRecovery:
    def test_recover_returns_stored_project(self, classroom, clock):
        engine, aid = classroom
        first, _ = engine.record_snapshot("alice", aid, xml_of(["move"]))
        clock.advance(1000)
        engine.record_snapshot("alice", aid, xml_of(["move", "say", "wait"]))
        clock.advance(1000)
        project, recovery = engine.recover_snapshot("alice", aid, first.snapshot_id)
        assert serialize_project(project) == first.project_xml
        assert recovery.reason is SnapshotReason.RECOVERY_POINT

    def test_recovery_point_captures_pre_recovery_state(self, classroom, clock):
        engine, aid = classroom
        first, _ = engine.record_snapshot("alice", aid, xml_of(["move"]))
        clock.advance(1000)
        latest, _ = engine.record_snapshot("alice", aid, xml_of(["move", "say"]))
        clock.advance(1000)
        _, recovery = engine.recover_snapshot("alice", aid, first.snapshot_id)
        assert recovery.content_hash == latest.content_hash

    def test_recovery_appends_exactly_one(self, classroom, clock):
        engine, aid = classroom
        s, _ = engine.record_snapshot("alice", aid, xml_of(["move"]))
        clock.advance(1000)
        before = len(engine.snapshot_history("alice", aid))
        engine.recover_snapshot("alice", aid, s.snapshot_id)
        assert len(engine.snapshot_history("alice", aid)) == before + 1

    def test_recover_unknown_snapshot(self, classroom):
        engine, aid = classroom
        with pytest.raises(UnknownSnapshot):
            engine.recover_snapshot("alice", aid, "snap-999999")

    def test_recover_record_equals_canonicalized_input(self, classroom, clock):
        engine, aid = classroom
        rng = random.Random(11)
        for i in range(20):
            project = gen_project(rng)
            clock.advance(1000)
            snap, _ = engine.record_snapshot(
                "alice", aid, serialize_project(project), SnapshotReason.AUTOSAVE
            )
            clock.advance(1000)
            recovered, _ = engine.recover_snapshot("alice", aid, snap.snapshot_id)
            assert recovered == parse_project(serialize_project(project))


class TestHashChain:
    def test_chain_validates_and_detects_tampering(self, classroom, clock):
        engine, aid = classroom
        for i in range(5):
            engine.record_snapshot("alice", aid, xml_of(["move"] * (i + 1)))
            clock.advance(500)
        log = engine.state.snapshot_logs["alice::" + aid]
        assert log.validate_chain()

        # mutating any stored entry must break the chain
        log.entries[2].project_xml = log.entries[2].project_xml.replace("move", "mole")
        assert not log.validate_chain()

    def test_reorder_detected(self, classroom, clock):
        engine, aid = classroom
        for i in range(4):
            engine.record_snapshot("alice", aid, xml_of(["say"] * (i + 1)))
            clock.advance(500)
        log = engine.state.snapshot_logs["alice::" + aid]
        log.entries[1], log.entries[2] = log.entries[2], log.entries[1]
        assert not log.validate_chain()

    def test_block_count_cached_correctly(self, classroom, clock):
        engine, aid = classroom
        rng = random.Random(3)
        from blockclass.projects.model import count_blocks

        for _ in range(10):
            project = gen_project(rng)
            clock.advance(700)
            snap, appended = engine.record_snapshot("alice", aid, serialize_project(project))
            if appended:
                assert snap.block_count == count_blocks(parse_project(snap.project_xml))
