"""Deterministic virtual-classroom simulator.

Seeds a demo classroom, generates a behavior-driven event schedule from
one seeded RNG, and drives it through the same wire-message handler the
WebSocket route uses (in-process transport: concurrency lives in the
transport, content is a single deterministic queue). The virtual clock
advances with the schedule; alert evaluation runs every 15 s and the
summary scheduler every 300 s, exactly as in live serving.

The report is canonical JSON: the same scenario and seed reproduce it
byte-for-byte.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

from blockclass.api.ws_protocol import handle_client_message
from blockclass.clock import VirtualClock
from blockclass.domain.model import Role, SkillLevel
from blockclass.engine import ClassroomEngine
from blockclass.errors import ChatbotDisabled, FlaggedBeforeSend, ProviderUnavailable
from blockclass.llm.config import ProviderConfig
from blockclass.llm.gateway import LlmGateway
from blockclass.projects.model import BlockNode, ProjectDocument, Script, Sprite
from blockclass.projects.xmlio import serialize_project
from blockclass.sim.scenario import SimulationScenario

SIM_BASE_MS = 1_750_000_000_000

ALERT_TICK_MS = 15_000
SUMMARY_TICK_MS = 300_000

CHAT_LINES = (
    "How do I make the sprite move forward?",
    "What does the repeat block do?",
    "How can I change the costume when a key is pressed?",
    "Why does my loop never stop?",
    "How do I broadcast a message to another sprite?",
    "Where is the block for playing a sound?",
)

FLAGGED_LINE = "this assignment is stupid and so is this bot"

SIM_MANUAL = """
# Motion

Sprites move with motion blocks. The move block shifts a sprite forward by
the given number of steps along its current direction, and the turn blocks
rotate it. Use the go-to block to jump straight to a position on stage.

# Control

Control blocks shape the flow of a script. The repeat block runs the
blocks inside it a fixed number of times, while the forever block loops
until the script stops. The if block runs its body only when a condition
reports true.

# Looks and Sound

Looks blocks change what a sprite shows: say displays a speech balloon,
and switch-costume changes the picture. Sound blocks play recordings or
notes; the play-sound block starts a sound without waiting.

# Events

Event blocks start scripts. The green-flag hat runs a script when the
project starts, and the when-key-pressed hat reacts to the keyboard.
Broadcast sends a message every sprite can hear with a matching hat.
"""


def _demo_project(name: str, opcodes: list) -> str:
    blocks = []
    for op in opcodes:
        if isinstance(op, tuple):
            inner = [BlockNode(opcode=o, children=["10"]) for o in op[1]]
            blocks.append(BlockNode(opcode=op[0], children=["3", Script(x=0, y=0, blocks=inner)]))
        else:
            blocks.append(BlockNode(opcode=op, children=["10"]))
    doc = ProjectDocument(
        name=name, sprites=[Sprite(name="Sprite1", scripts=[Script(x=10, y=10, blocks=blocks)])]
    )
    return serialize_project(doc)


def _student_work(name: str, extra_blocks: int) -> str:
    ops = ["whenflag", "move"] + ["say" if i % 2 else "move" for i in range(extra_blocks)]
    return _demo_project(name, ops)


def seed_demo_data(engine: ClassroomEngine, student_count: int = 30) -> dict:
    """Demo classroom: one teacher, one course with two sections, students
    split across them with cycling skill levels, and two published
    assignments -- one fully differentiated, one with the chatbot off."""
    teacher = engine.create_user(
        display_name="Demo Teacher", role=Role.TEACHER, secret="teacher-pass", user_id="teacher"
    )
    course = engine.create_course(teacher.user_id, "Intro to Block Programming", ["Period 1", "Period 2"])
    section_ids = list(course.section_ids)

    levels = [SkillLevel.BEGINNER, SkillLevel.INTERMEDIATE, SkillLevel.ADVANCED]
    students = []
    for i in range(student_count):
        student = engine.create_user(
            display_name=f"Student {i + 1:02d}",
            role=Role.STUDENT,
            secret=f"student-pass-{i + 1:02d}",
            user_id=f"student-{i + 1:02d}",
        )
        section_id = section_ids[i % len(section_ids)]
        engine.add_roster_entry(teacher.user_id, section_id, student.user_id, levels[i % 3])
        students.append(student.user_id)

    starter = {
        "beginner": _demo_project(
            "maze-starter", ["whenflag", "move", "say", ("repeat", ["move", "turn"]), "stop"]
        ),
        "intermediate": _demo_project("maze-starter", ["whenflag", "move", ("repeat", ["move"])]),
        "advanced": _demo_project("maze-starter", ["whenflag"]),
    }
    rubric = engine.create_rubric(
        teacher.user_id,
        "Maze rubric",
        "Grading criteria for the maze assignment",
        [
            {
                "criterion": "Uses a loop",
                "description": "The solution repeats movement with a loop block",
                "max_points": 4,
                "machine_check": {"opcode": "repeat", "comparator": ">=", "threshold": 1},
            },
            {
                "criterion": "Program structure",
                "description": "Scripts are organized and readable",
                "max_points": 6,
            },
        ],
    )
    a1 = engine.create_assignment(
        teacher.user_id,
        section_ids[0],
        "Maze navigation",
        "Guide the sprite through the maze using motion and control blocks.",
        starter_variants=starter,
        chatbot_enabled=True,
        rubric_id=rubric.rubric_id,
    )
    engine.publish_assignment(teacher.user_id, a1.assignment_id)
    a2 = engine.create_assignment(
        teacher.user_id,
        section_ids[1],
        "Dance party",
        "Choreograph two sprites with sounds and costume changes.",
        starter_variants={},
        chatbot_enabled=False,
    )
    engine.publish_assignment(teacher.user_id, a2.assignment_id)

    return {
        "teacher": teacher.user_id,
        "course": course.course_id,
        "sections": section_ids,
        "assignments": [a1.assignment_id, a2.assignment_id],
        "rubric": rubric.rubric_id,
        "students": students,
    }


def build_sim_engine(
    scenario: SimulationScenario,
    log_path: str | Path | None = None,
) -> tuple[ClassroomEngine, dict]:
    """Engine on a virtual clock with the stub provider, demo-seeded.
    When log_path is given, the log is attached before seeding so replay
    covers the whole history."""
    clock = VirtualClock(SIM_BASE_MS)
    gateway = LlmGateway(ProviderConfig(mode="stub"))
    engine = ClassroomEngine(
        clock=clock,
        gateway=gateway,
        rng=random.Random(scenario.seed ^ 0x5EED),
    )
    if log_path is not None:
        engine.attach_log(log_path)
    seeded = seed_demo_data(engine, scenario.student_count)
    engine.ingest_manual(SIM_MANUAL)
    return engine, seeded


# ── schedule generation ────────────────────────────────────────────────


@dataclass
class _Entry:
    t: int
    priority: int  # 0 ws-event, 1 snapshot, 2 chat, 3 alert tick, 4 summary tick
    student: str
    seq: int
    kind: str
    payload: dict = field(default_factory=dict)

    def sort_key(self) -> tuple:
        return (self.t, self.priority, self.student, self.seq)


def _behavior_assignment(scenario: SimulationScenario, students: list[str], rng: random.Random) -> dict[str, str]:
    counts = scenario.behavior_counts()
    pool: list[str] = []
    for behavior in sorted(counts):
        pool.extend([behavior] * counts[behavior])
    rng.shuffle(pool)
    return dict(zip(students, pool))


def _build_schedule(
    scenario: SimulationScenario,
    students: list[str],
    behaviors: dict[str, str],
    assignment_of: dict[str, str],
    rng: random.Random,
    chat_enabled_assignment: str | None = None,
) -> list[_Entry]:
    duration_ms = scenario.duration_s * 1000
    entries: list[_Entry] = []

    for student in students:
        behavior = behaviors[student]
        assignment = assignment_of[student]
        wire: list[tuple[int, str]] = []  # (t, kind)

        hb_offset = rng.randrange(0, 5000)
        t = hb_offset
        while t < duration_ms:
            wire.append((t, "heartbeat"))
            t += ALERT_TICK_MS

        if behavior == "steady_editor":
            t = 10_000 + rng.randrange(0, 4000)
            while t < duration_ms:
                wire.append((t, "edit"))
                t += 20_000 + rng.randrange(-3000, 3001)
        elif behavior == "idler":
            # edit, go quiet long enough to trip the idle threshold, edit
            # again (re-arming the alert), then go quiet again
            phase_end = duration_ms // 6
            t = 8_000
            while t < phase_end:
                wire.append((t, "edit"))
                t += 15_000
            resume_start = duration_ms * 8 // 15
            resume_end = duration_ms * 19 // 30
            t = resume_start
            while t < resume_end:
                wire.append((t, "edit"))
                t += 15_000
        elif behavior == "hand_raiser":
            t = 12_000
            while t < duration_ms:
                wire.append((t, "edit"))
                t += 25_000 + rng.randrange(-2000, 2001)
            wire.append((duration_ms // 4, "hand_raise"))
            wire.append((duration_ms // 2, "hand_lower"))
            wire.append((duration_ms * 3 // 4, "hand_raise"))
        else:  # chatter
            t = 14_000
            while t < duration_ms:
                wire.append((t, "edit"))
                t += 30_000 + rng.randrange(-4000, 4001)

        wire.sort(key=lambda pair: (pair[0], pair[1]))
        for seq, (at, kind) in enumerate(wire, start=1):
            entries.append(
                _Entry(
                    t=at,
                    priority=0,
                    student=student,
                    seq=seq,
                    kind=kind,
                    payload={"assignment": assignment},
                )
            )

        # retransmission: the second wire event shows up again later with
        # its old seq and gets dropped as stale
        if len(wire) >= 3:
            dup_at, dup_kind = wire[1]
            entries.append(
                _Entry(
                    t=dup_at + 5_000 + rng.randrange(0, 10_000),
                    priority=0,
                    student=student,
                    seq=2,
                    kind=dup_kind,
                    payload={"assignment": assignment, "stale_dup": True},
                )
            )

        # periodic autosaves with steadily growing projects
        saves = 0
        for at in range(60_000, duration_ms, 60_000):
            saves += 1
            entries.append(
                _Entry(
                    t=at - rng.randrange(0, 3000),
                    priority=1,
                    student=student,
                    seq=0,
                    kind="snapshot",
                    payload={"assignment": assignment, "blocks": 2 * saves},
                )
            )

        if behavior == "chatter":
            t = 100_000
            line = rng.randrange(0, len(CHAT_LINES))
            while t < duration_ms:
                entries.append(
                    _Entry(
                        t=t,
                        priority=2,
                        student=student,
                        seq=0,
                        kind="chat",
                        payload={
                            "assignment": assignment,
                            "text": CHAT_LINES[(line + t // 130_000) % len(CHAT_LINES)],
                        },
                    )
                )
                t += 130_000

    # one deliberately inappropriate message, sent where the chatbot is on,
    # so the moderation path shows up in every report
    flaggers = sorted(
        s
        for s in students
        if behaviors[s] == "chatter" and assignment_of[s] == chat_enabled_assignment
    )
    if flaggers:
        entries.append(
            _Entry(
                t=duration_ms // 3,
                priority=2,
                student=flaggers[0],
                seq=0,
                kind="chat",
                payload={"assignment": assignment_of[flaggers[0]], "text": FLAGGED_LINE},
            )
        )

    duration = scenario.duration_s * 1000
    for at in range(ALERT_TICK_MS, duration + 1, ALERT_TICK_MS):
        entries.append(_Entry(t=at, priority=3, student="", seq=0, kind="alert_tick"))
    for at in range(SUMMARY_TICK_MS, duration + 1, SUMMARY_TICK_MS):
        entries.append(_Entry(t=at, priority=4, student="", seq=0, kind="summary_tick"))

    entries.sort(key=_Entry.sort_key)
    return entries


# ── driving ────────────────────────────────────────────────────────────


def run_simulation(
    scenario: SimulationScenario,
    log_path: str | Path | None = None,
    stop_at_ms: int | None = None,
    engine_and_seed: tuple[ClassroomEngine, dict] | None = None,
) -> dict:
    """Run the scenario and return the deterministic report. stop_at_ms
    cuts the run mid-schedule (for kill/recovery testing); the report then
    covers only the driven prefix."""
    if engine_and_seed is None:
        engine, seeded = build_sim_engine(scenario, log_path)
    else:
        engine, seeded = engine_and_seed

    counters = {"idle_alert": 0, "moderation_alert": 0}

    previous_notifier = engine.notifier

    def counting_notifier(section_id, student, kind, payload):
        if previous_notifier is not None:
            previous_notifier(section_id, student, kind, payload)
        if kind in counters:
            counters[kind] += 1

    engine.notifier = counting_notifier

    rng = random.Random(scenario.seed)
    students = seeded["students"]
    behaviors = _behavior_assignment(scenario, students, rng)
    assignment_of = {}
    for student in students:
        sections = engine.state.sections_of_student(student)
        section = sections[0] if sections else None
        assigned = None
        for a in engine.state.assignments_of_section(section) if section else []:
            assigned = a.assignment_id
        assignment_of[student] = assigned

    enabled_assignment = None
    for assignment_id in seeded["assignments"]:
        if engine.state.assignments[assignment_id].chatbot_enabled:
            enabled_assignment = assignment_id
            break
    schedule = _build_schedule(
        scenario, students, behaviors, assignment_of, rng, enabled_assignment
    )

    clock: VirtualClock = engine.clock  # type: ignore[assignment]
    report = {
        "scenario": scenario.to_dict(),
        "behaviors": {b: sum(1 for s in students if behaviors[s] == b) for b in sorted(set(behaviors.values()))} if students else {},
        "events_sent": 0,
        "stale_dropped": 0,
        "snapshots_recorded": 0,
        "chat_messages_sent": 0,
        "chatbot_denied": 0,
        "flagged_messages": 0,
        "alerts_fired": 0,
        "summaries_generated": 0,
        "provider_calls": 0,
    }

    stopped_early = False
    for entry in schedule:
        if stop_at_ms is not None and entry.t > stop_at_ms:
            stopped_early = True
            break
        clock.set(SIM_BASE_MS + entry.t)
        if entry.kind in ("heartbeat", "edit", "hand_raise", "hand_lower", "focus", "blur"):
            user = engine.state.users[entry.student]
            reply = handle_client_message(
                engine,
                user,
                f"sim-{entry.student}",
                {
                    "type": "event",
                    "kind": entry.kind,
                    "assignment": entry.payload.get("assignment"),
                    "seq": entry.seq,
                    "client_at": SIM_BASE_MS + entry.t,
                },
            )
            report["events_sent"] += 1
            if reply.get("type") == "error" and reply.get("code") == "stale_event":
                report["stale_dropped"] += 1
        elif entry.kind == "snapshot":
            assignment = entry.payload.get("assignment")
            if assignment is not None:
                engine.record_snapshot(
                    entry.student,
                    assignment,
                    _student_work(f"work-{entry.student}", entry.payload["blocks"]),
                )
                report["snapshots_recorded"] += 1
        elif entry.kind == "chat":
            assignment = entry.payload.get("assignment")
            if assignment is None:
                continue
            try:
                engine.answer_question(entry.student, assignment, entry.payload["text"])
                report["chat_messages_sent"] += 1
            except ChatbotDisabled:
                report["chatbot_denied"] += 1
            except FlaggedBeforeSend:
                report["flagged_messages"] += 1
            except ProviderUnavailable:
                pass
        elif entry.kind == "alert_tick":
            for section_id in seeded["sections"]:
                engine.idle_alerts(section_id)
        elif entry.kind == "summary_tick":
            report["summaries_generated"] += len(engine.run_summary_tick())

    if not stopped_early:
        clock.set(SIM_BASE_MS + scenario.duration_s * 1000)

    report["alerts_fired"] = counters["idle_alert"]
    report["provider_calls"] = engine.gateway.stub.call_count
    report["final_summary"] = {
        section_id: engine.class_activity_summary(section_id).to_dict()
        for section_id in seeded["sections"]
    }
    report["hand_raise_queues"] = {
        section_id: engine.hand_raise_queue(section_id) for section_id in seeded["sections"]
    }
    report["final_state_hash"] = engine.state_hash()
    report["stopped_early"] = stopped_early
    return report


def report_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"
