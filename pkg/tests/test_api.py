"""HTTP + WebSocket facade: auth, role scoping with NotFound masking,
idempotent retries, push replay, and event-sourced restart."""

from __future__ import annotations

import random

import pytest
from fastapi.testclient import TestClient

from blockclass.api.app import create_app
from blockclass.clock import VirtualClock
from blockclass.engine import ClassroomEngine
from blockclass.domain.model import Role, SkillLevel
from blockclass.llm.config import ProviderConfig
from blockclass.llm.gateway import LlmGateway
from blockclass.projects.xmlio import serialize_project
from conftest import BASE_MS, make_engine
from helpers import simple_project

STARTER = serialize_project(simple_project(["move", "say"], name="starter"))
WORK = serialize_project(simple_project(["move", "say", "repeat"], name="work"))


@pytest.fixture
def api(clock):
    engine = make_engine(clock)
    engine.create_user("Teacher One", Role.TEACHER, "t1-secret", user_id="t1")
    engine.create_user("Teacher Two", Role.TEACHER, "t2-secret", user_id="t2")
    course = engine.create_course("t1", "CS", ["Period 1"])
    section = course.section_ids[0]
    engine.create_course("t2", "Other CS", ["Other Period"])
    for sid in ("alice", "bob"):
        engine.create_user(sid.title(), Role.STUDENT, f"{sid}-secret", user_id=sid)
        engine.add_roster_entry("t1", section, sid, SkillLevel.BEGINNER)
    rubric = engine.create_rubric(
        "t1",
        "R",
        "",
        [
            {
                "criterion": "uses repeat",
                "description": "",
                "max_points": 4,
                "machine_check": {"opcode": "repeat", "comparator": ">=", "threshold": 1},
            },
            {"criterion": "style", "description": "", "max_points": 6},
        ],
    )
    assignment = engine.create_assignment(
        "t1", section, "Maze", "navigate the maze", {"beginner": STARTER},
        rubric_id=rubric.rubric_id,
    )
    engine.publish_assignment("t1", assignment.assignment_id)
    engine.ingest_manual("# Motion\n\nthe move block shifts the sprite forward by steps")

    app = create_app(engine)
    client = TestClient(app)

    def login(username, secret):
        response = client.post("/auth/login", json={"username": username, "secret": secret})
        assert response.status_code == 200, response.text
        return {"Authorization": f"Bearer {response.json()['token']}"}

    return {
        "engine": engine,
        "client": client,
        "clock": clock,
        "section": section,
        "assignment": assignment.assignment_id,
        "rubric": rubric,
        "teacher": login("t1", "t1-secret"),
        "other_teacher": login("t2", "t2-secret"),
        "alice": login("alice", "alice-secret"),
        "bob": login("bob", "bob-secret"),
        "login": login,
    }


class TestAuth:
    def test_wrong_secret_and_unknown_user_indistinguishable(self, api):
        client = api["client"]
        r1 = client.post("/auth/login", json={"username": "alice", "secret": "nope"})
        r2 = client.post("/auth/login", json={"username": "who-dis", "secret": "nope"})
        assert r1.status_code == r2.status_code == 401
        assert r1.json() == r2.json()

    def test_expired_token_rejected_with_code(self, api):
        client, clock = api["client"], api["clock"]
        headers = api["alice"]
        assert client.get("/courses", headers=headers).status_code == 200
        clock.advance(8 * 60 * 60 * 1000 + 1)
        response = client.get("/courses", headers=headers)
        assert response.status_code == 401
        assert response.json()["error"] == "token_expired"

    def test_missing_token(self, api):
        assert api["client"].get("/courses").status_code == 401


class TestAuthorizationMasking:
    def test_student_reads_own_chat_history(self, api):
        r = api["client"].get(f"/chat/{api['assignment']}/history", headers=api["alice"])
        assert r.status_code == 200

    def test_student_probing_others_chat_gets_not_found(self, api):
        r = api["client"].get(
            f"/chat/{api['assignment']}/history",
            params={"student": "bob"},
            headers=api["alice"],
        )
        assert r.status_code == 404
        assert r.json()["error"] == "not_found"

    def test_teacher_reads_any_student_history_in_section(self, api):
        r = api["client"].get(
            f"/chat/{api['assignment']}/history",
            params={"student": "bob"},
            headers=api["teacher"],
        )
        assert r.status_code == 200

    def test_student_toggle_chatbot_masked(self, api):
        r = api["client"].put(
            f"/assignments/{api['assignment']}/chatbot",
            json={"enabled": False},
            headers=api["alice"],
        )
        assert r.status_code == 404

    def test_foreign_teacher_forbidden(self, api):
        r = api["client"].get(
            f"/sections/{api['section']}/roster", headers=api["other_teacher"]
        )
        assert r.status_code == 403

    def test_student_roster_masked(self, api):
        r = api["client"].get(f"/sections/{api['section']}/roster", headers=api["alice"])
        assert r.status_code == 404

    def test_student_probing_other_submission_masked(self, api):
        client = api["client"]
        r = client.post(
            "/submissions",
            json={"assignment_id": api["assignment"], "project_xml": WORK},
            headers=api["bob"],
        )
        submission_id = r.json()["submission_id"]
        r = client.get(f"/submissions/{submission_id}", headers=api["alice"])
        assert r.status_code == 404
        assert client.get(f"/submissions/{submission_id}", headers=api["bob"]).status_code == 200


class TestAssignmentRoutes:
    def test_starter_resolution_route(self, api):
        r = api["client"].get(
            f"/assignments/{api['assignment']}/starter", headers=api["alice"]
        )
        assert r.status_code == 200
        assert r.json()["project_xml"] == STARTER

    def test_teacher_preview_starter_for_student(self, api):
        r = api["client"].get(
            f"/assignments/{api['assignment']}/starter",
            params={"student": "bob"},
            headers=api["teacher"],
        )
        assert r.status_code == 200

    def test_student_listing_hides_drafts_and_variants(self, api):
        engine = api["engine"]
        engine.create_assignment("t1", api["section"], "Draft hw", "", {})
        r = api["client"].get("/assignments", headers=api["alice"])
        listing = r.json()["assignments"]
        assert all(a["state"] != "draft" for a in listing)
        assert all("starter_variants" not in a for a in listing)

    def test_teacher_listing_sorted_by_name(self, api):
        engine = api["engine"]
        engine.create_assignment("t1", api["section"], "Aardvark", "", {})
        r = api["client"].get("/assignments", params={"sort": "name"}, headers=api["teacher"])
        names = [a["name"] for a in r.json()["assignments"]]
        assert names == sorted(names)

    def test_status_route(self, api):
        client = api["client"]
        client.post(
            "/submissions",
            json={"assignment_id": api["assignment"], "project_xml": WORK},
            headers=api["alice"],
        )
        r = client.get(f"/assignments/{api['assignment']}/status", headers=api["teacher"])
        assert r.json() == {
            "assignment_id": api["assignment"],
            "enrolled": 2,
            "submitted": 1,
            "graded": 0,
        }


class TestSnapshotsOverHttp:
    def test_record_list_recover(self, api):
        client, clock = api["client"], api["clock"]
        r = client.post(
            "/snapshots",
            json={"assignment_id": api["assignment"], "project_xml": STARTER},
            headers=api["alice"],
        )
        assert r.status_code == 201
        first_id = r.json()["snapshot_id"]
        clock.advance(1000)
        client.post(
            "/snapshots",
            json={"assignment_id": api["assignment"], "project_xml": WORK},
            headers=api["alice"],
        )
        r = client.get(
            "/snapshots", params={"assignment": api["assignment"]}, headers=api["alice"]
        )
        assert len(r.json()["snapshots"]) == 2

        r = client.post(f"/snapshots/{first_id}/recover", headers=api["alice"])
        assert r.status_code == 200
        assert r.json()["project_xml"] == STARTER
        assert r.json()["recovery_snapshot"]["reason"] == "recovery_point"

    def test_student_cannot_list_others_snapshots(self, api):
        r = api["client"].get(
            "/snapshots",
            params={"assignment": api["assignment"], "student": "bob"},
            headers=api["alice"],
        )
        assert r.status_code == 404


class TestGradingOverHttp:
    def test_suggest_then_grade_pushes_update(self, api):
        client = api["client"]
        r = client.post(
            "/submissions",
            json={"assignment_id": api["assignment"], "project_xml": WORK},
            headers=api["alice"],
        )
        submission_id = r.json()["submission_id"]

        r = client.post(f"/submissions/{submission_id}/suggest", headers=api["teacher"], json={})
        assert r.status_code == 200
        scores = r.json()["scores"]
        machine_row = next(s for s in scores if s["machine_checked"])
        assert machine_row["suggested"] == 4  # repeat present in WORK

        rows = [
            {"row_id": s["row_id"], "final": s["suggested"] or 0, "rationale": "ok",
             "suggested": s["suggested"]}
            for s in scores
        ]
        r = client.post(
            f"/submissions/{submission_id}/grade", json={"rows": rows}, headers=api["teacher"]
        )
        assert r.status_code == 201
        assert r.json()["version"] == 1

        r = client.get(f"/assignments/{api['assignment']}/status", headers=api["teacher"])
        assert r.json()["graded"] == 1

    def test_rubric_generate_and_regenerate_routes(self, api):
        client = api["client"]
        r = client.post(
            "/rubrics/generate",
            json={"name": "Gen", "prompt": "grade level 7 maze"},
            headers=api["teacher"],
        )
        assert r.status_code == 201
        rubric = r.json()
        assert len(rubric["rows"]) == 4
        row_id = rubric["rows"][0]["row_id"]
        r = client.post(
            f"/rubrics/{rubric['rubric_id']}/rows/{row_id}/regenerate",
            json={"additional_prompt": "stricter"},
            headers=api["teacher"],
        )
        assert r.status_code == 200
        assert r.json()["provenance"] == "ai_regenerated"

    def test_template_routes(self, api):
        client = api["client"]
        rubric_id = api["rubric"].rubric_id
        r = client.post(f"/rubrics/{rubric_id}/template", headers=api["teacher"])
        template_id = r.json()["rubric_id"]
        assert r.json()["saved_as_template"] is True
        r = client.post(f"/rubrics/{template_id}/instantiate", headers=api["teacher"])
        assert r.json()["source"] == "template"
        r = client.get("/rubrics", headers=api["teacher"])
        assert any(x["rubric_id"] == template_id for x in r.json()["rubrics"])

    def test_student_cannot_touch_rubrics(self, api):
        assert api["client"].get("/rubrics", headers=api["alice"]).status_code == 403


class TestChatOverHttp:
    def test_chat_round_trip_and_rating(self, api):
        client = api["client"]
        r = client.post(
            f"/chat/{api['assignment']}/message",
            json={"text": "how does move work?"},
            headers=api["alice"],
        )
        assert r.status_code == 201
        body = r.json()
        assert body["bot_message"]["retrieved_chunk_ids"]
        mid = body["bot_message"]["message_id"]

        r = client.post(
            f"/chat/messages/{mid}/rating", json={"rating": "up"}, headers=api["alice"]
        )
        assert r.status_code == 201
        r = client.get(f"/chat/{api['assignment']}/history", headers=api["alice"])
        assert r.json()["messages"][-1]["ratings"]["alice"]["value"] == "up"

    def test_flagged_message_is_422_with_message_id(self, api):
        r = api["client"].post(
            f"/chat/{api['assignment']}/message",
            json={"text": "you are so stupid"},
            headers=api["alice"],
        )
        assert r.status_code == 422
        assert r.json()["error"] == "flagged_before_send"
        assert r.json()["message_id"].startswith("msg-")

    def test_chatbot_disabled_is_403(self, api):
        api["client"].put(
            f"/assignments/{api['assignment']}/chatbot",
            json={"enabled": False},
            headers=api["teacher"],
        )
        r = api["client"].post(
            f"/chat/{api['assignment']}/message", json={"text": "hi"}, headers=api["alice"]
        )
        assert r.status_code == 403
        assert r.json()["error"] == "chatbot_disabled"

    def test_summary_route_teacher_only(self, api):
        client, clock = api["client"], api["clock"]
        client.post(
            f"/chat/{api['assignment']}/message",
            json={"text": "what is repeat?"},
            headers=api["alice"],
        )
        clock.advance(301_000)
        api["engine"].run_summary_tick()
        r = client.get(
            f"/chat/{api['assignment']}/summary",
            params={"student": "alice"},
            headers=api["teacher"],
        )
        assert r.status_code == 200
        assert r.json()["latest"]["text"]
        r = client.get(
            f"/chat/{api['assignment']}/summary",
            params={"student": "alice"},
            headers=api["alice"],
        )
        assert r.status_code == 404  # masked for students


class TestIdempotency:
    def test_retry_returns_same_response(self, api):
        client = api["client"]
        key = {"Idempotency-Key": "retry-1"}
        body = {"assignment_id": api["assignment"], "project_xml": WORK}
        r1 = client.post("/submissions", json=body, headers={**api["alice"], **key})
        r2 = client.post("/submissions", json=body, headers={**api["alice"], **key})
        assert r1.json() == r2.json()
        assert r2.headers.get("x-idempotent-replay") == "true"
        # only one snapshot was recorded for the submission
        assert len(api["engine"].snapshot_history("alice", api["assignment"])) == 1


class TestWebSocket:
    def test_event_ack_and_teacher_push(self, api):
        client = api["client"]
        t_token = client.post(
            "/auth/login", json={"username": "t1", "secret": "t1-secret"}
        ).json()["token"]
        s_token = client.post(
            "/auth/login", json={"username": "alice", "secret": "alice-secret"}
        ).json()["token"]

        with client.websocket_connect(f"/ws?token={t_token}") as teacher_ws:
            with client.websocket_connect(f"/ws?token={s_token}") as student_ws:
                student_ws.send_json(
                    {"type": "event", "kind": "hand_raise", "assignment": api["assignment"], "seq": 1}
                )
                ack = student_ws.receive_json()
                assert ack["type"] == "ack" and ack["at"] == BASE_MS

                kinds = [teacher_ws.receive_json()["msg"]["type"] for _ in range(2)]
                assert kinds == ["presence_update", "hand_raise"]

                # stale seq -> error reply, no push
                student_ws.send_json(
                    {"type": "event", "kind": "hand_raise", "assignment": api["assignment"], "seq": 1}
                )
                err = student_ws.receive_json()
                assert err == {"type": "error", "code": "stale_event", "seq": 1}

    def test_reconnect_replays_missed_messages(self, api):
        client, engine = api["client"], api["engine"]
        t_token = client.post(
            "/auth/login", json={"username": "t1", "secret": "t1-secret"}
        ).json()["token"]
        # events happen while no dashboard is connected
        engine.ingest_student_event("alice", "hand_raise", 1, api["assignment"])
        engine.ingest_student_event("bob", "hand_raise", 1, api["assignment"])

        with client.websocket_connect(f"/ws?token={t_token}&last_seq=0") as ws:
            got = [ws.receive_json() for _ in range(4)]
            assert [g["seq"] for g in got] == [1, 2, 3, 4]
            assert {g["msg"]["type"] for g in got} == {"presence_update", "hand_raise"}

    def test_invalid_token_rejected(self, api):
        from starlette.websockets import WebSocketDisconnect

        with pytest.raises(WebSocketDisconnect):
            with api["client"].websocket_connect("/ws?token=bogus"):
                pass

    def test_teacher_cannot_send_events(self, api):
        client = api["client"]
        t_token = client.post(
            "/auth/login", json={"username": "t1", "secret": "t1-secret"}
        ).json()["token"]
        with client.websocket_connect(f"/ws?token={t_token}") as ws:
            ws.send_json({"type": "event", "kind": "edit", "seq": 1})
            assert ws.receive_json()["code"] == "not_student"


class TestEventSourcedRestart:
    def test_replay_reproduces_state_hash(self, tmp_path, clock):
        log_path = tmp_path / "events.jsonl"
        engine = make_engine(clock)
        engine.attach_log(log_path)
        engine.create_user("T", Role.TEACHER, "pw", user_id="t1")
        course = engine.create_course("t1", "C", ["S1"])
        section = course.section_ids[0]
        engine.create_user("A", Role.STUDENT, "pw", user_id="alice")
        engine.add_roster_entry("t1", section, "alice", SkillLevel.BEGINNER)
        assignment = engine.create_assignment("t1", section, "hw", "", {"beginner": STARTER})
        engine.publish_assignment("t1", assignment.assignment_id)
        app = create_app(engine)
        client = TestClient(app)
        headers = {
            "Authorization": "Bearer "
            + client.post("/auth/login", json={"username": "alice", "secret": "pw"}).json()[
                "token"
            ]
        }
        client.post(
            "/submissions",
            json={"assignment_id": assignment.assignment_id, "project_xml": WORK},
            headers=headers,
        )
        clock.advance(1000)
        client.post(
            "/snapshots",
            json={"assignment_id": assignment.assignment_id, "project_xml": STARTER},
            headers=headers,
        )
        client.post(
            f"/chat/{assignment.assignment_id}/message",
            json={"text": "how does move work?"},
            headers=headers,
        )
        live_hash = engine.state_hash()
        engine.close()

        rebuilt = ClassroomEngine(
            clock=VirtualClock(0), gateway=LlmGateway(ProviderConfig(mode="stub"))
        )
        rebuilt.replay_file(log_path)
        assert rebuilt.state_hash() == live_hash


class TestHealth:
    def test_health_reports_state_hash(self, api):
        r = api["client"].get("/health")
        assert r.status_code == 200
        assert r.json()["state_hash"] == api["engine"].state_hash()
