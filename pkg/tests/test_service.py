"""Live session service: REST surface, WebSocket protocol, replay, equivalence."""

from __future__ import annotations

import json
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from asknav.config import EngineConfig
from asknav.episode import EngineBackends, load_episode, run_episode
from asknav.gateway import StubBackend, StubScript
from asknav.service import SessionState, create_app

SCENARIOS = Path(__file__).parent.parent / "scenarios"


@pytest.fixture()
def app():
    episodes = {"golden": load_episode(SCENARIOS / "episodes" / "room_black_frame.json")}
    script = StubScript.load(SCENARIOS / "stub.json")
    factory = lambda: EngineBackends(llm=StubBackend(script), vlm=StubBackend(script))
    return create_app(episodes, EngineConfig(), backend_factory=factory, capacity=4)


@pytest.fixture()
def client(app):
    with TestClient(app) as c:
        yield c


def start_session(client):
    resp = client.post("/sessions", json={"episode_id": "golden"})
    assert resp.status_code == 201
    return resp.json()["session_id"]


def drive_until(ws, type_, collected=None, limit=200):
    """Read wire messages until one of the wanted type arrives."""
    for _ in range(limit):
        msg = ws.receive_json()
        if collected is not None:
            collected.append(msg)
        if msg["type"] == type_:
            return msg
    raise AssertionError(f"no {type_!r} message within {limit} messages")


class TestRest:
    def test_list_episodes(self, client):
        listed = client.get("/episodes").json()["episodes"]
        assert listed[0]["id"] == "golden"
        assert listed[0]["category"] == "picture"

    def test_episode_detail_has_grid_and_target_image(self, client):
        detail = client.get("/episodes/golden").json()
        assert detail["grid"][0][0] == 1
        assert detail["target_image_ref"] == "img://golden/t"

    def test_unknown_episode_404(self, client):
        assert client.post("/sessions", json={"episode_id": "nope"}).status_code == 404

    def test_capacity_exceeded(self, client, app):
        for _ in range(4):
            start_session(client)
        assert client.post("/sessions", json={"episode_id": "golden"}).status_code == 429

    def test_session_seeds_facts_with_instruction(self, client, app):
        sid = start_session(client)
        session = app.state.manager.sessions[sid]
        assert session.facts.statements[0].text == "Find the picture"

    def test_transcript_endpoint(self, client):
        sid = start_session(client)
        with client.websocket_connect("/ws") as ws:
            ws.send_json({"v": 1, "type": "start", "session_id": sid, "payload": {"cursor": 0}})
            question = drive_until(ws, "question")
            ws.send_json(
                {
                    "v": 1,
                    "type": "answer",
                    "session_id": sid,
                    "payload": {"question_id": question["payload"]["question_id"], "text": "black"},
                }
            )
            drive_until(ws, "result")
        transcript = client.get(f"/sessions/{sid}/transcript").json()["transcript"]
        assert any(e["type"] == "answer" and e["text"] == "black" for e in transcript)


class TestWebSocket:
    def test_full_round_trip(self, client, app):
        sid = start_session(client)
        collected = []
        with client.websocket_connect("/ws") as ws:
            ws.send_json({"v": 1, "type": "start", "session_id": sid, "payload": {"cursor": 0}})
            question = drive_until(ws, "question", collected)
            qid = question["payload"]["question_id"]
            ws.send_json(
                {"v": 1, "type": "answer", "session_id": sid, "payload": {"question_id": qid, "text": "black"}}
            )
            ack = drive_until(ws, "answer", collected)
            assert ack["payload"] == {"question_id": qid, "accepted": True}
            result = drive_until(ws, "result", collected)
        assert result["payload"]["outcome"] == "StoppedAtTarget"
        assert result["payload"]["questions_asked"] == 1
        seqs = [m["payload"]["seq"] for m in collected if "seq" in m["payload"]]
        assert seqs == sorted(seqs) and len(seqs) == len(set(seqs))
        session = app.state.manager.sessions[sid]
        assert session.state is SessionState.FINISHED
        answers = [f.text for f in session.facts.statements[1:]]
        assert answers == ["black"]

    def test_stale_answer_rejected(self, client, app):
        sid = start_session(client)
        with client.websocket_connect("/ws") as ws:
            ws.send_json({"v": 1, "type": "start", "session_id": sid, "payload": {"cursor": 0}})
            question = drive_until(ws, "question")
            facts_before = len(app.state.manager.sessions[sid].facts)
            ws.send_json(
                {"v": 1, "type": "answer", "session_id": sid, "payload": {"question_id": "bogus", "text": "x"}}
            )
            error = drive_until(ws, "error")
            assert "stale" in error["payload"]["message"]
            assert len(app.state.manager.sessions[sid].facts) == facts_before
            ws.send_json(
                {
                    "v": 1,
                    "type": "answer",
                    "session_id": sid,
                    "payload": {"question_id": question["payload"]["question_id"], "text": "black"},
                }
            )
            drive_until(ws, "result")

    def test_empty_answer_rejected(self, client):
        sid = start_session(client)
        with client.websocket_connect("/ws") as ws:
            ws.send_json({"v": 1, "type": "start", "session_id": sid, "payload": {"cursor": 0}})
            question = drive_until(ws, "question")
            ws.send_json(
                {
                    "v": 1,
                    "type": "answer",
                    "session_id": sid,
                    "payload": {"question_id": question["payload"]["question_id"], "text": ""},
                }
            )
            error = drive_until(ws, "error")
            assert "non-empty" in error["payload"]["message"]

    def test_unknown_wire_type_rejected(self, client):
        sid = start_session(client)
        with client.websocket_connect("/ws") as ws:
            ws.send_json({"v": 1, "type": "start", "session_id": sid, "payload": {"cursor": 0}})
            ws.send_json({"v": 1, "type": "dance", "session_id": sid, "payload": {}})
            error = drive_until(ws, "error")
            assert "unsupported" in error["payload"]["message"]

    def test_unknown_session_start(self, client):
        with client.websocket_connect("/ws") as ws:
            ws.send_json({"v": 1, "type": "start", "session_id": "nope", "payload": {}})
            msg = ws.receive_json()
            assert msg["type"] == "error"

    def test_reconnect_replays_without_duplicates(self, client):
        sid = start_session(client)
        first_batch = []
        with client.websocket_connect("/ws") as ws:
            ws.send_json({"v": 1, "type": "start", "session_id": sid, "payload": {"cursor": 0}})
            question = drive_until(ws, "question", first_batch)
            qid = question["payload"]["question_id"]
        cursor = max(m["payload"]["seq"] for m in first_batch)
        second_batch = []
        with client.websocket_connect("/ws") as ws:
            ws.send_json({"v": 1, "type": "start", "session_id": sid, "payload": {"cursor": cursor}})
            ws.send_json(
                {"v": 1, "type": "answer", "session_id": sid, "payload": {"question_id": qid, "text": "black"}}
            )
            drive_until(ws, "result", second_batch)
        replayed_seqs = [m["payload"]["seq"] for m in second_batch if "seq" in m["payload"]]
        assert all(seq > cursor for seq in replayed_seqs)
        seen = [m["payload"]["seq"] for m in first_batch + second_batch if "seq" in m["payload"]]
        assert len(seen) == len(set(seen))

    def test_finished_session_replay(self, client):
        sid = start_session(client)
        with client.websocket_connect("/ws") as ws:
            ws.send_json({"v": 1, "type": "start", "session_id": sid, "payload": {"cursor": 0}})
            question = drive_until(ws, "question")
            ws.send_json(
                {
                    "v": 1,
                    "type": "answer",
                    "session_id": sid,
                    "payload": {"question_id": question["payload"]["question_id"], "text": "black"},
                }
            )
            drive_until(ws, "result")
        replay = []
        with client.websocket_connect("/ws") as ws:
            ws.send_json({"v": 1, "type": "start", "session_id": sid, "payload": {"cursor": 0}})
            drive_until(ws, "result", replay)
        assert any(m["type"] == "question" for m in replay)


class TestBatchEquivalence:
    def test_scripted_session_matches_batch_transcript(self, client, app):
        # batch run with the attribute-lookup simulated user
        spec = load_episode(SCENARIOS / "episodes" / "room_black_frame.json")
        script = StubScript.load(SCENARIOS / "stub.json")
        batch = run_episode(
            spec, EngineConfig(), EngineBackends(llm=StubBackend(script), vlm=StubBackend(script))
        )
        # live session answering exactly like the simulated user would
        sid = start_session(client)
        with client.websocket_connect("/ws") as ws:
            ws.send_json({"v": 1, "type": "start", "session_id": sid, "payload": {"cursor": 0}})
            question = drive_until(ws, "question")
            ws.send_json(
                {
                    "v": 1,
                    "type": "answer",
                    "session_id": sid,
                    "payload": {"question_id": question["payload"]["question_id"], "text": "black"},
                }
            )
            result = drive_until(ws, "result")
        live_transcript = client.get(f"/sessions/{sid}/transcript").json()["transcript"]
        assert live_transcript == [json.loads(json.dumps(e)) for e in batch.transcript]
        assert result["payload"]["outcome"] == batch.outcome.value
        assert result["payload"]["path_length_m"] == batch.path_length_m
