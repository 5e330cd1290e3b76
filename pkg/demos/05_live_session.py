"""Driving a live session over the wire protocol, acting as the human.

Uses the in-process test client so no server process is needed; the same
message flow works against `asknav serve --episodes ... --stub-script ...`
with any WebSocket client (see frontend/ for the browser UI).
"""

from pathlib import Path

from fastapi.testclient import TestClient

from asknav import EngineBackends, EngineConfig, StubBackend, StubScript
from asknav.episode import load_episode
from asknav.service import create_app

ROOT = Path(__file__).resolve().parent.parent
episodes = {"golden": load_episode(ROOT / "scenarios/episodes/room_black_frame.json")}
script = StubScript.load(ROOT / "scenarios/stub.json")

app = create_app(
    episodes,
    EngineConfig(),
    backend_factory=lambda: EngineBackends(llm=StubBackend(script), vlm=StubBackend(script)),
)

with TestClient(app) as client:
    print("episodes:", client.get("/episodes").json())
    session_id = client.post("/sessions", json={"episode_id": "golden"}).json()["session_id"]
    print("session:", session_id)

    with client.websocket_connect("/ws") as ws:
        ws.send_json({"v": 1, "type": "start", "session_id": session_id, "payload": {"cursor": 0}})
        while True:
            msg = ws.receive_json()
            if msg["type"] == "event":
                event = msg["payload"]["event"]
                if event["type"] in ("detection", "trigger"):
                    print(f"  [{msg['payload']['seq']:>3}] {event}")
            elif msg["type"] == "question":
                print("  agent asks:", msg["payload"]["text"])
                ws.send_json(
                    {
                        "v": 1,
                        "type": "answer",
                        "session_id": session_id,
                        "payload": {
                            "question_id": msg["payload"]["question_id"],
                            "text": "black",  # the human knows the target
                        },
                    }
                )
            elif msg["type"] == "answer":
                print("  answer acknowledged:", msg["payload"])
            elif msg["type"] == "result":
                print("result:", msg["payload"])
                break

    transcript = client.get(f"/sessions/{session_id}/transcript").json()["transcript"]
    print("transcript events recorded:", len(transcript))
