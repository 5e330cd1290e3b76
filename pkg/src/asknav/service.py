"""Session server exposing live episodes to a human over WebSocket.

Each session runs the episode engine in its own thread; the human is the
user channel. Engine transcript events are republished as sequence-numbered
wire messages so a reconnecting client can replay from its last cursor.
Questions block the engine until an answer message with the matching
question id arrives (or the channel times out and the episode aborts).
"""

from __future__ import annotations

import queue
import threading
import time
import uuid
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect

from .config import EngineConfig
from .episode import EngineBackends, EpisodeSpec, episode_to_dict, load_episode_dir_map, run_episode
from .facts import Facts
from .gateway import StubBackend, StubScript
from .trigger import UserChannelTimeout

WIRE_VERSION = 1
DEFAULT_CAPACITY = 16
IDLE_EXPIRY_S = 30 * 60


class SessionState(str, Enum):
    IDLE = "Idle"
    RUNNING = "Running"
    AWAITING_ANSWER = "AwaitingAnswer"
    FINISHED = "Finished"


def wire(type_: str, session_id: str, payload: dict) -> dict:
    return {"v": WIRE_VERSION, "type": type_, "session_id": session_id, "payload": payload}


@dataclass
class Session:
    id: str
    spec: EpisodeSpec
    facts: Facts
    state: SessionState = SessionState.IDLE
    events: list[dict] = field(default_factory=list)
    pending_question_id: str | None = None
    result: dict | None = None
    transcript: list[dict] = field(default_factory=list)
    touched: float = field(default_factory=time.monotonic)
    lock: threading.Lock = field(default_factory=threading.Lock)
    _seq: int = 0
    _answers: "queue.Queue[str]" = field(default_factory=queue.Queue)
    thread: threading.Thread | None = None

    def publish(self, type_: str, payload: dict) -> dict:
        with self.lock:
            self._seq += 1
            payload = {"seq": self._seq, **payload}
            message = wire(type_, self.id, payload)
            self.events.append(message)
            self.touched = time.monotonic()
            return message

    def events_after(self, cursor: int) -> list[dict]:
        with self.lock:
            return [m for m in self.events if m["payload"]["seq"] > cursor]


class _HumanChannel:
    """UserChannel bridging the engine thread and the connection handler."""

    def __init__(self, session: Session):
        self.session = session

    def send(self, question: str) -> None:
        with self.session.lock:
            self.session.pending_question_id = uuid.uuid4().hex[:12]
            self.session.state = SessionState.AWAITING_ANSWER
        self.session.publish(
            "question",
            {"question_id": self.session.pending_question_id, "text": question},
        )

    def receive(self, timeout: float | None = None) -> str:
        try:
            answer = self.session._answers.get(timeout=timeout)
        except queue.Empty as exc:
            raise UserChannelTimeout("no answer within timeout") from exc
        return answer


class SessionManager:
    def __init__(
        self,
        episodes: dict[str, EpisodeSpec],
        config: EngineConfig,
        backend_factory: Callable[[], EngineBackends],
        capacity: int = DEFAULT_CAPACITY,
        idle_expiry_s: float = IDLE_EXPIRY_S,
    ):
        self.episodes = episodes
        self.config = config
        self.backend_factory = backend_factory
        self.capacity = capacity
        self.idle_expiry_s = idle_expiry_s
        self.sessions: dict[str, Session] = {}

    def _sweep(self) -> None:
        now = time.monotonic()
        stale = [
            sid
            for sid, s in self.sessions.items()
            if now - s.touched > self.idle_expiry_s
        ]
        for sid in stale:
            del self.sessions[sid]

    def start_session(self, episode_id: str) -> Session:
        self._sweep()
        if episode_id not in self.episodes:
            raise KeyError(f"unknown episode {episode_id!r}")
        if len(self.sessions) >= self.capacity:
            raise OverflowError("session capacity exceeded")
        spec = self.episodes[episode_id]
        session = Session(
            id=uuid.uuid4().hex[:12], spec=spec, facts=Facts(spec.category)
        )
        self.sessions[session.id] = session
        session.thread = threading.Thread(
            target=self._run, args=(session,), daemon=True, name=f"session-{session.id}"
        )
        session.state = SessionState.RUNNING
        session.thread.start()
        return session

    def _run(self, session: Session) -> None:
        def on_event(event: dict) -> None:
            session.transcript.append(event)
            if event["type"] in ("question", "result"):
                return  # typed wire messages cover these
            session.publish("event", {"event": event})

        try:
            result = run_episode(
                session.spec,
                self.config,
                self.backend_factory(),
                user=_HumanChannel(session),
                facts=session.facts,
                on_event=on_event,
            )
            summary = {
                "outcome": result.outcome.value,
                "success": result.success,
                "path_length_m": result.path_length_m,
                "questions_asked": result.questions_asked,
                "actions_taken": result.actions_taken,
                "abort_reason": result.abort_reason,
            }
        except Exception as exc:  # noqa: BLE001 - surface, never kill the server
            summary = {"outcome": "Aborted", "success": False, "abort_reason": f"crash: {exc}"}
        session.result = summary
        session.publish("result", summary)
        with session.lock:
            session.state = SessionState.FINISHED
            session.pending_question_id = None

    def deliver_answer(self, session: Session, question_id: str, text: str) -> None:
        with session.lock:
            if session.state is not SessionState.AWAITING_ANSWER:
                raise ValueError("session is not awaiting an answer")
            if question_id != session.pending_question_id:
                raise ValueError(f"stale question id {question_id!r}")
            if not text:
                raise ValueError("answer must be non-empty")
            session.pending_question_id = None
            session.state = SessionState.RUNNING
            session.touched = time.monotonic()
        session._answers.put(text)


def create_app(
    episodes: str | Path | dict[str, EpisodeSpec],
    config: EngineConfig | None = None,
    backend_factory: Callable[[], EngineBackends] | None = None,
    stub_script: str | Path | None = None,
    capacity: int = DEFAULT_CAPACITY,
) -> FastAPI:
    config = config or EngineConfig()
    if not isinstance(episodes, dict):
        episodes = load_episode_dir_map(episodes)
    if backend_factory is None:
        if stub_script is None:
            raise ValueError("need a backend_factory or a stub_script")
        script = StubScript.load(stub_script)
        backend_factory = lambda: EngineBackends(llm=StubBackend(script), vlm=StubBackend(script))
    manager = SessionManager(episodes, config, backend_factory, capacity=capacity)
    app = FastAPI(title="asknav session service")
    app.state.manager = manager

    @app.get("/episodes")
    def list_episodes():
        return {
            "episodes": [
                {
                    "id": eid,
                    "category": spec.category,
                    "grid_size": list(spec.world.grid.shape),
                    "n_instances": len(spec.world.instances),
                }
                for eid, spec in manager.episodes.items()
            ]
        }

    @app.get("/episodes/{episode_id}")
    def episode_detail(episode_id: str):
        if episode_id not in manager.episodes:
            raise HTTPException(status_code=404, detail="unknown episode")
        spec = manager.episodes[episode_id]
        detail = episode_to_dict(spec)
        detail["id"] = episode_id
        detail["target_image_ref"] = spec.world.target().image_ref
        return detail

    @app.post("/sessions", status_code=201)
    def create_session(body: dict):
        episode_id = body.get("episode_id")
        try:
            session = manager.start_session(episode_id)
        except KeyError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        except OverflowError as exc:
            raise HTTPException(status_code=429, detail=str(exc)) from exc
        return {"session_id": session.id, "state": session.state.value, "episode_id": episode_id}

    @app.get("/sessions/{session_id}/transcript")
    def transcript(session_id: str):
        session = manager.sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail="unknown session")
        return {"session_id": session_id, "state": session.state.value, "transcript": list(session.transcript)}

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        import asyncio

        await ws.accept()
        try:
            first = await ws.receive_json()
        except WebSocketDisconnect:
            return
        session = manager.sessions.get(first.get("session_id", ""))
        if first.get("type") != "start" or session is None:
            await ws.send_json(
                wire("error", first.get("session_id", ""), {"message": "unknown session or bad start"})
            )
            await ws.close()
            return
        cursor = int(first.get("payload", {}).get("cursor", 0))
        out: "asyncio.Queue[dict | None]" = asyncio.Queue()
        done = asyncio.Event()

        async def pump() -> None:
            nonlocal cursor
            while True:
                for message in session.events_after(cursor):
                    cursor = message["payload"]["seq"]
                    await out.put(message)
                if session.state is SessionState.FINISHED and not session.events_after(cursor):
                    await out.put(None)
                    return
                await asyncio.sleep(0.02)

        async def reader() -> None:
            while not done.is_set():
                try:
                    msg = await ws.receive_json()
                except WebSocketDisconnect:
                    done.set()
                    return
                if msg.get("type") != "answer":
                    await out.put(wire("error", session.id, {"message": f"unsupported type {msg.get('type')!r}"}))
                    continue
                payload = msg.get("payload", {})
                try:
                    manager.deliver_answer(
                        session, payload.get("question_id", ""), payload.get("text", "")
                    )
                except ValueError as exc:
                    await out.put(wire("error", session.id, {"message": str(exc)}))
                    continue
                await out.put(
                    wire("answer", session.id, {"question_id": payload["question_id"], "accepted": True})
                )

        async def writer() -> None:
            while True:
                message = await out.get()
                if message is None:
                    done.set()
                    return
                await ws.send_json(message)

        pump_task = asyncio.create_task(pump())
        reader_task = asyncio.create_task(reader())
        writer_task = asyncio.create_task(writer())
        await done.wait()
        for task in (pump_task, reader_task, writer_task):
            task.cancel()
        try:
            await ws.close()
        except RuntimeError:
            pass

    return app
