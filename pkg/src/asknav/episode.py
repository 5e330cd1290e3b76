"""Episode specs, the exploration/dialogue engine loop, and the simulated user.

An episode alternates frontier exploration with detection-triggered dialogue:
a detection sets a waypoint to the instance, the agent walks there, runs the
self-dialogue refinement, and the trigger decides Stop / keep exploring /
ask the user. Every gateway call, motion and question lands in an ordered
transcript so identical inputs reproduce identical logs byte for byte.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .config import EngineConfig
from .facts import Facts
from .gateway import Backend, GatewayError, Mode, ModelRequest, ModelResponse, Role, complete
from .questioner import SelfQuestioner, StageError
from .trigger import (
    ScoreParseError,
    TriggerKind,
    UserChannel,
    UserChannelTimeout,
    interaction_loop,
)
from .world import (
    Action,
    AgentState,
    ObjectInstance,
    WorldSpec,
    bfs_paths,
    detect,
    frontier_policy,
    geodesic_distance_m,
    new_agent_state,
    step,
    sweep_visibility,
)


class Outcome(str, Enum):
    STOPPED_AT_TARGET = "StoppedAtTarget"
    STOPPED_ELSEWHERE = "StoppedElsewhere"
    BUDGET = "Budget"
    ABORTED = "Aborted"


@dataclass(frozen=True)
class EpisodeSpec:
    world: WorldSpec
    category: str
    episode_id: str = "episode"
    max_actions: int = 500
    shortest_path_m: float = 0.0  # geodesic start -> target viewpoints; 0 = compute

    def __post_init__(self):
        if self.max_actions < 1:
            raise ValueError("max_actions must be >= 1")
        self.world.target()  # validates exactly-one-target
        if self.shortest_path_m == 0.0:
            object.__setattr__(self, "shortest_path_m", self._geodesic())
        if self.shortest_path_m <= 0:
            raise ValueError("shortest path length must be positive")

    def _geodesic(self) -> float:
        d = geodesic_distance_m(
            self.world.grid, self.world.start_cell, self.world.target().viewpoints(self.world.grid)
        )
        if d is None:
            raise ValueError("target viewpoints unreachable from start")
        return d

    def distractor_count(self) -> int:
        return len(self.world.distractors())

    def validate_distractors(self, d_min: int = 2) -> None:
        """Benchmark-style admission rule; hand-authored test worlds may skip it."""
        if self.distractor_count() < d_min:
            raise ValueError(
                f"episode {self.episode_id} has {self.distractor_count()} distractors; need >= {d_min}"
            )


@dataclass(frozen=True)
class EpisodeResult:
    episode_id: str
    success: bool
    outcome: Outcome
    path_length_m: float
    questions_asked: int
    actions_taken: int
    transcript: tuple[dict, ...]
    abort_reason: str | None = None

    def __post_init__(self):
        if self.path_length_m < 0:
            raise ValueError("path length must be non-negative")
        if self.success and self.outcome is not Outcome.STOPPED_AT_TARGET:
            raise ValueError("success implies outcome StoppedAtTarget")

    def transcript_jsonl(self) -> str:
        return "\n".join(json.dumps(e, sort_keys=True) for e in self.transcript) + "\n"


@dataclass
class EngineBackends:
    llm: Backend
    vlm: Backend
    user_vlm: Backend | None = None  # None = attribute-lookup simulated user


class EventLog(list):
    """Transcript event list that mirrors appends to an optional callback."""

    def __init__(self, on_event=None):
        super().__init__()
        self._on_event = on_event

    def append(self, event: dict) -> None:
        super().append(event)
        if self._on_event is not None:
            self._on_event(event)


# ---------------------------------------------------------------------------
# Transcript plumbing


class _RecordingBackend:
    """Backend wrapper appending one transcript event per completed call."""

    def __init__(self, inner: Backend, events: list[dict]):
        self.inner = inner
        self.events = events
        self.retryable = inner.retryable

    def invoke(self, request: ModelRequest) -> ModelResponse:
        response = self.inner.invoke(request)
        event = {
            "type": "model_call",
            "role": request.role.value,
            "mode": request.mode.value,
            "prompt": request.prompt,
            "image_ref": request.image_ref,
        }
        if response.text is not None:
            event["text"] = response.text
        else:
            event["probs"] = {k: response.distribution.probs[k] for k in sorted(response.distribution.probs)}
        self.events.append(event)
        return response


class _EngineUserChannel:
    """Wraps the user channel: logs the exchange and books one Ask action."""

    def __init__(self, inner: UserChannel, events: list[dict], world: WorldSpec, state: AgentState):
        self.inner = inner
        self.events = events
        self.world = world
        self.state = state

    def send(self, question: str) -> None:
        step(self.world, self.state, Action.ASK)
        self.events.append(
            {
                "type": "action",
                "action": Action.ASK.value,
                "cell": list(self.state.cell),
                "heading": self.state.heading,
            }
        )
        self.events.append({"type": "question", "text": question})
        self.inner.send(question)

    def receive(self, timeout: float | None = None) -> str:
        answer = self.inner.receive(timeout)
        self.events.append({"type": "answer", "text": answer})
        return answer


# ---------------------------------------------------------------------------
# Simulated user


def simulated_user_answer(
    question: str, target: ObjectInstance, backend: Backend | None = None
) -> str:
    """Answer as a user who knows the target: VLM over the target's image when a
    backend is given, otherwise lookup of any attribute key named in the question."""
    if not question:
        raise ValueError("question must be non-empty")
    if backend is not None:
        request = ModelRequest(
            role=Role.VISUAL_QA, prompt=question, image_ref=target.image_ref, mode=Mode.FREE_TEXT
        )
        return complete(request, backend).text
    lowered = question.lower()
    for key, value in target.attributes:
        if key.lower() in lowered:
            return value
    return "I don't know"


class SimulatedUserChannel:
    """Synchronous user channel backed by simulated_user_answer."""

    def __init__(self, target: ObjectInstance, backend: Backend | None = None):
        self.target = target
        self.backend = backend
        self._pending: str | None = None

    def send(self, question: str) -> None:
        self._pending = question

    def receive(self, timeout: float | None = None) -> str:
        if self._pending is None:
            raise RuntimeError("receive() before send()")
        question, self._pending = self._pending, None
        return simulated_user_answer(question, self.target, self.backend)


# ---------------------------------------------------------------------------
# Engine loop


def _nearest_viewpoint(
    world: WorldSpec, state: AgentState, instance: ObjectInstance
) -> tuple[int, int] | None:
    dist, _ = bfs_paths(world.grid, state.cell)
    candidates = [(dist[vp], vp) for vp in instance.viewpoints(world.grid) if vp in dist]
    return min(candidates)[1] if candidates else None


def run_episode(
    spec: EpisodeSpec,
    config: EngineConfig,
    backends: EngineBackends,
    user: UserChannel | None = None,
    facts: Facts | None = None,
    on_event=None,
) -> EpisodeResult:
    world = spec.world
    target = world.target()
    events: list[dict] = EventLog(on_event)
    state = new_agent_state(world, config.detection_range)
    facts = facts if facts is not None else Facts(spec.category)
    prompts = config.prompt_set()

    llm = _RecordingBackend(backends.llm, events)
    vlm = _RecordingBackend(backends.vlm, events)
    base_user = user if user is not None else SimulatedUserChannel(target, backends.user_vlm)
    channel = _EngineUserChannel(base_user, events, world, state)
    questioner = SelfQuestioner(
        llm, vlm, prompts, tau=config.tau, max_question_calls=config.max_question_calls
    )
    instances = {inst.id: inst for inst in world.instances}
    questions_asked = 0
    outcome: Outcome | None = None
    success = False
    abort_reason: str | None = None

    while outcome is None:
        if state.waypoint is None:
            event = detect(world, state, spec.category, config.detection_range)
            if event is not None:
                waypoint = _nearest_viewpoint(world, state, instances[event.instance_id])
                if waypoint is None:
                    state.resolved.add(event.instance_id)
                    continue
                state.waypoint = waypoint
                state.waypoint_instance = event.instance_id
                events.append(
                    {
                        "type": "detection",
                        "instance_id": event.instance_id,
                        "image_ref": event.image_ref,
                        "cell": list(event.cell),
                    }
                )

        if state.waypoint is not None and state.cell == state.waypoint:
            instance = instances[state.waypoint_instance]
            try:
                record = questioner.run(facts, instance.image_ref, spec.category)
                if record.s_refined:
                    loop = interaction_loop(
                        record.s_refined,
                        facts,
                        channel,
                        config.trigger_config(),
                        llm,
                        prompts,
                        question_budget=config.episode_question_cap - questions_asked,
                        timeout=config.user_timeout_s,
                    )
                    questions_asked += loop.questions_asked
                    events.append(
                        {
                            "type": "trigger",
                            "kind": loop.kind.value,
                            "score": loop.final_score,
                            "rounds": loop.rounds,
                            "questions": loop.questions_asked,
                        }
                    )
                    if loop.kind is TriggerKind.STOP:
                        step(world, state, Action.STOP)
                        events.append(
                            {
                                "type": "action",
                                "action": Action.STOP.value,
                                "cell": list(state.cell),
                                "heading": state.heading,
                            }
                        )
                        success = state.cell in target.viewpoints(world.grid)
                        outcome = (
                            Outcome.STOPPED_AT_TARGET if success else Outcome.STOPPED_ELSEWHERE
                        )
                        break
                else:
                    events.append({"type": "trigger", "kind": "CheckFailed"})
            except UserChannelTimeout:
                outcome, abort_reason = Outcome.ABORTED, "user_timeout"
                break
            except (GatewayError, StageError, ScoreParseError) as exc:
                outcome, abort_reason = Outcome.ABORTED, f"backend_error: {exc}"
                break
            state.resolved.add(instance.id)
            state.waypoint = None
            state.waypoint_instance = None
            continue

        if state.actions_taken >= spec.max_actions:
            outcome = Outcome.BUDGET
            break

        action = frontier_policy(world, state)
        step(world, state, action)
        events.append(
            {
                "type": "action",
                "action": action.value,
                "cell": list(state.cell),
                "heading": state.heading,
            }
        )
        if action is Action.STOP:
            success = state.cell in target.viewpoints(world.grid)
            outcome = Outcome.STOPPED_AT_TARGET if success else Outcome.STOPPED_ELSEWHERE
            break
        sweep_visibility(world.grid, state, config.detection_range)

    events.append(
        {
            "type": "result",
            "outcome": outcome.value,
            "success": success,
            "path_length_m": state.path_length_m,
            "questions_asked": questions_asked,
            "actions_taken": state.actions_taken,
        }
    )
    return EpisodeResult(
        episode_id=spec.episode_id,
        success=success,
        outcome=outcome,
        path_length_m=state.path_length_m,
        questions_asked=questions_asked,
        actions_taken=state.actions_taken,
        transcript=tuple(events),
        abort_reason=abort_reason,
    )


# ---------------------------------------------------------------------------
# Episode JSON I/O


def episode_to_dict(spec: EpisodeSpec) -> dict:
    return {
        "grid": spec.world.grid.astype(int).tolist(),
        "start": {"cell": list(spec.world.start_cell), "heading": spec.world.start_heading},
        "category": spec.category,
        "instances": [
            {
                "id": inst.id,
                "category": inst.category,
                "cell": list(inst.cell),
                "attributes": dict(inst.attributes),
                "image_ref": inst.image_ref,
                "is_target": inst.is_target,
            }
            for inst in spec.world.instances
        ],
        "max_actions": spec.max_actions,
    }


def episode_from_dict(obj: dict, episode_id: str = "episode") -> EpisodeSpec:
    if not isinstance(obj, dict) or "grid" not in obj:
        raise ValueError(f"{episode_id}: not an episode object (expected a dict with a grid)")
    world = WorldSpec(
        grid=np.asarray(obj["grid"], dtype=np.int8),
        instances=tuple(
            ObjectInstance(
                id=i["id"],
                category=i["category"],
                cell=tuple(i["cell"]),
                attributes=tuple((str(k), str(v)) for k, v in i.get("attributes", {}).items()),
                image_ref=i.get("image_ref", ""),
                is_target=bool(i.get("is_target", False)),
            )
            for i in obj["instances"]
        ),
        start_cell=tuple(obj["start"]["cell"]),
        start_heading=int(obj["start"]["heading"]),
    )
    return EpisodeSpec(
        world=world,
        category=obj["category"],
        episode_id=episode_id,
        max_actions=int(obj.get("max_actions", 500)),
    )


def load_episode(path: str | Path) -> EpisodeSpec:
    path = Path(path)
    return episode_from_dict(json.loads(path.read_text()), episode_id=path.stem)


def load_episode_dir_map(directory: str | Path) -> dict[str, EpisodeSpec]:
    paths = sorted(Path(directory).glob("*.json"))
    if not paths:
        raise ValueError(f"no episode files in {directory}")
    return {p.stem: load_episode(p) for p in paths}


def save_episode(spec: EpisodeSpec, path: str | Path) -> None:
    Path(path).write_text(json.dumps(episode_to_dict(spec), indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Random world generation

_PALETTE = {
    "frame": ("black", "white", "red", "gold"),
    "content": ("a landscape", "a family", "a portrait", "abstract shapes"),
    "size": ("small", "large"),
}


def generate_episode(
    seed: int,
    rows: int = 16,
    cols: int = 16,
    category: str = "picture",
    n_distractors: int = 2,
    wall_density: float = 0.12,
    max_actions: int = 500,
    episode_id: str | None = None,
) -> EpisodeSpec:
    """Random bordered world with one target and n same-category distractors.

    The target differs from every distractor in at least one attribute;
    retries until start and all instances are mutually reachable.
    """
    if n_distractors < 2:
        raise ValueError("need at least 2 distractors")
    rng = np.random.default_rng(seed)
    for _ in range(200):
        grid = np.zeros((rows, cols), dtype=np.int8)
        grid[0, :] = grid[-1, :] = 1
        grid[:, 0] = grid[:, -1] = 1
        interior = rng.random((rows - 2, cols - 2)) < wall_density
        grid[1:-1, 1:-1] = interior.astype(np.int8)
        free = [tuple(map(int, rc)) for rc in np.argwhere(grid == 0)]
        if len(free) < n_distractors + 2:
            continue
        picks = rng.choice(len(free), size=n_distractors + 2, replace=False)
        start, *cells = [free[i] for i in picks]
        eid = episode_id or f"ep{seed:04d}"
        perms = {key: rng.permutation(len(values)) for key, values in _PALETTE.items()}
        all_attrs = [
            tuple(
                (key, values[int(perms[key][idx % len(values)])])
                for key, values in _PALETTE.items()
            )
            for idx in range(len(cells))
        ]
        if any(a == all_attrs[0] for a in all_attrs[1:]):
            continue  # every distractor must differ from the target somewhere
        instances = [
            ObjectInstance(
                id=f"{category}_{idx}",
                category=category,
                cell=cell,
                attributes=all_attrs[idx],
                image_ref=f"img://{eid}/{category}_{idx}",
                is_target=idx == 0,
            )
            for idx, cell in enumerate(cells)
        ]
        try:
            world = WorldSpec(
                grid=grid,
                instances=tuple(instances),
                start_cell=start,
                start_heading=int(rng.integers(0, 24)) * 15,
            )
            spec = EpisodeSpec(world=world, category=category, episode_id=eid, max_actions=max_actions)
        except ValueError:
            continue
        if spec.world.start_cell in spec.world.target().viewpoints(grid):
            continue
        spec.validate_distractors(2)
        return spec
    raise RuntimeError(f"could not generate a valid world from seed {seed}")
