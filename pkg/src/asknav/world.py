"""Desk-scale 2D grid world with frontier exploration and detection events.

Cells are 0.25 m squares; heading is quantised to 15 degree increments and
Forward moves one cell along the nearest of the 8 grid directions. The agent
maintains a partial occupancy view swept by line-of-sight visibility; the
exploration policy walks to the nearest frontier unless a detection waypoint
is active. Everything is deterministic: ties break lexicographically by
(row, col) and heading adjustments prefer the shorter turn (right on ties).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

CELL_SIZE_M = 0.25
HEADING_STEP = 15
DEFAULT_DETECTION_RANGE = 8  # cells (2 m)

FREE, WALL = 0, 1


class Action(str, Enum):
    FORWARD = "Forward"
    TURN_LEFT = "TurnLeft"
    TURN_RIGHT = "TurnRight"
    STOP = "Stop"
    ASK = "Ask"


def heading_delta(heading: int) -> tuple[int, int]:
    """(drow, dcol) for one Forward step; rounds the 15-degree heading onto
    the 8-neighborhood (ties at 30/60/... round away from zero, i.e. diagonal)."""
    rad = math.radians(heading % 360)

    def away(x: float) -> int:
        return int(math.copysign(math.floor(abs(x) + 0.5), x))

    return -away(math.sin(rad)), away(math.cos(rad))


def _canonical_headings(delta: tuple[int, int]) -> list[int]:
    return [h for h in range(0, 360, HEADING_STEP) if heading_delta(h) == delta]


@dataclass(frozen=True)
class ObjectInstance:
    id: str
    category: str
    cell: tuple[int, int]
    attributes: tuple[tuple[str, str], ...] = ()
    image_ref: str = ""
    is_target: bool = False

    def viewpoints(self, grid: np.ndarray) -> frozenset[tuple[int, int]]:
        """Free cells within one cell of the instance (the 0.25 m success radius)."""
        r0, c0 = self.cell
        cells = set()
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                r, c = r0 + dr, c0 + dc
                if 0 <= r < grid.shape[0] and 0 <= c < grid.shape[1] and grid[r, c] == FREE:
                    cells.add((r, c))
        return frozenset(cells)

    def attribute_map(self) -> dict[str, str]:
        return dict(self.attributes)


@dataclass(frozen=True)
class WorldSpec:
    grid: np.ndarray
    instances: tuple[ObjectInstance, ...]
    start_cell: tuple[int, int]
    start_heading: int

    def __post_init__(self):
        if self.grid.ndim != 2:
            raise ValueError("grid must be 2D")
        if self.start_heading % HEADING_STEP != 0:
            raise ValueError("heading must be a multiple of 15 degrees")
        if self.grid[self.start_cell] != FREE:
            raise ValueError("start cell must be free")
        reach = reachable_cells(self.grid, self.start_cell)
        for inst in self.instances:
            vps = inst.viewpoints(self.grid)
            if not vps:
                raise ValueError(f"instance {inst.id} has no free viewpoint cells")
            if not vps & reach:
                raise ValueError(f"instance {inst.id} viewpoints unreachable from start")

    def target(self) -> ObjectInstance:
        targets = [i for i in self.instances if i.is_target]
        if len(targets) != 1:
            raise ValueError("exactly one instance must be the target")
        return targets[0]

    def distractors(self) -> tuple[ObjectInstance, ...]:
        target = self.target()
        return tuple(
            i for i in self.instances if not i.is_target and i.category == target.category
        )


class EpisodeTerminated(Exception):
    pass


@dataclass
class AgentState:
    """Mutable episode state: pose, partial map, motion and action accounting."""

    cell: tuple[int, int]
    heading: int
    known: np.ndarray
    actions_taken: int = 0
    path_length_m: float = 0.0
    terminated: bool = False
    resolved: set[str] = field(default_factory=set)
    waypoint: tuple[int, int] | None = None
    waypoint_instance: str | None = None


def new_agent_state(world: WorldSpec, detection_range: int = DEFAULT_DETECTION_RANGE) -> AgentState:
    state = AgentState(
        cell=world.start_cell,
        heading=world.start_heading % 360,
        known=np.zeros(world.grid.shape, dtype=bool),
    )
    sweep_visibility(world.grid, state, detection_range)
    return state


def step(world: WorldSpec, state: AgentState, action: Action) -> AgentState:
    """Apply one action; blocked Forwards are no-ops that still cost an action."""
    if state.terminated:
        raise EpisodeTerminated("cannot step a terminated episode")
    state.actions_taken += 1
    if action is Action.FORWARD:
        dr, dc = heading_delta(state.heading)
        r, c = state.cell[0] + dr, state.cell[1] + dc
        if 0 <= r < world.grid.shape[0] and 0 <= c < world.grid.shape[1] and world.grid[r, c] == FREE:
            state.cell = (r, c)
            state.path_length_m += CELL_SIZE_M
    elif action is Action.TURN_LEFT:
        state.heading = (state.heading + HEADING_STEP) % 360
    elif action is Action.TURN_RIGHT:
        state.heading = (state.heading - HEADING_STEP) % 360
    elif action is Action.STOP:
        state.terminated = True
    elif action is Action.ASK:
        pass  # consumes the action slot, no motion
    return state


# ---------------------------------------------------------------------------
# Visibility


def line_of_sight(grid: np.ndarray, a: tuple[int, int], b: tuple[int, int]) -> bool:
    """Integer ray march from a to b; walls strictly between the endpoints block."""
    r, c = a
    r2, c2 = b
    dr, dc = abs(r2 - r), abs(c2 - c)
    sr = 1 if r2 > r else -1
    sc = 1 if c2 > c else -1
    err = dr - dc
    while (r, c) != (r2, c2):
        if (r, c) != a and grid[r, c] == WALL:
            return False
        e2 = 2 * err
        if e2 > -dc:
            err -= dc
            r += sr
        if e2 < dr:
            err += dr
            c += sc
    return True


def sweep_visibility(grid: np.ndarray, state: AgentState, view_range: int) -> None:
    """Mark every cell within range and clear line of sight as known."""
    r0, c0 = state.cell
    rows, cols = grid.shape
    for r in range(max(0, r0 - view_range), min(rows, r0 + view_range + 1)):
        for c in range(max(0, c0 - view_range), min(cols, c0 + view_range + 1)):
            if state.known[r, c]:
                continue
            if (r - r0) ** 2 + (c - c0) ** 2 > view_range**2:
                continue
            if line_of_sight(grid, (r0, c0), (r, c)):
                state.known[r, c] = True


# ---------------------------------------------------------------------------
# Grid search

_NEIGHBORS = tuple(
    (dr, dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1) if (dr, dc) != (0, 0)
)  # lexicographic (dr, dc) order fixes BFS tie-breaking


def bfs_paths(
    grid: np.ndarray, start: tuple[int, int], passable: np.ndarray | None = None
) -> tuple[dict[tuple[int, int], int], dict[tuple[int, int], tuple[int, int]]]:
    """Distances and BFS parents over free (optionally also known) cells.

    Levels expand in (row, col) order so every cell's parent is the
    lexicographically smallest equal-distance predecessor.
    """
    rows, cols = grid.shape
    dist = {start: 0}
    parent: dict[tuple[int, int], tuple[int, int]] = {}
    level = [start]
    while level:
        nxt_level = []
        for cell in sorted(level):
            r0, c0 = cell
            for dr, dc in _NEIGHBORS:
                r, c = r0 + dr, c0 + dc
                nxt = (r, c)
                if not (0 <= r < rows and 0 <= c < cols) or nxt in dist:
                    continue
                if grid[r, c] != FREE:
                    continue
                if passable is not None and not passable[r, c]:
                    continue
                dist[nxt] = dist[cell] + 1
                parent[nxt] = cell
                nxt_level.append(nxt)
        level = nxt_level
    return dist, parent


def shortest_path(
    grid: np.ndarray,
    start: tuple[int, int],
    goal: tuple[int, int],
    passable: np.ndarray | None = None,
) -> list[tuple[int, int]] | None:
    dist, parent = bfs_paths(grid, start, passable)
    if goal not in dist:
        return None
    path = [goal]
    while path[-1] != start:
        path.append(parent[path[-1]])
    return path[::-1]


def reachable_cells(grid: np.ndarray, start: tuple[int, int]) -> set[tuple[int, int]]:
    return set(bfs_paths(grid, start)[0])


def geodesic_distance_m(
    grid: np.ndarray, start: tuple[int, int], goals: frozenset[tuple[int, int]] | set
) -> float | None:
    dist, _ = bfs_paths(grid, start)
    hits = [dist[g] for g in goals if g in dist]
    return min(hits) * CELL_SIZE_M if hits else None


# ---------------------------------------------------------------------------
# Frontier policy


def frontier_cells(grid: np.ndarray, known: np.ndarray) -> list[tuple[int, int]]:
    """Known free cells bordering (4-neighborhood) at least one unknown cell."""
    rows, cols = grid.shape
    out = []
    for r in range(rows):
        for c in range(cols):
            if not known[r, c] or grid[r, c] != FREE:
                continue
            for dr, dc in ((-1, 0), (0, -1), (0, 1), (1, 0)):
                rr, cc = r + dr, c + dc
                if 0 <= rr < rows and 0 <= cc < cols and not known[rr, cc]:
                    out.append((r, c))
                    break
    return out


def _turn_toward(state: AgentState, delta: tuple[int, int]) -> Action:
    """Forward if the current heading already maps to delta, else one 15-degree
    turn toward the nearest matching heading (right on 180-degree ties)."""
    if heading_delta(state.heading) == delta:
        return Action.FORWARD
    best = None
    for h in _canonical_headings(delta):
        diff = (h - state.heading) % 360  # counterclockwise amount
        signed = diff if diff <= 180 else diff - 360
        if best is None or abs(signed) < abs(best):
            best = signed
        elif abs(signed) == abs(best) and signed < 0:
            best = signed
    return Action.TURN_LEFT if best > 0 else Action.TURN_RIGHT


def frontier_policy(world: WorldSpec, state: AgentState) -> Action:
    """Next action: follow the active waypoint, else head for the nearest
    frontier; Stop when neither exists."""
    if state.waypoint is not None and state.cell != state.waypoint:
        path = shortest_path(world.grid, state.cell, state.waypoint)
        if path is not None and len(path) > 1:
            nxt = path[1]
            return _turn_toward(state, (nxt[0] - state.cell[0], nxt[1] - state.cell[1]))
        return Action.STOP  # unreachable waypoint; give up
    dist, parent = bfs_paths(world.grid, state.cell, passable=state.known)
    candidates = [
        (dist[cell], cell) for cell in frontier_cells(world.grid, state.known) if cell in dist
    ]
    if not candidates:
        return Action.STOP
    _, goal = min(candidates)
    if goal == state.cell:
        # Standing on the frontier: face any unknown neighbor to sweep it.
        for dr, dc in ((-1, 0), (0, -1), (0, 1), (1, 0)):
            rr, cc = state.cell[0] + dr, state.cell[1] + dc
            if 0 <= rr < world.grid.shape[0] and 0 <= cc < world.grid.shape[1]:
                if not state.known[rr, cc]:
                    return _turn_toward(state, (dr, dc))
        return Action.STOP
    path = [goal]
    while path[-1] != state.cell:
        path.append(parent[path[-1]])
    nxt = path[-2]
    return _turn_toward(state, (nxt[0] - state.cell[0], nxt[1] - state.cell[1]))


# ---------------------------------------------------------------------------
# Detection


@dataclass(frozen=True)
class DetectionEvent:
    instance_id: str
    image_ref: str
    cell: tuple[int, int]


def detect(
    world: WorldSpec,
    state: AgentState,
    category: str,
    detection_range: int = DEFAULT_DETECTION_RANGE,
) -> DetectionEvent | None:
    """Nearest unresolved same-category instance in line of sight and range."""
    r0, c0 = state.cell
    candidates = []
    for inst in world.instances:
        if inst.category != category or inst.id in state.resolved:
            continue
        d2 = (inst.cell[0] - r0) ** 2 + (inst.cell[1] - c0) ** 2
        if d2 > detection_range**2:
            continue
        if not line_of_sight(world.grid, state.cell, inst.cell):
            continue
        candidates.append((d2, inst.id, inst))
    if not candidates:
        return None
    _, _, inst = min(candidates, key=lambda t: (t[0], t[1]))
    return DetectionEvent(instance_id=inst.id, image_ref=inst.image_ref, cell=inst.cell)
