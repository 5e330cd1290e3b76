"""Navigation metrics: success rate, path-length-weighted success, questions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .episode import EpisodeResult, EpisodeSpec


def success_rate(results: Sequence[EpisodeResult]) -> float:
    if not results:
        raise ValueError("results must be non-empty")
    return 100.0 * sum(r.success for r in results) / len(results)


def spl(results: Sequence[EpisodeResult], specs: Sequence[EpisodeSpec]) -> float:
    """100/N * sum S_i * l_i / max(p_i, l_i)."""
    if len(results) != len(specs):
        raise ValueError("results and specs must be aligned")
    if not results:
        raise ValueError("results must be non-empty")
    total = 0.0
    for result, spec in zip(results, specs):
        if spec.shortest_path_m <= 0:
            raise ValueError("shortest path length must be positive")
        if result.success:
            total += spec.shortest_path_m / max(result.path_length_m, spec.shortest_path_m)
    return 100.0 * total / len(results)


def nq(results: Sequence[EpisodeResult]) -> float | None:
    """Mean questions over successful episodes; None when nothing succeeded."""
    wins = [r.questions_asked for r in results if r.success]
    if not wins:
        return None
    return sum(wins) / len(wins)


@dataclass(frozen=True)
class MetricsReport:
    sr: float
    spl: float
    nq: float | None
    n_episodes: int
    rows: tuple[dict, ...]

    def __post_init__(self):
        if not (0.0 <= self.sr <= 100.0 and 0.0 <= self.spl <= 100.0):
            raise ValueError("sr and spl are percentages")
        if self.spl > self.sr + 1e-9:
            raise ValueError("spl cannot exceed sr")

    def to_dict(self) -> dict:
        return {
            "sr": self.sr,
            "spl": self.spl,
            "nq": self.nq,
            "n_episodes": self.n_episodes,
            "episodes": list(self.rows),
        }


def build_report(results: Sequence[EpisodeResult], specs: Sequence[EpisodeSpec]) -> MetricsReport:
    rows = tuple(
        {
            "episode": r.episode_id,
            "success": r.success,
            "outcome": r.outcome.value,
            "path_length_m": r.path_length_m,
            "shortest_path_m": s.shortest_path_m,
            "spl": (s.shortest_path_m / max(r.path_length_m, s.shortest_path_m)) if r.success else 0.0,
            "questions_asked": r.questions_asked,
            "actions_taken": r.actions_taken,
            "abort_reason": r.abort_reason,
        }
        for r, s in zip(results, specs)
    )
    return MetricsReport(
        sr=success_rate(results),
        spl=spl(results, specs),
        nq=nq(results),
        n_episodes=len(results),
        rows=rows,
    )
