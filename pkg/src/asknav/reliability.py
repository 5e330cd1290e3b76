"""Selective-prediction reliability: accuracy, effective reliability, and the
threshold-sensitivity procedure over subsampled datasets.

Items pair a visual question with three human annotations; a selection method
turns the model's first-token scores into answer-or-abstain. Rewards follow
the answered-correct / answered-wrong(-c) / abstained(0) cases, averaged on a
0-100 scale.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .gateway import (
    Backend,
    Mode,
    ModelRequest,
    Role,
    VOCAB,
    VocabDistribution,
    complete,
    restricted_prompt,
)
from .uncertainty import (
    H_MAX,
    ProbeWeights,
    SelectionDecision,
    energy,
    select_energy,
    select_entropy,
    select_maxprob,
    select_probe,
    shannon_entropy,
)


@dataclass(frozen=True)
class ReliabilityItem:
    image_ref: str
    question: str
    annotations: tuple[str, ...]

    def __post_init__(self):
        if len(self.annotations) != 3:
            raise ValueError("exactly 3 annotations required")
        if any(a not in VOCAB for a in self.annotations):
            raise ValueError(f"annotations must come from {VOCAB}")


def load_dataset(path: str | Path) -> tuple[list[ReliabilityItem], list[dict[str, float]] | None]:
    """Read a dataset file; items may carry embedded raw_scores for offline use."""
    entries = json.loads(Path(path).read_text())
    items = [
        ReliabilityItem(
            image_ref=e["image_ref"], question=e["question"], annotations=tuple(e["annotations"])
        )
        for e in entries
    ]
    if all("raw_scores" in e for e in entries):
        return items, [dict(e["raw_scores"]) for e in entries]
    return items, None


def collect_scores(items: Sequence[ReliabilityItem], backend: Backend) -> list[dict[str, float]]:
    """Ask the backend each question in restricted mode; return raw score triples."""
    scores = []
    for item in items:
        request = ModelRequest(
            role=Role.VISUAL_QA,
            prompt=restricted_prompt(item.question),
            image_ref=item.image_ref,
            mode=Mode.RESTRICTED_VOCAB,
        )
        dist = complete(request, backend).distribution
        scores.append(dict(dist.raw_scores) if dist.raw_scores else dict(dist.probs))
    return scores


def vqa_accuracy(answer: str, annotations: Sequence[str]) -> float:
    """min(matching annotations / 3, 1)."""
    if len(annotations) != 3:
        raise ValueError("exactly 3 annotations required")
    return min(sum(a == answer for a in annotations) / 3.0, 1.0)


@dataclass(frozen=True)
class ReliabilityReport:
    phi: float  # mean reward on the 0-100 scale
    cost: float
    coverage: float  # fraction answered
    rows: tuple[dict, ...]


def effective_reliability(
    items: Sequence[ReliabilityItem],
    decisions: Sequence[SelectionDecision],
    c: float = 1.0,
) -> ReliabilityReport:
    """Reward Acc when answering correctly, -c when answering wrongly, 0 on abstain."""
    if len(items) != len(decisions):
        raise ValueError("items and decisions must be aligned")
    if c < 0:
        raise ValueError("cost must be non-negative")
    rows = []
    total = 0.0
    answered = 0
    for item, decision in zip(items, decisions):
        if decision.abstained:
            acc, reward = None, 0.0
        else:
            answered += 1
            acc = vqa_accuracy(decision.answer, item.annotations)
            reward = acc if acc > 0 else -c
        total += reward
        rows.append(
            {
                "question": item.question,
                "answer": decision.answer,
                "abstained": decision.abstained,
                "acc": acc,
                "reward": reward,
            }
        )
    n = len(items)
    return ReliabilityReport(
        phi=100.0 * total / n if n else 0.0,
        cost=c,
        coverage=answered / n if n else 0.0,
        rows=tuple(rows),
    )


# ---------------------------------------------------------------------------
# Selection method registry (shared by the CLI and the sensitivity ablation)


@dataclass(frozen=True)
class SelectionMethod:
    """A thresholded answer-or-abstain rule over raw score triples.

    `decide` goes through the canonical selection functions; `stat` +
    `abstain_op` + `answer` expose the same rule in a form the threshold
    sweep can vectorize. Tests pin the two routes to each other.
    """

    name: str
    decide: Callable[[Mapping[str, float], float], SelectionDecision]
    domain: Callable[[Sequence[Mapping[str, float]]], tuple[float, float]]
    stat: Callable[[Mapping[str, float]], float]
    abstain_op: str  # abstain when: ">" stat > tau, "<" stat < tau, ">=" stat >= tau
    answer: Callable[[Mapping[str, float]], str]


def _unit_domain(_scores: Sequence[Mapping[str, float]]) -> tuple[float, float]:
    return (0.0, 1.0)


def _energy_domain(scores: Sequence[Mapping[str, float]]) -> tuple[float, float]:
    values = [energy(s) for s in scores]
    return (min(values), max(values))


def _u_stat(scores: Mapping[str, float]) -> float:
    dist = VocabDistribution.from_raw_scores(scores)
    return min(shannon_entropy(dist) / H_MAX, 1.0)


def _maxprob_stat(scores: Mapping[str, float]) -> float:
    dist = VocabDistribution.from_raw_scores(scores)
    return dist.probs[dist.argmax()]


def _yes_no_argmax(scores: Mapping[str, float]) -> str:
    return "Yes" if scores["Yes"] >= scores["No"] else "No"


def _full_argmax(scores: Mapping[str, float]) -> str:
    return VocabDistribution.from_raw_scores(scores).argmax()


METHODS: dict[str, SelectionMethod] = {
    "entropy": SelectionMethod(
        name="entropy",
        decide=lambda s, tau: select_entropy(VocabDistribution.from_raw_scores(s), tau),
        domain=_unit_domain,
        stat=_u_stat,
        abstain_op=">",
        answer=_yes_no_argmax,
    ),
    "maxprob": SelectionMethod(
        name="maxprob",
        decide=lambda s, tau: select_maxprob(VocabDistribution.from_raw_scores(s), tau),
        domain=_unit_domain,
        stat=_maxprob_stat,
        abstain_op="<",
        answer=_full_argmax,
    ),
    "energy": SelectionMethod(
        name="energy",
        decide=lambda s, tau: select_energy(s, 1.0, tau),
        domain=_energy_domain,
        stat=energy,
        abstain_op=">",
        answer=_yes_no_argmax,
    ),
}


def make_probe_method(weights: ProbeWeights) -> SelectionMethod:
    def sigma(scores: Mapping[str, float]) -> float:
        vector = _vector(scores, weights)
        z = sum(w * x for w, x in zip(weights.weights, vector)) + weights.bias
        return 1.0 / (1.0 + np.exp(-z))

    def _vector(scores: Mapping[str, float], w: ProbeWeights) -> list[float]:
        vec = [0.0] * len(w.weights)
        for sym in VOCAB:
            vec[w.vocab_index[sym]] = scores[sym]
        return vec

    def probe_answer(scores: Mapping[str, float]) -> str:
        return "Yes" if scores["Yes"] >= scores["No"] else "No"

    return SelectionMethod(
        name="probe",
        decide=lambda s, tau: select_probe(_vector(s, weights), weights, threshold=tau),
        domain=_unit_domain,
        stat=sigma,
        abstain_op=">=",
        answer=probe_answer,
    )


def evaluate_method(
    items: Sequence[ReliabilityItem],
    scores: Sequence[Mapping[str, float]],
    method: SelectionMethod,
    tau: float,
    c: float = 1.0,
) -> ReliabilityReport:
    decisions = [method.decide(s, tau) for s in scores]
    return effective_reliability(items, decisions, c)


def phi_curve(
    items: Sequence[ReliabilityItem],
    scores: Sequence[Mapping[str, float]],
    method: SelectionMethod,
    taus: Sequence[float],
    c: float = 1.0,
) -> np.ndarray:
    """Vectorized reward-per-threshold over a shared item set."""
    stats = np.asarray([method.stat(s) for s in scores], dtype=float)
    rewards = np.empty(len(items))
    for i, (item, s) in enumerate(zip(items, scores)):
        acc = vqa_accuracy(method.answer(s), item.annotations)
        rewards[i] = acc if acc > 0 else -c
    grid = np.asarray(list(taus), dtype=float)
    if method.abstain_op == ">":
        masks = stats[None, :] > grid[:, None]
    elif method.abstain_op == "<":
        masks = stats[None, :] < grid[:, None]
    else:
        masks = stats[None, :] >= grid[:, None]
    return 100.0 * np.where(masks, 0.0, rewards[None, :]).mean(axis=1)


# ---------------------------------------------------------------------------
# Threshold sensitivity

GRID_STEP = 0.005
NEIGHBORHOOD_SIZE = 30
BOUNDED_HALF_WIDTH = 0.2  # +-0.2 around tau* for thresholds living in [0, 1]
UNBOUNDED_SPAN_FRACTION = 0.2  # +-20% of the searched span otherwise


@dataclass(frozen=True)
class SensitivityResult:
    subset_fraction: float
    seed: int | None
    tau_star: float
    phi_star: float
    neighborhood: tuple[float, ...]
    phis: tuple[float, ...]
    normalized_phis: tuple[float, ...]

    def __post_init__(self):
        if len(self.neighborhood) != NEIGHBORHOOD_SIZE:
            raise ValueError(f"neighborhood must have {NEIGHBORHOOD_SIZE} thresholds")


def _grid(lo: float, hi: float, step: float = GRID_STEP) -> np.ndarray:
    n = max(int(round((hi - lo) / step)), 1)
    return lo + step * np.arange(n + 1)


def find_tau_star(
    items: Sequence[ReliabilityItem],
    scores: Sequence[Mapping[str, float]],
    method: SelectionMethod,
    c: float = 1.0,
) -> tuple[float, float]:
    """Exhaustive grid search; the lowest maximizing threshold wins ties."""
    lo, hi = method.domain(scores)
    grid = _grid(lo, hi)
    phis = phi_curve(items, scores, method, grid, c)
    best = int(np.argmax(phis))  # argmax returns the first (lowest) maximizer
    return float(grid[best]), float(phis[best])


def _neighborhood(tau_star: float, lo: float, hi: float) -> list[float]:
    half_width = (
        BOUNDED_HALF_WIDTH if (lo, hi) == (0.0, 1.0) else UNBOUNDED_SPAN_FRACTION * (hi - lo)
    )
    step = half_width / (NEIGHBORHOOD_SIZE // 2)
    offsets = [step * k for k in range(1, NEIGHBORHOOD_SIZE // 2 + 1)]
    values = [tau_star - o for o in reversed(offsets)] + [tau_star + o for o in offsets]
    return [min(max(v, lo), hi) for v in values]


def tau_sensitivity(
    items: Sequence[ReliabilityItem],
    scores: Sequence[Mapping[str, float]],
    method: SelectionMethod,
    fractions: Sequence[float] = (0.5, 0.7, 1.0),
    seeds_per_fraction: int = 5,
    c: float = 1.0,
    base_seed: int = 0,
) -> list[SensitivityResult]:
    """Sensitivity of the reward to the threshold, on subsampled datasets.

    Five draws each at 50% and 70% plus the full set give 11 datasets; each
    gets an exhaustive threshold search, 30 symmetric neighbors around the
    optimum, and rewards normalized by the neighborhood's best value
    (negative rewards clip to 0 so the normalized range stays [0, 1]).
    """
    if not items:
        raise ValueError("dataset must be non-empty")
    if not set(fractions) <= {0.5, 0.7, 1.0}:
        raise ValueError("fractions must be among {0.5, 0.7, 1.0}")
    results = []
    for fraction in fractions:
        draws = [(None, None)] if fraction == 1.0 else [
            (seed, np.random.default_rng(base_seed * 1000 + seed))
            for seed in range(seeds_per_fraction)
        ]
        for seed, rng in draws:
            if rng is None:
                sub_items, sub_scores = list(items), list(scores)
            else:
                k = int(round(fraction * len(items)))
                if k == 0:
                    raise ValueError("subset is empty after sampling")
                idx = sorted(rng.choice(len(items), size=k, replace=False).tolist())
                sub_items = [items[i] for i in idx]
                sub_scores = [scores[i] for i in idx]
            lo, hi = method.domain(sub_scores)
            tau_star, phi_star = find_tau_star(sub_items, sub_scores, method, c)
            neighborhood = _neighborhood(tau_star, lo, hi)
            phis = [float(p) for p in phi_curve(sub_items, sub_scores, method, neighborhood, c)]
            best = max(phis)
            if best > 0:
                normalized = [min(max(p / best, 0.0), 1.0) for p in phis]
            else:
                # Degenerate flat-or-negative landscape; treat as maximally flat.
                normalized = [1.0 if p == best else 0.0 for p in phis]
            results.append(
                SensitivityResult(
                    subset_fraction=fraction,
                    seed=seed,
                    tau_star=tau_star,
                    phi_star=phi_star,
                    neighborhood=tuple(neighborhood),
                    phis=tuple(phis),
                    normalized_phis=tuple(normalized),
                )
            )
    return results
