"""Perception uncertainty from restricted-vocabulary answer distributions.

The primary measure is Shannon entropy normalized by its maximum over the
three-symbol vocabulary, classified Certain/Uncertain against a threshold.
Competing selection functions (max-probability, energy score, linear probe)
are included for the reliability comparison.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

from .gateway import VOCAB, VocabDistribution

H_MAX = math.log(len(VOCAB))  # natural log throughout


class Certainty(str, Enum):
    CERTAIN = "Certain"
    UNCERTAIN = "Uncertain"


@dataclass(frozen=True)
class UncertaintyEstimate:
    u: float
    certainty: Certainty
    tau: float


@dataclass(frozen=True)
class SelectionDecision:
    answer: str
    abstained: bool
    score: float

    def __post_init__(self):
        if self.answer not in VOCAB:
            raise ValueError(f"answer must be one of {VOCAB}")
        if self.abstained and self.answer != "IDK":
            raise ValueError("abstaining implies answer IDK")


def shannon_entropy(dist: VocabDistribution) -> float:
    """H = -sum p log p over the three symbols; zero-mass terms contribute 0."""
    return -sum(p * math.log(p) for p in dist.probs.values() if p > 0.0)


def normalized_uncertainty(dist: VocabDistribution, tau: float) -> UncertaintyEstimate:
    """u = H / log 3 in [0, 1]; u <= tau classifies as Certain."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [0, 1]")
    u = min(shannon_entropy(dist) / H_MAX, 1.0)
    certainty = Certainty.CERTAIN if u <= tau else Certainty.UNCERTAIN
    return UncertaintyEstimate(u=u, certainty=certainty, tau=tau)


def _argmax(values: Mapping[str, float], symbols: Sequence[str] = VOCAB) -> str:
    best = symbols[0]
    for sym in symbols[1:]:
        if values[sym] > values[best]:
            best = sym
    return best


def select_maxprob(dist: VocabDistribution, threshold: float = 0.0) -> SelectionDecision:
    """Answer with the most probable symbol; abstain when max prob < threshold.

    The default threshold 0 never abstains.
    """
    best = dist.argmax()
    top = dist.probs[best]
    if top < threshold:
        return SelectionDecision(answer="IDK", abstained=True, score=top)
    return SelectionDecision(answer=best, abstained=False, score=top)


def select_entropy(dist: VocabDistribution, tau: float) -> SelectionDecision:
    """Normalized-entropy selection: certain answers pick the best of {Yes, No}."""
    est = normalized_uncertainty(dist, tau)
    if est.certainty is Certainty.UNCERTAIN:
        return SelectionDecision(answer="IDK", abstained=True, score=est.u)
    return SelectionDecision(answer=_argmax(dist.probs, ("Yes", "No")), abstained=False, score=est.u)


def energy(raw_scores: Mapping[str, float], temperature: float = 1.0) -> float:
    """E = -T log sum_i exp(score_i / T) over the restricted-vocabulary scores."""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    vals = [raw_scores[k] for k in VOCAB]
    if any(not math.isfinite(v) for v in vals):
        raise ValueError("raw scores must be finite")
    m = max(vals)
    return -temperature * (m / temperature + math.log(sum(math.exp((v - m) / temperature) for v in vals)))


def select_energy(
    raw_scores: Mapping[str, float], temperature: float = 1.0, threshold: float = 0.0
) -> SelectionDecision:
    """Energy-based abstention: E above the threshold flags out-of-distribution.

    Flagged pairs answer IDK; otherwise the higher-scored of {Yes, No} wins.
    """
    e = energy(raw_scores, temperature)
    if e > threshold:
        return SelectionDecision(answer="IDK", abstained=True, score=e)
    return SelectionDecision(answer=_argmax(raw_scores, ("Yes", "No")), abstained=False, score=e)


@dataclass(frozen=True)
class ProbeWeights:
    """Two-class (answerable/unanswerable) linear model over first-token scores."""

    weights: tuple[float, ...]
    bias: float
    vocab_index: Mapping[str, int]

    def __post_init__(self):
        if set(self.vocab_index) != set(VOCAB):
            raise ValueError(f"vocab_index keys must be exactly {VOCAB}")

    @classmethod
    def load(cls, path: str | Path) -> "ProbeWeights":
        obj = json.loads(Path(path).read_text())
        return cls(
            weights=tuple(float(w) for w in obj["weights"]),
            bias=float(obj["bias"]),
            vocab_index={k: int(v) for k, v in obj["vocab_index"].items()},
        )


def select_probe(
    first_token_scores: Sequence[float],
    weights: ProbeWeights,
    threshold: float = 0.5,
) -> SelectionDecision:
    """Linear-probe abstention: sigmoid(w.x + b) >= threshold means unanswerable.

    Answerable questions return the higher-scored of {Yes, No}.
    """
    if len(first_token_scores) != len(weights.weights):
        raise ValueError(
            f"score vector length {len(first_token_scores)} != weights length {len(weights.weights)}"
        )
    z = sum(w * x for w, x in zip(weights.weights, first_token_scores)) + weights.bias
    sigma = 1.0 / (1.0 + math.exp(-z))
    if sigma >= threshold:
        return SelectionDecision(answer="IDK", abstained=True, score=sigma)
    by_symbol = {k: first_token_scores[weights.vocab_index[k]] for k in VOCAB}
    return SelectionDecision(answer=_argmax(by_symbol, ("Yes", "No")), abstained=False, score=sigma)
