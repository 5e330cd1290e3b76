"""Decides when to stop, keep exploring, or ask the user a question.

A single language-model call scores how well the refined detection
description aligns with the accumulated facts (0-10) and co-generates a
candidate question for the user; thresholds split the score into
Stop / ContinueExploring / Ask. Each Ask round appends the user's answer
to the facts and re-scores with the grown fact set.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Protocol

from .facts import FactOrigin, Facts
from .gateway import Backend, Mode, ModelRequest, Role, complete
from .prompts import PromptSet, render
from .questioner import _strip_fences

logger = logging.getLogger(__name__)


class TriggerKind(str, Enum):
    STOP = "Stop"
    CONTINUE_EXPLORING = "ContinueExploring"
    ASK = "Ask"


@dataclass(frozen=True)
class TriggerConfig:
    tau_stop: float = 7.0
    tau_skip: float = 5.0
    max_rounds: int = 4
    score_scale: tuple[float, float] = (0.0, 10.0)

    def __post_init__(self):
        lo, hi = self.score_scale
        if not (lo <= self.tau_skip < self.tau_stop <= hi):
            raise ValueError("need score_scale.min <= tau_skip < tau_stop <= score_scale.max")
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")


@dataclass(frozen=True)
class TriggerDecision:
    kind: TriggerKind
    score: float
    question: str | None = None

    def __post_init__(self):
        if self.kind is TriggerKind.ASK and not self.question:
            raise ValueError("Ask decisions carry a non-empty question")
        if self.kind is not TriggerKind.ASK and self.question is not None:
            raise ValueError("only Ask decisions carry a question")


class ScoreParseError(Exception):
    pass


class UserChannelTimeout(Exception):
    """The user did not answer within the channel's timeout."""


class UserChannel(Protocol):
    """Question/answer boundary between the engine and whoever answers."""

    def send(self, question: str) -> None: ...

    def receive(self, timeout: float | None = None) -> str: ...


def alignment_score(
    s_refined: str,
    facts: Facts,
    llm: Backend,
    prompts: PromptSet,
    score_scale: tuple[float, float] = (0.0, 10.0),
) -> tuple[float, str]:
    """One LLM call returning the alignment score and a candidate user question."""
    if not s_refined:
        raise ValueError("refined description must be non-empty")
    prompt = render(prompts.p_score, description=s_refined, facts=facts.render())
    request = ModelRequest(role=Role.TEXT_GEN, prompt=prompt, mode=Mode.FREE_TEXT)
    reply = complete(request, llm).text
    try:
        obj = json.loads(_strip_fences(reply))
        score = float(obj["score"])
        question = str(obj.get("question", ""))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ScoreParseError(f"unparseable score reply {reply[:120]!r}: {exc}") from exc
    lo, hi = score_scale
    if not lo <= score <= hi:
        clamped = min(max(score, lo), hi)
        logger.warning("alignment score %s outside scale [%s, %s]; clamped to %s", score, lo, hi, clamped)
        score = clamped
    return score, question


def decide(score: float, config: TriggerConfig, question: str) -> TriggerDecision:
    if score >= config.tau_stop:
        return TriggerDecision(kind=TriggerKind.STOP, score=score)
    if score < config.tau_skip:
        return TriggerDecision(kind=TriggerKind.CONTINUE_EXPLORING, score=score)
    return TriggerDecision(kind=TriggerKind.ASK, score=score, question=question)


@dataclass(frozen=True)
class LoopOutcome:
    kind: TriggerKind  # Stop or ContinueExploring; never Ask
    rounds: int
    questions_asked: int
    final_score: float


def interaction_loop(
    s_refined: str,
    facts: Facts,
    user: UserChannel,
    config: TriggerConfig,
    llm: Backend,
    prompts: PromptSet,
    question_budget: int | None = None,
    timeout: float | None = None,
) -> LoopOutcome:
    """Score/decide for up to max_rounds; Ask rounds grow the facts and re-score.

    Exhausting the rounds (or the caller's question budget) without a Stop
    resolves to ContinueExploring. User-channel timeouts propagate.
    """
    rounds = 0
    questions = 0
    score = config.score_scale[0]
    for _ in range(config.max_rounds):
        rounds += 1
        score, question = alignment_score(s_refined, facts, llm, prompts, config.score_scale)
        decision = decide(score, config, question)
        if decision.kind is not TriggerKind.ASK:
            return LoopOutcome(decision.kind, rounds, questions, score)
        if question_budget is not None and questions >= question_budget:
            return LoopOutcome(TriggerKind.CONTINUE_EXPLORING, rounds, questions, score)
        user.send(decision.question)
        answer = user.receive(timeout)
        facts.append(answer, FactOrigin.USER_RESPONSE)
        questions += 1
    return LoopOutcome(TriggerKind.CONTINUE_EXPLORING, rounds, questions, score)
