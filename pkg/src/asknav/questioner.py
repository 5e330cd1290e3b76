"""Self-dialogue description refinement.

Upon a detection the agent first describes the observation, enriches the
description with answers to self-generated detail questions, gates on a
perception check, verifies extracted attributes under the three-symbol
answer mode, and asks the language model to rewrite the description with
uncertain attributes filtered out. A failed perception check short-circuits
with an empty refined description, which tells the caller to keep exploring.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum

from .facts import Facts
from .gateway import (
    Backend,
    GatewayError,
    Mode,
    ModelRequest,
    ModelResponse,
    Role,
    VocabDistribution,
    complete,
    restricted_prompt,
)
from .prompts import PromptSet, render
from .uncertainty import Certainty, UncertaintyEstimate, normalized_uncertainty


class Stage(str, Enum):
    INIT = "init"
    DETAILS = "details"
    ENRICH = "enrich"
    CHECK = "check"
    SELF_QUESTION = "selfquestion"
    VERIFY = "verify"
    REFINE = "refine"


class StageError(Exception):
    """Pipeline failure tagged with the stage (and question index, if any)."""

    def __init__(self, stage: Stage, message: str, question_index: int | None = None):
        where = stage.value if question_index is None else f"{stage.value}[{question_index}]"
        super().__init__(f"stage {where}: {message}")
        self.stage = stage
        self.question_index = question_index


class QuestionKind(str, Enum):
    DETAILS = "Details"
    ATTRIBUTE = "Attribute"


@dataclass(frozen=True)
class QuestionList:
    questions: tuple[str, ...]
    kind: QuestionKind

    def __post_init__(self):
        if any(not q for q in self.questions):
            raise ValueError("questions must be non-empty strings")


@dataclass(frozen=True)
class QAItem:
    question: str
    answer: str
    u: float
    distribution: VocabDistribution

    def __post_init__(self):
        if not 0.0 <= self.u <= 1.0:
            raise ValueError("u must lie in [0, 1]")


@dataclass(frozen=True)
class DescriptionRecord:
    s_init: str
    s_enriched: str
    s_refined: str
    attributes: tuple[tuple[str, str], ...] = ()
    qa_items: tuple[QAItem, ...] = ()
    check: UncertaintyEstimate | None = None
    check_answer: str | None = None

    def __post_init__(self):
        if not self.s_enriched.startswith(self.s_init):
            raise ValueError("enriched description must extend the initial one")


_FENCE = re.compile(r"^```[a-zA-Z]*\n?|\n?```$")


def _strip_fences(text: str) -> str:
    return _FENCE.sub("", text.strip()).strip()


class SelfQuestioner:
    """Runs the three refinement steps against an LLM and a VLM backend."""

    def __init__(
        self,
        llm: Backend,
        vlm: Backend,
        prompts: PromptSet | None = None,
        tau: float = 0.75,
        max_question_calls: int = 12,
    ):
        self.llm = llm
        self.vlm = vlm
        self.prompts = prompts or PromptSet.default()
        self.tau = tau
        self.max_question_calls = max_question_calls

    # -- step 1 -------------------------------------------------------------

    def initial_description(self, observation: str, target: str) -> str:
        if not observation:
            raise ValueError("observation handle must be non-empty")
        if not target:
            raise ValueError("target category must be non-empty")
        prompt = render(self.prompts.p_init, target_object=target)
        return self._vlm_text(prompt, observation, Stage.INIT)

    def detail_questions(self, s_init: str, facts: Facts) -> QuestionList:
        if not s_init:
            raise ValueError("initial description must be non-empty")
        prompt = render(self.prompts.p_details, description=s_init, facts=facts.render())
        reply = self._llm_text(prompt, Stage.DETAILS)
        questions = [line.strip() for line in reply.splitlines() if line.strip()]
        if not questions:
            raise StageError(Stage.DETAILS, "no questions extracted from reply")
        return QuestionList(questions=tuple(questions), kind=QuestionKind.DETAILS)

    def enrich(self, s_init: str, questions: QuestionList, observation: str) -> str:
        if questions.kind is not QuestionKind.DETAILS:
            raise ValueError("enrich expects detail questions")
        enriched = s_init
        for idx, question in enumerate(questions.questions):
            answer = self._vlm_text(question, observation, Stage.ENRICH, idx)
            enriched = f"{enriched}\nQ: {question}\nA: {answer}"
        return enriched

    # -- step 2 -------------------------------------------------------------

    def perception_check(
        self, observation: str, target: str
    ) -> tuple[bool, UncertaintyEstimate, str]:
        prompt = render(self.prompts.p_check, target_object=target)
        dist = self._vlm_restricted(prompt, observation, Stage.CHECK)
        estimate = normalized_uncertainty(dist, self.tau)
        answer = dist.argmax()
        passed = answer == "Yes" and estimate.certainty is Certainty.CERTAIN
        return passed, estimate, answer

    def attribute_questions(
        self, facts: Facts, s_enriched: str
    ) -> tuple[tuple[tuple[str, str], ...], QuestionList]:
        if not s_enriched:
            raise ValueError("enriched description must be non-empty")
        prompt = render(self.prompts.p_selfquestion, facts=facts.render(), description=s_enriched)
        reply = self._llm_text(prompt, Stage.SELF_QUESTION)
        try:
            entries = json.loads(_strip_fences(reply))
            attributes = tuple((str(e["key"]), str(e["value"])) for e in entries)
            questions = tuple(str(q) for e in entries for q in e["questions"])
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise StageError(Stage.SELF_QUESTION, f"malformed attribute reply: {exc}") from exc
        return attributes, QuestionList(questions=questions, kind=QuestionKind.ATTRIBUTE)

    def verify_attributes(self, questions: QuestionList, observation: str) -> tuple[QAItem, ...]:
        if questions.kind is not QuestionKind.ATTRIBUTE:
            raise ValueError("verify expects attribute questions")
        items = []
        for idx, question in enumerate(questions.questions):
            dist = self._vlm_restricted(restricted_prompt(question), observation, Stage.VERIFY, idx)
            estimate = normalized_uncertainty(dist, self.tau)
            items.append(QAItem(question=question, answer=dist.argmax(), u=estimate.u, distribution=dist))
        return tuple(items)

    # -- step 3 -------------------------------------------------------------

    def refine(self, s_enriched: str, qa_items: tuple[QAItem, ...], facts: Facts) -> str:
        container = "\n".join(
            f"Q: {item.question} | A: {item.answer} | certainty: "
            f"{Certainty.CERTAIN.value if item.u <= self.tau else Certainty.UNCERTAIN.value}"
            for item in qa_items
        )
        prompt = render(self.prompts.p_refined, description=s_enriched, qa_container=container)
        return self._llm_text(prompt, Stage.REFINE)

    # -- full run -----------------------------------------------------------

    def run(self, facts: Facts, observation: str, target: str) -> DescriptionRecord:
        """Execute steps 1-3 in order; a failed check yields an empty refinement."""
        s_init = self.initial_description(observation, target)
        detail_qs = self.detail_questions(s_init, facts)
        budget = self.max_question_calls
        if len(detail_qs.questions) > budget:
            detail_qs = QuestionList(detail_qs.questions[:budget], QuestionKind.DETAILS)
        budget -= len(detail_qs.questions)
        s_enriched = self.enrich(s_init, detail_qs, observation)

        passed, estimate, answer = self.perception_check(observation, target)
        if not passed:
            return DescriptionRecord(
                s_init=s_init,
                s_enriched=s_enriched,
                s_refined="",
                check=estimate,
                check_answer=answer,
            )

        attributes, attr_qs = self.attribute_questions(facts, s_enriched)
        if len(attr_qs.questions) > budget:
            attr_qs = QuestionList(attr_qs.questions[:budget], QuestionKind.ATTRIBUTE)
        qa_items = self.verify_attributes(attr_qs, observation)
        s_refined = self.refine(s_enriched, qa_items, facts)
        return DescriptionRecord(
            s_init=s_init,
            s_enriched=s_enriched,
            s_refined=s_refined,
            attributes=attributes,
            qa_items=qa_items,
            check=estimate,
            check_answer=answer,
        )

    # -- gateway helpers ----------------------------------------------------

    def _llm_text(self, prompt: str, stage: Stage) -> str:
        request = ModelRequest(role=Role.TEXT_GEN, prompt=prompt, mode=Mode.FREE_TEXT)
        return self._call(request, self.llm, stage).text

    def _vlm_text(
        self, prompt: str, observation: str, stage: Stage, question_index: int | None = None
    ) -> str:
        request = ModelRequest(
            role=Role.VISUAL_QA, prompt=prompt, image_ref=observation, mode=Mode.FREE_TEXT
        )
        return self._call(request, self.vlm, stage, question_index).text

    def _vlm_restricted(
        self, prompt: str, observation: str, stage: Stage, question_index: int | None = None
    ) -> VocabDistribution:
        request = ModelRequest(
            role=Role.VISUAL_QA, prompt=prompt, image_ref=observation, mode=Mode.RESTRICTED_VOCAB
        )
        return self._call(request, self.vlm, stage, question_index).distribution

    @staticmethod
    def _call(
        request: ModelRequest, backend: Backend, stage: Stage, question_index: int | None = None
    ) -> ModelResponse:
        try:
            return complete(request, backend)
        except GatewayError as exc:
            raise StageError(stage, str(exc), question_index) from exc
