"""Self-dialogue pipeline: parsing, gating, ordering, and the full run."""

from __future__ import annotations

import pytest

from asknav.facts import Facts
from asknav.gateway import Mode, Role, StubBackend, StubRule, StubScript
from asknav.questioner import (
    DescriptionRecord,
    QAItem,
    QuestionKind,
    QuestionList,
    SelfQuestioner,
    Stage,
    StageError,
)
from asknav.uncertainty import normalized_uncertainty

IMG = "img://test/target"


def scores(y, n, i):
    return {"Yes": y, "No": n, "IDK": i}


def happy_script(check_scores=scores(40.0, 0.0, 0.0)):
    """Full pipeline script for one observation of a picture."""
    return StubScript.from_rules(
        [
            StubRule(
                role=Role.VISUAL_QA,
                mode=Mode.FREE_TEXT,
                prompt_contains="Describe the picture",
                text="A framed picture on a wall.",
            ),
            StubRule(
                role=Role.TEXT_GEN,
                prompt_contains="follow-up questions",
                text="What is depicted?\nWhat color is the frame?",
            ),
            StubRule(
                role=Role.VISUAL_QA,
                mode=Mode.FREE_TEXT,
                prompt_contains="What is depicted?",
                text="It shows a sailboat.",
            ),
            StubRule(
                role=Role.VISUAL_QA,
                mode=Mode.FREE_TEXT,
                prompt_contains="What color is the frame?",
                text="The frame is black.",
            ),
            StubRule(
                mode=Mode.RESTRICTED_VOCAB,
                prompt_contains="Does the image contain a picture?",
                raw_scores=check_scores,
            ),
            StubRule(
                role=Role.TEXT_GEN,
                prompt_contains="JSON array",
                text=(
                    '[{"key": "frame", "value": "black", "questions": ["Is the frame black?"]},'
                    ' {"key": "content", "value": "a sailboat", "questions": ["Does it show a sailboat?"]}]'
                ),
            ),
            StubRule(
                mode=Mode.RESTRICTED_VOCAB,
                prompt_contains="Is the frame black?",
                raw_scores=scores(40.0, 0.0, 0.0),
            ),
            StubRule(
                mode=Mode.RESTRICTED_VOCAB,
                prompt_contains="Does it show a sailboat?",
                raw_scores=scores(0.0, 0.0, 0.0),
            ),
            StubRule(
                role=Role.TEXT_GEN,
                prompt_contains="Rewrite the object description",
                text="A black-framed picture.",
            ),
        ]
    )


def make_questioner(script=None, **kwargs):
    script = script or happy_script()
    backend = StubBackend(script)
    return SelfQuestioner(llm=backend, vlm=backend, **kwargs), backend


class TestStages:
    def test_initial_description(self):
        q, _ = make_questioner()
        assert q.initial_description(IMG, "picture") == "A framed picture on a wall."

    def test_initial_description_empty_target(self):
        q, _ = make_questioner()
        with pytest.raises(ValueError):
            q.initial_description(IMG, "")

    def test_detail_questions_line_split(self):
        q, _ = make_questioner()
        qs = q.detail_questions("A framed picture on a wall.", Facts("picture"))
        assert qs.questions == ("What is depicted?", "What color is the frame?")
        assert qs.kind is QuestionKind.DETAILS

    def test_detail_questions_blank_lines_dropped(self):
        script = StubScript.from_rules(
            [StubRule(role=Role.TEXT_GEN, text="Q one?\n\nQ two?\n")]
        )
        q, _ = make_questioner(script)
        assert q.detail_questions("desc", Facts("picture")).questions == ("Q one?", "Q two?")

    def test_detail_questions_empty_reply_errors(self):
        script = StubScript.from_rules([StubRule(role=Role.TEXT_GEN, text="")])
        q, _ = make_questioner(script)
        with pytest.raises(StageError) as err:
            q.detail_questions("desc", Facts("picture"))
        assert err.value.stage is Stage.DETAILS

    def test_enrich_empty_fold(self):
        q, _ = make_questioner()
        qs = QuestionList(questions=(), kind=QuestionKind.DETAILS)
        assert q.enrich("base", qs, IMG) == "base"

    def test_enrich_appends_in_order(self):
        q, _ = make_questioner()
        qs = QuestionList(("What is depicted?", "What color is the frame?"), QuestionKind.DETAILS)
        enriched = q.enrich("base", qs, IMG)
        assert enriched == (
            "base\nQ: What is depicted?\nA: It shows a sailboat."
            "\nQ: What color is the frame?\nA: The frame is black."
        )
        assert enriched.startswith("base")

    def test_perception_check_passes(self):
        q, _ = make_questioner()
        passed, est, answer = q.perception_check(IMG, "picture")
        assert passed and answer == "Yes" and est.u < 1e-9

    def test_perception_check_near_uniform_fails(self):
        q, _ = make_questioner(happy_script(check_scores=scores(0.01, 0.0, 0.0)))
        passed, est, answer = q.perception_check(IMG, "picture")
        assert not passed
        assert est.u > 0.75  # tau default

    def test_perception_check_answer_no_fails(self):
        q, _ = make_questioner(happy_script(check_scores=scores(0.0, 40.0, 0.0)))
        passed, est, answer = q.perception_check(IMG, "picture")
        assert not passed and answer == "No" and est.u < 1e-9

    def test_attribute_questions_parse(self):
        q, _ = make_questioner()
        attrs, qs = q.attribute_questions(Facts("picture"), "desc")
        assert attrs == (("frame", "black"), ("content", "a sailboat"))
        assert qs.questions == ("Is the frame black?", "Does it show a sailboat?")
        assert qs.kind is QuestionKind.ATTRIBUTE

    def test_attribute_questions_empty_list_ok(self):
        script = StubScript.from_rules([StubRule(role=Role.TEXT_GEN, text="[]")])
        q, _ = make_questioner(script)
        attrs, qs = q.attribute_questions(Facts("picture"), "desc")
        assert attrs == () and qs.questions == ()

    def test_attribute_questions_malformed(self):
        script = StubScript.from_rules([StubRule(role=Role.TEXT_GEN, text="not json")])
        q, _ = make_questioner(script)
        with pytest.raises(StageError) as err:
            q.attribute_questions(Facts("picture"), "desc")
        assert err.value.stage is Stage.SELF_QUESTION

    def test_verify_attributes(self):
        q, _ = make_questioner()
        qs = QuestionList(("Is the frame black?", "Does it show a sailboat?"), QuestionKind.ATTRIBUTE)
        items = q.verify_attributes(qs, IMG)
        assert items[0].answer == "Yes" and items[0].u < 1e-9
        # uniform scores: argmax tie resolves to Yes, maximum uncertainty
        assert items[1].answer == "Yes" and items[1].u == pytest.approx(1.0, abs=1e-9)

    def test_refine_serializes_certainty(self):
        captured = {}

        class Capture:
            retryable = False

            def invoke(self, request):
                captured["prompt"] = request.prompt
                from asknav.gateway import ModelResponse

                return ModelResponse(text="refined")

        q = SelfQuestioner(llm=Capture(), vlm=Capture())
        items = (
            QAItem("Q1?", "Yes", 0.0, _dist(40, 0, 0)),
            QAItem("Q2?", "Yes", 1.0, _dist(0, 0, 0)),
        )
        assert q.refine("desc", items, Facts("picture")) == "refined"
        assert "Q: Q1? | A: Yes | certainty: Certain" in captured["prompt"]
        assert "Q: Q2? | A: Yes | certainty: Uncertain" in captured["prompt"]


def _dist(y, n, i):
    from asknav.gateway import VocabDistribution

    return VocabDistribution.from_raw_scores(scores(y, n, i))


class TestFullRun:
    def test_happy_path(self):
        q, backend = make_questioner()
        record = q.run(Facts("picture"), IMG, "picture")
        assert record.s_init == "A framed picture on a wall."
        assert record.s_enriched.startswith(record.s_init)
        assert record.s_refined == "A black-framed picture."
        assert record.attributes == (("frame", "black"), ("content", "a sailboat"))
        assert len(record.qa_items) == 2

    def test_failed_check_empty_refinement(self):
        q, _ = make_questioner(happy_script(check_scores=scores(0.0, 40.0, 0.0)))
        record = q.run(Facts("picture"), IMG, "picture")
        assert record.s_refined == ""
        assert record.s_enriched.startswith(record.s_init)

    def test_gate_soundness(self):
        # non-empty refinement implies the perception check passed
        q, _ = make_questioner()
        record = q.run(Facts("picture"), IMG, "picture")
        assert record.s_refined != ""
        assert record.check_answer == "Yes" and record.check.u <= q.tau

    def test_call_order(self):
        q, backend = make_questioner()
        q.run(Facts("picture"), IMG, "picture")
        prompts = [r.prompt for r in backend.call_log]
        assert prompts[0].startswith("Describe the picture")
        assert "follow-up questions" in prompts[1]
        assert prompts[2] == "What is depicted?"
        assert prompts[3] == "What color is the frame?"
        assert prompts[4].startswith("Does the image contain a picture?")
        assert "JSON array" in prompts[5]
        assert prompts[6].startswith("Is the frame black?")
        assert prompts[7].startswith("Does it show a sailboat?")
        assert "Rewrite the object description" in prompts[8]
        assert len(prompts) == 9

    def test_u_reproducible_from_distribution(self):
        q, _ = make_questioner()
        record = q.run(Facts("picture"), IMG, "picture")
        for item in record.qa_items:
            assert item.u == normalized_uncertainty(item.distribution, q.tau).u

    def test_question_call_cap(self):
        many = "\n".join(f"Q{i}?" for i in range(30))
        script = StubScript.from_rules(
            [
                StubRule(role=Role.VISUAL_QA, mode=Mode.FREE_TEXT, prompt_contains="Describe", text="d"),
                StubRule(role=Role.TEXT_GEN, prompt_contains="follow-up questions", text=many),
                StubRule(mode=Mode.RESTRICTED_VOCAB, prompt_contains="Does the image contain", raw_scores=scores(40, 0, 0)),
                StubRule(role=Role.TEXT_GEN, prompt_contains="JSON array", text="[]"),
                StubRule(role=Role.TEXT_GEN, prompt_contains="Rewrite", text="r"),
                StubRule(role=Role.VISUAL_QA, mode=Mode.FREE_TEXT, text="a"),
            ]
        )
        q, backend = make_questioner(script)
        record = q.run(Facts("picture"), IMG, "picture")
        answered = [r for r in backend.call_log if r.prompt.startswith("Q")]
        assert len(answered) == 12  # default cap

    def test_stage_error_carries_question_index(self):
        script = StubScript.from_rules(
            [
                StubRule(role=Role.VISUAL_QA, mode=Mode.FREE_TEXT, prompt_contains="first", text="ok"),
            ]
        )
        q, _ = make_questioner(script)
        qs = QuestionList(("first?", "second?"), QuestionKind.DETAILS)
        with pytest.raises(StageError) as err:
            q.enrich("base", qs, IMG)
        assert err.value.question_index == 1

    def test_record_invariant(self):
        with pytest.raises(ValueError):
            DescriptionRecord(s_init="abc", s_enriched="xyz", s_refined="")
