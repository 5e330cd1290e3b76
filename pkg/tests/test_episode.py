"""Episode engine: golden scripted run, budget cap, aborts, generator, I/O."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from asknav.config import EngineConfig
from asknav.episode import (
    EngineBackends,
    EpisodeSpec,
    Outcome,
    episode_from_dict,
    episode_to_dict,
    generate_episode,
    load_episode,
    run_episode,
    simulated_user_answer,
)
from asknav.gateway import ModelResponse, StubBackend, StubScript
from asknav.trigger import UserChannelTimeout
from asknav.world import ObjectInstance, WorldSpec

DATA = Path(__file__).parent / "data"
SCENARIOS = Path(__file__).parent.parent / "scenarios"


def golden_spec():
    return load_episode(SCENARIOS / "episodes" / "room_black_frame.json")


def golden_backends():
    script = StubScript.load(SCENARIOS / "stub.json")
    return EngineBackends(llm=StubBackend(script), vlm=StubBackend(script))


def always_continue_script():
    """Full pipeline rules with an alignment score below tau_skip."""
    return StubScript.from_json(
        json.dumps(
            [
                {"match": {"role": "VisualQA", "mode": "FreeText", "prompt_contains": "Describe the picture"},
                 "response": {"text": "A picture."}},
                {"match": {"role": "TextGen", "prompt_contains": "follow-up questions"},
                 "response": {"text": "What is it?"}},
                {"match": {"role": "VisualQA", "mode": "FreeText", "prompt_contains": "What is it?"},
                 "response": {"text": "A thing."}},
                {"match": {"mode": "RestrictedVocab", "prompt_contains": "Does the image contain a picture?"},
                 "response": {"raw_scores": {"Yes": 40, "No": 0, "IDK": 0}}},
                {"match": {"role": "TextGen", "prompt_contains": "JSON array"}, "response": {"text": "[]"}},
                {"match": {"role": "TextGen", "prompt_contains": "Rewrite the object description"},
                 "response": {"text": "A picture."}},
                {"match": {"role": "TextGen", "prompt_contains": "Rate how well"},
                 "response": {"text": '{"score": 2, "question": ""}'}},
            ]
        )
    )


def serpentine_episode(max_actions=500):
    """Winding corridor far longer than the action budget; the target sits at
    the end, two same-category instances sit along the way."""
    rows, cols = 27, 52
    grid = np.ones((rows, cols), dtype=np.int8)
    for i, r in enumerate(range(1, rows - 1, 2)):
        grid[r, 1 : cols - 1] = 0
        if r + 2 < rows - 1:  # opening connecting to the next corridor row
            if i % 2 == 0:
                grid[r + 1, cols - 2] = 0
            else:
                grid[r + 1, 1] = 0
    instances = (
        ObjectInstance(id="picture_a", category="picture", cell=(5, 25),
                       attributes=(("frame", "white"),), image_ref="img://serp/a"),
        ObjectInstance(id="picture_b", category="picture", cell=(9, 25),
                       attributes=(("frame", "white"),), image_ref="img://serp/b"),
        ObjectInstance(id="picture_t", category="picture", cell=(25, 50),
                       attributes=(("frame", "black"),), image_ref="img://serp/t", is_target=True),
    )
    world = WorldSpec(grid=grid, instances=instances, start_cell=(1, 1), start_heading=0)
    return EpisodeSpec(world=world, category="picture", episode_id="serpentine", max_actions=max_actions)


class TestGoldenEpisode:
    def test_stops_at_target_with_one_question(self):
        result = run_episode(golden_spec(), EngineConfig(), golden_backends())
        assert result.outcome is Outcome.STOPPED_AT_TARGET
        assert result.success
        assert result.questions_asked <= 2
        assert result.path_length_m == pytest.approx(golden_spec().shortest_path_m)

    def test_transcript_matches_committed_golden(self):
        result = run_episode(golden_spec(), EngineConfig(), golden_backends())
        golden = (DATA / "golden_transcript.jsonl").read_text()
        assert result.transcript_jsonl() == golden

    def test_rerun_byte_identical(self):
        a = run_episode(golden_spec(), EngineConfig(), golden_backends())
        b = run_episode(golden_spec(), EngineConfig(), golden_backends())
        assert a.transcript_jsonl() == b.transcript_jsonl()

    def test_ask_learns_fact_then_skips_other_distractor(self):
        result = run_episode(golden_spec(), EngineConfig(), golden_backends())
        questions = [e for e in result.transcript if e["type"] == "question"]
        answers = [e for e in result.transcript if e["type"] == "answer"]
        assert len(questions) == len(answers) == 1
        assert answers[0]["text"] == "black"

    def test_kinematics_invariant(self):
        result = run_episode(golden_spec(), EngineConfig(), golden_backends())
        forwards = sum(
            1 for e in result.transcript if e["type"] == "action" and e["action"] == "Forward"
        )
        assert result.path_length_m == pytest.approx(0.25 * forwards)
        assert result.path_length_m <= 0.25 * result.actions_taken


class TestBudgetEpisode:
    def test_budget_at_exactly_500(self):
        script = always_continue_script()
        backends = EngineBackends(llm=StubBackend(script), vlm=StubBackend(script))
        result = run_episode(serpentine_episode(), EngineConfig(), backends)
        assert result.outcome is Outcome.BUDGET
        assert result.actions_taken == 500
        assert not result.success
        assert result.questions_asked == 0
        # the en-route instances were inspected and dismissed
        kinds = [e["kind"] for e in result.transcript if e["type"] == "trigger"]
        assert kinds and all(k == "ContinueExploring" for k in kinds)


class TestAborts:
    def test_user_timeout_aborts(self):
        class SilentUser:
            def send(self, question):
                pass

            def receive(self, timeout=None):
                raise UserChannelTimeout("nobody home")

        result = run_episode(golden_spec(), EngineConfig(), golden_backends(), user=SilentUser())
        assert result.outcome is Outcome.ABORTED
        assert result.abort_reason == "user_timeout"
        assert not result.success

    def test_backend_failure_aborts(self):
        empty = StubScript.from_rules([])
        backends = EngineBackends(llm=StubBackend(empty), vlm=StubBackend(empty))
        result = run_episode(golden_spec(), EngineConfig(), backends)
        assert result.outcome is Outcome.ABORTED
        assert result.abort_reason.startswith("backend_error")


class TestSimulatedUser:
    def target(self):
        return ObjectInstance(
            id="t",
            category="picture",
            cell=(1, 1),
            attributes=(("frame", "black"), ("content", "a sailboat")),
            image_ref="img://t",
            is_target=True,
        )

    def test_attribute_lookup(self):
        assert simulated_user_answer("What color is the frame?", self.target()) == "black"

    def test_first_matching_key_wins(self):
        answer = simulated_user_answer("Describe the frame and content?", self.target())
        assert answer == "black"

    def test_unknown_key_idk(self):
        assert simulated_user_answer("How heavy is it?", self.target()) == "I don't know"

    def test_empty_question_rejected(self):
        with pytest.raises(ValueError):
            simulated_user_answer("", self.target())

    def test_vlm_backed_user(self):
        class Echo:
            retryable = False

            def invoke(self, request):
                assert request.image_ref == "img://t"
                return ModelResponse(text="a black frame")

        assert simulated_user_answer("frame?", self.target(), Echo()) == "a black frame"


class TestEpisodeIO:
    def test_round_trip(self):
        spec = golden_spec()
        clone = episode_from_dict(episode_to_dict(spec), episode_id=spec.episode_id)
        assert episode_to_dict(clone) == episode_to_dict(spec)
        assert clone.shortest_path_m == spec.shortest_path_m

    def test_distractor_validation(self):
        spec = golden_spec()
        spec.validate_distractors(2)
        with pytest.raises(ValueError):
            spec.validate_distractors(3)

    def test_rejects_zero_length_path(self):
        obj = episode_to_dict(golden_spec())
        obj["start"]["cell"] = [2, 7]  # inside the target's viewpoints
        with pytest.raises(ValueError):
            episode_from_dict(obj)


class TestGenerator:
    def test_seeded_reproducible(self):
        a = generate_episode(seed=7)
        b = generate_episode(seed=7)
        assert episode_to_dict(a) == episode_to_dict(b)

    def test_different_seeds_differ(self):
        assert episode_to_dict(generate_episode(seed=1)) != episode_to_dict(generate_episode(seed=2))

    def test_generated_worlds_valid(self):
        for seed in range(5):
            spec = generate_episode(seed=seed, n_distractors=3)
            assert spec.distractor_count() == 3
            assert spec.shortest_path_m > 0
            target_attrs = dict(spec.world.target().attributes)
            for d in spec.world.distractors():
                assert dict(d.attributes) != target_attrs
