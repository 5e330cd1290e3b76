"""Engine configuration: thresholds, budgets, prompt and backend settings."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path

from .prompts import PromptSet
from .trigger import TriggerConfig


@dataclass(frozen=True)
class EngineConfig:
    tau: float = 0.75
    tau_stop: float = 7.0
    tau_skip: float = 5.0
    max_rounds: int = 4
    score_scale: tuple[float, float] = (0.0, 10.0)
    episode_question_cap: int = 8
    max_question_calls: int = 12
    detection_range: int = 8
    user_timeout_s: float = 120.0
    prompts_dir: str | None = None

    def trigger_config(self) -> TriggerConfig:
        return TriggerConfig(
            tau_stop=self.tau_stop,
            tau_skip=self.tau_skip,
            max_rounds=self.max_rounds,
            score_scale=self.score_scale,
        )

    def prompt_set(self) -> PromptSet:
        if self.prompts_dir:
            return PromptSet.from_dir(self.prompts_dir)
        return PromptSet.default()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["score_scale"] = list(self.score_scale)
        return d

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    @classmethod
    def from_dict(cls, obj: dict) -> "EngineConfig":
        known = {f: obj[f] for f in cls.__dataclass_fields__ if f in obj}
        if "score_scale" in known:
            known["score_scale"] = tuple(known["score_scale"])
        return cls(**known)

    @classmethod
    def from_file(cls, path: str | Path) -> "EngineConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))
