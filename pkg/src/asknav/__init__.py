"""Uncertainty-aware collaborative object search.

A detection-triggered self-dialogue refines what the agent sees, an
entropy gate keeps hallucinated attributes out, and an interaction trigger
decides when the agent should stop, keep exploring, or ask the user. Ships
a deterministic grid-world simulator, navigation/reliability metrics, and a
WebSocket session service for live human episodes.
"""

from .config import EngineConfig
from .facts import FactOrigin, Facts
from .gateway import (
    HttpBackend,
    HttpConfig,
    Mode,
    ModelRequest,
    ModelResponse,
    Role,
    StubBackend,
    StubRule,
    StubScript,
    VocabDistribution,
    complete,
    restricted_prompt,
)
from .episode import (
    EngineBackends,
    EpisodeResult,
    EpisodeSpec,
    Outcome,
    generate_episode,
    load_episode,
    run_episode,
    save_episode,
    simulated_user_answer,
)
from .metrics import MetricsReport, build_report, nq, spl, success_rate
from .prompts import PromptSet
from .questioner import DescriptionRecord, SelfQuestioner
from .reliability import (
    METHODS,
    ReliabilityItem,
    effective_reliability,
    tau_sensitivity,
    vqa_accuracy,
)
from .trigger import (
    TriggerConfig,
    TriggerDecision,
    TriggerKind,
    alignment_score,
    decide,
    interaction_loop,
)
from .uncertainty import (
    Certainty,
    SelectionDecision,
    UncertaintyEstimate,
    normalized_uncertainty,
    select_energy,
    select_entropy,
    select_maxprob,
    select_probe,
    shannon_entropy,
)

__version__ = "0.1.0"
