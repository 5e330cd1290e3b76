"""Uniform interface to text-generation and visual-QA backends.

Two backends ship with the package: a deterministic rule-based stub for
reproducible runs and tests, and an HTTP client speaking a JSON
chat-completion subset with per-token score output for the restricted
answer mode.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Mapping, Protocol, Sequence

VOCAB = ("Yes", "No", "IDK")
RESTRICTED_SUFFIX = "You must answer with Yes, No, or ?=I don't know."

# Accepted surface forms when a backend replies in free text instead of
# per-symbol scores (case-insensitive).
_IDK_ALIASES = frozenset({"idk", "?", "i don't know", "i dont know", "?=i don't know"})

PROB_TOL = 1e-9


class Role(str, Enum):
    TEXT_GEN = "TextGen"
    VISUAL_QA = "VisualQA"


class Mode(str, Enum):
    FREE_TEXT = "FreeText"
    RESTRICTED_VOCAB = "RestrictedVocab"


class GatewayError(Exception):
    """Base class for gateway failures."""


class TransportError(GatewayError):
    """Retryable network/transport failure; carries the attempt count."""

    def __init__(self, message: str, attempts: int = 1):
        super().__init__(f"{message} (attempts={attempts})")
        self.attempts = attempts


class NoMatchingRuleError(GatewayError):
    """A stub request matched no scripted rule."""


class MalformedPayloadError(GatewayError):
    """Backend reply did not follow the expected schema."""


class ExtractionError(GatewayError):
    """Backend gave no usable scores for the three restricted symbols."""


def canonical_symbol(text: str) -> str | None:
    """Map a free-text answer onto Yes/No/IDK, or None if unrecognised."""
    t = text.strip().strip(".").lower()
    if t == "yes":
        return "Yes"
    if t == "no":
        return "No"
    if t in _IDK_ALIASES:
        return "IDK"
    return None


def restricted_prompt(question: str) -> str:
    """Suffix a question with the fixed three-way answer instruction."""
    if not question:
        raise ValueError("question must be non-empty")
    return f"{question} {RESTRICTED_SUFFIX}"


@dataclass(frozen=True)
class ModelRequest:
    role: Role
    prompt: str
    image_ref: str | None = None
    history: tuple[tuple[str, str], ...] = ()
    mode: Mode = Mode.FREE_TEXT

    def __post_init__(self):
        if self.role is Role.VISUAL_QA and not self.image_ref:
            raise ValueError("VisualQA requests carry an image_ref")
        if self.role is Role.TEXT_GEN and self.image_ref is not None:
            raise ValueError("TextGen requests never carry an image_ref")
        if self.mode is Mode.RESTRICTED_VOCAB and self.role is not Role.VISUAL_QA:
            raise ValueError("RestrictedVocab mode is only valid for VisualQA")


@dataclass(frozen=True)
class VocabDistribution:
    """Probability mass over the restricted answer vocabulary {Yes, No, IDK}."""

    probs: Mapping[str, float]
    raw_scores: Mapping[str, float] | None = None

    def __post_init__(self):
        if set(self.probs) != set(VOCAB):
            raise ValueError(f"probs keys must be exactly {VOCAB}")
        if any(p < 0 for p in self.probs.values()):
            raise ValueError("probabilities must be non-negative")
        if abs(sum(self.probs.values()) - 1.0) > PROB_TOL:
            raise ValueError("probabilities must sum to 1")
        if self.raw_scores is not None:
            if set(self.raw_scores) != set(VOCAB):
                raise ValueError(f"raw_scores keys must be exactly {VOCAB}")
            expected = _softmax(self.raw_scores)
            if any(abs(self.probs[k] - expected[k]) > PROB_TOL for k in VOCAB):
                raise ValueError("probs must equal softmax(raw_scores)")

    @classmethod
    def from_raw_scores(cls, raw_scores: Mapping[str, float]) -> "VocabDistribution":
        if any(not math.isfinite(v) for v in raw_scores.values()):
            raise ValueError("raw scores must be finite")
        return cls(probs=_softmax(raw_scores), raw_scores=dict(raw_scores))

    @classmethod
    def from_probs(cls, probs: Mapping[str, float]) -> "VocabDistribution":
        return cls(probs=dict(probs), raw_scores=None)

    def argmax(self) -> str:
        """Most probable symbol; ties broken by the fixed order Yes < No < IDK."""
        best = VOCAB[0]
        for sym in VOCAB[1:]:
            if self.probs[sym] > self.probs[best]:
                best = sym
        return best


def _softmax(scores: Mapping[str, float]) -> dict[str, float]:
    m = max(scores.values())
    exps = {k: math.exp(v - m) for k, v in scores.items()}
    z = sum(exps.values())
    return {k: e / z for k, e in exps.items()}


@dataclass(frozen=True)
class ModelResponse:
    text: str | None = None
    distribution: VocabDistribution | None = None
    latency_ms: int = 0

    def __post_init__(self):
        if (self.text is None) == (self.distribution is None):
            raise ValueError("exactly one of text/distribution must be populated")
        if self.latency_ms < 0:
            raise ValueError("latency_ms must be non-negative")


class Backend(Protocol):
    """A model endpoint the gateway can drive."""

    retryable: bool

    def invoke(self, request: ModelRequest) -> ModelResponse: ...


# ---------------------------------------------------------------------------
# Deterministic stub backend


@dataclass(frozen=True)
class StubRule:
    """Matcher over request fields mapped to a canned response.

    All match fields are optional; omitted fields match anything.
    prompt_contains may be one substring or a tuple that must all appear.
    The response carries either free text or raw scores for the 3 symbols.
    """

    role: Role | None = None
    mode: Mode | None = None
    prompt_contains: str | tuple[str, ...] | None = None
    image_ref: str | None = None
    text: str | None = None
    raw_scores: Mapping[str, float] | None = None

    def __post_init__(self):
        if (self.text is None) == (self.raw_scores is None):
            raise ValueError("rule needs exactly one of text/raw_scores")

    def matches(self, request: ModelRequest) -> bool:
        if self.role is not None and request.role is not self.role:
            return False
        if self.mode is not None and request.mode is not self.mode:
            return False
        if self.prompt_contains is not None:
            needles = (
                (self.prompt_contains,)
                if isinstance(self.prompt_contains, str)
                else self.prompt_contains
            )
            if any(needle not in request.prompt for needle in needles):
                return False
        if self.image_ref is not None and request.image_ref != self.image_ref:
            return False
        return True

    @classmethod
    def from_dict(cls, obj: dict) -> "StubRule":
        match = obj.get("match", {})
        resp = obj["response"]
        contains = match.get("prompt_contains")
        if isinstance(contains, list):
            contains = tuple(contains)
        return cls(
            role=Role(match["role"]) if "role" in match else None,
            mode=Mode(match["mode"]) if "mode" in match else None,
            prompt_contains=contains,
            image_ref=match.get("image_ref"),
            text=resp.get("text"),
            raw_scores=resp.get("raw_scores"),
        )


@dataclass(frozen=True)
class StubScript:
    """Ordered rule list; first matching rule wins, no match is an error."""

    rules: tuple[StubRule, ...]

    def find(self, request: ModelRequest) -> StubRule:
        for rule in self.rules:
            if rule.matches(request):
                return rule
        raise NoMatchingRuleError(
            f"no stub rule for role={request.role.value} mode={request.mode.value} "
            f"image_ref={request.image_ref!r} prompt={request.prompt[:120]!r}"
        )

    @classmethod
    def from_rules(cls, rules: Sequence[StubRule]) -> "StubScript":
        return cls(rules=tuple(rules))

    @classmethod
    def from_json(cls, data: str | bytes) -> "StubScript":
        return cls.from_rules([StubRule.from_dict(r) for r in json.loads(data)])

    @classmethod
    def load(cls, path: str | Path) -> "StubScript":
        return cls.from_json(Path(path).read_text())


class StubBackend:
    """Script-driven backend; immutable script, per-instance call log."""

    retryable = False

    def __init__(self, script: StubScript):
        self.script = script
        self.call_log: list[ModelRequest] = []

    def invoke(self, request: ModelRequest) -> ModelResponse:
        self.call_log.append(request)
        rule = self.script.find(request)
        if request.mode is Mode.RESTRICTED_VOCAB:
            if rule.raw_scores is None:
                # Free-text rule answering a restricted question: parse the alias.
                sym = canonical_symbol(rule.text or "")
                if sym is None:
                    raise ExtractionError(f"stub text {rule.text!r} is not a Yes/No/IDK alias")
                scores = {k: (0.0 if k == sym else -30.0) for k in VOCAB}
                return ModelResponse(distribution=VocabDistribution.from_raw_scores(scores))
            return ModelResponse(distribution=VocabDistribution.from_raw_scores(rule.raw_scores))
        if rule.text is None:
            raise MalformedPayloadError("free-text request matched a score-only rule")
        return ModelResponse(text=rule.text)


# ---------------------------------------------------------------------------
# HTTP backend (JSON chat-completion subset)


@dataclass(frozen=True)
class HttpConfig:
    base_url: str
    model: str
    api_token: str = ""
    timeout_s: float = 30.0
    top_logprobs: int = 20

    @classmethod
    def from_file(cls, path: str | Path, env: Mapping[str, str] | None = None) -> "HttpConfig":
        """Read a JSON config file; ASKNAV_BASE_URL / ASKNAV_API_TOKEN override."""
        import os

        env = env if env is not None else os.environ
        obj = json.loads(Path(path).read_text())
        return cls(
            base_url=env.get("ASKNAV_BASE_URL", obj["base_url"]),
            model=obj["model"],
            api_token=env.get("ASKNAV_API_TOKEN", obj.get("api_token", "")),
            timeout_s=float(obj.get("timeout_s", 30.0)),
            top_logprobs=int(obj.get("top_logprobs", 20)),
        )


class HttpBackend:
    """Chat-completion client asking for first-token scores in restricted mode.

    A symbol absent from the returned top-logprobs list is assigned the lowest
    observed logprob minus 10, a deterministic stand-in for "below the shown
    cut-off"; if none of the three symbols appear the call fails.
    """

    retryable = True

    def __init__(self, config: HttpConfig, client=None):
        import httpx

        self.config = config
        self._client = client or httpx.Client(timeout=config.timeout_s)

    def invoke(self, request: ModelRequest) -> ModelResponse:
        import httpx

        payload = self._payload(request)
        headers = {"Content-Type": "application/json"}
        if self.config.api_token:
            headers["Authorization"] = f"Bearer {self.config.api_token}"
        start = time.monotonic()
        try:
            resp = self._client.post(
                self.config.base_url.rstrip("/") + "/chat/completions",
                json=payload,
                headers=headers,
            )
        except httpx.HTTPError as exc:
            raise TransportError(f"transport failure: {exc}") from exc
        latency_ms = int((time.monotonic() - start) * 1000)
        if resp.status_code >= 500:
            raise TransportError(f"server error {resp.status_code}")
        if resp.status_code != 200:
            raise MalformedPayloadError(f"backend returned {resp.status_code}: {resp.text[:200]}")
        return self._parse(request, resp.json(), latency_ms)

    def _payload(self, request: ModelRequest) -> dict:
        messages = [{"role": speaker, "content": text} for speaker, text in request.history]
        if request.image_ref is not None:
            content = [
                {"type": "text", "text": request.prompt},
                {"type": "image_url", "image_url": {"url": request.image_ref}},
            ]
        else:
            content = request.prompt
        messages.append({"role": "user", "content": content})
        payload = {"model": self.config.model, "messages": messages}
        if request.mode is Mode.RESTRICTED_VOCAB:
            payload["logprobs"] = True
            payload["top_logprobs"] = self.config.top_logprobs
            payload["max_tokens"] = 1
        return payload

    def _parse(self, request: ModelRequest, obj: dict, latency_ms: int) -> ModelResponse:
        try:
            choice = obj["choices"][0]
        except (KeyError, IndexError, TypeError) as exc:
            raise MalformedPayloadError(f"missing choices: {exc}") from exc
        if request.mode is Mode.FREE_TEXT:
            text = choice.get("message", {}).get("content")
            if not isinstance(text, str):
                raise MalformedPayloadError("missing message content")
            return ModelResponse(text=text, latency_ms=latency_ms)
        try:
            top = choice["logprobs"]["content"][0]["top_logprobs"]
        except (KeyError, IndexError, TypeError) as exc:
            raise MalformedPayloadError(f"missing logprobs: {exc}") from exc
        found: dict[str, float] = {}
        observed: list[float] = []
        for entry in top:
            lp = float(entry["logprob"])
            observed.append(lp)
            sym = canonical_symbol(str(entry["token"]))
            if sym is not None and sym not in found:
                found[sym] = lp
        if not found:
            raise ExtractionError("backend gave no usable scores for the 3 symbols")
        floor = min(observed) - 10.0
        scores = {k: found.get(k, floor) for k in VOCAB}
        return ModelResponse(
            distribution=VocabDistribution.from_raw_scores(scores), latency_ms=latency_ms
        )


# ---------------------------------------------------------------------------
# Gateway entry point

MAX_RETRIES = 2


def complete(
    request: ModelRequest,
    backend: Backend,
    sleep: Callable[[float], None] = time.sleep,
) -> ModelResponse:
    """Issue a request; retry transport failures on retryable backends."""
    attempts = 0
    while True:
        attempts += 1
        try:
            response = backend.invoke(request)
            break
        except TransportError as exc:
            if not backend.retryable or attempts > MAX_RETRIES:
                raise TransportError(str(exc).rsplit(" (attempts=", 1)[0], attempts) from exc
            sleep(0.1 * 2 ** (attempts - 1))
    if request.mode is Mode.RESTRICTED_VOCAB and response.distribution is None:
        raise MalformedPayloadError("restricted request yielded no distribution")
    if request.mode is Mode.FREE_TEXT and response.text is None:
        raise MalformedPayloadError("free-text request yielded no text")
    return response
