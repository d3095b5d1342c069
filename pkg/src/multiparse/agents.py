"""Agents, the broadcast step, and small trainable intent scorers.

Each agent self-reports a confidence in [0, 1] that it can handle an
utterance. The parser never looks inside an agent; it only sees these
previews.
"""

from __future__ import annotations

import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Iterable, Mapping, Optional, Sequence

import numpy as np

from multiparse.splitter import Utterance
from multiparse.text import normalize_for_comparison

logger = logging.getLogger(__name__)

_CACHE_LIMIT = 100_000


@dataclass(frozen=True)
class AgentDescriptor:
    id: str
    intent: str
    has_preview: bool = True


@dataclass(frozen=True)
class EvaluationResult:
    agent_id: str
    confidence: float

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence!r} outside [0, 1]")


@dataclass(frozen=True)
class Binding:
    """Best agent for one fragment, as produced by a broadcast."""

    agent_id: str
    intent: str
    confidence: float


class Agent:
    """Base class. Subclasses implement :meth:`confidence`."""

    def __init__(self, descriptor: AgentDescriptor):
        self.descriptor = descriptor

    @property
    def id(self) -> str:
        return self.descriptor.id

    @property
    def intent(self) -> str:
        return self.descriptor.intent

    def confidence(self, u: Utterance) -> float:
        raise NotImplementedError

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.id!r}, intent={self.intent!r})"


class StubAgent(Agent):
    """Returns fixed confidences looked up by normalized fragment text."""

    def __init__(self, descriptor: AgentDescriptor, fixed_scores: Mapping[str, float], default: float = 0.0):
        super().__init__(descriptor)
        self.fixed_scores = {normalize_for_comparison(k): float(v) for k, v in fixed_scores.items()}
        self.default = float(default)

    def confidence(self, u: Utterance) -> float:
        return self.fixed_scores.get(u.normalized, self.default)


class KeywordAgent(Agent):
    """Keyword-density scorer: ``min(1, weight_per_hit * hits / words)``.

    Dividing by fragment length makes the agent prefer focused fragments over
    long utterances that mention its keywords among unrelated content.
    """

    def __init__(self, descriptor: AgentDescriptor, keywords: Iterable[str], weight_per_hit: float = 1.0):
        super().__init__(descriptor)
        self.keywords = frozenset(normalize_for_comparison(k) for k in keywords)
        if weight_per_hit <= 0:
            raise ValueError("weight_per_hit must be positive")
        self.weight_per_hit = float(weight_per_hit)

    def confidence(self, u: Utterance) -> float:
        words = u.normalized.split()
        if not words:
            return 0.0
        hits = sum(1 for w in words if w in self.keywords)
        return min(1.0, self.weight_per_hit * hits / len(words))


@dataclass
class IntentModel:
    """Multinomial bag-of-words model with additive smoothing."""

    intents: tuple[str, ...]
    vocabulary: dict[str, int]
    log_weights: dict[str, list[float]]
    priors: dict[str, float]
    alpha: float
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def posterior(self, text: str) -> dict[str, float]:
        """P(intent | tokens of ``text``); out-of-vocabulary tokens are ignored."""
        key = ("nb", tuple(normalize_for_comparison(text).split()))
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        counts = Counter(self.vocabulary[w] for w in key[1] if w in self.vocabulary)
        scores = {}
        for intent in self.intents:
            weights = self.log_weights[intent]
            scores[intent] = math.log(self.priors[intent]) + math.fsum(
                n * weights[idx] for idx, n in counts.items()
            )
        top = max(scores.values())
        exps = {i: math.exp(s - top) for i, s in scores.items()}
        total = math.fsum(exps.values())
        result = {i: e / total for i, e in exps.items()}
        self._remember(key, result)
        return result

    def proportions(self, text: str, max_iter: int = 500, tol: float = 1e-6) -> dict[str, float]:
        """Share of the text's tokens attributable to each intent.

        Fits mixture weights over intents by EM, starting from the priors and
        holding the per-intent token distributions fixed. A text mixing two
        intents splits the mass between them, whereas :meth:`posterior` puts
        nearly all of it on the stronger one. Out-of-vocabulary text returns
        the priors.
        """
        key = ("mix", tuple(normalize_for_comparison(text).split()))
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        ids = [self.vocabulary[w] for w in key[1] if w in self.vocabulary]
        weights = np.array([self.priors[i] for i in self.intents])
        if ids:
            lik = self._token_likelihoods[ids]
            for _ in range(max_iter):
                joint = lik * weights
                new = (joint / joint.sum(axis=1, keepdims=True)).mean(axis=0)
                done = np.abs(new - weights).max() < tol
                weights = new
                if done:
                    break
        result = {i: float(w) for i, w in zip(self.intents, weights)}
        self._remember(key, result)
        return result

    def _remember(self, key, value) -> None:
        if len(self._cache) >= _CACHE_LIMIT:
            self._cache.clear()
        self._cache[key] = value

    @cached_property
    def _token_likelihoods(self) -> np.ndarray:
        # vocabulary x intents matrix of p(token | intent)
        return np.exp(np.array([self.log_weights[i] for i in self.intents]).T)

    def to_dict(self) -> dict:
        return {
            "intents": list(self.intents),
            "vocabulary": self.vocabulary,
            "log_weights": self.log_weights,
            "priors": self.priors,
            "alpha": self.alpha,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "IntentModel":
        return cls(
            intents=tuple(data["intents"]),
            vocabulary=dict(data["vocabulary"]),
            log_weights={k: list(v) for k, v in data["log_weights"].items()},
            priors=dict(data["priors"]),
            alpha=float(data["alpha"]),
        )


def train_intent_model(
    examples: Sequence[tuple[str, str]],
    alpha: float = 1.0,
    intents: Optional[Iterable[str]] = None,
) -> IntentModel:
    """Fit smoothed per-intent token weights and class priors.

    When ``intents`` is given, every declared intent needs at least one example
    and examples with undeclared intents are rejected.
    """
    if not examples:
        raise ValueError("no training examples")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    declared = tuple(sorted(set(intents))) if intents is not None else tuple(sorted({i for _, i in examples}))
    unknown = {i for _, i in examples} - set(declared)
    if unknown:
        raise ValueError(f"examples for undeclared intents: {sorted(unknown)}")

    docs = [(normalize_for_comparison(text).split(), intent) for text, intent in examples]
    vocab_words = sorted({w for words, _ in docs for w in words})
    vocabulary = {w: i for i, w in enumerate(vocab_words)}

    doc_counts = Counter(intent for _, intent in docs)
    missing = [i for i in declared if doc_counts[i] == 0]
    if missing:
        raise ValueError(f"intents without examples: {missing}")

    token_counts = {i: [0] * len(vocabulary) for i in declared}
    for words, intent in docs:
        row = token_counts[intent]
        for w in words:
            row[vocabulary[w]] += 1

    log_weights = {}
    for intent in declared:
        row = token_counts[intent]
        denom = sum(row) + alpha * len(vocabulary)
        log_weights[intent] = [math.log((c + alpha) / denom) for c in row]
    priors = {i: doc_counts[i] / len(docs) for i in declared}
    return IntentModel(declared, vocabulary, log_weights, priors, float(alpha))


SCORING_METHODS = ("proportion", "posterior")


class IntentModelAgent(Agent):
    """Agent specialised to one intent of a jointly trained model.

    ``scoring="proportion"`` (default) reports the intent's share of the
    fragment; ``scoring="posterior"`` reports the single-label posterior.
    """

    def __init__(self, descriptor: AgentDescriptor, model: IntentModel, scoring: str = "proportion"):
        super().__init__(descriptor)
        if descriptor.intent not in model.intents:
            raise ValueError(f"intent {descriptor.intent!r} not in model")
        if scoring not in SCORING_METHODS:
            raise ValueError(f"scoring must be one of {SCORING_METHODS}")
        self.model = model
        self.scoring = scoring

    def confidence(self, u: Utterance) -> float:
        if self.scoring == "posterior":
            return self.model.posterior(u.text)[self.intent]
        return self.model.proportions(u.text)[self.intent]


def preview(agent: Agent, u: Utterance) -> EvaluationResult:
    """Ask one agent for its confidence on ``u``.

    Agents without a preview report 0. A faulting agent, or one returning a
    value outside [0, 1], also reports 0 and the fault is logged.
    """
    if not agent.descriptor.has_preview:
        return EvaluationResult(agent.id, 0.0)
    try:
        value = float(agent.confidence(u))
    except Exception:
        logger.warning("agent %s faulted on %r", agent.id, u.text, exc_info=True)
        return EvaluationResult(agent.id, 0.0)
    if not (0.0 <= value <= 1.0):
        logger.warning("agent %s returned out-of-range confidence %r on %r", agent.id, value, u.text)
        return EvaluationResult(agent.id, 0.0)
    return EvaluationResult(agent.id, value)


class AgentRegistry:
    def __init__(self, agents: Iterable[Agent] = ()):
        self._agents: dict[str, Agent] = {}
        for agent in agents:
            self.add(agent)

    def add(self, agent: Agent) -> None:
        if agent.id in self._agents:
            raise ValueError(f"duplicate agent id {agent.id!r}")
        self._agents[agent.id] = agent

    def get(self, agent_id: str) -> Agent:
        return self._agents[agent_id]

    def intent_of(self, agent_id: str) -> str:
        return self._agents[agent_id].intent

    def __iter__(self):
        return iter(self._agents.values())

    def __len__(self) -> int:
        return len(self._agents)

    def __contains__(self, agent_id: str) -> bool:
        return agent_id in self._agents

    @property
    def sorted_agents(self) -> list[Agent]:
        return [self._agents[k] for k in sorted(self._agents)]


Scorer = Callable[[EvaluationResult], float]


def _identity_scorer(p: EvaluationResult) -> float:
    return p.confidence


def broadcast(
    fragments: Sequence[Utterance],
    registry: AgentRegistry,
    cache: Optional[dict] = None,
    scorer: Scorer = _identity_scorer,
) -> list[Binding]:
    """Bind each fragment to its highest-scoring agent.

    Ties go to the lexicographically smallest agent id. ``cache`` maps
    normalized fragment text to a previous binding and is updated in place.
    """
    if len(registry) == 0:
        raise ValueError("cannot broadcast to an empty registry")
    agents = registry.sorted_agents
    out = []
    for frag in fragments:
        key = frag.normalized
        if cache is not None and key in cache:
            out.append(cache[key])
            continue
        best: Optional[Binding] = None
        for agent in agents:
            score = scorer(preview(agent, frag))
            if best is None or score > best.confidence:
                best = Binding(agent.id, agent.intent, score)
        if cache is not None:
            cache[key] = best
        out.append(best)
    return out


def registry_from_records(records: Sequence[Mapping], alpha: float = 1.0) -> AgentRegistry:
    """Build agents from definition records.

    Record shapes: ``{id, intent, examples[, scoring]}``, ``{id, intent, keywords,
    weight_per_hit}`` or ``{id, fixed_scores}``; any may carry ``has_preview``.
    All example-backed agents share one jointly trained model.
    """
    if not records:
        raise ValueError("no agent records")
    trained = [r for r in records if "examples" in r]
    model = None
    if trained:
        pairs = [(text, r["intent"]) for r in trained for text in r["examples"]]
        model = train_intent_model(pairs, alpha=alpha, intents={r["intent"] for r in trained})

    registry = AgentRegistry()
    for rec in records:
        if "id" not in rec:
            raise ValueError(f"agent record without id: {rec!r}")
        desc = AgentDescriptor(
            str(rec["id"]), str(rec.get("intent", rec["id"])), bool(rec.get("has_preview", True))
        )
        if "examples" in rec:
            registry.add(IntentModelAgent(desc, model, rec.get("scoring", "proportion")))
        elif "keywords" in rec:
            registry.add(KeywordAgent(desc, rec["keywords"], rec.get("weight_per_hit", 1.0)))
        elif "fixed_scores" in rec:
            registry.add(StubAgent(desc, rec["fixed_scores"], rec.get("default", 0.0)))
        else:
            raise ValueError(f"agent {desc.id!r} has no examples, keywords or fixed_scores")
    return registry


def read_agent_records(path) -> list[dict]:
    """Read agent definitions from ``.jsonl`` (one per line) or ``.json`` files."""
    path = Path(path)
    raw = path.read_text(encoding="utf-8")
    if path.suffix == ".jsonl":
        return [json.loads(line) for line in raw.splitlines() if line.strip()]
    data = json.loads(raw)
    if isinstance(data, dict):
        data = data.get("agents", [])
    if not isinstance(data, list):
        raise ValueError(f"{path}: expected a list of agent records")
    return data


def load_registry(path, alpha: float = 1.0) -> AgentRegistry:
    return registry_from_records(read_agent_records(path), alpha=alpha)
