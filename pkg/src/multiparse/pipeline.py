"""Evaluate-and-execute flow: parse, score, select, sequence, execute.

One call to :func:`handle_event` is one cycle for one user event. Looping
over events is the caller's job (see the ``chat`` command).
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Optional, Sequence

from multiparse.agents import AgentRegistry, EvaluationResult
from multiparse.splitter import DEFAULT_CONFIG, SplitConfig, Utterance
from multiparse.tree import (
    ParseNode,
    ParseOutcome,
    ScoringMode,
    backup,
    build_tree,
    evaluate_tree,
    optimal_parse,
)

logger = logging.getLogger(__name__)

NO_CAPABLE_AGENT = "no capable agent"


@dataclass(frozen=True)
class PipelineConfig:
    delta: float = 0.4
    mode: ScoringMode = ScoringMode.AVERAGE
    max_depth: int = 3
    split: SplitConfig = DEFAULT_CONFIG

    def __post_init__(self):
        object.__setattr__(self, "mode", ScoringMode(self.mode))
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError(f"delta must lie in [0, 1], got {self.delta}")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")

    @classmethod
    def from_dict(cls, data: Mapping) -> "PipelineConfig":
        unknown = set(data) - {"delta", "mode", "max_depth", "split"}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kwargs: dict[str, Any] = {}
        if "delta" in data:
            kwargs["delta"] = float(data["delta"])
        if "mode" in data:
            kwargs["mode"] = ScoringMode(data["mode"])
        if "max_depth" in data:
            kwargs["max_depth"] = int(data["max_depth"])
        if "split" in data:
            kwargs["split"] = SplitConfig.from_dict(data["split"])
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "mode": self.mode.value,
            "max_depth": self.max_depth,
            "split": self.split.to_dict(),
        }


@dataclass(frozen=True)
class PlanEntry:
    agent_id: str
    intent: str
    fragment: Utterance
    confidence: float


@dataclass
class ExecutionPlan:
    entries: list[PlanEntry]
    provenance: ParseOutcome
    parse_seconds: float
    status: str = "ok"
    tree: Optional[ParseNode] = field(default=None, repr=False)

    @property
    def is_empty(self) -> bool:
        return not self.entries


@dataclass(frozen=True)
class AgentResponse:
    agent_id: str
    fragment: Utterance
    payload: Any
    error: Optional[str] = None


Executor = Callable[[str, Utterance], Any]


def echo_executor(agent_id: str, fragment: Utterance) -> str:
    return f"{agent_id} handled: {fragment.text}"


def default_scorer(p: EvaluationResult) -> float:
    return p.confidence


def default_selector(entries: Sequence[PlanEntry], delta: float) -> list[PlanEntry]:
    return [e for e in entries if e.confidence >= delta]


def default_sequencer(selected: Sequence[PlanEntry]) -> list[PlanEntry]:
    # Stable: entries sharing a first token (distributed context) keep parse order.
    return sorted(selected, key=lambda e: e.fragment.first_origin)


def parse_event(
    text: str,
    registry: AgentRegistry,
    cfg: PipelineConfig = PipelineConfig(),
    scorer=default_scorer,
) -> tuple[ParseOutcome, ParseNode]:
    """Build, broadcast, score and back up the tree; return the optimal parse."""
    if len(registry) == 0:
        raise ValueError("registry is empty")
    u = Utterance.from_text(text, cfg.split.punctuation_marks)
    root = build_tree(u, cfg.split, cfg.max_depth)
    evaluate_tree(root, registry, cfg.mode, cache={}, scorer=scorer)
    backup(root)
    return optimal_parse(root, cfg.mode), root


def handle_event(
    text: str,
    registry: AgentRegistry,
    cfg: PipelineConfig = PipelineConfig(),
    executor: Optional[Executor] = echo_executor,
    scorer=default_scorer,
    selector=default_selector,
    sequencer=default_sequencer,
) -> tuple[ExecutionPlan, list[AgentResponse]]:
    """Run one parse-select-execute cycle.

    ``parse_seconds`` on the plan covers parsing, broadcast and backup only.
    Executor failures are captured per entry in ``AgentResponse.error``.
    Passing ``executor=None`` plans without executing.
    """
    start = time.perf_counter()
    outcome, root = parse_event(text, registry, cfg, scorer)
    elapsed = time.perf_counter() - start

    entries = [
        PlanEntry(f.agent_id, f.intent, f.utterance, f.confidence) for f in outcome.fragments
    ]
    selected = sequencer(selector(entries, cfg.delta))
    plan = ExecutionPlan(
        list(selected), outcome, elapsed, "ok" if selected else NO_CAPABLE_AGENT, tree=root
    )
    responses: list[AgentResponse] = []
    if executor is None:
        return plan, responses
    for entry in plan.entries:
        try:
            payload = executor(entry.agent_id, entry.fragment)
            responses.append(AgentResponse(entry.agent_id, entry.fragment, payload))
        except Exception as exc:
            logger.warning("agent %s failed executing %r", entry.agent_id, entry.fragment.text, exc_info=True)
            responses.append(AgentResponse(entry.agent_id, entry.fragment, None, f"{type(exc).__name__}: {exc}"))
    return plan, responses


def plan_record(plan: ExecutionPlan, responses: Sequence[AgentResponse], include_timing: bool = False) -> dict:
    """Batch response record for one event."""
    record = {
        "status": plan.status,
        "plan": [
            {"agent": e.agent_id, "fragment": e.fragment.text, "confidence": e.confidence}
            for e in plan.entries
        ],
        "responses": [
            {"agent": r.agent_id, "fragment": r.fragment.text, "response": r.payload, "error": r.error}
            for r in responses
        ],
        "parse_score": plan.provenance.score,
    }
    if include_timing:
        record["elapsed_ms"] = plan.parse_seconds * 1000.0
    return record


def process_record(
    request: Mapping,
    registry: AgentRegistry,
    cfg: PipelineConfig = PipelineConfig(),
    executor: Optional[Executor] = echo_executor,
    include_timing: bool = False,
) -> dict:
    """Handle one ``{"text": ...}`` batch request and return its response record."""
    text = request.get("text") if isinstance(request, Mapping) else None
    if not isinstance(text, str) or not text.strip():
        raise ValueError("batch request needs a non-blank 'text' field")
    plan, responses = handle_event(text, registry, cfg, executor)
    return {"text": text, **plan_record(plan, responses, include_timing)}
