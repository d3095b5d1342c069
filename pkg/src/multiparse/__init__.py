"""Decentralized multi-intent parsing and agent orchestration.

An utterance is expanded into every reachable split state, each candidate
fragment is broadcast to a registry of independent agents, node scores are
backed up through the tree and the best-scoring state is routed for
execution.
"""

from multiparse.agents import (
    AgentDescriptor,
    AgentRegistry,
    Binding,
    EvaluationResult,
    IntentModel,
    IntentModelAgent,
    KeywordAgent,
    StubAgent,
    broadcast,
    preview,
    train_intent_model,
)
from multiparse.evalharness import (
    DatasetInstance,
    MetricsReport,
    OutcomeCategory,
    classify_outcome,
    run_benchmark,
)
from multiparse.pipeline import (
    AgentResponse,
    ExecutionPlan,
    PipelineConfig,
    handle_event,
)
from multiparse.splitter import (
    SplitConfig,
    SplitKind,
    SplitPoint,
    Token,
    TokenKind,
    Utterance,
    find_split_points,
    tokenize,
)
from multiparse.text import normalize_for_comparison
from multiparse.tree import (
    ParseNode,
    ParseOutcome,
    ScoringMode,
    backup,
    build_tree,
    optimal_parse,
    score_node,
)

__version__ = "0.1.0"

__all__ = [
    "AgentDescriptor",
    "AgentRegistry",
    "AgentResponse",
    "Binding",
    "DatasetInstance",
    "EvaluationResult",
    "ExecutionPlan",
    "IntentModel",
    "IntentModelAgent",
    "KeywordAgent",
    "MetricsReport",
    "OutcomeCategory",
    "ParseNode",
    "ParseOutcome",
    "PipelineConfig",
    "ScoringMode",
    "SplitConfig",
    "SplitKind",
    "SplitPoint",
    "StubAgent",
    "Token",
    "TokenKind",
    "Utterance",
    "backup",
    "broadcast",
    "build_tree",
    "classify_outcome",
    "find_split_points",
    "handle_event",
    "normalize_for_comparison",
    "optimal_parse",
    "preview",
    "run_benchmark",
    "score_node",
    "tokenize",
    "train_intent_model",
]
