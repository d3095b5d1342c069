"""Parse-state tree: expansion, broadcast scoring, max backup and selection.

Each node holds a state, the ordered candidates obtained by applying some
sequence of splits to the root utterance. States reached by different split
orders are stored once, so the tree is really a DAG.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Optional

from multiparse.agents import AgentRegistry, Binding, Scorer, _identity_scorer, broadcast
from multiparse.splitter import DEFAULT_CONFIG, SplitConfig, SplitPoint, Utterance, find_split_points


class ScoringMode(str, Enum):
    AVERAGE = "average"
    JOINT = "joint"


def state_key(candidates) -> tuple[str, ...]:
    return tuple(c.normalized for c in candidates)


@dataclass(eq=False)
class ParseNode:
    candidates: tuple[Utterance, ...]
    depth: int = 0
    children: list[tuple[SplitPoint, int, "ParseNode"]] = field(default_factory=list)
    bindings: list[Optional[Binding]] = field(default_factory=list)
    eval_score: Optional[float] = None
    backed_up_score: Optional[float] = None

    def __post_init__(self):
        if not self.candidates:
            raise ValueError("a parse node needs at least one candidate")
        if not self.bindings:
            self.bindings = [None] * len(self.candidates)

    @property
    def key(self) -> tuple[str, ...]:
        return state_key(self.candidates)

    def iter_nodes(self) -> Iterator["ParseNode"]:
        """Each distinct node once, breadth first in child order."""
        seen = {id(self)}
        queue = deque([self])
        while queue:
            node = queue.popleft()
            yield node
            for _, _, child in node.children:
                if id(child) not in seen:
                    seen.add(id(child))
                    queue.append(child)


@dataclass(frozen=True)
class FragmentBinding:
    utterance: Utterance
    agent_id: str
    intent: str
    confidence: float

    @property
    def text(self) -> str:
        return self.utterance.text


@dataclass(frozen=True)
class ParseOutcome:
    fragments: tuple[FragmentBinding, ...]
    score: float
    depth: int
    mode: ScoringMode = ScoringMode.AVERAGE

    @property
    def texts(self) -> list[str]:
        return [f.text for f in self.fragments]

    @property
    def intents(self) -> list[str]:
        return [f.intent for f in self.fragments]

    def to_dict(self) -> dict:
        return {
            "fragments": [
                {"fragment": f.text, "agent": f.agent_id, "intent": f.intent, "confidence": f.confidence}
                for f in self.fragments
            ],
            "score": self.score,
            "depth": self.depth,
            "mode": self.mode.value,
        }


def build_tree(u: Utterance, cfg: SplitConfig = DEFAULT_CONFIG, max_depth: int = 3) -> ParseNode:
    """Expand every reachable state up to ``max_depth`` splits from the root.

    Expansion is breadth first, so a memoized state is always expanded from
    its shallowest occurrence.
    """
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    if not u.tokens:
        raise ValueError("cannot parse a blank utterance")
    root = ParseNode((u,), depth=0)
    index = {root.key: root}
    queue = deque([root])
    while queue:
        node = queue.popleft()
        if node.depth >= max_depth:
            continue
        child_keys = set()
        for pos, cand in enumerate(node.candidates):
            for sp in find_split_points(cand, cfg):
                state = node.candidates[:pos] + sp.fragments + node.candidates[pos + 1 :]
                key = state_key(state)
                if key in child_keys:
                    continue
                child_keys.add(key)
                child = index.get(key)
                if child is None:
                    child = ParseNode(state, depth=node.depth + 1)
                    index[key] = child
                    queue.append(child)
                node.children.append((sp, pos, child))
    return root


def aggregate(confidences, mode: ScoringMode) -> float:
    values = list(confidences)
    if mode is ScoringMode.AVERAGE:
        return math.fsum(values) / len(values)
    if mode is ScoringMode.JOINT:
        return math.prod(values)
    raise ValueError(f"unknown scoring mode {mode!r}")


def score_node(n: ParseNode, mode: ScoringMode = ScoringMode.AVERAGE) -> float:
    """Average (or product) of the best-agent confidences of the node's candidates."""
    if any(b is None for b in n.bindings):
        raise ValueError("node has unscored candidates; broadcast first")
    n.eval_score = aggregate((b.confidence for b in n.bindings), ScoringMode(mode))
    return n.eval_score


def evaluate_tree(
    root: ParseNode,
    registry: AgentRegistry,
    mode: ScoringMode = ScoringMode.AVERAGE,
    cache: Optional[dict] = None,
    scorer: Scorer = _identity_scorer,
) -> ParseNode:
    """Broadcast every node's candidates and score each node."""
    cache = {} if cache is None else cache
    for node in root.iter_nodes():
        node.bindings = broadcast(node.candidates, registry, cache=cache, scorer=scorer)
        score_node(node, mode)
    return root


def backup(root: ParseNode) -> ParseNode:
    """Set each node's backed-up score to the max of its own and its children's."""
    done: dict[int, float] = {}

    def visit(node: ParseNode) -> float:
        if id(node) in done:
            return done[id(node)]
        if node.eval_score is None:
            raise ValueError("backup requires every node to be scored")
        best = node.eval_score
        for _, _, child in node.children:
            best = max(best, visit(child))
        node.backed_up_score = best
        done[id(node)] = best
        return best

    visit(root)
    return root


def optimal_parse(root: ParseNode, mode: ScoringMode = ScoringMode.AVERAGE) -> ParseOutcome:
    """Shallowest state whose own score equals the root's backed-up score.

    Ties prefer fewer candidates, then the left-most child order.
    """
    node = select_node(root)
    fragments = tuple(
        FragmentBinding(c, b.agent_id, b.intent, b.confidence)
        for c, b in zip(node.candidates, node.bindings)
    )
    return ParseOutcome(fragments, node.eval_score, node.depth, ScoringMode(mode))


def select_node(root: ParseNode) -> ParseNode:
    target = root.backed_up_score
    if target is None:
        raise ValueError("run backup before selecting a parse")
    best = None
    best_rank = None
    seen = {id(root)}
    queue = deque([(root, 0)])
    order = 0
    while queue:
        node, dist = queue.popleft()
        if node.eval_score == target:
            rank = (dist, len(node.candidates), order)
            if best_rank is None or rank < best_rank:
                best, best_rank = node, rank
        order += 1
        for _, _, child in node.children:
            if id(child) not in seen and child.backed_up_score == target:
                seen.add(id(child))
                queue.append((child, dist + 1))
    return best


def explain(root: ParseNode) -> str:
    """Indented dump of states, scores and split edges; the chosen state is marked."""
    chosen = select_node(root) if root.backed_up_score is not None else None
    numbers = {id(n): i for i, n in enumerate(root.iter_nodes())}
    printed: set[int] = set()
    lines: list[str] = []

    def fmt(x: Optional[float]) -> str:
        return "-" if x is None else f"{x:.4f}"

    def visit(node: ParseNode, indent: int) -> None:
        pad = "  " * indent
        num = numbers[id(node)]
        if id(node) in printed:
            lines.append(f"{pad}#{num} (see above)")
            return
        printed.add(id(node))
        mark = "  <= selected" if node is chosen else ""
        lines.append(
            f"{pad}#{num} depth={node.depth} eval={fmt(node.eval_score)} "
            f"backup={fmt(node.backed_up_score)}{mark}"
        )
        for cand, b in zip(node.candidates, node.bindings):
            bound = "unscored" if b is None else f"{b.agent_id} {b.confidence:.4f}"
            lines.append(f"{pad}  | {cand.text!r} -> {bound}")
        for sp, pos, child in node.children:
            lines.append(f"{pad}  split {sp.kind.value} at {list(sp.anchor_indices)} on candidate {pos}")
            visit(child, indent + 2)

    visit(root, 0)
    return "\n".join(lines)
