from __future__ import annotations

import pytest

from conftest import stub
from multiparse.agents import AgentDescriptor, AgentRegistry, Binding, StubAgent
from multiparse.splitter import SplitConfig, Utterance
from multiparse.tree import (
    ParseNode,
    ScoringMode,
    aggregate,
    backup,
    build_tree,
    evaluate_tree,
    explain,
    optimal_parse,
    score_node,
    select_node,
)

FLIGHTS_AND_MEALS = "List available flights and show me meal options for my next flight"


def scored(text, registry, mode=ScoringMode.AVERAGE, cfg=SplitConfig()):
    root = build_tree(Utterance.from_text(text), cfg)
    evaluate_tree(root, registry, mode)
    backup(root)
    return root


def leaf(score=None, text="x y"):
    node = ParseNode((Utterance.from_text(text),))
    if score is not None:
        node.bindings = [Binding("a", "a", score)]
        node.eval_score = score
    return node


class TestBuildTree:
    def test_flights_and_meals_root_has_one_child(self):
        root = build_tree(Utterance.from_text(FLIGHTS_AND_MEALS))
        assert len(root.children) == 1
        child = root.children[0][2]
        assert [c.text for c in child.candidates] == [
            "List available flights",
            "show me meal options for my next flight",
        ]
        assert child.depth == 1

    def test_no_split_points(self):
        root = build_tree(Utterance.from_text("List all borrower data"))
        assert root.children == []
        assert list(root.iter_nodes()) == [root]

    def test_lattice_stored_once(self):
        root = build_tree(Utterance.from_text("a and b and c"), SplitConfig(min_fragment_words=1))
        nodes = list(root.iter_nodes())
        assert len(nodes) == 4
        full = [n for n in nodes if n.key == ("a", "b", "c")]
        assert len(full) == 1
        parents = [n for n in nodes if any(child is full[0] for _, _, child in n.children)]
        assert len(parents) == 2

    def test_max_depth_limits_expansion(self):
        cfg = SplitConfig(min_fragment_words=1)
        root = build_tree(Utterance.from_text("a and b and c"), cfg, max_depth=1)
        assert sorted(len(n.candidates) for n in root.iter_nodes()) == [1, 2, 2]

    def test_rejects_bad_depth(self):
        with pytest.raises(ValueError):
            build_tree(Utterance.from_text("a b"), max_depth=0)

    def test_rejects_blank(self):
        with pytest.raises(ValueError):
            build_tree(Utterance.from_text("   "))

    def test_node_needs_candidates(self):
        with pytest.raises(ValueError):
            ParseNode(())


class TestScoreNode:
    def node(self, *confs):
        u = Utterance.from_text("x y")
        n = ParseNode(tuple(u for _ in confs))
        n.bindings = [Binding(f"a{i}", "i", c) for i, c in enumerate(confs)]
        return n

    def test_average(self):
        assert score_node(self.node(0.97, 0.92), ScoringMode.AVERAGE) == pytest.approx(0.945, abs=1e-12)

    def test_joint(self):
        assert score_node(self.node(0.97, 0.92), ScoringMode.JOINT) == pytest.approx(0.8924, abs=1e-12)

    @pytest.mark.parametrize("mode", list(ScoringMode))
    def test_single_candidate_identity(self, mode):
        assert score_node(self.node(0.37), mode) == 0.37

    def test_mode_accepts_string(self):
        assert score_node(self.node(0.5, 0.5), "joint") == 0.25

    def test_rejects_unscored(self):
        with pytest.raises(ValueError, match="unscored"):
            score_node(leaf())

    def test_aggregate_unknown_mode(self):
        with pytest.raises(ValueError):
            aggregate([0.5], "median")


class TestBackup:
    def test_leaf(self):
        node = leaf(0.7)
        backup(node)
        assert node.backed_up_score == 0.7

    def test_child_dominates(self):
        root, child = leaf(0.6), leaf(0.945)
        root.children.append((None, 0, child))
        backup(root)
        assert root.backed_up_score == 0.945
        assert child.backed_up_score == 0.945

    def test_root_dominates(self):
        root, child = leaf(0.8), leaf(0.3)
        root.children.append((None, 0, child))
        backup(root)
        assert root.backed_up_score == 0.8
        assert child.backed_up_score == 0.3

    def test_rejects_unscored(self):
        root = leaf(0.5)
        root.children.append((None, 0, leaf()))
        with pytest.raises(ValueError):
            backup(root)

    def test_select_requires_backup(self):
        with pytest.raises(ValueError):
            select_node(leaf(0.5))


class TestOptimalParse:
    def test_no_split(self):
        root = scored("List all borrower data", AgentRegistry([stub("A", default=0.9)]))
        outcome = optimal_parse(root)
        assert outcome.texts == ["List all borrower data"]
        assert [f.agent_id for f in outcome.fragments] == ["A"]
        assert outcome.score == 0.9
        assert outcome.depth == 0

    def test_flights_and_meals(self):
        registry = AgentRegistry([
            stub("flight-agent", {"list available flights": 0.97, FLIGHTS_AND_MEALS: 0.55}),
            stub("meal-agent", {"show me meal options for my next flight": 0.92, FLIGHTS_AND_MEALS: 0.6}),
        ])
        outcome = optimal_parse(scored(FLIGHTS_AND_MEALS, registry))
        assert [f.agent_id for f in outcome.fragments] == ["flight-agent", "meal-agent"]
        assert outcome.score == pytest.approx(0.945)

    def test_tie_prefers_shallow(self):
        text = "show flights and list meals then book cabs"
        registry = AgentRegistry([
            stub("A", {
                "show flights": 0.75,
                "list meals then book cabs": 0.75,
                "list meals": 0.75,
                "book cabs": 0.75,
            }, default=0.5),
        ])
        root = scored(text, registry)
        deep = [n for n in root.iter_nodes() if len(n.candidates) == 3]
        assert deep and deep[0].eval_score == 0.75
        outcome = optimal_parse(root)
        assert outcome.depth == 1
        assert outcome.texts == ["show flights", "list meals then book cabs"]

    def test_mode_recorded(self):
        root = scored("List all borrower data", AgentRegistry([stub("A", default=0.9)]), ScoringMode.JOINT)
        assert optimal_parse(root, ScoringMode.JOINT).to_dict()["mode"] == "joint"


def test_evaluate_tree_caches_per_fragment():
    calls = []

    class Counting(StubAgent):
        def confidence(self, u):
            calls.append(u.normalized)
            return super().confidence(u)

    agent = Counting(AgentDescriptor("c", "c"), {}, 0.5)
    scored("a and b and c", AgentRegistry([agent]), cfg=SplitConfig(min_fragment_words=1))
    assert len(calls) == len(set(calls))


def test_explain_marks_selection_and_shared_states():
    root = scored("a and b and c", AgentRegistry([stub("A", {"a": 0.9, "b": 0.9, "c": 0.9})]),
                  cfg=SplitConfig(min_fragment_words=1))
    dump = explain(root)
    assert dump.count("<= selected") == 1
    assert "(see above)" in dump
    selected = next(line for line in dump.splitlines() if "<= selected" in line)
    assert "depth=2" in selected
