from __future__ import annotations

import json

import pytest

from conftest import stub
from multiparse.agents import AgentRegistry
from multiparse.evalharness import (
    DatasetInstance,
    OutcomeCategory,
    align_fragments,
    classify_outcome,
    convert_atis,
    convert_mixatis,
    load_dataset,
    run_benchmark,
    write_dataset,
)
from multiparse.pipeline import PipelineConfig
from multiparse.splitter import Utterance
from multiparse.tree import FragmentBinding, ParseOutcome

AIRPORT_MEAL = DatasetInstance(
    "Give me a list of all airports in Beijing and list the available meals for my next flight",
    ("Give me a list of all airports in Beijing", "list the available meals for my next flight"),
    ("airport", "meal"),
)


def outcome(*pairs, conf=0.9):
    frags = tuple(FragmentBinding(Utterance.from_text(t), f"{i}-agent", i, conf) for t, i in pairs)
    return ParseOutcome(frags, conf, len(pairs) - 1)


class TestClassify:
    def test_cpca(self):
        pred = outcome(("give me a list of all airports in beijing", "airport"),
                       ("List the available meals for my next flight.", "meal"))
        assert classify_outcome(pred, AIRPORT_MEAL) is OutcomeCategory.CPCA

    def test_cpwa_wrong_first_agent(self):
        pred = outcome((AIRPORT_MEAL.gold_parses[0], "meal"), (AIRPORT_MEAL.gold_parses[1], "meal"))
        assert classify_outcome(pred, AIRPORT_MEAL) is OutcomeCategory.CPWA

    def test_swapped_agents_are_wrong_on_correct_parse(self):
        pred = outcome((AIRPORT_MEAL.gold_parses[0], "meal"), (AIRPORT_MEAL.gold_parses[1], "airport"))
        assert classify_outcome(pred, AIRPORT_MEAL) is OutcomeCategory.CPWA

    def test_unsplit_single_fragment_is_wpwa(self):
        pred = outcome((AIRPORT_MEAL.text, "airport"))
        assert classify_outcome(pred, AIRPORT_MEAL) is OutcomeCategory.WPWA

    def test_wpca_needs_matching_multiset(self):
        pred = outcome(("Give me a list", "airport"), ("of all airports in Beijing and list the available meals for my next flight", "meal"))
        assert classify_outcome(pred, AIRPORT_MEAL) is OutcomeCategory.WPCA

    def test_below_delta_counts_as_unrouted(self):
        pred = outcome(*zip(AIRPORT_MEAL.gold_parses, AIRPORT_MEAL.gold_intents), conf=0.3)
        assert classify_outcome(pred, AIRPORT_MEAL, delta=0.0) is OutcomeCategory.CPCA
        assert classify_outcome(pred, AIRPORT_MEAL, delta=0.5) is OutcomeCategory.CPWA

    def test_category_flags(self):
        assert OutcomeCategory.of(True, False) is OutcomeCategory.CPWA
        assert OutcomeCategory.WPCA.agent_correct and not OutcomeCategory.WPCA.parse_correct


def test_align_fragments():
    assert align_fragments(["list the meals", "airports in beijing"], AIRPORT_MEAL.gold_parses) == [1, 0]


class TestRunBenchmark:
    registry = AgentRegistry([
        stub("nlq", {"list all borrower data": 0.9}, intent="nlq"),
        stub("viz", {"plot it": 0.9}, intent="viz"),
    ])

    def test_single_intent_accuracy(self):
        report = run_benchmark([DatasetInstance("List all borrower data", ("List all borrower data",), ("nlq",))],
                               self.registry)
        assert report.single_intent_accuracy == 1.0
        assert report.multi_intent == 0
        assert report.rates == {"CPCA": 0.0, "CPWA": 0.0, "WPCA": 0.0, "WPWA": 0.0}

    def test_malformed_skipped(self):
        data = [
            DatasetInstance("List all borrower data and plot it", ("List all borrower data", "plot it"), ("nlq", "viz")),
            DatasetInstance("", ("x",), ("nlq",)),
            DatasetInstance("a b", ("a", "b"), ("nlq",)),
        ]
        report = run_benchmark(data, self.registry, PipelineConfig())
        assert report.instances == 3
        assert report.skipped == 2
        assert report.counts["CPCA"] == 1
        assert report.correct_parse_rate == 1.0 and report.correct_agent_rate == 1.0

    def test_empty_dataset(self):
        with pytest.raises(ValueError):
            run_benchmark([], self.registry)

    def test_workers_match_serial(self):
        data = [
            DatasetInstance("List all borrower data and plot it", ("List all borrower data", "plot it"), ("nlq", "viz")),
            DatasetInstance("List all borrower data", ("List all borrower data",), ("nlq",)),
        ] * 5
        serial = run_benchmark(data, self.registry)
        threaded = run_benchmark(data, self.registry, workers=4)
        assert serial.to_dict(include_timing=False) == threaded.to_dict(include_timing=False)
        assert [r.to_dict() for r in serial.records] == [r.to_dict() for r in threaded.records]

    def test_report_rendering(self):
        data = [DatasetInstance("List all borrower data and plot it", ("List all borrower data", "plot it"), ("nlq", "viz"))]
        report = run_benchmark(data, self.registry)
        table = report.to_table()
        assert "CPCA" in table and "single-intent accuracy: n/a" in table
        assert report.timing["multi_intent"]["mean"] > 0
        assert "parse_time_seconds" in report.to_dict()
        assert "parse_time_seconds" not in report.to_dict(include_timing=False)
        json.dumps(report.to_dict())


class TestIO:
    def test_roundtrip(self, tmp_path):
        path = tmp_path / "data.jsonl"
        write_dataset([AIRPORT_MEAL], path)
        assert load_dataset(path) == [AIRPORT_MEAL]

    def test_bad_lines_become_invalid(self, tmp_path):
        path = tmp_path / "data.jsonl"
        path.write_text('{"text": "a b", "parses": ["a b"], "intents": "x"}\nnot json\n[1]\n\n')
        data = load_dataset(path)
        assert [d.is_valid for d in data] == [True, False, False]

    def test_convert_atis(self, tmp_path):
        (tmp_path / "seq.in").write_text("list flights to boston and show fares\nshow me meals\nfoo bar baz\n")
        (tmp_path / "label").write_text("atis_flight#atis_airfare\natis_meal\na#b#c\n")
        data = convert_atis(tmp_path / "seq.in", tmp_path / "label")
        assert data[0].gold_parses == ("list flights to boston", "show fares")
        assert data[1].gold_parses == ("show me meals",)
        assert not data[2].is_valid

    def test_convert_atis_length_mismatch(self, tmp_path):
        (tmp_path / "seq.in").write_text("a\nb\n")
        (tmp_path / "label").write_text("x\n")
        with pytest.raises(ValueError):
            convert_atis(tmp_path / "seq.in", tmp_path / "label")

    def test_convert_mixatis(self, tmp_path):
        path = tmp_path / "train.txt"
        path.write_text(
            "list O\nflights O\nand O\nshow O\nfares O\natis_flight#atis_airfare\n\n"
            "show O\nmeals O\natis_meal\n"
        )
        data = convert_mixatis(path)
        assert [d.text for d in data] == ["list flights and show fares", "show meals"]
        assert data[0].gold_parses == ("list flights", "show fares")
        assert data[0].gold_intents == ("atis_flight", "atis_airfare")
