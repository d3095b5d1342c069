"""Benchmark harness: datasets, four-way outcome classification, timing."""

from __future__ import annotations

import difflib
import json
import logging
import re
import statistics
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional, Sequence

from multiparse.agents import AgentRegistry
from multiparse.pipeline import PipelineConfig, handle_event
from multiparse.text import normalize_for_comparison
from multiparse.tree import ParseOutcome

logger = logging.getLogger(__name__)

__all__ = [
    "DatasetInstance",
    "EvalRecord",
    "MetricsReport",
    "OutcomeCategory",
    "align_fragments",
    "classify_outcome",
    "convert_atis",
    "convert_mixatis",
    "load_dataset",
    "normalize_for_comparison",
    "run_benchmark",
    "write_dataset",
]


class OutcomeCategory(str, Enum):
    CPCA = "CPCA"
    CPWA = "CPWA"
    WPCA = "WPCA"
    WPWA = "WPWA"

    @property
    def parse_correct(self) -> bool:
        return self in (OutcomeCategory.CPCA, OutcomeCategory.CPWA)

    @property
    def agent_correct(self) -> bool:
        return self in (OutcomeCategory.CPCA, OutcomeCategory.WPCA)

    @classmethod
    def of(cls, parse_ok: bool, agent_ok: bool) -> "OutcomeCategory":
        return {
            (True, True): cls.CPCA,
            (True, False): cls.CPWA,
            (False, True): cls.WPCA,
            (False, False): cls.WPWA,
        }[(parse_ok, agent_ok)]


@dataclass(frozen=True)
class DatasetInstance:
    text: str
    gold_parses: tuple[str, ...]
    gold_intents: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "gold_parses", tuple(self.gold_parses))
        object.__setattr__(self, "gold_intents", tuple(self.gold_intents))

    @property
    def is_valid(self) -> bool:
        return (
            isinstance(self.text, str)
            and bool(self.text.strip())
            and len(self.gold_parses) == len(self.gold_intents) >= 1
        )

    @property
    def is_multi_intent(self) -> bool:
        return len(self.gold_parses) > 1

    def to_dict(self) -> dict:
        return {"text": self.text, "parses": list(self.gold_parses), "intents": list(self.gold_intents)}


def align_fragments(predicted: Sequence[str], gold: Sequence[str]) -> list[int]:
    """Index of the best-matching gold parse for each predicted fragment.

    Similarity is the difflib ratio of normalized strings; ties go to the
    earliest gold parse.
    """
    gold_norm = [normalize_for_comparison(g) for g in gold]
    out = []
    for frag in predicted:
        p = normalize_for_comparison(frag)
        ratios = [difflib.SequenceMatcher(None, p, g).ratio() for g in gold_norm]
        out.append(max(range(len(ratios)), key=lambda i: (ratios[i], -i)))
    return out


def classify_outcome(
    predicted: ParseOutcome, gold: DatasetInstance, delta: float = 0.0
) -> OutcomeCategory:
    """Cross parse correctness with agent correctness.

    The parse is correct when the normalized fragment sequence equals the gold
    sequence. For a correct parse, agents are checked position by position;
    otherwise the predicted intent multiset must equal the gold multiset.
    Fragments bound below ``delta`` count as unrouted.
    """
    texts = [normalize_for_comparison(f.text) for f in predicted.fragments]
    intents = [f.intent if f.confidence >= delta else None for f in predicted.fragments]
    gold_texts = [normalize_for_comparison(g) for g in gold.gold_parses]
    parse_ok = texts == gold_texts
    if parse_ok:
        agent_ok = intents == list(gold.gold_intents)
    else:
        agent_ok = Counter(intents) == Counter(gold.gold_intents)
    return OutcomeCategory.of(parse_ok, agent_ok)


@dataclass
class EvalRecord:
    instance: DatasetInstance
    outcome: ParseOutcome
    category: OutcomeCategory
    parse_seconds: float
    alignment: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "text": self.instance.text,
            "gold_parses": list(self.instance.gold_parses),
            "gold_intents": list(self.instance.gold_intents),
            "predicted": self.outcome.texts,
            "predicted_intents": self.outcome.intents,
            "category": self.category.value,
            "alignment": self.alignment,
        }


def _timing(values: list[float]) -> dict:
    if not values:
        return {"mean": None, "median": None}
    return {"mean": statistics.fmean(values), "median": statistics.median(values)}


@dataclass
class MetricsReport:
    instances: int
    skipped: int
    multi_intent: int
    single_intent: int
    counts: dict[str, int]
    rates: dict[str, float]
    single_intent_accuracy: Optional[float]
    timing: dict[str, dict]
    records: list[EvalRecord] = field(default_factory=list, repr=False)

    @property
    def correct_parse_rate(self) -> float:
        return self.rates["CPCA"] + self.rates["CPWA"]

    @property
    def correct_agent_rate(self) -> float:
        return self.rates["CPCA"] + self.rates["WPCA"]

    def to_dict(self, include_timing: bool = True) -> dict:
        data = {
            "instances": self.instances,
            "skipped": self.skipped,
            "multi_intent": self.multi_intent,
            "single_intent": self.single_intent,
            "counts": self.counts,
            "rates": self.rates,
            "correct_parse_rate": self.correct_parse_rate,
            "correct_agent_rate": self.correct_agent_rate,
            "single_intent_accuracy": self.single_intent_accuracy,
        }
        if include_timing:
            data["parse_time_seconds"] = self.timing
        return data

    def to_table(self) -> str:
        lines = [f"{'Category':<10}{'Rate':>8}{'Count':>8}"]
        for cat in OutcomeCategory:
            lines.append(f"{cat.value:<10}{self.rates[cat.value]:>8.2f}{self.counts[cat.value]:>8d}")
        lines.append(f"{'CPCA+CPWA':<10}{self.correct_parse_rate:>8.2f}")
        lines.append(f"{'CPCA+WPCA':<10}{self.correct_agent_rate:>8.2f}")
        acc = "n/a" if self.single_intent_accuracy is None else f"{self.single_intent_accuracy:.2f}"
        lines.append(f"single-intent accuracy: {acc}  (n={self.single_intent})")
        lines.append("")
        lines.append(f"{'Parse time (s)':<16}{'Single-intent':>15}{'Multi-intent':>15}")
        for stat in ("mean", "median"):
            cells = []
            for group in ("single_intent", "multi_intent"):
                v = self.timing[group][stat]
                cells.append("n/a" if v is None else f"{v:.4f}")
            lines.append(f"{stat:<16}{cells[0]:>15}{cells[1]:>15}")
        lines.append(f"instances: {self.instances}  skipped: {self.skipped}")
        return "\n".join(lines)


def _evaluate_one(inst: DatasetInstance, registry: AgentRegistry, cfg: PipelineConfig) -> EvalRecord:
    plan, _ = handle_event(inst.text, registry, cfg, executor=None)
    outcome = plan.provenance
    category = classify_outcome(outcome, inst, cfg.delta)
    alignment = [] if category.parse_correct else align_fragments(outcome.texts, inst.gold_parses)
    return EvalRecord(inst, outcome, category, plan.parse_seconds, alignment)


def run_benchmark(
    dataset: Sequence[DatasetInstance],
    registry: AgentRegistry,
    cfg: PipelineConfig = PipelineConfig(),
    workers: int = 1,
) -> MetricsReport:
    """Run the pipeline over ``dataset`` and aggregate categories and timings.

    Malformed instances are skipped and counted. Parse time per instance
    covers tree construction, broadcast and backup, not execution.
    """
    if not dataset:
        raise ValueError("dataset is empty")
    valid = [inst for inst in dataset if isinstance(inst, DatasetInstance) and inst.is_valid]
    skipped = len(dataset) - len(valid)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(lambda i: _evaluate_one(i, registry, cfg), valid))
    else:
        records = [_evaluate_one(inst, registry, cfg) for inst in valid]

    multi = [r for r in records if r.instance.is_multi_intent]
    single = [r for r in records if not r.instance.is_multi_intent]
    counts = Counter(r.category.value for r in multi)
    counts = {c.value: counts.get(c.value, 0) for c in OutcomeCategory}
    rates = {k: (v / len(multi) if multi else 0.0) for k, v in counts.items()}
    single_acc = (
        sum(1 for r in single if r.category.agent_correct) / len(single) if single else None
    )
    timing = {
        "single_intent": _timing([r.parse_seconds for r in single]),
        "multi_intent": _timing([r.parse_seconds for r in multi]),
    }
    return MetricsReport(
        instances=len(dataset),
        skipped=skipped,
        multi_intent=len(multi),
        single_intent=len(single),
        counts=counts,
        rates=rates,
        single_intent_accuracy=single_acc,
        timing=timing,
        records=records,
    )


def _instance_from_record(rec) -> DatasetInstance:
    if not isinstance(rec, dict):
        return DatasetInstance("", (), ())
    parses = rec.get("parses") or []
    intents = rec.get("intents") or []
    if isinstance(parses, str):
        parses = [parses]
    if isinstance(intents, str):
        intents = intents.split("#")
    text = rec.get("text") if isinstance(rec.get("text"), str) else ""
    return DatasetInstance(text, tuple(map(str, parses)), tuple(map(str, intents)))


def load_dataset(path) -> list[DatasetInstance]:
    """Read one JSON record per line with ``text``, ``parses`` and ``intents``.

    Lines that do not decode become invalid instances so that the benchmark
    can count them as skipped.
    """
    out = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError:
            logger.warning("%s:%d: not a JSON record", path, lineno)
            out.append(DatasetInstance("", (), ()))
            continue
        out.append(_instance_from_record(rec))
    return out


def write_dataset(instances: Iterable[DatasetInstance], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for inst in instances:
            fh.write(json.dumps(inst.to_dict(), ensure_ascii=False) + "\n")


_CONNECTIVE = re.compile(r"\s*(?:,\s*and\b|,|;|\band then\b|\band\b|\bthen\b)\s*", re.IGNORECASE)


def _guess_parses(text: str, n: int) -> tuple[str, ...]:
    if n == 1:
        return (text,)
    pieces = [p for p in _CONNECTIVE.split(text) if p.strip()]
    # Ambiguous or unsplittable: leave empty so the instance is skipped.
    return tuple(p.strip() for p in pieces) if len(pieces) == n else ()


def convert_atis(seq_in_path, label_path) -> list[DatasetInstance]:
    """JointBERT-style ATIS: ``seq.in`` (one utterance per line) plus ``label``."""
    texts = Path(seq_in_path).read_text(encoding="utf-8").splitlines()
    labels = Path(label_path).read_text(encoding="utf-8").splitlines()
    if len(texts) != len(labels):
        raise ValueError("seq.in and label have different lengths")
    out = []
    for text, label in zip(texts, labels):
        intents = tuple(label.strip().split("#"))
        out.append(DatasetInstance(text.strip(), _guess_parses(text.strip(), len(intents)), intents))
    return out


def convert_mixatis(path) -> list[DatasetInstance]:
    """MixATIS block format: ``token slot`` lines, then a ``intent#intent`` line,
    blocks separated by blank lines."""
    out = []
    tokens: list[str] = []
    for line in Path(path).read_text(encoding="utf-8").splitlines() + [""]:
        fields = line.split()
        if not fields:
            tokens = []
            continue
        if len(fields) >= 2:
            tokens.append(fields[0])
            continue
        text = " ".join(tokens)
        intents = tuple(fields[0].split("#"))
        out.append(DatasetInstance(text, _guess_parses(text, len(intents)), intents))
        tokens = []
    return out
