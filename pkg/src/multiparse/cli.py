"""Command-line entry point: ``train``, ``parse``, ``bench`` and ``chat``.

Exit codes: 0 success, 1 usage, 2 IO/config, 3 runtime.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, TextIO

from multiparse.agents import (
    AgentRegistry,
    read_agent_records,
    registry_from_records,
    train_intent_model,
)
from multiparse.evalharness import load_dataset, run_benchmark
from multiparse.pipeline import PipelineConfig, handle_event, plan_record, process_record
from multiparse.tree import explain

logger = logging.getLogger("multiparse")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_RUNTIME = 0, 1, 2, 3


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _dumps(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, indent=2)


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--agents", required=True, help="agent definition file (.json or .jsonl)")
    common.add_argument("--config", help="pipeline/lexicon config file (.json)")
    common.add_argument("--delta", type=float, help="selection threshold in [0, 1]")
    common.add_argument("--mode", choices=["average", "joint"], help="node scoring mode")
    common.add_argument("--max-depth", type=int, dest="max_depth", help="maximum splits per path")
    common.add_argument("--alpha", type=float, default=1.0, help="smoothing for example-trained agents")
    common.add_argument("--format", choices=["human", "structured"], default="human")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="multiparse", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", parents=[common], help="train example-backed agents")
    p.add_argument("--out", help="write the trained model as JSON")

    p = sub.add_parser("parse", parents=[common], help="parse one utterance or a batch file")
    p.add_argument("text", nargs="?", help="utterance to parse")
    p.add_argument("--batch", help="JSONL file of {\"text\": ...} requests")
    p.add_argument("--explain", action="store_true", help="dump the scored parse tree")
    p.add_argument("--timing", action="store_true", help="include elapsed_ms in structured output")

    p = sub.add_parser("bench", parents=[common], help="run a benchmark dataset")
    p.add_argument("dataset", help="JSONL dataset with text/parses/intents")
    p.add_argument("--out", help="also write the structured report here")
    p.add_argument("--records", help="write per-instance records (JSONL) here")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--timing", action="store_true", help="include timing in the structured report")

    sub.add_parser("chat", parents=[common], help="interactive loop, one event per line")
    return parser


def _load_config(args) -> PipelineConfig:
    data = {}
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise CliError(f"config file not found: {path}", EXIT_IO)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(f"cannot read config {path}: {exc}", EXIT_IO)
    for key in ("delta", "mode", "max_depth"):
        value = getattr(args, key, None)
        if value is not None:
            data[key] = value
    try:
        return PipelineConfig.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise CliError(f"invalid config: {exc}", EXIT_IO)


def _load_registry(args) -> AgentRegistry:
    path = Path(args.agents)
    if not path.is_file():
        raise CliError(f"agent file not found: {path}", EXIT_IO)
    try:
        return registry_from_records(read_agent_records(path), alpha=args.alpha)
    except (OSError, KeyError, TypeError, ValueError) as exc:
        raise CliError(f"cannot load agents from {path}: {exc}", EXIT_IO)


def cmd_train(args, out: TextIO) -> int:
    path = Path(args.agents)
    if not path.is_file():
        raise CliError(f"agent file not found: {path}", EXIT_IO)
    try:
        records = read_agent_records(path)
        registry_from_records(records, alpha=args.alpha)
    except (OSError, KeyError, TypeError, ValueError) as exc:
        raise CliError(f"cannot load agents from {path}: {exc}", EXIT_IO)
    trained = [r for r in records if "examples" in r]
    if not trained:
        raise CliError("no example-backed agents to train", EXIT_USAGE)
    pairs = [(text, r["intent"]) for r in trained for text in r["examples"]]
    model = train_intent_model(pairs, alpha=args.alpha, intents={r["intent"] for r in trained})
    if args.out:
        try:
            Path(args.out).write_text(_dumps(model.to_dict()) + "\n", encoding="utf-8")
        except OSError as exc:
            raise CliError(f"cannot write {args.out}: {exc}", EXIT_IO)
    summary = {
        "agents": [r["id"] for r in trained],
        "intents": list(model.intents),
        "vocabulary_size": len(model.vocabulary),
        "examples": len(pairs),
        "priors": model.priors,
    }
    if args.format == "structured":
        out.write(_dumps(summary) + "\n")
    else:
        out.write(
            f"trained {len(summary['agents'])} agents over {len(model.intents)} intents, "
            f"{len(pairs)} examples, vocabulary {len(model.vocabulary)}\n"
        )
        for intent in model.intents:
            out.write(f"  {intent:<20} prior {model.priors[intent]:.4f}\n")
    return EXIT_OK


def _render_plan_human(plan, responses, out: TextIO, delta: float) -> None:
    outcome = plan.provenance
    for i, frag in enumerate(outcome.fragments, 1):
        flag = "" if frag.confidence >= delta else "  (below delta)"
        out.write(f"[{i}] {frag.text}\n    -> {frag.agent_id} ({frag.intent}) confidence {round(frag.confidence, 4)}{flag}\n")
    out.write(f"score ({outcome.mode.value}): {round(outcome.score, 4)}  depth: {outcome.depth}\n")
    if plan.is_empty:
        out.write(f"plan: {plan.status}\n")
    for r in responses:
        if r.error:
            out.write(f"! {r.agent_id} failed: {r.error}\n")
        else:
            out.write(f"> {r.payload}\n")


def cmd_parse(args, out: TextIO) -> int:
    if args.batch and args.text:
        raise CliError("give either TEXT or --batch, not both", EXIT_USAGE)
    if not args.batch and (args.text is None or not args.text.strip()):
        raise CliError("parse needs a non-blank utterance", EXIT_USAGE)
    cfg = _load_config(args)
    registry = _load_registry(args)

    if args.batch:
        path = Path(args.batch)
        try:
            lines = path.read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            raise CliError(f"cannot read batch file {path}: {exc}", EXIT_IO)
        for lineno, line in enumerate(lines, 1):
            if not line.strip():
                continue
            try:
                request = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CliError(f"{path}:{lineno}: {exc}", EXIT_IO)
            try:
                record = process_record(request, registry, cfg, include_timing=args.timing)
            except ValueError as exc:
                record = {"error": str(exc)}
            out.write(json.dumps(record, ensure_ascii=False) + "\n")
        return EXIT_OK

    plan, responses = handle_event(args.text, registry, cfg)
    if args.format == "structured":
        record = {"text": args.text, **plan_record(plan, responses, args.timing)}
        record["outcome"] = plan.provenance.to_dict()
        if args.explain:
            record["tree"] = explain(plan.tree)
        out.write(_dumps(record) + "\n")
    else:
        _render_plan_human(plan, responses, out, cfg.delta)
        if args.explain:
            out.write("\n" + explain(plan.tree) + "\n")
    return EXIT_OK


def cmd_bench(args, out: TextIO) -> int:
    cfg = _load_config(args)
    registry = _load_registry(args)
    path = Path(args.dataset)
    try:
        dataset = load_dataset(path)
    except OSError as exc:
        raise CliError(f"cannot read dataset {path}: {exc}", EXIT_IO)
    if not dataset:
        raise CliError(f"dataset {path} is empty", EXIT_IO)
    report = run_benchmark(dataset, registry, cfg, workers=args.workers)
    structured = _dumps(report.to_dict(include_timing=args.timing)) + "\n"
    if args.format == "structured":
        out.write(structured)
    else:
        out.write(report.to_table() + "\n")
    try:
        if args.out:
            Path(args.out).write_text(structured, encoding="utf-8")
        if args.records:
            with open(args.records, "w", encoding="utf-8") as fh:
                for rec in report.records:
                    fh.write(json.dumps(rec.to_dict(), ensure_ascii=False) + "\n")
    except OSError as exc:
        raise CliError(f"cannot write report: {exc}", EXIT_IO)
    return EXIT_OK


def cmd_chat(args, out: TextIO, stdin: Optional[TextIO] = None) -> int:
    stdin = sys.stdin if stdin is None else stdin
    cfg = _load_config(args)
    registry = _load_registry(args)
    out.write("type 'exit' to quit\n")
    while True:
        out.write("> ")
        out.flush()
        line = stdin.readline()
        if not line:
            break
        text = line.strip()
        if not text:
            continue
        if text.lower() == "exit":
            break
        try:
            plan, responses = handle_event(text, registry, cfg)
        except Exception as exc:
            out.write(f"error: {exc}\n")
            continue
        if plan.is_empty:
            out.write(f"{plan.status}\n")
            continue
        for entry in plan.entries:
            out.write(f"  {entry.agent_id} <- {entry.fragment.text!r} ({round(entry.confidence, 4)})\n")
        for r in responses:
            if r.error:
                out.write(f"  ! {r.agent_id} failed: {r.error}\n")
            else:
                out.write(f"  {r.payload}\n")
    return EXIT_OK


COMMANDS = {"train": cmd_train, "parse": cmd_parse, "bench": cmd_bench, "chat": cmd_chat}


def main(argv=None, out: Optional[TextIO] = None, stdin: Optional[TextIO] = None) -> int:
    out = sys.stdout if out is None else out
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "chat":
            return cmd_chat(args, out, stdin)
        return COMMANDS[args.command](args, out)
    except CliError as exc:
        sys.stderr.write(f"multiparse: {exc}\n")
        return exc.code
    except Exception as exc:
        logger.debug("unhandled error", exc_info=True)
        sys.stderr.write(f"multiparse: {type(exc).__name__}: {exc}\n")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
