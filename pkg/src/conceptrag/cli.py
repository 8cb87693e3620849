"""Command-line interface: parse AMR, distill concepts, screen datasets, run
pipelines, and render reports.

Exit codes: 0 success, 1 usage error, 2 data error, 3 backend error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .corpus import DatasetError, format_stats_tsv, group_by_k, load_dataset, screen_pairs
from .distill import DistillConfig, DistillError, distill_concepts
from .metrics import (
    LONG_INTERVAL,
    NORMAL_INTERVAL,
    EvalCurve,
    MetricsError,
    RecordView,
    accuracy_curve,
    build_report,
    parse_interval,
    render_accuracy_svg,
    write_report,
)
from .penman import AmrParseError, GraphError, parse_amr, parse_corpus
from .ragpipe import (
    BACKEND_ERROR_NAMES,
    AmrParseClient,
    BackendError,
    CompressionMode,
    LlmBackendSpec,
    build_run_manifest,
    run_pipeline,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_BACKEND = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); we map usage errors to 1
        raise _UsageError(message)


def _read_input(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    return Path(path).read_text(encoding="utf-8")


def _load_distill_config(args) -> DistillConfig:
    config = DistillConfig.from_file(args.config) if args.config else DistillConfig()
    # explicit flags win over the config file
    updates = {}
    if args.traversal is not None:
        updates["traversal"] = args.traversal
    if args.seed is not None:
        updates["seed"] = args.seed
    if updates:
        config = DistillConfig.from_dict({**config.to_dict(), **updates})
    if args.traversal is not None and args.traversal != "dfs" and config.seed is None:
        raise _UsageError(f"--traversal {args.traversal} requires --seed")
    return config


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="conceptrag", description=__doc__)
    parser.add_argument("--version", action="version", version=f"conceptrag {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = _Parser(add_help=False)
    common.add_argument("--config", help="distill config JSON file")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="seed for random traversal modes")
    common.add_argument(
        "--mode",
        choices=["vanilla", "concepts", "keywords", "summary"],
        help="compression mode",
    )
    common.add_argument(
        "--traversal",
        choices=["dfs", "global-random", "local-random"],
        default=None,
        help="concept traversal order",
    )
    common.add_argument(
        "--interval",
        action="append",
        help="evaluation interval: normal, long, or a,b (repeatable)",
    )

    p_parse = sub.add_parser("parse", parents=[common], help="parse PENMAN to a JSON graph")
    p_parse.add_argument("input", help="PENMAN file, or - for stdin")

    p_distill = sub.add_parser("distill", parents=[common], help="distill concepts")
    p_distill.add_argument("penman_file", help="PENMAN graph file")
    p_distill.add_argument("source_file", help="source document text file")
    p_distill.add_argument("--json", action="store_true", help="emit JSON with spans")

    p_stats = sub.add_parser("stats", parents=[common], help="dataset counts per K")
    p_stats.add_argument("dataset", help="JSONL dataset file")
    p_stats.add_argument("--no-screen", action="store_true", help="skip hasanswer screening")
    p_stats.add_argument("--s-pop-max", type=int, default=None, help="drop pairs with s_pop >= N")

    p_eval = sub.add_parser("eval", parents=[common], help="run the QA pipeline")
    p_eval.add_argument("dataset", help="JSONL dataset file")
    p_eval.add_argument("--backend", required=True, help="backend spec JSON file")
    p_eval.add_argument("--parse-endpoint", help="text-to-AMR parse endpoint URL")
    p_eval.add_argument("--no-screen", action="store_true", help="skip hasanswer screening")
    p_eval.add_argument("--s-pop-max", type=int, default=None)

    p_report = sub.add_parser("report", parents=[common], help="render metrics for a run")
    p_report.add_argument("results_dir", help="directory written by eval")
    p_report.add_argument("--baseline", help="baseline results directory (for delta)")
    p_report.add_argument("--svg", help="also write an accuracy-curve SVG to this path")
    return parser


def cmd_parse(args) -> int:
    text = _read_input(args.input)
    graphs = parse_corpus(text)
    if not graphs:
        print("error: no PENMAN graphs in input", file=sys.stderr)
        return EXIT_DATA
    rendered = graphs[0].to_dict() if len(graphs) == 1 else [g.to_dict() for g in graphs]
    output = json.dumps(rendered, indent=2, ensure_ascii=False)
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "graph.json").write_text(output + "\n", encoding="utf-8")
    else:
        print(output)
    return EXIT_OK


def cmd_distill(args) -> int:
    config = _load_distill_config(args)
    graph = parse_amr(_read_input(args.penman_file))
    source = _read_input(args.source_file)
    concept_set = distill_concepts(
        graph, source, mode=config.traversal_mode(), config=config
    )
    if args.json:
        payload = [
            {
                "text": c.text,
                "provenance": c.provenance,
                "sentence": c.sentence_index,
                "span": list(c.source_span) if c.source_span else None,
            }
            for c in concept_set.concepts
        ]
        print(json.dumps(payload, indent=2, ensure_ascii=False))
    else:
        for concept in concept_set.concepts:
            print(concept.text)
    return EXIT_OK


def cmd_stats(args) -> int:
    pairs = load_dataset(args.dataset)
    if not args.no_screen:
        pairs = screen_pairs(pairs, s_pop_max=args.s_pop_max)
    _, rows = group_by_k(pairs)
    sys.stdout.write(format_stats_tsv(rows))
    return EXIT_OK


def cmd_eval(args) -> int:
    if not args.out:
        raise _UsageError("eval requires --out")
    if not args.mode:
        raise _UsageError("eval requires --mode")
    config = _load_distill_config(args)
    backend = LlmBackendSpec.from_file(args.backend)
    mode = CompressionMode(args.mode, traversal=config.traversal_mode())
    parse_client = AmrParseClient(args.parse_endpoint) if args.parse_endpoint else None

    pairs = load_dataset(args.dataset)
    if not args.no_screen:
        pairs = screen_pairs(pairs, s_pop_max=args.s_pop_max)
    records = run_pipeline(pairs, mode, backend, config=config, parse_client=parse_client)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "records.json", "w", encoding="utf-8") as handle:
        json.dump([r.to_dict() for r in records], handle, indent=2, ensure_ascii=False)
        handle.write("\n")
    manifest = build_run_manifest(mode, backend, config, args.dataset)
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as handle:
        json.dump(manifest, handle, indent=2, ensure_ascii=False)
        handle.write("\n")
    failures = sum(1 for r in records if r.error)
    print(f"evaluated {len(records)} pairs ({failures} failed); results in {out_dir}")
    # partial failures are recorded and non-fatal; a run where every pair
    # died on the backend is a backend outage
    if records and failures == len(records) and any(
        r.error and r.error.split(":")[0] in BACKEND_ERROR_NAMES for r in records
    ):
        print("backend error: every pair failed against the backend", file=sys.stderr)
        return EXIT_BACKEND
    return EXIT_OK


def _load_records(results_dir: str) -> list[dict]:
    path = Path(results_dir) / "records.json"
    if not path.exists():
        raise DatasetError(f"no records.json in {results_dir}")
    return json.loads(path.read_text(encoding="utf-8"))


def cmd_report(args) -> int:
    records = _load_records(args.results_dir)
    baseline = _load_records(args.baseline) if args.baseline else None
    intervals = (
        [parse_interval(text) for text in args.interval]
        if args.interval
        else [NORMAL_INTERVAL, LONG_INTERVAL]
    )
    report = build_report(records, intervals, baseline_records=baseline, label=args.results_dir)
    out_dir = Path(args.out) if args.out else Path(args.results_dir)
    write_report(report, out_dir)
    if args.svg:
        curves = [
            EvalCurve({int(k): v for k, v in report["accuracy_per_k"].items()}, label="run")
        ]
        if baseline:
            base_curve = accuracy_curve([RecordView.from_dict(d) for d in baseline],
                                        label="baseline")
            curves.append(base_curve)
        Path(args.svg).write_text(
            render_accuracy_svg(curves, title="Accuracy vs K"), encoding="utf-8"
        )
    sys.stdout.write((out_dir / "report.tsv").read_text(encoding="utf-8"))
    return EXIT_OK


_COMMANDS = {
    "parse": cmd_parse,
    "distill": cmd_distill,
    "stats": cmd_stats,
    "eval": cmd_eval,
    "report": cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename}", file=sys.stderr)
        return EXIT_DATA
    except (AmrParseError, GraphError, DistillError, DatasetError, MetricsError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND


def entrypoint() -> None:  # console_scripts hook
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
