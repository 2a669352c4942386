"""Command-line entry point.

Subcommands: gen-synthetic, ingest, extract, represent, build-ids, train,
retrieve, eval, pipeline. Exit codes: 0 success, 1 usage or config error,
2 stage failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import identifiers as ids
from .errors import ConfigError, EventRetrievalError
from .pipeline import STAGES, Pipeline, load_config
from .report import format_metrics_table
from .retrieval import constrained_beam_search
from .seq2seq import load_checkpoint
from .synthetic import write_synthetic


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _build_parser() -> _Parser:
    parser = _Parser(prog="eventret", description=__doc__)
    parser.add_argument("--config", "-c", help="pipeline config file (JSON)")
    parser.add_argument("--workdir", help="override paths.workdir from the config")
    parser.add_argument("--seed", type=int, help="override identifier/model/shuffle seeds")
    parser.add_argument("--verbose", "-v", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-synthetic", help="write a deterministic synthetic corpus")
    gen.add_argument("--n-docs", type=int, default=64)
    gen.add_argument("--events-per-doc", type=int, default=3)
    gen.add_argument("--gen-seed", type=int, default=7)
    gen.add_argument("--out-dir", default="data")

    for stage in STAGES:
        stage_parser = sub.add_parser(stage, help=f"run the {stage} stage")
        stage_parser.add_argument("--force", action="store_true", help="run even if up to date")

    run = sub.add_parser("pipeline", help="run every stage in order")
    run.add_argument("--force", action="store_true")

    retrieve = sub.add_parser("retrieve", help="rank documents for one query")
    retrieve.add_argument("--query", required=True)
    retrieve.add_argument("--top-k", type=int, default=10)
    return parser


def _require_config(args) -> Pipeline:
    if not args.config:
        raise ConfigError("this command needs --config")
    config = load_config(args.config, workdir_override=args.workdir, seed_override=args.seed)
    return Pipeline(config)


def _cmd_gen_synthetic(args) -> int:
    out = Path(args.out_dir)
    corpus = write_synthetic(
        args.n_docs,
        args.events_per_doc,
        args.gen_seed,
        out / "docs.jsonl",
        out / "queries.jsonl",
        out / "taxonomy.jsonl",
    )
    print(f"wrote {len(corpus.documents)} docs, {len(corpus.queries)} queries to {out}/")
    return 0


def _cmd_stage(args, stage: str) -> int:
    pipeline = _require_config(args)
    pipeline.art.workdir.mkdir(parents=True, exist_ok=True)
    with pipeline._lock():
        status = pipeline.run_stage(stage, force=args.force)
    print(f"[{stage}] {'skipped (up to date)' if status == 'skipped' else 'done'}")
    if stage == "eval" and status == "ran":
        print(format_metrics_table(pipeline.read_metrics()), end="")
    return 0


def _cmd_pipeline(args) -> int:
    pipeline = _require_config(args)
    statuses = pipeline.run_all(force=args.force)
    for stage, status in statuses.items():
        print(f"[{stage}] {'skipped (up to date)' if status == 'skipped' else 'done'}")
    print(format_metrics_table(pipeline.read_metrics()), end="")
    return 0


def _cmd_retrieve(args) -> int:
    pipeline = _require_config(args)
    art = pipeline.art
    if not art.checkpoint.exists():
        raise EventRetrievalError(
            f"no checkpoint at {art.checkpoint}; run `eventret --config {args.config} train` first"
        )
    if not art.index.exists():
        raise EventRetrievalError(
            f"no identifier index at {art.index}; run `eventret --config {args.config} build-ids` first"
        )
    model = load_checkpoint(art.checkpoint)
    index = ids.load_index(art.index)
    trie = ids.build_trie(index)
    width = max(args.top_k, pipeline.config.beam_width)
    result = constrained_beam_search(model, args.query, trie, width)
    for hit in result.hits[:args.top_k]:
        print(f"{hit.doc_id}\t{hit.logprob:.4f}\t{' '.join(hit.tokens)}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "gen-synthetic":
            return _cmd_gen_synthetic(args)
        if args.command == "pipeline":
            return _cmd_pipeline(args)
        if args.command == "retrieve":
            return _cmd_retrieve(args)
        return _cmd_stage(args, args.command)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except EventRetrievalError as exc:
        stage = args.command if args.command in STAGES else args.command
        print(f"error in {stage}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
