"""Config-driven pipeline: ingest -> extract -> represent -> build-ids -> train -> eval.

Every stage persists its output under the workdir and is skipped when that
output is newer than all of its inputs (the config file counts as an input
everywhere), so an interrupted run resumes where it stopped. A lockfile keeps
two runs out of one workdir.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

from . import identifiers as ids
from .agents import build_agents
from .corpus import Corpus, ingest_corpus, save_corpus
from .errors import ConfigError, EventRetrievalError
from .extraction import ExrConfig, extract_corpus, read_extraction_records, write_extraction_records
from .jsonl import read_records, write_records
from .report import render_hits_figure, render_loss_figure, write_metrics
from .representation import (
    MODES,
    RepresentationConfig,
    build_query_units,
    build_units,
    read_units,
    write_units,
)
from .retrieval import MetricsReport, evaluate
from .seq2seq import (
    ModelConfig,
    Seq2SeqModel,
    TrainConfig,
    build_vocab,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .taxonomy import load_taxonomy

logger = logging.getLogger(__name__)

STAGES = ("ingest", "extract", "represent", "build-ids", "train", "eval")


@dataclass
class PipelineConfig:
    documents_path: Path
    queries_path: Path
    workdir: Path
    taxonomy_path: Path | None = None
    agents: list[dict] = field(default_factory=lambda: [{"agent_id": "rule", "kind": "rule"}])
    exr: ExrConfig = field(default_factory=ExrConfig)
    representation: RepresentationConfig = field(default_factory=RepresentationConfig)
    scheme: str = "ETIds"
    first_tokens: int = 16
    branching: int = 10
    leaf_cap: int = 10
    identifier_seed: int = 13
    model: ModelConfig = field(default_factory=ModelConfig)
    training: TrainConfig = field(default_factory=TrainConfig)
    beam_width: int = 20
    hits_ks: tuple[int, ...] = (1, 10, 20)
    config_path: Path | None = None  # set when loaded from a file

    def __post_init__(self):
        if self.scheme not in ids.SCHEMES:
            raise ConfigError(f"identifier scheme must be one of {ids.SCHEMES}, got {self.scheme!r}")
        if self.scheme == "ETIds" and self.taxonomy_path is None:
            raise ConfigError("ETIds needs paths.taxonomy in the config")
        if self.beam_width < max(self.hits_ks):
            raise ConfigError(
                f"retrieval.beam_width ({self.beam_width}) must be >= max of hits_ks "
                f"({max(self.hits_ks)})"
            )

    @property
    def variant(self) -> str:
        return f"{self.representation.mode}+{self.scheme}"


def _take(section: dict, cls, context: str):
    try:
        return cls(**section)
    except TypeError as exc:
        raise ConfigError(f"{context}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"{context}: {exc}") from exc


def load_config(path, workdir_override=None, seed_override=None) -> PipelineConfig:
    """Parse and validate the JSON pipeline config."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc

    paths = raw.get("paths", {})
    for key in ("documents", "queries", "workdir"):
        if key not in paths:
            raise ConfigError(f"config is missing paths.{key}")
    base = path.parent

    def _resolve(p):
        p = Path(p)
        return p if p.is_absolute() else base / p

    extraction = dict(raw.get("extraction", {}))
    agents = extraction.pop("agents", [{"agent_id": "rule", "kind": "rule"}])
    exr = _take(extraction, ExrConfig, "extraction")
    representation = _take(dict(raw.get("representation", {})), RepresentationConfig, "representation")

    ident = dict(raw.get("identifiers", {}))
    scheme = ident.pop("scheme", "ETIds")
    ident_kwargs = {
        "first_tokens": ident.pop("first_tokens", 16),
        "branching": ident.pop("branching", 10),
        "leaf_cap": ident.pop("leaf_cap", 10),
        "identifier_seed": ident.pop("seed", 13),
    }
    if ident:
        raise ConfigError(f"identifiers: unknown keys {sorted(ident)}")

    model = _take(dict(raw.get("model", {})), ModelConfig, "model")
    training = _take(dict(raw.get("training", {})), TrainConfig, "training")

    retrieval = dict(raw.get("retrieval", {}))
    beam_width = retrieval.pop("beam_width", 20)
    hits_ks = tuple(retrieval.pop("hits_ks", (1, 10, 20)))
    if retrieval:
        raise ConfigError(f"retrieval: unknown keys {sorted(retrieval)}")

    if seed_override is not None:
        ident_kwargs["identifier_seed"] = seed_override
        model = ModelConfig(**{**model.__dict__, "init_seed": seed_override})
        training.shuffle_seed = seed_override

    workdir = Path(workdir_override) if workdir_override else _resolve(paths["workdir"])
    return PipelineConfig(
        documents_path=_resolve(paths["documents"]),
        queries_path=_resolve(paths["queries"]),
        workdir=workdir,
        taxonomy_path=_resolve(paths["taxonomy"]) if "taxonomy" in paths else None,
        agents=agents,
        exr=exr,
        representation=representation,
        scheme=scheme,
        model=model,
        training=training,
        beam_width=beam_width,
        hits_ks=hits_ks,
        config_path=path,
        **ident_kwargs,
    )


class Artifacts:
    """Fixed workdir layout shared by the stages and the CLI."""

    def __init__(self, workdir: Path):
        self.workdir = Path(workdir)
        self.documents = self.workdir / "corpus.docs.jsonl"
        self.queries = self.workdir / "corpus.queries.jsonl"
        self.extraction = self.workdir / "extraction.jsonl"
        self.units = self.workdir / "units.jsonl"
        self.index = self.workdir / "index.jsonl"
        self.checkpoint = self.workdir / "checkpoint.npz"
        self.loss_trace = self.workdir / "loss_trace.jsonl"
        self.metrics = self.workdir / "metrics.jsonl"
        self.metrics_table = self.workdir / "metrics.txt"
        self.figures = self.workdir / "figures"
        self.lockfile = self.workdir / ".lock"


def _mtime(path: Path) -> float:
    return path.stat().st_mtime


def _up_to_date(outputs, inputs) -> bool:
    outputs = [Path(p) for p in outputs]
    inputs = [Path(p) for p in inputs if p is not None]
    if not all(p.exists() for p in outputs):
        return False
    if not inputs:
        return True
    return min(_mtime(p) for p in outputs) >= max(_mtime(p) for p in inputs if p.exists())


class Pipeline:
    def __init__(self, config: PipelineConfig):
        self.config = config
        self.art = Artifacts(config.workdir)

    # Each stage reads persisted inputs and writes persisted outputs, so any
    # stage can run standalone as long as its inputs exist.

    def stage_inputs(self, stage: str) -> list[Path]:
        cfg = [self.config.config_path] if self.config.config_path else []
        table = {
            "ingest": [self.config.documents_path, self.config.queries_path],
            "extract": [self.art.documents],
            "represent": [self.art.extraction],
            "build-ids": [self.art.documents, self.art.extraction]
            + ([self.config.taxonomy_path] if self.config.scheme == "ETIds" else []),
            "train": [self.art.units, self.art.index, self.art.queries],
            "eval": [self.art.checkpoint, self.art.index, self.art.queries],
        }
        return table[stage] + cfg

    def stage_outputs(self, stage: str) -> list[Path]:
        table = {
            "ingest": [self.art.documents, self.art.queries],
            "extract": [self.art.extraction],
            "represent": [self.art.units],
            "build-ids": [self.art.index],
            "train": [self.art.checkpoint, self.art.loss_trace],
            "eval": [self.art.metrics, self.art.metrics_table],
        }
        return table[stage]

    def run_stage(self, stage: str, force: bool = False) -> str:
        if stage not in STAGES:
            raise ConfigError(f"unknown stage {stage!r}")
        if not force and _up_to_date(self.stage_outputs(stage), self.stage_inputs(stage)):
            logger.info("[%s] skipped (up to date)", stage)
            return "skipped"
        self.art.workdir.mkdir(parents=True, exist_ok=True)
        getattr(self, "_run_" + stage.replace("-", "_"))()
        logger.info("[%s] done", stage)
        return "ran"

    def run_all(self, force: bool = False) -> dict[str, str]:
        self.art.workdir.mkdir(parents=True, exist_ok=True)
        with self._lock():
            return {stage: self.run_stage(stage, force=force) for stage in STAGES}

    def _lock(self):
        return _WorkdirLock(self.art.lockfile)

    # -- stages --------------------------------------------------------------

    def _load_corpus(self) -> Corpus:
        return ingest_corpus(self.art.documents, self.art.queries)

    def _run_ingest(self):
        corpus = ingest_corpus(self.config.documents_path, self.config.queries_path)
        save_corpus(corpus, self.art.documents, self.art.queries)

    def _run_extract(self):
        corpus = self._load_corpus()
        agents = build_agents(self.config.agents)
        records = extract_corpus(corpus, agents, self.config.exr)
        write_extraction_records(self.art.extraction, records)

    def _run_represent(self):
        records = read_extraction_records(self.art.extraction)
        units = []
        for record in records:
            units.extend(build_units(record, self.config.representation))
        write_units(self.art.units, units)

    def _run_build_ids(self):
        corpus = self._load_corpus()
        records = read_extraction_records(self.art.extraction)
        if self.config.scheme == "TIds":
            index = ids.build_tids(corpus, first_tokens=self.config.first_tokens)
        elif self.config.scheme == "EIds":
            index = ids.build_eids(
                corpus, records,
                branching=self.config.branching,
                leaf_cap=self.config.leaf_cap,
                seed=self.config.identifier_seed,
            )
        else:
            taxonomy = load_taxonomy(self.config.taxonomy_path)
            index = ids.build_etids(corpus, records, taxonomy)
        ids.save_index(index, self.art.index)

    def _run_train(self):
        corpus = self._load_corpus()
        units = read_units(self.art.units)
        units = units + build_query_units(corpus, "train")
        index = ids.load_index(self.art.index)
        vocab = build_vocab(units, index)
        model = Seq2SeqModel.create(vocab, self.config.model)
        model, trace = train(model, units, index, self.config.training)
        save_checkpoint(model, self.art.checkpoint)
        write_records(self.art.loss_trace, [{"epoch": i, "loss": v} for i, v in enumerate(trace)])
        render_loss_figure(trace, self.art.figures / "loss_curve.png")

    def _run_eval(self):
        corpus = self._load_corpus()
        model = load_checkpoint(self.art.checkpoint)
        index = ids.load_index(self.art.index)
        trie = ids.build_trie(index)
        report = evaluate(
            model,
            corpus.queries_for_split("test"),
            trie,
            index,
            width=self.config.beam_width,
            ks=self.config.hits_ks,
            variant=self.config.variant,
        )
        write_metrics([report], self.art.metrics, self.art.metrics_table)
        render_hits_figure([report], self.art.figures / "hits_at_k.png")

    def read_metrics(self) -> list[MetricsReport]:
        by_variant: dict[str, MetricsReport] = {}
        for record in read_records(self.art.metrics):
            report = by_variant.setdefault(
                record["variant"],
                MetricsReport(variant=record["variant"], hits={}, n_queries=record["n_queries"]),
            )
            report.hits[record["k"]] = record["hits"]
        return list(by_variant.values())


class _WorkdirLock:
    def __init__(self, path: Path):
        self.path = Path(path)

    def __enter__(self):
        try:
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise EventRetrievalError(
                f"workdir is locked by another run ({self.path}); remove the file if stale"
            ) from None
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        return self

    def __exit__(self, exc_type, exc, tb):
        try:
            self.path.unlink()
        except FileNotFoundError:
            pass
        return False
