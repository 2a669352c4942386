"""Turn extraction records into training units.

EReps mode indexes a document through its event mentions; ERReps mode adds
one unit per causal relation, with the two mentions joined by a separator
token in cause -> effect order. Retrieval queries become units of their own
task so a single multi-task batch can mix all three.
"""

from __future__ import annotations

from dataclasses import dataclass

from .jsonl import iter_records, write_records

MODES = ("EReps", "ERReps")
TASKS = ("IndexEvent", "IndexRelation", "RetrievalQuery")

DEFAULT_SEPARATOR = "[CAUSES]"


@dataclass(frozen=True)
class TrainingUnit:
    input_text: str
    doc_id: str
    task: str


@dataclass(frozen=True)
class RepresentationConfig:
    mode: str = "ERReps"
    relation_separator: str = DEFAULT_SEPARATOR

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.relation_separator.strip():
            raise ValueError("relation_separator must be non-empty")


def _sanitize(mention: str, separator: str) -> str:
    # The separator must never appear inside a mention or the relation unit
    # would not split back into (head, tail); rewrite any occurrence.
    if separator in mention:
        mention = mention.replace(separator, " ")
    return " ".join(mention.split())


def build_event_units(record) -> list[TrainingUnit]:
    """One IndexEvent unit per event, in event order."""
    return [
        TrainingUnit(input_text=e.mention, doc_id=record.doc_id, task="IndexEvent")
        for e in record.events
    ]


def build_relation_units(record, config: RepresentationConfig) -> list[TrainingUnit]:
    """One IndexRelation unit per relation: head mention, separator, tail mention."""
    mentions = {e.event_id: e.mention for e in record.events}
    units = []
    for rel in record.relations:
        head = _sanitize(mentions[rel.head_event_id], config.relation_separator)
        tail = _sanitize(mentions[rel.tail_event_id], config.relation_separator)
        text = f"{head} {config.relation_separator} {tail}"
        units.append(TrainingUnit(input_text=text, doc_id=record.doc_id, task="IndexRelation"))
    return units


def build_units(record, config: RepresentationConfig) -> list[TrainingUnit]:
    """Event units, plus relation units when the mode is ERReps."""
    units = build_event_units(record)
    if config.mode == "ERReps":
        units.extend(build_relation_units(record, config))
    return units


def build_query_units(corpus, split: str) -> list[TrainingUnit]:
    """One RetrievalQuery unit per query in the split, labeled with its gold doc."""
    return [
        TrainingUnit(input_text=q.text, doc_id=q.gold_doc_id, task="RetrievalQuery")
        for q in corpus.queries_for_split(split)
    ]


def split_relation_unit(text: str, separator: str = DEFAULT_SEPARATOR) -> tuple[str, str]:
    head, _, tail = text.partition(f" {separator} ")
    return head, tail


def write_units(path, units) -> None:
    write_records(
        path,
        [{"input_text": u.input_text, "doc_id": u.doc_id, "task": u.task} for u in units],
    )


def read_units(path) -> list[TrainingUnit]:
    return [
        TrainingUnit(input_text=r["input_text"], doc_id=r["doc_id"], task=r["task"])
        for _, r in iter_records(path)
    ]
