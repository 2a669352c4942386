"""Documents, labeled queries, and the corpus that holds them.

A corpus is immutable once built and iterates in insertion order; downstream
stages (clustering input order, disambiguation ordinals) rely on that order
being stable.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

from .errors import DanglingReference, DuplicateId, ParseError
from .jsonl import iter_records, write_records

logger = logging.getLogger(__name__)

SPLITS = ("train", "test")

_DOC_KEYS = {"doc_id", "title", "text"}
_QUERY_KEYS = {"query_id", "text", "gold_doc_id", "split"}


@dataclass(frozen=True)
class Document:
    doc_id: str
    text: str
    title: str | None = None


@dataclass(frozen=True)
class Query:
    query_id: str
    text: str
    gold_doc_id: str
    split: str


class Corpus:
    """Ordered documents plus labeled queries.

    Construction is permissive; use :func:`validate_corpus` to list invariant
    violations, or :func:`ingest_corpus` to load strictly from files.
    """

    def __init__(self, documents, queries):
        self.documents: tuple[Document, ...] = tuple(documents)
        self.queries: tuple[Query, ...] = tuple(queries)
        self._by_id = {d.doc_id: d for d in self.documents}

    def document(self, doc_id: str) -> Document | None:
        return self._by_id.get(doc_id)

    def doc_ids(self) -> list[str]:
        return [d.doc_id for d in self.documents]

    def queries_for_split(self, split: str) -> list[Query]:
        return [q for q in self.queries if q.split == split]

    def __eq__(self, other):
        return (
            isinstance(other, Corpus)
            and self.documents == other.documents
            and self.queries == other.queries
        )

    def __repr__(self):
        return f"Corpus(documents={len(self.documents)}, queries={len(self.queries)})"


def _normalize_text(text: str) -> str:
    text = text.replace("\r\n", "\n").replace("\r", "\n")
    lines = [line.rstrip() for line in text.split("\n")]
    return "\n".join(lines).rstrip("\n")


def _require_str(record, key, path, line_no) -> str:
    value = record.get(key)
    if not isinstance(value, str):
        raise ParseError(path, line_no, f"missing or non-string field {key!r}")
    return value


def _warn_unknown(record, known, path, line_no) -> None:
    unknown = set(record) - known
    if unknown:
        logger.warning("%s:%d: ignoring unknown keys %s", path, line_no, sorted(unknown))


def ingest_corpus(documents_path, queries_path) -> Corpus:
    """Load and strictly validate a corpus from two line-delimited files.

    Raises ParseError (with line number) on malformed records, DuplicateId on
    repeated doc/query ids, DanglingReference on unresolved gold labels.
    """
    documents: list[Document] = []
    seen_docs: set[str] = set()
    for line_no, record in iter_records(documents_path):
        _warn_unknown(record, _DOC_KEYS, documents_path, line_no)
        doc_id = _require_str(record, "doc_id", documents_path, line_no)
        if not doc_id:
            raise ParseError(documents_path, line_no, "empty doc_id")
        text = _normalize_text(_require_str(record, "text", documents_path, line_no))
        if not text.strip():
            raise ParseError(documents_path, line_no, f"doc {doc_id!r}: empty text")
        title = record.get("title")
        if title is not None and not isinstance(title, str):
            raise ParseError(documents_path, line_no, "title must be a string")
        if doc_id in seen_docs:
            raise DuplicateId(f"duplicate doc_id {doc_id!r} at {documents_path}:{line_no}")
        seen_docs.add(doc_id)
        documents.append(Document(doc_id=doc_id, text=text, title=title))

    queries: list[Query] = []
    seen_queries: set[str] = set()
    for line_no, record in iter_records(queries_path):
        _warn_unknown(record, _QUERY_KEYS, queries_path, line_no)
        query_id = _require_str(record, "query_id", queries_path, line_no)
        text = _require_str(record, "text", queries_path, line_no)
        if not text.strip():
            raise ParseError(queries_path, line_no, f"query {query_id!r}: empty text")
        gold = _require_str(record, "gold_doc_id", queries_path, line_no)
        split = _require_str(record, "split", queries_path, line_no)
        if split not in SPLITS:
            raise ParseError(queries_path, line_no, f"split must be one of {SPLITS}")
        if query_id in seen_queries:
            raise DuplicateId(f"duplicate query_id {query_id!r} at {queries_path}:{line_no}")
        seen_queries.add(query_id)
        if gold not in seen_docs:
            raise DanglingReference(
                f"query {query_id!r} references unknown document {gold!r}"
            )
        queries.append(Query(query_id=query_id, text=text, gold_doc_id=gold, split=split))

    return Corpus(documents, queries)


def save_corpus(corpus: Corpus, documents_path, queries_path) -> None:
    """Persist a corpus in the same format ingest_corpus reads (round-trips)."""
    doc_records = []
    for doc in corpus.documents:
        record = {"doc_id": doc.doc_id, "text": doc.text}
        if doc.title is not None:
            record["title"] = doc.title
        doc_records.append(record)
    write_records(documents_path, doc_records)
    write_records(
        queries_path,
        [
            {
                "query_id": q.query_id,
                "text": q.text,
                "gold_doc_id": q.gold_doc_id,
                "split": q.split,
            }
            for q in corpus.queries
        ],
    )


def validate_corpus(corpus: Corpus) -> list[str]:
    """Return one human-readable violation per broken invariant (empty = ok)."""
    violations: list[str] = []
    seen: set[str] = set()
    for doc in corpus.documents:
        if not doc.doc_id:
            violations.append("document with empty doc_id")
            continue
        if doc.doc_id in seen:
            violations.append(f"doc {doc.doc_id}: duplicate doc_id")
        seen.add(doc.doc_id)
        if not doc.text.strip():
            violations.append(f"doc {doc.doc_id}: empty text")
    seen_queries: set[str] = set()
    for query in corpus.queries:
        if query.query_id in seen_queries:
            violations.append(f"query {query.query_id}: duplicate query_id")
        seen_queries.add(query.query_id)
        if not query.text.strip():
            violations.append(f"query {query.query_id}: empty text")
        if query.split not in SPLITS:
            violations.append(f"query {query.query_id}: bad split {query.split!r}")
        if corpus.document(query.gold_doc_id) is None:
            violations.append(
                f"query {query.query_id}: gold_doc_id {query.gold_doc_id!r} does not resolve"
            )
    return violations
