import pytest

from eventret.corpus import Corpus, Document, Query
from eventret.extraction import Event, EventRelation, ExtractionRecord
from eventret.synthetic import toy_taxonomy


def make_doc(doc_id="d1", text="The army attacked the fort. Therefore the town fell quickly.",
             title=None):
    return Document(doc_id=doc_id, text=text, title=title)


def make_corpus(n_docs=3, queries=True):
    docs = [
        Document(doc_id=f"d{i}", text=f"The author{i} wrote the book{i}. Therefore the story{i} spread widely.")
        for i in range(n_docs)
    ]
    qs = []
    if queries:
        qs = [
            Query(query_id=f"q{i}", text=f"author{i} book{i}", gold_doc_id=f"d{i}", split="test")
            for i in range(n_docs)
        ]
    return Corpus(docs, qs)


def make_record(doc_id="d1", mentions=("A happened", "B followed"), relations=((0, 1),)):
    events = [
        Event(event_id=f"e{i+1}", doc_id=doc_id, trigger=m.split()[0], mention=m)
        for i, m in enumerate(mentions)
    ]
    rels = [
        EventRelation(doc_id=doc_id, head_event_id=f"e{h+1}", tail_event_id=f"e{t+1}")
        for h, t in relations
    ]
    return ExtractionRecord(doc_id=doc_id, events=events, relations=rels)


@pytest.fixture(scope="session")
def taxonomy():
    return toy_taxonomy()
