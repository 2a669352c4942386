from eventret.agents import RuleBasedAgent
from eventret.extraction import ExrConfig, extract_document
from eventret.synthetic import generate_corpus, toy_taxonomy, write_synthetic
from eventret.taxonomy import load_taxonomy
from eventret.textutil import tokenize


def test_generation_is_deterministic(tmp_path):
    for run in ("a", "b"):
        write_synthetic(10, 3, 7, tmp_path / f"{run}_docs.jsonl", tmp_path / f"{run}_q.jsonl",
                        tmp_path / f"{run}_tax.jsonl")
    assert (tmp_path / "a_docs.jsonl").read_bytes() == (tmp_path / "b_docs.jsonl").read_bytes()
    assert (tmp_path / "a_q.jsonl").read_bytes() == (tmp_path / "b_q.jsonl").read_bytes()
    assert (tmp_path / "a_tax.jsonl").read_bytes() == (tmp_path / "b_tax.jsonl").read_bytes()


def test_different_seeds_differ():
    a = generate_corpus(8, 3, 1)
    b = generate_corpus(8, 3, 2)
    assert [d.text for d in a.documents] != [d.text for d in b.documents]


def test_query_tokens_come_from_gold_doc():
    corpus = generate_corpus(20, 3, 7)
    for query in corpus.queries:
        doc = corpus.document(query.gold_doc_id)
        doc_tokens = set(tokenize(doc.text, lowercase=True))
        query_tokens = set(tokenize(query.text, lowercase=True))
        assert query_tokens <= doc_tokens


def test_every_doc_has_one_test_query():
    corpus = generate_corpus(12, 2, 3)
    assert len(corpus.queries) == 12
    assert {q.gold_doc_id for q in corpus.queries} == {d.doc_id for d in corpus.documents}
    assert all(q.split == "test" for q in corpus.queries)


def test_rule_extractor_finds_exactly_events_per_doc():
    corpus = generate_corpus(12, 3, 7)
    config = ExrConfig(exchange_rounds=1, max_reflect_iters=3, reflector_agent_id="rule")
    for doc in corpus.documents[:6]:
        record = extract_document(doc, [RuleBasedAgent()], config)
        assert len(record.events) == 3
        assert len(record.relations) == 2  # adjacent pairs, cue-led sentences


def test_toy_taxonomy_is_valid_and_small(tmp_path):
    tax = toy_taxonomy()
    assert len(tax) <= 50
    assert len(tax.leaves()) == 12
    write_path = tmp_path / "tax.jsonl"
    write_synthetic(2, 2, 1, tmp_path / "d.jsonl", tmp_path / "q.jsonl", write_path)
    assert len(load_taxonomy(write_path)) == len(tax)
