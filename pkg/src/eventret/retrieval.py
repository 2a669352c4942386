"""Trie-constrained beam search and Hits@k evaluation.

Each beam expansion is masked to the trie's valid continuations, so every
finished hypothesis is a real identifier by construction. Scores are bare
cumulative log-probs (no length normalization); ties break on the lexicographic
order of the identifier tokens, which keeps runs reproducible and lets the
search agree exactly with brute-force enumeration.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import InternalInvariantViolation
from .identifiers import END_OF_IDENTIFIER, IdentifierIndex, IdentifierTrie
from .seq2seq import BOS, EOS, DecodeSession, sequence_logprob

DEFAULT_KS = (1, 10, 20)


@dataclass(frozen=True)
class BeamHypothesis:
    prefix: tuple[str, ...]
    logprob: float
    finished: bool


@dataclass(frozen=True)
class RetrievedDoc:
    doc_id: str
    tokens: tuple[str, ...]
    logprob: float


@dataclass
class RankedResult:
    query_id: str
    hits: list[RetrievedDoc] = field(default_factory=list)

    def rank_of(self, doc_id: str) -> int | None:
        for rank, hit in enumerate(self.hits, start=1):
            if hit.doc_id == doc_id:
                return rank
        return None


@dataclass
class MetricsReport:
    variant: str
    hits: dict[int, float | None]
    n_queries: int

    def to_records(self) -> list[dict]:
        return [
            {"variant": self.variant, "k": k, "hits": self.hits[k], "n_queries": self.n_queries}
            for k in sorted(self.hits)
        ]


def constrained_beam_search(model, query_text: str, trie: IdentifierTrie, width: int,
                            query_id: str = "") -> RankedResult:
    """Top-`width` identifiers for the query, highest cumulative log-prob first.

    Expansion is exhaustive over the valid next tokens of every live beam and
    then pruned globally, so with width >= |identifiers| the ranking equals
    exhaustive scoring of the whole identifier set.
    """
    if width < 1:
        raise ValueError("beam width must be >= 1")
    if trie.size == 0:
        raise ValueError("trie is empty")

    session = DecodeSession(model, model.encode_text(query_text))
    vocab = model.vocab
    live = [BeamHypothesis(prefix=(), logprob=0.0, finished=False)]
    states = [session.initial_state()]
    finished: list[RetrievedDoc] = []

    for _ in range(trie.max_depth + 1):
        if not live:
            break
        # Step the decoder for all live beams at once; the first step feeds BOS.
        step_prev = [vocab.identifier_id(h.prefix[-1]) if h.prefix else BOS for h in live]
        logps, new_states = session.step(states, step_prev)

        candidates: list[tuple[BeamHypothesis, object]] = []
        for i, hyp in enumerate(live):
            for token in trie.valid_next_tokens(hyp.prefix):
                token_id = EOS if token == END_OF_IDENTIFIER else vocab.identifier_id(token)
                score = hyp.logprob + float(logps[i, token_id])
                if token == END_OF_IDENTIFIER:
                    doc_id = trie.doc_for(hyp.prefix)
                    if doc_id is None:
                        raise InternalInvariantViolation(
                            f"trie terminal without doc_id at {list(hyp.prefix)}"
                        )
                    finished.append(RetrievedDoc(doc_id=doc_id, tokens=hyp.prefix, logprob=score))
                else:
                    candidates.append(
                        (BeamHypothesis(hyp.prefix + (token,), score, False), new_states[i])
                    )
        finished.sort(key=lambda d: (-d.logprob, d.tokens))
        finished = finished[:width]
        candidates.sort(key=lambda c: (-c[0].logprob, c[0].prefix))
        live = [c[0] for c in candidates[:width]]
        states = [c[1] for c in candidates[:width]]

    hits = sorted(finished, key=lambda d: (-d.logprob, d.tokens))[:width]
    return RankedResult(query_id=query_id, hits=hits)


def brute_force_ranking(model, query_text: str, index: IdentifierIndex, width: int,
                        query_id: str = "") -> RankedResult:
    """Exhaustive scoring of every identifier; beam search with a wide beam must match."""
    input_ids = model.encode_text(query_text)
    scored = [
        RetrievedDoc(
            doc_id=ident.doc_id,
            tokens=ident.tokens,
            logprob=sequence_logprob(model, input_ids, ident.tokens),
        )
        for ident in index
    ]
    scored.sort(key=lambda d: (-d.logprob, d.tokens))
    return RankedResult(query_id=query_id, hits=scored[:width])


def hits_at_k(results, gold: dict[str, str], k: int) -> float:
    """Fraction of queries whose gold document appears in the top k."""
    if not results:
        return float("nan")
    found = 0
    for result in results:
        gold_doc = gold[result.query_id]
        if any(hit.doc_id == gold_doc for hit in result.hits[:k]):
            found += 1
    return found / len(results)


def evaluate(model, queries, trie: IdentifierTrie, index: IdentifierIndex,
             width: int, ks=DEFAULT_KS, variant: str = "") -> MetricsReport:
    """Run constrained search for every query and aggregate Hits@k.

    With zero queries the rates are reported as None (undefined), not 0.
    """
    ks = tuple(sorted(ks))
    if width < max(ks, default=1):
        raise ValueError(f"width {width} must be >= max(ks) {max(ks)}")
    results = []
    gold = {}
    for query in queries:
        gold[query.query_id] = query.gold_doc_id
        result = constrained_beam_search(model, query.text, trie, width, query_id=query.query_id)
        for hit in result.hits:
            if index.doc_for(hit.tokens) != hit.doc_id:
                raise InternalInvariantViolation(
                    f"decoded identifier {list(hit.tokens)} is not in the index"
                )
        results.append(result)
    if not results:
        return MetricsReport(variant=variant, hits={k: None for k in ks}, n_queries=0)
    rates = {k: hits_at_k(results, gold, k) for k in ks}
    return MetricsReport(variant=variant, hits=rates, n_queries=len(results))
