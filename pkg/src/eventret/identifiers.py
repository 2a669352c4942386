"""Document identifiers (three schemes) and the prefix trie that constrains decoding.

TIds:  the first L tokens of the document text, with "#k" ordinals on collisions.
EIds:  recursive k-means over mean event-feature vectors; each level appends the
       cluster index, and buckets at or under the leaf cap append a within-bucket
       ordinal (plain digits, corpus order).
ETIds: the taxonomy path of the document's majority-vote leaf plus a "#k"
       disambiguation ordinal within that leaf's bucket.

Identifier tokens are atomic symbols; a reserved end-of-identifier sentinel
keeps the token sequences prefix-free inside the trie.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InternalInvariantViolation
from .jsonl import iter_records, write_records
from .taxonomy import cosine_score, featurize_event, map_event_to_type, path_from_root
from .textutil import tokenize

SCHEMES = ("TIds", "EIds", "ETIds")

END_OF_IDENTIFIER = "</s>"


@dataclass(frozen=True)
class Identifier:
    scheme: str
    tokens: tuple[str, ...]
    doc_id: str


class IdentifierIndex:
    """Bijective doc <-> identifier map for one scheme."""

    def __init__(self, scheme: str, identifiers):
        self.scheme = scheme
        self.by_doc: dict[str, Identifier] = {}
        self.by_tokens: dict[tuple[str, ...], str] = {}
        for ident in identifiers:
            if not ident.tokens:
                raise InternalInvariantViolation(f"empty identifier for doc {ident.doc_id!r}")
            if ident.doc_id in self.by_doc:
                raise InternalInvariantViolation(f"doc {ident.doc_id!r} assigned twice")
            if ident.tokens in self.by_tokens:
                raise InternalInvariantViolation(
                    f"identifier {list(ident.tokens)} assigned to both "
                    f"{self.by_tokens[ident.tokens]!r} and {ident.doc_id!r}"
                )
            self.by_doc[ident.doc_id] = ident
            self.by_tokens[ident.tokens] = ident.doc_id
        self.vocabulary: tuple[str, ...] = tuple(
            sorted({t for ident in self.by_doc.values() for t in ident.tokens})
        )

    def identifier_for(self, doc_id: str) -> Identifier | None:
        return self.by_doc.get(doc_id)

    def doc_for(self, tokens) -> str | None:
        return self.by_tokens.get(tuple(tokens))

    def __len__(self):
        return len(self.by_doc)

    def __iter__(self):
        return iter(self.by_doc.values())


class _TrieNode:
    __slots__ = ("children", "doc_id")

    def __init__(self):
        self.children: dict[str, _TrieNode] = {}
        self.doc_id: str | None = None


class IdentifierTrie:
    """Prefix-closed trie over identifier tokens, sentinel-terminated."""

    def __init__(self):
        self.root = _TrieNode()
        self.max_depth = 0
        self.size = 0

    def insert(self, tokens, doc_id: str) -> None:
        node = self.root
        for token in tokens:
            node = node.children.setdefault(token, _TrieNode())
        terminal = node.children.get(END_OF_IDENTIFIER)
        if terminal is not None:
            raise InternalInvariantViolation(f"duplicate identifier {list(tokens)}")
        terminal = _TrieNode()
        terminal.doc_id = doc_id
        node.children[END_OF_IDENTIFIER] = terminal
        self.max_depth = max(self.max_depth, len(tokens))
        self.size += 1

    def _walk(self, prefix) -> _TrieNode | None:
        node = self.root
        for token in prefix:
            node = node.children.get(token)
            if node is None:
                return None
        return node

    def valid_next_tokens(self, prefix) -> set[str]:
        node = self._walk(prefix)
        if node is None:
            return set()
        return set(node.children.keys())

    def doc_for(self, tokens) -> str | None:
        node = self._walk(tokens)
        if node is None:
            return None
        terminal = node.children.get(END_OF_IDENTIFIER)
        return terminal.doc_id if terminal is not None else None

    def enumerate(self):
        """Yield (tokens, doc_id) for every stored identifier."""
        stack = [((), self.root)]
        while stack:
            prefix, node = stack.pop()
            for token, child in node.children.items():
                if token == END_OF_IDENTIFIER:
                    yield prefix, child.doc_id
                else:
                    stack.append((prefix + (token,), child))


def build_trie(index: IdentifierIndex) -> IdentifierTrie:
    trie = IdentifierTrie()
    for ident in index:
        trie.insert(ident.tokens, ident.doc_id)
    return trie


def valid_next_tokens(trie: IdentifierTrie, prefix) -> set[str]:
    return trie.valid_next_tokens(prefix)


# -- TIds --------------------------------------------------------------------

def build_tids(corpus, first_tokens: int = 16) -> IdentifierIndex:
    """First-L-token identifiers; colliding docs get an appended "#k" ordinal."""
    if first_tokens < 1:
        raise ValueError("first_tokens must be >= 1")
    buckets: dict[tuple[str, ...], int] = {}
    identifiers = []
    for doc in corpus.documents:
        base = tuple(tokenize(doc.text)[:first_tokens])
        count = buckets.get(base, 0)
        buckets[base] = count + 1
        if not base:
            tokens = (f"#{count}",)
        elif count == 0:
            tokens = base
        else:
            tokens = base + (f"#{count}",)
        identifiers.append(Identifier(scheme="TIds", tokens=tokens, doc_id=doc.doc_id))
    return IdentifierIndex("TIds", identifiers)


# -- EIds --------------------------------------------------------------------

def _doc_matrix(corpus, records_by_doc):
    """Dense L2-normalized matrix of mean event-feature vectors, corpus order."""
    doc_weights = []
    vocab: set[str] = set()
    for doc in corpus.documents:
        record = records_by_doc[doc.doc_id]
        mean: dict[str, float] = {}
        for event in record.events:
            for term, weight in featurize_event(event).weights.items():
                mean[term] = mean.get(term, 0.0) + weight
        n = max(len(record.events), 1)
        mean = {t: w / n for t, w in mean.items()}
        vocab.update(mean)
        doc_weights.append(mean)
    terms = sorted(vocab)
    col = {t: j for j, t in enumerate(terms)}
    X = np.zeros((len(doc_weights), max(len(terms), 1)))
    for i, weights in enumerate(doc_weights):
        for term, weight in weights.items():
            X[i, col[term]] = weight
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return X / norms


def _kmeans(X, k, rng, iters=20):
    """Plain k-means with k-means++ seeding; argmin ties go to the lowest index."""
    n = X.shape[0]
    centroids = np.empty((k, X.shape[1]))
    first = int(rng.integers(n))
    centroids[0] = X[first]
    d2 = np.sum((X - centroids[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            centroids[j] = X[int(rng.integers(n))]
        else:
            r = rng.random() * total
            idx = int(np.searchsorted(np.cumsum(d2), r, side="right"))
            idx = min(idx, n - 1)
            centroids[j] = X[idx]
        d2 = np.minimum(d2, np.sum((X - centroids[j]) ** 2, axis=1))

    labels = None
    for _ in range(iters):
        dist = ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_labels = dist.argmin(axis=1)
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(k):
            members = X[labels == j]
            if len(members):
                centroids[j] = members.mean(axis=0)
    return labels


def build_eids(corpus, records, branching: int = 10, leaf_cap: int = 10, seed: int = 0) -> IdentifierIndex:
    """Recursive k-means identifiers over mean event features.

    Deterministic for a fixed (corpus, records, branching, leaf_cap, seed):
    every recursion level draws its generator from the seed plus the cluster
    path, so sibling subtrees never share random state.
    """
    if branching < 2:
        raise ValueError("branching must be >= 2")
    if leaf_cap < 1:
        raise ValueError("leaf_cap must be >= 1")
    records_by_doc = {r.doc_id: r for r in records}
    X = _doc_matrix(corpus, records_by_doc)
    doc_ids = corpus.doc_ids()
    tokens: list[list[str]] = [[] for _ in doc_ids]

    def assign(rows: list[int], path: tuple[int, ...]) -> None:
        if len(rows) <= leaf_cap:
            for ordinal, i in enumerate(rows):
                tokens[i].append(str(ordinal))
            return
        sub = X[rows]
        if np.allclose(sub, sub[0]):
            # Identical vectors cannot be split; stop with ordinals.
            for ordinal, i in enumerate(rows):
                tokens[i].append(str(ordinal))
            return
        k = min(branching, len(rows))
        rng = np.random.default_rng((seed, 1) + path)
        labels = _kmeans(sub, k, rng)
        groups = [[rows[j] for j in range(len(rows)) if labels[j] == c] for c in range(k)]
        if sum(1 for g in groups if g) <= 1:
            for ordinal, i in enumerate(rows):
                tokens[i].append(str(ordinal))
            return
        for c, group in enumerate(groups):
            if not group:
                continue
            for i in group:
                tokens[i].append(str(c))
            assign(group, path + (c,))

    assign(list(range(len(doc_ids))), ())
    identifiers = [
        Identifier(scheme="EIds", tokens=tuple(tokens[i]), doc_id=doc_id)
        for i, doc_id in enumerate(doc_ids)
    ]
    return IdentifierIndex("EIds", identifiers)


# -- ETIds -------------------------------------------------------------------

def build_etids(corpus, records, taxonomy, score=cosine_score) -> IdentifierIndex:
    """Taxonomy-path identifiers from each document's majority-vote leaf."""
    records_by_doc = {r.doc_id: r for r in records}
    bucket_sizes: dict[str, int] = {}
    identifiers = []
    for doc in corpus.documents:
        record = records_by_doc[doc.doc_id]
        votes: dict[str, int] = {}
        for event in record.events:
            leaf = map_event_to_type(event, taxonomy, score)
            votes[leaf.name] = votes.get(leaf.name, 0) + 1
        winner = sorted(votes.items(), key=lambda kv: (-kv[1], kv[0]))[0][0]
        ordinal = bucket_sizes.get(winner, 0)
        bucket_sizes[winner] = ordinal + 1
        path = path_from_root(winner, taxonomy)
        identifiers.append(
            Identifier(scheme="ETIds", tokens=tuple(path) + (f"#{ordinal}",), doc_id=doc.doc_id)
        )
    return IdentifierIndex("ETIds", identifiers)


# -- persistence ---------------------------------------------------------------

def save_index(index: IdentifierIndex, path) -> None:
    write_records(
        path,
        [
            {"doc_id": ident.doc_id, "scheme": ident.scheme, "tokens": list(ident.tokens)}
            for ident in index
        ],
    )


def load_index(path) -> IdentifierIndex:
    identifiers = []
    scheme = None
    for _, record in iter_records(path):
        scheme = record["scheme"]
        identifiers.append(
            Identifier(scheme=scheme, tokens=tuple(record["tokens"]), doc_id=record["doc_id"])
        )
    if scheme is None:
        raise InternalInvariantViolation(f"no identifiers in {path}")
    return IdentifierIndex(scheme, identifiers)
