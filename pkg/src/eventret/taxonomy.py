"""Hierarchical event-type tree and event-to-leaf mapping.

Mapping scores every leaf with a pluggable score function over sparse term
features (default: cosine between the event's tf vector and the node's
name-plus-definition profile) and picks the argmax, ties going to the
lexicographically smallest leaf name.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping

from .errors import InvalidTaxonomy, NotFound
from .jsonl import iter_records, write_records
from .textutil import content_tokens


@dataclass(frozen=True)
class TaxonomyNode:
    name: str
    definition: str
    parent: str | None
    depth: int


@dataclass(frozen=True)
class FeatureVector:
    """Sparse non-negative term weights."""

    weights: Mapping[str, float]

    def norm(self) -> float:
        return math.sqrt(sum(w * w for w in self.weights.values()))

    def dot(self, other: "FeatureVector") -> float:
        a, b = self.weights, other.weights
        if len(b) < len(a):
            a, b = b, a
        return sum(w * b[t] for t, w in a.items() if t in b)


ScoreFunction = Callable[[FeatureVector, FeatureVector], float]


def cosine_score(event_features: FeatureVector, node_profile: FeatureVector) -> float:
    """Cosine similarity; 0.0 when either vector is empty."""
    denom = event_features.norm() * node_profile.norm()
    if denom == 0.0:
        return 0.0
    return event_features.dot(node_profile) / denom


class Taxonomy:
    """Validated tree of event types, rooted and connected."""

    def __init__(self, nodes: list[tuple[str, str, str | None]]):
        """nodes: (name, definition, parent_name_or_None) in file order."""
        raw = {}
        for name, definition, parent in nodes:
            if name in raw:
                raise InvalidTaxonomy(f"duplicate node name {name!r}")
            raw[name] = (definition, parent)
        roots = [name for name, (_, parent) in raw.items() if parent is None]
        if len(roots) != 1:
            raise InvalidTaxonomy(f"expected exactly one root, found {len(roots)}")
        self.root = roots[0]

        children: dict[str, list[str]] = {name: [] for name in raw}
        for name, (_, parent) in raw.items():
            if parent is None:
                continue
            if parent not in raw:
                raise InvalidTaxonomy(f"node {name!r} has unknown parent {parent!r}")
            children[parent].append(name)

        depths = {self.root: 0}
        queue = [self.root]
        while queue:
            current = queue.pop()
            for child in children[current]:
                depths[child] = depths[current] + 1
                queue.append(child)
        if len(depths) != len(raw):
            unreachable = sorted(set(raw) - set(depths))
            raise InvalidTaxonomy(f"nodes unreachable from root (cycle?): {unreachable}")

        self.nodes: dict[str, TaxonomyNode] = {
            name: TaxonomyNode(name=name, definition=raw[name][0], parent=raw[name][1], depth=depths[name])
            for name in raw
        }
        self.children = children
        self._profiles: dict[str, FeatureVector] = {}

    def node(self, name: str) -> TaxonomyNode:
        try:
            return self.nodes[name]
        except KeyError:
            raise NotFound(f"taxonomy node {name!r}") from None

    def leaves(self) -> list[TaxonomyNode]:
        return [self.nodes[n] for n in self.nodes if not self.children[n]]

    def profile(self, name: str) -> FeatureVector:
        """Term-frequency vector over the node's name and definition tokens."""
        if name not in self._profiles:
            node = self.node(name)
            counts: dict[str, float] = {}
            for token in content_tokens(node.name) + content_tokens(node.definition):
                counts[token] = counts.get(token, 0.0) + 1.0
            self._profiles[name] = FeatureVector(counts)
        return self._profiles[name]

    def __len__(self):
        return len(self.nodes)


def load_taxonomy(path) -> Taxonomy:
    """Read one node per line: {name, definition, parent?}; root has no parent."""
    nodes = []
    for _, record in iter_records(path):
        name = record.get("name")
        if not isinstance(name, str) or not name:
            raise InvalidTaxonomy(f"node record without a name: {record!r}")
        definition = record.get("definition", "")
        parent = record.get("parent")
        nodes.append((name, definition if isinstance(definition, str) else "", parent))
    if not nodes:
        raise InvalidTaxonomy(f"no nodes in {path}")
    return Taxonomy(nodes)


def save_taxonomy(taxonomy: Taxonomy, path) -> None:
    records = []
    for node in taxonomy.nodes.values():
        record = {"name": node.name, "definition": node.definition}
        if node.parent is not None:
            record["parent"] = node.parent
        records.append(record)
    write_records(path, records)


def featurize_event(event) -> FeatureVector:
    """tf over stopword-filtered tokens of trigger + mention, trigger doubled."""
    counts: dict[str, float] = {}
    for token in content_tokens(event.mention):
        counts[token] = counts.get(token, 0.0) + 1.0
    for token in content_tokens(event.trigger):
        counts[token] = counts.get(token, 0.0) + 2.0
    return FeatureVector(counts)


def map_event_to_type(event, taxonomy: Taxonomy, score: ScoreFunction = cosine_score) -> TaxonomyNode:
    """Leaf with the highest score for the event's features.

    Ties (including the all-zero case) resolve to the lexicographically
    smallest leaf name, so the mapping is deterministic.
    """
    leaves = taxonomy.leaves()
    if not leaves:
        raise InvalidTaxonomy("taxonomy has no leaves")
    features = featurize_event(event)
    best_node = None
    best_score = -math.inf
    for leaf in sorted(leaves, key=lambda n: n.name):
        value = score(features, taxonomy.profile(leaf.name))
        if not math.isfinite(value):
            raise ValueError(f"score function returned non-finite value for {leaf.name!r}")
        if value > best_score:
            best_score = value
            best_node = leaf
    return best_node


def path_from_root(node_name: str, taxonomy: Taxonomy) -> list[str]:
    """Node names from the root down to (and including) the given node."""
    node = taxonomy.node(node_name)
    path = [node.name]
    while node.parent is not None:
        node = taxonomy.node(node.parent)
        path.append(node.name)
    return path[::-1]
