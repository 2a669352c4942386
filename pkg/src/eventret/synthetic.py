"""Deterministic synthetic corpus for desk-scale runs and tests.

Each document is a chain of templated event sentences about one settlement
(a name unique to the document); every sentence after the first opens with a
causal cue word, so the rule-based extractor finds one event per sentence and
a cause -> effect relation per adjacent pair. Per document there is one
train-split and one test-split query, each a seeded word-dropout paraphrase
of one of its sentences; the train queries feed the retrieval summand of the
multi-task objective, the test queries are held out for evaluation. Word
banks are disjoint per theme and each theme has a leaf in the bundled toy
taxonomy whose definition lists the bank, so taxonomy mapping and clustering
have real signal to work with.
"""

from __future__ import annotations

import random

from .corpus import Corpus, Document, Query
from .jsonl import write_records
from .taxonomy import Taxonomy, save_taxonomy

_CUES = ("Therefore", "So", "Thus", "Hence", "Consequently", "Accordingly")

_TAILS = (
    "before dawn",
    "after the long council",
    "under a pale sky",
    "while the bells rang",
    "near the old gate",
    "at the turn of the season",
)

# theme -> (leaf name, roles, verbs, objects, places); banks are disjoint.
_THEMES: dict[str, tuple[str, list[str], list[str], list[str], list[str]]] = {
    "attack": (
        "Attack",
        ["scout", "captain", "raider", "archer", "sentry", "warlord"],
        ["stormed", "ambushed", "besieged", "overran"],
        ["fortress", "garrison", "citadel", "outpost", "rampart", "stronghold"],
        ["ridge", "frontier", "borderlands", "pass"],
    ),
    "defense": (
        "Defense",
        ["guardian", "shieldbearer", "defender", "watchman", "marshal", "protector"],
        ["repelled", "fortified", "barricaded", "shielded"],
        ["bastion", "palisade", "moat", "keep", "watchtower", "bulwark"],
        ["hilltop", "causeway", "gatehouse", "parapet"],
    ),
    "journey": (
        "Journey",
        ["pilgrim", "wanderer", "nomad", "explorer", "trekker", "voyager"],
        ["crossed", "traversed", "wandered", "reached"],
        ["desert", "tundra", "steppe", "glacier", "archipelago", "plateau"],
        ["oasis", "crossroads", "lowlands", "foothills"],
    ),
    "transport": (
        "Transport",
        ["carter", "ferryman", "porter", "drover", "hauler", "shipwright"],
        ["hauled", "ferried", "shipped", "carted"],
        ["cargo", "timber", "barrels", "freight", "wagons", "crates"],
        ["harbor", "quay", "canal", "wharf"],
    ),
    "harvest": (
        "Harvest",
        ["farmer", "reaper", "gleaner", "orchardist", "vintner", "thresher"],
        ["gathered", "reaped", "picked", "threshed"],
        ["wheat", "barley", "grapes", "olives", "orchard", "rye"],
        ["meadow", "terrace", "farmstead", "granary"],
    ),
    "construction": (
        "Construction",
        ["mason", "carpenter", "architect", "builder", "engineer", "stonecutter"],
        ["raised", "erected", "assembled", "rebuilt"],
        ["bridge", "aqueduct", "cathedral", "mill", "viaduct", "granite"],
        ["quarry", "scaffold", "foundation", "worksite"],
    ),
    "trade": (
        "Trade",
        ["merchant", "peddler", "broker", "trader", "shopkeeper", "auctioneer"],
        ["bartered", "exchanged", "imported", "auctioned"],
        ["spices", "silk", "amber", "porcelain", "saffron", "indigo"],
        ["bazaar", "marketplace", "caravanserai", "emporium"],
    ),
    "payment": (
        "Payment",
        ["treasurer", "taxman", "banker", "paymaster", "clerk", "collector"],
        ["settled", "remitted", "levied", "refunded"],
        ["ledger", "tribute", "wages", "ransom", "stipend", "arrears"],
        ["countinghouse", "mint", "vault", "exchequer"],
    ),
    "storm": (
        "Storm",
        ["tempest", "gale", "cyclone", "squall", "thunderhead", "whirlwind"],
        ["battered", "lashed", "flattened", "scoured"],
        ["coastline", "rooftops", "masts", "signal", "breakwater", "lighthouse"],
        ["headland", "reef", "estuary", "shoals"],
    ),
    "flood": (
        "Flood",
        ["river", "torrent", "deluge", "tide", "overflow", "surge"],
        ["drowned", "submerged", "inundated", "swamped"],
        ["levee", "floodplain", "paddies", "embankment", "culvert", "milldam"],
        ["delta", "basin", "marshland", "confluence"],
    ),
    "ceremony": (
        "Ceremony",
        ["priestess", "herald", "elder", "celebrant", "monarch", "abbot"],
        ["crowned", "consecrated", "anointed", "proclaimed"],
        ["coronation", "festival", "procession", "rite", "vigil", "jubilee"],
        ["temple", "plaza", "sanctum", "amphitheater"],
    ),
    "performance": (
        "Performance",
        ["minstrel", "juggler", "dancer", "playwright", "chorister", "acrobat"],
        ["performed", "recited", "rehearsed", "improvised"],
        ["ballad", "pantomime", "overture", "tragedy", "sonnet", "masque"],
        ["stage", "pavilion", "balcony", "courtyard"],
    ),
}


def toy_taxonomy_nodes() -> list[tuple[str, str, str | None]]:
    """(name, definition, parent) rows for the bundled toy taxonomy (33 nodes)."""
    nodes: list[tuple[str, str, str | None]] = [
        ("Event", "anything that happens or takes place", None),
        ("Action", "deliberate activity carried out by participants", "Event"),
        ("Occurrence", "happenings in the world at large", "Event"),
        ("Conflict", "hostile engagement between parties", "Action"),
        ("Movement", "change of location of people or goods", "Action"),
        ("Production", "creating gathering or building things", "Action"),
        ("Exchange", "transfer of goods money or obligations", "Action"),
        ("Nature", "natural forces and weather", "Occurrence"),
        ("Society", "communal gatherings and public life", "Occurrence"),
    ]
    parents = {
        "Attack": "Conflict", "Defense": "Conflict",
        "Journey": "Movement", "Transport": "Movement",
        "Harvest": "Production", "Construction": "Production",
        "Trade": "Exchange", "Payment": "Exchange",
        "Storm": "Nature", "Flood": "Nature",
        "Ceremony": "Society", "Performance": "Society",
    }
    for leaf, roles, verbs, objects, places in _THEMES.values():
        definition = " ".join(roles + verbs + objects + places)
        nodes.append((leaf, definition, parents[leaf]))
    return nodes


def toy_taxonomy() -> Taxonomy:
    return Taxonomy(toy_taxonomy_nodes())


_NAME_HEADS = ("Vel", "Dor", "Mar", "Kel", "Thal", "Bren", "Cor", "Fen",
               "Gal", "Hol", "Ir", "Jor", "Lun", "Nor", "Osk", "Pel")
_NAME_TAILS = ("dran", "mere", "wick", "stad", "holm", "ford", "burg", "fell",
               "moor", "vale", "crest", "march", "haven", "ridge", "loch", "spire")


def _settlement_names(rng, n) -> list[str]:
    """n distinct pronounceable settlement names, seeded."""
    combos = [h + t for h in _NAME_HEADS for t in _NAME_TAILS]
    rng.shuffle(combos)
    while len(combos) < n:
        combos += [c + "ia" for c in combos]
    return combos[:n]


def _sentence(rng, theme_key, settlement, used_pairs, cue=None) -> str:
    _, roles, verbs, objects, places = _THEMES[theme_key]
    # Prefer corpus-unique (role, object) pairs so paraphrase queries stay
    # discriminative; past the bank capacity, reuse is accepted.
    for _ in range(64):
        role = rng.choice(roles)
        obj = rng.choice(objects)
        if (role, obj) not in used_pairs:
            break
    used_pairs.add((role, obj))
    verb = rng.choice(verbs)
    place = rng.choice(places)
    tail = rng.choice(_TAILS)
    body = f"the {role} from the {place} {verb} the {obj} near {settlement} {tail}"
    if cue:
        return f"{cue} {body}"
    return body[0].upper() + body[1:]


def _paraphrase(rng, sentence: str) -> str:
    """Word-dropout paraphrase: function words may drop, content words stay."""
    droppable = {"the", "from", "a", "an", "near"} | {w for tail in _TAILS for w in tail.split()}
    tokens = sentence.rstrip(".").split()
    if tokens[0] in _CUES:
        tokens = tokens[1:]
    kept = [t for t in tokens if t.lower() not in droppable or rng.random() > 0.5]
    return " ".join(kept)


def generate_corpus(n_docs: int, events_per_doc: int, seed: int) -> Corpus:
    """Build the synthetic corpus; byte-identical for identical arguments."""
    if n_docs < 1:
        raise ValueError("n_docs must be >= 1")
    if events_per_doc < 1:
        raise ValueError("events_per_doc must be >= 1")
    rng = random.Random(seed)
    theme_keys = list(_THEMES)
    settlements = _settlement_names(rng, n_docs)
    documents = []
    train_queries = []
    test_queries = []
    used_pairs: set[tuple[str, str]] = set()
    for d in range(n_docs):
        theme = theme_keys[d % len(theme_keys)]
        settlement = settlements[d]
        sentences = [_sentence(rng, theme, settlement, used_pairs)]
        for _ in range(events_per_doc - 1):
            sentences.append(
                _sentence(rng, theme, settlement, used_pairs, cue=rng.choice(_CUES))
            )
        text = " ".join(s + "." for s in sentences)
        doc_id = f"d{d:03d}"
        documents.append(Document(doc_id=doc_id, text=text, title=f"{theme} chronicle {d}"))
        train_source = sentences[rng.randrange(len(sentences))]
        train_queries.append(
            Query(
                query_id=f"tq{d:03d}",
                text=_paraphrase(rng, train_source),
                gold_doc_id=doc_id,
                split="train",
            )
        )
        test_source = sentences[rng.randrange(len(sentences))]
        test_queries.append(
            Query(
                query_id=f"q{d:03d}",
                text=_paraphrase(rng, test_source),
                gold_doc_id=doc_id,
                split="test",
            )
        )
    return Corpus(documents, train_queries + test_queries)


def write_synthetic(n_docs, events_per_doc, seed, documents_path, queries_path,
                    taxonomy_path=None) -> Corpus:
    corpus = generate_corpus(n_docs, events_per_doc, seed)
    doc_records = []
    for doc in corpus.documents:
        doc_records.append({"doc_id": doc.doc_id, "title": doc.title, "text": doc.text})
    write_records(documents_path, doc_records)
    write_records(
        queries_path,
        [
            {"query_id": q.query_id, "text": q.text, "gold_doc_id": q.gold_doc_id, "split": q.split}
            for q in corpus.queries
        ],
    )
    if taxonomy_path is not None:
        save_taxonomy(toy_taxonomy(), taxonomy_path)
    return corpus
