from conftest import make_corpus, make_record
from eventret.representation import (
    RepresentationConfig,
    TrainingUnit,
    build_event_units,
    build_query_units,
    build_relation_units,
    build_units,
    read_units,
    split_relation_unit,
    write_units,
)

ER = RepresentationConfig(mode="ERReps")
E = RepresentationConfig(mode="EReps")


def test_event_units_one_per_event_in_order():
    record = make_record(mentions=("m1 text", "m2 text"), relations=())
    units = build_event_units(record)
    assert [u.input_text for u in units] == ["m1 text", "m2 text"]
    assert all(u.task == "IndexEvent" and u.doc_id == "d1" for u in units)


def test_relation_unit_direct_construction():
    record = make_record(mentions=("A happened", "B followed"), relations=((0, 1),))
    units = build_relation_units(record, ER)
    assert [u.input_text for u in units] == ["A happened [CAUSES] B followed"]
    assert units[0].task == "IndexRelation"


def test_relation_units_zero_relations():
    record = make_record(relations=())
    assert build_relation_units(record, ER) == []


def test_two_relations_sharing_head():
    record = make_record(
        mentions=("H mention", "T1 mention", "T2 mention"),
        relations=((0, 1), (0, 2)),
    )
    units = build_relation_units(record, ER)
    assert len(units) == 2
    assert all(u.input_text.startswith("H mention [CAUSES] ") for u in units)


def test_build_units_counts_per_mode():
    record = make_record(mentions=("a", "b"), relations=((0, 1),))
    assert len(build_units(record, ER)) == 3
    assert len(build_units(record, E)) == 2
    single = make_record(mentions=("only",), relations=())
    assert len(build_units(single, ER)) == 1


def test_erreps_superset_of_ereps():
    record = make_record(mentions=("a", "b", "c"), relations=((0, 1), (1, 2)))
    ereps = build_units(record, E)
    erreps = build_units(record, ER)
    assert set(ereps).issubset(set(erreps))
    assert len(erreps) == len(ereps) + 2


def test_relation_unit_round_trips():
    record = make_record(mentions=("A happened", "B followed"), relations=((0, 1),))
    unit = build_relation_units(record, ER)[0]
    assert split_relation_unit(unit.input_text) == ("A happened", "B followed")


def test_separator_inside_mention_is_escaped():
    record = make_record(
        mentions=("A [CAUSES] weird mention", "B followed"), relations=((0, 1),)
    )
    unit = build_relation_units(record, ER)[0]
    head, tail = split_relation_unit(unit.input_text)
    assert head == "A weird mention"
    assert tail == "B followed"


def test_query_units():
    corpus = make_corpus(3)
    units = build_query_units(corpus, "test")
    assert len(units) == 3
    assert units[0].task == "RetrievalQuery"
    assert units[0].doc_id == "d0"
    assert build_query_units(corpus, "train") == []


def test_units_persistence_round_trip(tmp_path):
    units = [
        TrainingUnit("alpha beta", "d1", "IndexEvent"),
        TrainingUnit("a [CAUSES] b", "d1", "IndexRelation"),
    ]
    write_units(tmp_path / "u.jsonl", units)
    assert read_units(tmp_path / "u.jsonl") == units
