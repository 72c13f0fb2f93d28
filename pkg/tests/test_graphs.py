import logging

import pytest

from boxquery.graphs import (
    GraphParseError,
    build_graph,
    graph_stats,
    load_graph,
    neighbors,
    save_graph,
)


def test_counts_on_tiny_tsv(tmp_path):
    p = tmp_path / "g.tsv"
    p.write_text("a\tr\tb\nb\ts\tc\n")
    kg = load_graph(p)
    assert kg.num_entities == 3
    assert kg.num_relations == 2
    assert len(kg.edges) == 2


def test_whitespace_tsv_accepted(tmp_path):
    p = tmp_path / "g.tsv"
    p.write_text("a r b\nb s c\n")
    kg = load_graph(p)
    assert kg.num_entities == 3


def test_malformed_line_reports_number(tmp_path):
    p = tmp_path / "g.tsv"
    p.write_text("a\tr\tb\na\tr\n")
    with pytest.raises(GraphParseError) as err:
        load_graph(p)
    assert err.value.line_number == 2


def test_duplicate_edges_collapse():
    kg = build_graph([("a", "r", "b"), ("a", "r", "b"), ("a", "r", "c")])
    assert len(kg.edges) == 2


def test_dense_first_seen_ids():
    kg = build_graph([("x", "r", "y"), ("z", "s", "x")])
    assert kg.entity_labels == ("x", "y", "z")
    assert kg.relation_labels == ("r", "s")


def test_ntriples_parsing(tmp_path):
    p = tmp_path / "g.nt"
    p.write_text(
        "<http://ex/a> <http://ex/r> <http://ex/b> .\n"
        "# a comment\n"
        '<http://ex/a> <http://ex/label> "a literal" .\n'
        "_:blank <http://ex/r> <http://ex/a> .\n"
    )
    kg = load_graph(p, fmt="ntriples")
    assert kg.num_entities == 3  # literal object line is skipped
    assert len(kg.edges) == 2
    assert "http://ex/a" in kg.entity_labels
    assert "_:blank" in kg.entity_labels


def test_ntriples_missing_dot(tmp_path):
    p = tmp_path / "g.nt"
    p.write_text("<http://ex/a> <http://ex/r> <http://ex/b>\n")
    with pytest.raises(GraphParseError):
        load_graph(p, fmt="ntriples")


def test_unknown_format(tmp_path):
    p = tmp_path / "g.tsv"
    p.write_text("a\tr\tb\n")
    with pytest.raises(ValueError):
        load_graph(p, fmt="xml")


def test_types_assignment(kg_t):
    person = kg_t.type_labels.index("person")
    topic = kg_t.type_labels.index("topic")
    assert kg_t.entity_types[kg_t.entity_id("Alice")] == person
    assert kg_t.entity_types[kg_t.entity_id("T2")] == topic
    assert kg_t.num_types == 3
    assert kg_t.untyped_type_id == 3


def test_untyped_fallback():
    kg = build_graph([("a", "r", "b")], types={"a": "thing"})
    assert kg.entity_types[kg.entity_id("a")] == 0
    assert kg.entity_types[kg.entity_id("b")] == kg.untyped_type_id


def test_dangling_type_entry_warns(caplog):
    with caplog.at_level(logging.WARNING):
        kg = build_graph([("a", "r", "b")], types={"ghost": "thing", "a": "thing"})
    assert "ghost" in caplog.text
    assert kg.num_entities == 2


def test_neighbors_on_toy_graph(kg_t):
    alice = kg_t.entity_id("Alice")
    t1 = kg_t.entity_id("T1")
    p1 = kg_t.entity_id("P1")
    works_on = kg_t.relation_id("works_on")
    assert neighbors(kg_t, alice, works_on, "out") == {t1}
    assert neighbors(kg_t, t1, works_on, "in") == {
        kg_t.entity_id("Alice"),
        kg_t.entity_id("Bob"),
    }
    assert neighbors(kg_t, p1, works_on, "out") == set()


def test_neighbors_unknown_id(kg_t):
    with pytest.raises(KeyError):
        neighbors(kg_t, 999, 0, "out")
    with pytest.raises(KeyError):
        neighbors(kg_t, 0, 999, "out")
    with pytest.raises(ValueError):
        neighbors(kg_t, 0, 0, "sideways")


def test_stats_empty_graph():
    kg = build_graph([])
    s = graph_stats(kg)
    assert s["entities"] == 0
    assert s["edges"] == 0
    assert s["relation_types"] == 0
    assert s["entity_types"] == 0


def test_stats_toy_graph(kg_t):
    s = graph_stats(kg_t)
    # Alice,Bob,T1,T2,P1,P2,P3
    assert s["entities"] == 7
    assert s["relation_types"] == 2
    assert s["edges"] == 6
    assert s["entity_types"] == 3
    assert sum(int(d) * c for d, c in s["degree_histogram"].items()) == 2 * 6


def test_edge_index_consistency(kg_t):
    for h, r, t in kg_t.edges:
        assert t in neighbors(kg_t, h, r, "out")
        assert h in neighbors(kg_t, t, r, "in")
    total = sum(
        len(tails) for tails in kg_t.out_index.values()
    )
    assert total == len(kg_t.edges)


def test_roundtrip_serialization(kg_t, tmp_path):
    tp = tmp_path / "g.tsv"
    yp = tmp_path / "t.tsv"
    save_graph(kg_t, tp, yp)
    kg2 = load_graph(tp, yp)
    assert kg2.entity_labels == kg_t.entity_labels
    assert kg2.relation_labels == kg_t.relation_labels
    assert kg2.edges == kg_t.edges
    assert kg2.entity_types == kg_t.entity_types
    # second round trip is byte-stable
    tp2 = tmp_path / "g2.tsv"
    save_graph(kg2, tp2)
    assert tp2.read_text() == tp.read_text()
