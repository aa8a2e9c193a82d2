from pathlib import Path

import pytest

from ddipred.graph import (
    CombinedNetwork,
    Dataset,
    FactTriplet,
    SplitSet,
    TripleParseError,
    Vocab,
    build_combined_network,
    filter_one_relation_per_pair,
    filter_relations_by_rank,
    load_data_dir,
    load_triples,
    split_ddi,
    write_data_dir,
)


def _vocabs(triples_text: list[tuple[str, str, str]]):
    nodes, rels = Vocab(), Vocab()
    out = []
    for h, r, t in triples_text:
        out.append(FactTriplet(nodes.intern(h), rels.intern(r), nodes.intern(t)))
    return nodes, rels, out


def test_vocab_first_seen_ids_and_roundtrip():
    v = Vocab()
    assert v.intern("a") == 0
    assert v.intern("b") == 1
    assert v.intern("a") == 0
    assert v.label(1) == "b"
    assert len(v) == 2


def test_vocab_digest_order_sensitive():
    v1, v2 = Vocab(), Vocab()
    for s in ("a", "b"):
        v1.intern(s)
    for s in ("b", "a"):
        v2.intern(s)
    assert v1.digest() != v2.digest()


def test_load_triples_parsing(tmp_path: Path):
    f = tmp_path / "t.tsv"
    f.write_text("# comment\nd1\tr1\td2\n\nd1\tr1\td2\nd2\tr2\td1\n")
    nodes, rels = Vocab(), Vocab()
    triples = load_triples(f, nodes, rels)
    # duplicate line collapsed, comment and blank skipped
    assert len(triples) == 2
    assert triples[0] == FactTriplet(0, 0, 1)


def test_load_triples_bad_line_reports_line_number(tmp_path: Path):
    f = tmp_path / "t.tsv"
    f.write_text("a\tr\tb\nonly_two\tfields\n")
    with pytest.raises(TripleParseError) as exc:
        load_triples(f, Vocab(), Vocab())
    assert "2" in str(exc.value)


def test_split_ddi_sizes_and_partition():
    triples = [FactTriplet(i, 0, i + 1) for i in range(100)]
    splits = split_ddi(triples, (7, 1, 2), seed=0)
    assert len(splits.valid) == 10 and len(splits.test) == 20
    assert len(splits.train) == 70
    key = lambda t: (t.head, t.relation, t.tail)
    merged = sorted(splits.train + splits.valid + splits.test, key=key)
    assert merged == sorted(triples, key=key)


def test_split_ddi_remainder_goes_to_train():
    triples = [FactTriplet(i, 0, i + 1) for i in range(13)]
    splits = split_ddi(triples, (7, 1, 2), seed=1)
    # floor(13*0.1)=1 valid, floor(13*0.2)=2 test, remainder 10 to train
    assert (len(splits.train), len(splits.valid), len(splits.test)) == (10, 1, 2)


def test_split_ddi_deterministic():
    triples = [FactTriplet(i, 0, i + 1) for i in range(50)]
    a = split_ddi(triples, (7, 1, 2), seed=3)
    b = split_ddi(triples, (7, 1, 2), seed=3)
    assert a.train == b.train and a.valid == b.valid and a.test == b.test
    c = split_ddi(triples, (7, 1, 2), seed=4)
    assert a.train != c.train


def test_leakage_removal_drops_drug_drug_kg_edges():
    nodes, rels, ddi = _vocabs([("d1", "i0", "d2")])
    kg_rel = rels.intern("kg_rel")
    kg = [
        FactTriplet(nodes.intern("d1"), kg_rel, nodes.intern("d2")),  # leaks
        FactTriplet(nodes.intern("d1"), kg_rel, nodes.intern("g1")),  # kept
    ]
    net = build_combined_network(nodes, rels, ddi, kg, ddi)
    assert len(net.edges) == 2  # 1 DDI + 1 kept KG edge
    assert all(
        not (t.head in net.drug_node_ids and t.tail in net.drug_node_ids)
        or t.relation in net.ddi_relation_ids
        for t in net.edges
    )


def test_network_train_only_ddi_edges():
    nodes, rels, ddi = _vocabs(
        [("d1", "i0", "d2"), ("d2", "i0", "d3"), ("d3", "i0", "d1")]
    )
    net = build_combined_network(nodes, rels, [ddi[0]], [], ddi)
    assert net.edges == [ddi[0]]
    # valid/test drugs still counted as drug nodes
    assert len(net.drug_node_ids) == 3


def test_neighbors_direction_oracle():
    nodes, rels, ddi = _vocabs([("d1", "i0", "d2")])
    g = nodes.intern("g1")
    kg = [FactTriplet(0, rels.intern("binds"), g)]
    net = build_combined_network(nodes, rels, ddi, kg, ddi)
    assert [v for (v, r) in net.neighbors(0, "out")] == [1, g]
    assert [v for (v, r) in net.neighbors(g, "in")] == [0]
    assert net.neighbors(g, "out") == []


def test_reserved_relations_interned():
    nodes, rels, ddi = _vocabs([("d1", "i0", "d2")])
    net = build_combined_network(nodes, rels, ddi, [], ddi)
    assert rels.label(net.identity_rel) == "__identity__"
    assert rels.label(net.resemble_rel) == "__resemble__"
    assert net.identity_rel != net.resemble_rel


def test_data_dir_roundtrip(tmp_path: Path):
    nodes, rels, ddi = _vocabs(
        [("d1", "i0", "d2"), ("d2", "i1", "d3"), ("d3", "i0", "d1")]
    )
    kg = [FactTriplet(0, rels.intern("binds"), nodes.intern("g1"))]
    splits = SplitSet(ddi[:2], [ddi[2]], [])
    write_data_dir(tmp_path, splits, kg, nodes, rels, seed=9, ratios=(7, 1, 2))
    ds = load_data_dir(tmp_path)
    relabel = lambda t, ds: (
        ds.node_vocab.label(t.head),
        ds.rel_vocab.label(t.relation),
        ds.node_vocab.label(t.tail),
    )
    got = [relabel(t, ds) for t in ds.splits.train]
    want = [(nodes.label(t.head), rels.label(t.relation), nodes.label(t.tail)) for t in ddi[:2]]
    assert got == want
    assert len(ds.kg) == 1
    assert ds.network.canonical_digest()  # network builds cleanly


def test_kg_fraction_subsampling(tmp_path: Path):
    nodes, rels, ddi = _vocabs([("d1", "i0", "d2")])
    binds = rels.intern("binds")
    kg = [FactTriplet(0, binds, nodes.intern(f"g{i}")) for i in range(100)]
    write_data_dir(tmp_path, SplitSet(ddi, [], []), kg, nodes, rels, seed=0, ratios=(7, 1, 2))
    ds = load_data_dir(tmp_path, kg_fraction=0.25)
    assert len(ds.kg) == 25
    ds2 = load_data_dir(tmp_path, kg_fraction=0.25)
    assert [t for t in ds.kg] == [t for t in ds2.kg]


def test_filter_one_relation_per_pair():
    triples = [
        FactTriplet(0, 0, 1),
        FactTriplet(0, 1, 1),  # same pair, second relation -> pair dropped
        FactTriplet(2, 0, 3),
    ]
    kept = filter_one_relation_per_pair(triples)
    assert kept == [FactTriplet(2, 0, 3)]


def test_filter_relations_by_rank():
    # relation 0: 3 triples, relation 1: 2, relation 2: 1
    triples = (
        [FactTriplet(i, 0, i + 10) for i in range(3)]
        + [FactTriplet(i, 1, i + 20) for i in range(2)]
        + [FactTriplet(0, 2, 30)]
    )
    kept = filter_relations_by_rank(triples, 1, 2)
    assert {t.relation for t in kept} == {1}


def test_canonical_digest_stable_under_input_order():
    nodes, rels, ddi = _vocabs([("d1", "i0", "d2"), ("d3", "i0", "d4")])
    kg1 = [
        FactTriplet(0, rels.intern("binds"), nodes.intern("g1")),
        FactTriplet(1, rels.intern("binds"), nodes.intern("g2")),
    ]
    net1 = build_combined_network(nodes, rels, ddi, kg1, ddi)
    net2 = build_combined_network(nodes, rels, ddi, list(reversed(kg1)), ddi)
    assert net1.canonical_digest() == net2.canonical_digest()
