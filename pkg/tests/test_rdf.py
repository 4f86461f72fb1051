from __future__ import annotations

import random

import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phenordf.rdf import (
    DEFAULT_BASE,
    RDF_TYPE,
    BlankNode,
    Dataset,
    Graph,
    Iri,
    Literal,
    TermError,
    Triple,
    UnknownPrefixError,
    isomorphic,
    resolve_prefixed,
)

CLB = DEFAULT_BASE


def test_insert_patient_triple_is_new():
    ds = Dataset()
    t = Triple(Iri(CLB + "patient_10642"), Iri(CLB + "obtained"), Iri(CLB + "READ_C100100"))
    assert ds.insert(ds.asserted_name, t) is True
    assert t in ds.asserted


def test_second_insert_is_noop():
    ds = Dataset()
    t = Triple(Iri(CLB + "a"), Iri(CLB + "b"), Literal("x"))
    ds.insert(ds.asserted_name, t)
    assert ds.insert(ds.asserted_name, t) is False
    assert len(ds.asserted) == 1


def test_literal_subject_rejected():
    ds = Dataset()
    with pytest.raises(TermError):
        ds.insert(ds.asserted_name, Triple(Literal("x"), Iri(CLB + "b"), Iri(CLB + "c")))


def test_relative_iri_rejected():
    with pytest.raises(TermError):
        Iri("patient_1")


def test_literal_defaults():
    assert Literal("x").datatype.value.endswith("#string")
    tagged = Literal("chat", lang="FR")
    assert tagged.lang == "fr"
    assert tagged.datatype.value.endswith("#langString")


def test_fixed_graphs_exist():
    ds = Dataset()
    assert Iri(CLB + "asserted") in ds.graphs and Iri(CLB + "inferred") in ds.graphs
    assert len(ds.asserted) == 0 and len(ds.inferred) == 0


def test_match_type_subject_over_all_graphs():
    ds = Dataset()
    subject = Iri(CLB + "subject")
    for pid in ("10642", "10643"):
        ds.insert(ds.asserted_name, Triple(Iri(CLB + "patient_" + pid), RDF_TYPE, subject))
    ds.insert(ds.inferred_name, Triple(Iri(CLB + "patient_10642"), RDF_TYPE, Iri(CLB + "x")))
    found = {t.s.value.rsplit("_", 1)[1] for t in ds.match((None, RDF_TYPE, subject))}
    assert found == {"10642", "10643"}


def test_match_on_empty_dataset():
    assert list(Dataset().match()) == []


def test_match_unknown_graph_is_empty():
    assert list(Dataset().match(graph=Iri("urn:x:none"))) == []


def test_all_graph_match_deduplicates():
    ds = Dataset()
    t = Triple(Iri(CLB + "a"), RDF_TYPE, Iri(CLB + "b"))
    ds.insert(ds.asserted_name, t)
    ds.insert(ds.inferred_name, t)
    assert list(ds.match()) == [t]


def _random_triples(rng: random.Random, n: int) -> list[Triple]:
    nodes = [Iri(f"urn:n:{i}") for i in range(8)]
    preds = [Iri(f"urn:p:{i}") for i in range(3)]
    objs = nodes + [Literal("v"), Literal("3", Iri("http://www.w3.org/2001/XMLSchema#integer"))]
    return [Triple(rng.choice(nodes), rng.choice(preds), rng.choice(objs)) for _ in range(n)]


def test_match_equals_linear_scan():
    rng = random.Random(7)
    triples = _random_triples(rng, 300)
    g = Graph(triples)
    universe = set(triples)
    terms = {x for t in triples for x in t}
    for _ in range(300):
        pat = tuple(rng.choice([None, rng.choice(sorted(terms, key=repr))]) for _ in range(3))
        expected = {t for t in universe if all(q is None or q == v for q, v in zip(pat, t))}
        assert set(g.match(*pat)) == expected
        assert g.count(*pat) == len(expected)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 2), st.integers(0, 5)), max_size=60), st.data())
def test_size_and_indexes_agree(edges, data):
    g = Graph()
    for s, p, o in edges:
        g.add(Triple(Iri(f"urn:n:{s}"), Iri(f"urn:p:{p}"), Iri(f"urn:n:{o}")))
    assert len(g) == len(set(edges))
    assert g.via_spo() == g.via_pos() == g.via_osp() == set(g)
    if edges:
        s, p, o = data.draw(st.sampled_from(edges))
        g.discard(Triple(Iri(f"urn:n:{s}"), Iri(f"urn:p:{p}"), Iri(f"urn:n:{o}")))
        assert g.via_spo() == g.via_pos() == g.via_osp() == set(g)
        assert len(g) == len(set(edges)) - 1


def test_resolve_prefixed_clb():
    ds = Dataset()
    assert ds.resolve("clb:subject") == Iri("https://www.caliberresearch.org/PhenotypeOntology#subject")


def test_resolve_prefixed_rdf_type():
    assert Dataset().resolve("rdf:type") == Iri("http://www.w3.org/1999/02/22-rdf-syntax-ns#type")


def test_resolve_unknown_prefix_names_it():
    with pytest.raises(UnknownPrefixError) as exc:
        resolve_prefixed("zz:x", {})
    assert exc.value.prefix == "zz"
    assert "zz" in str(exc.value)


def test_materialized_flag_cleared_by_asserted_insert():
    ds = Dataset()
    ds.materialized = True
    ds.insert(ds.inferred_name, Triple(Iri("urn:a"), RDF_TYPE, Iri("urn:b")))
    assert ds.materialized
    ds.insert(ds.asserted_name, Triple(Iri("urn:a"), RDF_TYPE, Iri("urn:c")))
    assert not ds.materialized


# ---------------------------------------------------------------------------
# isomorphism, cross-checked against networkx


def _nx_graph(triples):
    g = nx.MultiDiGraph()
    for t in triples:
        for x in (t.s, t.o):
            g.add_node(x, label=None if isinstance(x, BlankNode) else x)
        g.add_edge(t.s, t.o, pred=t.p)
    return g


def _nx_isomorphic(a, b) -> bool:
    def edges_match(e1, e2):
        return sorted(d["pred"].value for d in e1.values()) == sorted(d["pred"].value for d in e2.values())

    return nx.is_isomorphic(_nx_graph(a), _nx_graph(b), node_match=lambda x, y: x["label"] == y["label"], edge_match=edges_match)


def _random_blank_graph(rng: random.Random, blanks: int, ground: int, n: int) -> set[Triple]:
    bs = [BlankNode(f"x{i}") for i in range(blanks)]
    gs = [Iri(f"urn:g:{i}") for i in range(ground)]
    preds = [Iri(f"urn:p:{i}") for i in range(2)]
    return {Triple(rng.choice(bs + gs), rng.choice(preds), rng.choice(bs + gs)) for _ in range(n)}


def _relabel(triples, rng):
    blanks = sorted({x for t in triples for x in (t.s, t.o) if isinstance(x, BlankNode)}, key=lambda b: b.label)
    names = [BlankNode(f"r{i}") for i in range(len(blanks))]
    rng.shuffle(names)
    m = dict(zip(blanks, names))
    return {Triple(m.get(t.s, t.s), t.p, m.get(t.o, t.o)) for t in triples}


def test_isomorphic_agrees_with_networkx():
    rng = random.Random(11)
    for _ in range(200):
        a = _random_blank_graph(rng, rng.randint(1, 5), 2, rng.randint(1, 10))
        b = _relabel(a, rng) if rng.random() < 0.5 else _random_blank_graph(rng, rng.randint(1, 5), 2, len(a))
        assert isomorphic(a, b) == _nx_isomorphic(a, b)


def test_isomorphic_regular_blank_structures():
    # two 3-cycles versus one 6-cycle: same colour refinement, not isomorphic
    p = Iri("urn:p")
    b = [BlankNode(f"c{i}") for i in range(6)]
    two = {Triple(b[0], p, b[1]), Triple(b[1], p, b[2]), Triple(b[2], p, b[0]),
           Triple(b[3], p, b[4]), Triple(b[4], p, b[5]), Triple(b[5], p, b[3])}
    six = {Triple(b[i], p, b[(i + 1) % 6]) for i in range(6)}
    assert not isomorphic(two, six)
    assert isomorphic(six, _relabel(six, random.Random(1)))
