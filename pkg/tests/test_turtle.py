from __future__ import annotations

import random
import xml.etree.ElementTree as ET

from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import DIABETES_DIR
from phenordf.owl import EquivalentClasses, Named, Ontology, UnionOf
from phenordf.owlxml import export_owl_xml
from phenordf.rdf import (
    DEFAULT_BASE,
    OWL,
    RDF_FIRST,
    RDF_NIL,
    RDF_REST,
    RDF_TYPE,
    RDFS_SUBCLASSOF,
    STANDARD_PREFIXES,
    XSD,
    BlankNode,
    Dataset,
    Graph,
    Iri,
    Literal,
    Triple,
    isomorphic,
)
from phenordf.turtle import TurtleError, load_turtle, parse_turtle, serialize_ntriples, serialize_turtle

CLB = DEFAULT_BASE
PREFIXES = Dataset().prefixes


def union_text() -> str:
    return (DIABETES_DIR / "diabetes_code_union.ttl").read_text(encoding="utf-8")


def test_union_block_triples():
    g, diags = parse_turtle(union_text(), PREFIXES)
    assert diags == []
    pheno = Iri(CLB + "phenotype_diabetes_code")
    assert Triple(pheno, RDF_TYPE, Iri(OWL + "Class")) in g
    assert Triple(pheno, RDFS_SUBCLASSOF, Iri(CLB + "code")) in g
    (eq,) = g.objects(pheno, Iri(OWL + "equivalentClass"))
    assert isinstance(eq, BlankNode)
    assert g.objects(eq, RDF_TYPE) == {Iri(OWL + "Class")}
    head = g.value(eq, Iri(OWL + "unionOf"))
    items = []
    while head != RDF_NIL:
        items.append(g.value(head, RDF_FIRST))
        head = g.value(head, RDF_REST)
    assert [i.value[len(CLB):] for i in items] == ["diabdiag_gprd_code", "dm_gprd_code", "dm_hes_code"]


def test_empty_input():
    g, diags = parse_turtle("")
    assert len(g) == 0 and diags == []


def test_plain_literal_is_xsd_string():
    g, _ = parse_turtle(':a :b "x" .', PREFIXES)
    (t,) = list(g)
    assert t.o == Literal("x", Iri(XSD + "string"))


def test_typed_and_tagged_literals():
    g, diags = parse_turtle(':a :b "3"^^xsd:integer, "hi"@en-GB, 4, true, 2.5 .', PREFIXES)
    assert diags == []
    objs = {t.o for t in g}
    assert Literal("3", Iri(XSD + "integer")) in objs
    assert Literal("hi", lang="en-gb") in objs
    assert Literal("4", Iri(XSD + "integer")) in objs
    assert Literal("true", Iri(XSD + "boolean")) in objs
    assert Literal("2.5", Iri(XSD + "decimal")) in objs


def test_collection_yields_two_triples_per_member():
    for n in range(1, 6):
        members = " ".join(f":m{i}" for i in range(n))
        g, _ = parse_turtle(f":s :p ( {members} ) .", PREFIXES)
        assert g.count(None, RDF_FIRST, None) == n
        assert g.count(None, RDF_REST, None) == n
        assert g.count(None, RDF_REST, RDF_NIL) == 1
    g, _ = parse_turtle(":s :p () .", PREFIXES)
    assert list(g) == [Triple(Iri(CLB + "s"), Iri(CLB + "p"), RDF_NIL)]


def test_error_is_positioned_and_recovers():
    text = ":a :b :c .\n:d :e .\n:f :g :h ."
    g, diags = parse_turtle(text, PREFIXES)
    assert len(diags) == 1
    assert (diags[0].line, diags[0].column) == (2, 7)
    assert Triple(Iri(CLB + "f"), Iri(CLB + "g"), Iri(CLB + "h")) in g
    assert len(g) == 2


def test_unknown_prefix_diagnostic():
    _, diags = parse_turtle("zz:a zz:b zz:c .")
    assert diags and "zz" in diags[0].message


def test_load_turtle_raises_on_errors():
    try:
        load_turtle(":a :b .", "x.ttl")
    except TurtleError as err:
        assert "x.ttl:1:" in str(err)
    else:
        raise AssertionError("expected TurtleError")


def test_serialize_union_round_trip_uses_prefixes():
    g, _ = parse_turtle(union_text(), PREFIXES)
    out = serialize_turtle(g, {**STANDARD_PREFIXES, "clb": CLB})
    assert "clb:phenotype_diabetes_code" in out
    assert "owl:unionOf ( clb:diabdiag_gprd_code clb:dm_gprd_code clb:dm_hes_code )" in out
    again, diags = parse_turtle(out)
    assert diags == []
    assert isomorphic(g, again)


def test_empty_graph_serializes_to_prefixes_only():
    out = serialize_turtle(Graph(), {"ex": "http://example.org/"})
    assert out.strip() == "@prefix ex: <http://example.org/> ."


def _random_graph(rng: random.Random, n: int) -> Graph:
    iris = [Iri(f"http://example.org/r{i}") for i in range(40)] + [Iri(CLB + f"c{i}") for i in range(20)]
    preds = [Iri(f"http://example.org/p{i}") for i in range(6)] + [RDF_TYPE]
    blanks = [BlankNode(f"q{i}") for i in range(30)]
    lits = [Literal("plain"), Literal('quote " and \\ slash\nnewline'), Literal("7", Iri(XSD + "integer")),
            Literal("bonjour", lang="fr"), Literal("2004-03-17", Iri(XSD + "date")), Literal("")]
    g = Graph()
    while len(g) < n:
        s = rng.choice(iris + blanks)
        o = rng.choice(iris + blanks + lits)
        g.add(Triple(s, rng.choice(preds), o))
    return g


def test_thousand_triple_graph_round_trips():
    g = _random_graph(random.Random(3), 1000)
    text = serialize_turtle(g, {"ex": "http://example.org/", "clb": CLB})
    again, diags = parse_turtle(text)
    assert diags == []
    assert len(again) == 1000
    assert isomorphic(g, again)


def test_nested_blank_structures_round_trip():
    text = ":s :p [ :q ( :a [ :r :b ] ) ; :t [ ] ] .\n_:x :p _:x .\n_:y :p _:z . _:z :p _:y ."
    g, diags = parse_turtle(text, PREFIXES)
    assert diags == []
    again, diags = parse_turtle(serialize_turtle(g, {"": CLB}))
    assert diags == []
    assert isomorphic(g, again)


def test_serialization_is_deterministic():
    g = _random_graph(random.Random(5), 300)
    shuffled = list(g)
    random.Random(9).shuffle(shuffled)
    assert serialize_turtle(g, PREFIXES) == serialize_turtle(Graph(shuffled), PREFIXES)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 80))
def test_round_trip_property(seed, n):
    g = _random_graph(random.Random(seed), n)
    again, diags = parse_turtle(serialize_turtle(g, {"ex": "http://example.org/"}))
    assert diags == [] and isomorphic(g, again)


def test_ntriples_round_trip():
    g = _random_graph(random.Random(8), 200)
    again, diags = parse_turtle(serialize_ntriples(g))
    assert diags == [] and isomorphic(g, again)


# ---------------------------------------------------------------------------
# OWL/XML export


def test_owl_xml_empty_ontology():
    root = ET.fromstring(export_owl_xml(Ontology(Iri("http://example.org/o"))))
    assert root.tag.endswith("Ontology")
    assert list(root) == []


def test_owl_xml_diabetes_has_one_union_equivalence(diabetes):
    root = ET.fromstring(export_owl_xml(diabetes.ontology))
    ns = "{http://www.w3.org/2002/07/owl#}"
    pheno = CLB + "phenotype_diabetes_code"
    hits = [
        e for e in root.findall(f"{ns}EquivalentClasses")
        if e[0].tag == f"{ns}Class" and e[0].get("IRI") == pheno
    ]
    assert len(hits) == 1
    assert hits[0][1].tag == f"{ns}ObjectUnionOf"
    assert len(hits[0][1]) == 3


def test_owl_xml_element_count(diabetes):
    onto = diabetes.ontology
    root = ET.fromstring(export_owl_xml(onto))
    declarations = len(onto.declared_classes) + len(onto.declared_properties)
    assert len(list(root)) == len({a.key() for a in onto.axioms}) + declarations
    allowed = {"Declaration", "SubClassOf", "EquivalentClasses", "DisjointClasses", "ClassAssertion",
               "ObjectPropertyAssertion", "AnnotationAssertion"}
    assert {child.tag.split("}")[1] for child in root} <= allowed


def test_owl_xml_duplicate_axiom_written_once():
    onto = Ontology(Iri("http://example.org/o"))
    a, b, c = (Iri(f"http://example.org/{x}") for x in "abc")
    for x in (a, b, c):
        onto.declare_class(x)
    onto.axioms += [EquivalentClasses(Named(a), UnionOf((Named(b), Named(c))))] * 2
    root = ET.fromstring(export_owl_xml(onto))
    assert len(root.findall("{http://www.w3.org/2002/07/owl#}EquivalentClasses")) == 1
