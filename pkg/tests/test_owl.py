from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import DIABETES_DIR
from oracles import random_ontology
from phenordf.owl import (
    OWL_CLASS,
    OWL_EQUIVALENT,
    OWL_ON_PROPERTY,
    OWL_RESTRICTION,
    OWL_UNION,
    ClassAssertion,
    ComplementOf,
    DisjointClasses,
    EquivalentClasses,
    IntersectionOf,
    MinCardinality,
    Named,
    Ontology,
    OntologyError,
    SomeValuesFrom,
    SubClassOf,
    UnionOf,
    axiom_triples,
    from_triples,
    label,
    normalize,
    to_triples,
)
from phenordf.rdf import DEFAULT_BASE, RDF_FIRST, RDF_REST, RDF_TYPE, RDFS_SUBCLASSOF, Dataset, Graph, Iri, Triple
from phenordf.turtle import parse_turtle, serialize_turtle

CLB = DEFAULT_BASE


def c(name: str) -> Named:
    return Named(Iri(CLB + name))


def diabetes_union() -> EquivalentClasses:
    return EquivalentClasses(c("phenotype_diabetes_code"), UnionOf((c("diabdiag_gprd_code"), c("dm_gprd_code"), c("dm_hes_code"))))


def test_union_equivalence_triple_pattern():
    triples = axiom_triples(diabetes_union())
    # equivalentClass, rdf:type owl:Class, owl:unionOf, then two triples per member
    assert len(triples) == 3 + 2 * 3
    (eq,) = [t for t in triples if t.p == OWL_EQUIVALENT]
    assert eq.s == Iri(CLB + "phenotype_diabetes_code")
    assert Triple(eq.o, RDF_TYPE, OWL_CLASS) in triples
    assert sum(t.p == OWL_UNION for t in triples) == 1
    assert sum(t.p == RDF_FIRST for t in triples) == 3


def test_union_equivalence_matches_turtle_block():
    parsed, _ = parse_turtle((DIABETES_DIR / "diabetes_code_union.ttl").read_text(), Dataset().prefixes)
    built = Graph(axiom_triples(diabetes_union()))
    built.add(Triple(Iri(CLB + "phenotype_diabetes_code"), RDF_TYPE, OWL_CLASS))
    built.add(Triple(Iri(CLB + "phenotype_diabetes_code"), RDFS_SUBCLASSOF, Iri(CLB + "code")))
    from phenordf.rdf import isomorphic

    assert isomorphic(parsed, built)


def test_named_subclass_is_one_triple():
    assert axiom_triples(SubClassOf(c("a"), c("b"))) == [Triple(Iri(CLB + "a"), RDFS_SUBCLASSOF, Iri(CLB + "b"))]


def test_construct_triple_counts():
    p = Iri(CLB + "obtained")
    some = axiom_triples(SubClassOf(SomeValuesFrom(p, c("x")), c("y")))
    assert len(some) == 1 + 3
    assert sum(t.p == OWL_ON_PROPERTY for t in some) == 1
    assert sum(t.o == OWL_RESTRICTION for t in some) == 1
    assert len(axiom_triples(SubClassOf(MinCardinality(2, p, c("x")), c("y")))) == 1 + 4
    assert len(axiom_triples(SubClassOf(IntersectionOf((c("a"), c("b"))), c("y")))) == 1 + 2 + 4
    assert len(axiom_triples(DisjointClasses((c("a"), c("b"))))) == 1
    assert len(axiom_triples(DisjointClasses((c("a"), c("b"), c("d"))))) == 2 + 6
    assert len(axiom_triples(SubClassOf(ComplementOf(c("a")), c("y")))) == 1 + 2


def test_operand_arity_checked():
    with pytest.raises(OntologyError):
        UnionOf((c("a"),))
    with pytest.raises(OntologyError):
        IntersectionOf(())
    with pytest.raises(OntologyError):
        MinCardinality(0, Iri(CLB + "p"), c("a"))
    with pytest.raises(OntologyError):
        DisjointClasses((c("a"), UnionOf((c("b"), c("d")))))


def test_normalize_ignores_operand_order():
    a = UnionOf((c("x"), IntersectionOf((c("z"), c("y")))))
    b = UnionOf((IntersectionOf((c("y"), c("z"))), c("x")))
    assert normalize(a) == normalize(b)
    assert a.render() == b.render()


def test_from_triples_reads_union_block():
    g, _ = parse_turtle((DIABETES_DIR / "diabetes_code_union.ttl").read_text(), Dataset().prefixes)
    onto = from_triples(g)
    keys = {a.key() for a in onto.axioms}
    assert diabetes_union().key() in keys
    assert SubClassOf(c("phenotype_diabetes_code"), c("code")).key() in keys
    assert len(onto.axioms) == 2


def test_from_empty_graph():
    onto = from_triples(Graph())
    assert onto.axioms == [] and onto.declared_classes == set()


def test_truncated_list_is_error():
    text = (DIABETES_DIR / "diabetes_code_union.ttl").read_text()
    g, _ = parse_turtle(text, Dataset().prefixes)
    last = next(t for t in g if t.p == RDF_REST and t.o == Iri("http://www.w3.org/1999/02/22-rdf-syntax-ns#nil"))
    g.discard(last)
    with pytest.raises(OntologyError) as exc:
        from_triples(g)
    assert exc.value.node == last.s


def test_restriction_without_property_is_error():
    onto = Ontology(Iri(CLB.rstrip("#")))
    for n in ("x", "y"):
        onto.declare_class(Iri(CLB + n))
    onto.declare_property(Iri(CLB + "p"))
    onto.add(SubClassOf(SomeValuesFrom(Iri(CLB + "p"), c("x")), c("y")))
    g = to_triples(onto)
    (bad,) = [t for t in g if t.p == OWL_ON_PROPERTY]
    g.discard(bad)
    with pytest.raises(OntologyError) as exc:
        from_triples(g)
    assert exc.value.node == bad.s
    assert "onProperty" in str(exc.value)


def test_validate_reports_undeclared_class():
    onto = Ontology(Iri("http://example.org/o"))
    onto.add(SubClassOf(c("a"), c("b")))
    with pytest.raises(OntologyError):
        onto.validate()


def test_round_trip_keeps_labels_and_assertions(diabetes):
    again = from_triples(to_triples(diabetes.ontology))
    assert again.canonical() == diabetes.ontology.canonical()
    assert again.labels()[Iri(CLB + "READ_C100100")].startswith("Diabetes mellitus, adult onset")


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 100_000), st.booleans())
def test_random_round_trip(seed, horn):
    onto = random_ontology(seed, horn=horn)
    if random.Random(seed).random() < 0.3:
        onto.add(SubClassOf(ComplementOf(Named(sorted(onto.declared_classes, key=lambda i: i.value)[0])), Named(next(iter(onto.declared_classes)))))
    onto.add(label(next(iter(onto.declared_classes)), "some label"))
    assert from_triples(to_triples(onto)).canonical() == onto.canonical()
    # and through Turtle text
    g, diags = parse_turtle(serialize_turtle(to_triples(onto), {"ex": "http://example.org/t#"}))
    assert diags == []
    assert from_triples(g).canonical() == onto.canonical()


def test_class_assertion_of_complex_class_round_trips():
    onto = Ontology(Iri("http://example.org/o"))
    for n in ("a", "b"):
        onto.declare_class(Iri(CLB + n))
    onto.add(ClassAssertion(UnionOf((c("a"), c("b"))), Iri(CLB + "i")))
    assert from_triples(to_triples(onto)).canonical() == onto.canonical()
