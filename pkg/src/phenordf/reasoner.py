"""Forward-chaining instance classification.

Every class expression occurring in the TBox is interned once (keyed on its
normalized structure) and membership is tracked per node.  Derivation is
delta-driven: each round only processes the (individual, node) pairs that
were new in the previous round.

Rules, for x an individual:

* x in C and C subClassOf D            => x in D   (either direction of an equivalence)
* x in C_i                              => x in C_1 or ... or C_n
* x in every C_i                        => x in C_1 and ... and C_n
* x in C_1 and ... and C_n              => x in every C_i
* p(x, y), y in C                       => x in (p some C)
* |{y : p(x, y), y in C}| >= n          => x in (p min n C)

Nothing is ever derived from the absence of a fact.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .owl import (
    ClassAssertion,
    ClassExpr,
    ComplementOf,
    DisjointClasses,
    EquivalentClasses,
    IntersectionOf,
    MinCardinality,
    Named,
    Ontology,
    PropertyAssertion,
    SomeValuesFrom,
    SubClassOf,
    UnionOf,
    normalize,
    subexpressions,
)
from .rdf import RDF_TYPE, Dataset, Iri, Triple


class ReasonerError(ValueError):
    pass


class UnsupportedConstructError(ReasonerError):
    """A construct that forward chaining cannot handle soundly (e.g. complement)."""


class UnknownClassError(ReasonerError, KeyError):
    def __str__(self) -> str:
        return f"class {self.args[0]} is not declared in the ontology"


@dataclass
class InferenceResult:
    inferred_assertions: set[tuple[Iri, Iri]] = field(default_factory=set)
    iterations: int = 1
    inconsistencies: list[tuple[Iri, Iri, Iri]] = field(default_factory=list)
    memberships: dict[Iri, set[Iri]] = field(default_factory=dict, repr=False)


class _Network:
    """Interned TBox: nodes are integer ids of normalized class expressions."""

    def __init__(self, ontology: Ontology) -> None:
        self.ids: dict[ClassExpr, int] = {}
        self.exprs: list[ClassExpr] = []
        self.sup: list[set[int]] = []
        self.union_parents: list[set[int]] = []
        self.inter_parents: list[set[int]] = []
        self.conjuncts: dict[int, tuple[int, ...]] = {}
        # filler node -> [(restriction node, property, min count)]
        self.restrictions: list[list[tuple[int, Iri, int]]] = []
        self.props: set[Iri] = set()

        for axiom in ontology.tbox():
            for expr in axiom.expressions():
                for sub in subexpressions(expr):
                    if isinstance(sub, ComplementOf):
                        raise UnsupportedConstructError(
                            f"complement {sub.render()} in {type(axiom).__name__}: "
                            "negation must be expressed at query time (FILTER NOT EXISTS)"
                        )
            if isinstance(axiom, SubClassOf):
                self.sup[self.node(axiom.sub)].add(self.node(axiom.sup))
            elif isinstance(axiom, EquivalentClasses):
                a, b = self.node(axiom.a), self.node(axiom.b)
                self.sup[a].add(b)
                self.sup[b].add(a)
            elif isinstance(axiom, DisjointClasses):
                for c in axiom.classes:
                    self.node(c)

    def node(self, expr: ClassExpr) -> int:
        expr = normalize(expr)
        if expr in self.ids:
            return self.ids[expr]
        nid = len(self.exprs)
        self.ids[expr] = nid
        self.exprs.append(expr)
        self.sup.append(set())
        self.union_parents.append(set())
        self.inter_parents.append(set())
        self.restrictions.append([])
        if isinstance(expr, UnionOf):
            for op in expr.operands:
                self.union_parents[self.node(op)].add(nid)
        elif isinstance(expr, IntersectionOf):
            ops = tuple(self.node(op) for op in expr.operands)
            self.conjuncts[nid] = ops
            for op in ops:
                self.inter_parents[op].add(nid)
        elif isinstance(expr, SomeValuesFrom):
            self.props.add(expr.prop)
            self.restrictions[self.node(expr.filler)].append((nid, expr.prop, 1))
        elif isinstance(expr, MinCardinality):
            self.props.add(expr.prop)
            self.restrictions[self.node(expr.filler)].append((nid, expr.prop, expr.n))
        return nid

    def named(self, iri: Iri) -> Optional[int]:
        return self.ids.get(Named(iri))


def _collect_abox(ontology: Ontology, dataset: Optional[Dataset], props: set[Iri]):
    types: set[tuple[Iri, Iri]] = set()
    edges: set[tuple[Iri, Iri, Iri]] = set()
    for axiom in ontology.axioms:
        if isinstance(axiom, ClassAssertion):
            if not isinstance(axiom.cls, Named):
                raise UnsupportedConstructError("class assertions must name a class")
            types.add((axiom.individual, axiom.cls.iri))
        elif isinstance(axiom, PropertyAssertion):
            edges.add((axiom.prop, axiom.subject, axiom.object))
    if dataset is not None:
        declared = ontology.declared_classes
        for t in dataset.match((None, RDF_TYPE, None)):
            if isinstance(t.s, Iri) and t.o in declared:
                types.add((t.s, t.o))
        for prop in ontology.declared_properties | props:
            for t in dataset.match((None, prop, None)):
                if isinstance(t.s, Iri) and isinstance(t.o, Iri):
                    edges.add((prop, t.s, t.o))
    return types, edges


def classify(
    ontology: Ontology,
    types: Iterable[tuple[Iri, Iri]],
    edges: Iterable[tuple[Iri, Iri, Iri]],
) -> tuple[dict[Iri, set[Iri]], int]:
    """Closure of named-class memberships.  Returns (memberships, rounds)."""
    net = _Network(ontology)
    incoming: dict[Iri, dict[Iri, set[Iri]]] = defaultdict(lambda: defaultdict(set))
    for p, s, o in edges:
        incoming[p][o].add(s)

    members: dict[Iri, set[int]] = defaultdict(set)
    # individual -> restriction node -> witnesses seen so far (min-cardinality > 1 only)
    witnesses: dict[tuple[Iri, int], set[Iri]] = defaultdict(set)
    told: list[tuple[Iri, int]] = []
    for ind, cls in types:
        told.append((ind, net.node(Named(cls))))

    delta: list[tuple[Iri, int]] = []

    def add(x: Iri, n: int, out: list) -> None:
        if n not in members[x]:
            members[x].add(n)
            out.append((x, n))

    for x, n in told:
        add(x, n, delta)
    rounds = 1
    while delta:
        nxt: list[tuple[Iri, int]] = []
        for x, n in delta:
            for d in net.sup[n]:
                add(x, d, nxt)
            for u in net.union_parents[n]:
                add(x, u, nxt)
            for i in net.inter_parents[n]:
                if i not in members[x] and all(c in members[x] for c in net.conjuncts[i]):
                    add(x, i, nxt)
            for c in net.conjuncts.get(n, ()):
                add(x, c, nxt)
            for r, prop, k in net.restrictions[n]:
                for z in incoming.get(prop, {}).get(x, ()):
                    if k == 1:
                        add(z, r, nxt)
                    else:
                        seen = witnesses[(z, r)]
                        seen.add(x)
                        if len(seen) >= k:
                            add(z, r, nxt)
        delta = nxt
        if delta:
            rounds += 1

    named: dict[Iri, set[Iri]] = {}
    for x, nodes in members.items():
        named[x] = {net.exprs[n].iri for n in nodes if isinstance(net.exprs[n], Named)}
    return named, rounds


def check_disjointness(ontology: Ontology, memberships: dict[Iri, set[Iri]]) -> list[tuple[Iri, Iri, Iri]]:
    """Every (individual, A, B) with the individual in two classes declared disjoint."""
    violations = set()
    for axiom in ontology.axioms:
        if not isinstance(axiom, DisjointClasses):
            continue
        classes = sorted({c.iri for c in axiom.classes}, key=lambda i: i.value)
        for ind, cls in memberships.items():
            inside = [c for c in classes if c in cls]
            for i, a in enumerate(inside):
                for b in inside[i + 1:]:
                    violations.add((ind, a, b))
    return sorted(violations, key=lambda v: (v[0].value, v[1].value, v[2].value))


def materialize(ontology: Ontology, dataset: Dataset) -> InferenceResult:
    """Write every entailed, not yet stated, named-class membership into the inferred graph."""
    net_props = {p for a in ontology.tbox() for e in a.expressions() for p in _props(e)}
    types, edges = _collect_abox(ontology, dataset, net_props)
    memberships, rounds = classify(ontology, types, edges)
    novel = set()
    for ind, classes in memberships.items():
        for cls in classes:
            if (ind, cls) not in types:
                novel.add((ind, cls))
    for ind, cls in sorted(novel, key=lambda p: (p[0].value, p[1].value)):
        dataset.insert(dataset.inferred_name, Triple(ind, RDF_TYPE, cls))
    dataset.materialized = True
    return InferenceResult(
        inferred_assertions=novel,
        iterations=rounds,
        inconsistencies=check_disjointness(ontology, memberships),
        memberships=memberships,
    )


def _props(expr: ClassExpr) -> set[Iri]:
    return {e.prop for e in subexpressions(expr) if isinstance(e, (SomeValuesFrom, MinCardinality))}


def entails(ontology: Ontology, dataset: Dataset, individual: Iri, cls: Iri) -> bool:
    """Membership test against asserted plus inferred types; materializes on demand."""
    if cls not in ontology.declared_classes:
        raise UnknownClassError(cls.value)
    if not dataset.materialized:
        materialize(ontology, dataset)
    if any(isinstance(a, ClassAssertion) and a.individual == individual and a.cls == Named(cls) for a in ontology.axioms):
        return True
    return dataset.contains(Triple(individual, RDF_TYPE, cls))
