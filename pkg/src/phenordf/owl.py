"""Class expressions, axioms and their mapping to and from RDF triples."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

from .rdf import (
    OWL,
    RDF_FIRST,
    RDF_NIL,
    RDF_REST,
    RDF_TYPE,
    RDFS,
    RDFS_LABEL,
    RDFS_SUBCLASSOF,
    XSD,
    BlankNode,
    Graph,
    Iri,
    Literal,
    Subject,
    Term,
    Triple,
    fresh_blank,
    triple_sort_key,
)

OWL_CLASS = Iri(OWL + "Class")
OWL_OBJECT_PROPERTY = Iri(OWL + "ObjectProperty")
OWL_ONTOLOGY = Iri(OWL + "Ontology")
OWL_RESTRICTION = Iri(OWL + "Restriction")
OWL_ALL_DISJOINT = Iri(OWL + "AllDisjointClasses")
OWL_NAMED_INDIVIDUAL = Iri(OWL + "NamedIndividual")
OWL_EQUIVALENT = Iri(OWL + "equivalentClass")
OWL_DISJOINT_WITH = Iri(OWL + "disjointWith")
OWL_MEMBERS = Iri(OWL + "members")
OWL_UNION = Iri(OWL + "unionOf")
OWL_INTERSECTION = Iri(OWL + "intersectionOf")
OWL_COMPLEMENT = Iri(OWL + "complementOf")
OWL_ON_PROPERTY = Iri(OWL + "onProperty")
OWL_SOME = Iri(OWL + "someValuesFrom")
OWL_ON_CLASS = Iri(OWL + "onClass")
OWL_MIN_QCARD = Iri(OWL + "minQualifiedCardinality")
XSD_NNI = Iri(XSD + "nonNegativeInteger")
RDFS_SEEALSO = Iri(RDFS + "seeAlso")
ANNOTATION_PROPERTIES = (RDFS_LABEL, RDFS_SEEALSO)

_STRUCTURAL_TYPES = {OWL_CLASS, OWL_OBJECT_PROPERTY, OWL_ONTOLOGY, OWL_RESTRICTION, OWL_ALL_DISJOINT, OWL_NAMED_INDIVIDUAL}


class OntologyError(ValueError):
    """Malformed class expression, axiom, or RDF encoding of one."""

    def __init__(self, message: str, node: Optional[Term] = None) -> None:
        super().__init__(f"{message} (at {node})" if node is not None else message)
        self.node = node


# ---------------------------------------------------------------------------
# class expressions


@dataclass(frozen=True)
class Named:
    iri: Iri

    def render(self) -> str:
        return self.iri.value


@dataclass(frozen=True)
class UnionOf:
    operands: tuple["ClassExpr", ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "operands", tuple(self.operands))
        if len(self.operands) < 2:
            raise OntologyError("UnionOf needs at least two operands")

    def render(self) -> str:
        return "or(" + ",".join(sorted(op.render() for op in self.operands)) + ")"


@dataclass(frozen=True)
class IntersectionOf:
    operands: tuple["ClassExpr", ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "operands", tuple(self.operands))
        if len(self.operands) < 2:
            raise OntologyError("IntersectionOf needs at least two operands")

    def render(self) -> str:
        return "and(" + ",".join(sorted(op.render() for op in self.operands)) + ")"


@dataclass(frozen=True)
class SomeValuesFrom:
    prop: Iri
    filler: "ClassExpr"

    def render(self) -> str:
        return f"some({self.prop.value},{self.filler.render()})"


@dataclass(frozen=True)
class MinCardinality:
    n: int
    prop: Iri
    filler: "ClassExpr"

    def __post_init__(self) -> None:
        if self.n < 1:
            raise OntologyError("MinCardinality needs n >= 1")

    def render(self) -> str:
        return f"min({self.n},{self.prop.value},{self.filler.render()})"


@dataclass(frozen=True)
class ComplementOf:
    operand: "ClassExpr"

    def render(self) -> str:
        return f"not({self.operand.render()})"


ClassExpr = Union[Named, UnionOf, IntersectionOf, SomeValuesFrom, MinCardinality, ComplementOf]


def normalize(expr: ClassExpr) -> ClassExpr:
    """Sort union/intersection operands by their rendered form, recursively."""
    if isinstance(expr, (UnionOf, IntersectionOf)):
        ops = sorted((normalize(op) for op in expr.operands), key=lambda e: e.render())
        return type(expr)(tuple(ops))
    if isinstance(expr, SomeValuesFrom):
        return SomeValuesFrom(expr.prop, normalize(expr.filler))
    if isinstance(expr, MinCardinality):
        return MinCardinality(expr.n, expr.prop, normalize(expr.filler))
    if isinstance(expr, ComplementOf):
        return ComplementOf(normalize(expr.operand))
    return expr


def subexpressions(expr: ClassExpr) -> Iterator[ClassExpr]:
    yield expr
    if isinstance(expr, (UnionOf, IntersectionOf)):
        for op in expr.operands:
            yield from subexpressions(op)
    elif isinstance(expr, (SomeValuesFrom, MinCardinality)):
        yield from subexpressions(expr.filler)
    elif isinstance(expr, ComplementOf):
        yield from subexpressions(expr.operand)


def named_classes(expr: ClassExpr) -> set[Iri]:
    return {e.iri for e in subexpressions(expr) if isinstance(e, Named)}


def properties(expr: ClassExpr) -> set[Iri]:
    return {e.prop for e in subexpressions(expr) if isinstance(e, (SomeValuesFrom, MinCardinality))}


# ---------------------------------------------------------------------------
# axioms


@dataclass(frozen=True)
class SubClassOf:
    sub: ClassExpr
    sup: ClassExpr

    def expressions(self) -> tuple[ClassExpr, ...]:
        return (self.sub, self.sup)

    def key(self) -> tuple:
        return ("sub", normalize(self.sub), normalize(self.sup))


@dataclass(frozen=True)
class EquivalentClasses:
    a: ClassExpr
    b: ClassExpr

    def expressions(self) -> tuple[ClassExpr, ...]:
        return (self.a, self.b)

    def key(self) -> tuple:
        pair = sorted((normalize(self.a), normalize(self.b)), key=lambda e: e.render())
        return ("equiv", *pair)


@dataclass(frozen=True)
class DisjointClasses:
    classes: tuple[Named, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "classes", tuple(self.classes))
        if len(self.classes) < 2:
            raise OntologyError("DisjointClasses needs at least two classes")
        if not all(isinstance(c, Named) for c in self.classes):
            raise OntologyError("DisjointClasses operands must be named classes")

    def expressions(self) -> tuple[ClassExpr, ...]:
        return self.classes

    def key(self) -> tuple:
        return ("disjoint", tuple(sorted(c.iri.value for c in self.classes)))


@dataclass(frozen=True)
class ClassAssertion:
    cls: ClassExpr
    individual: Iri

    def expressions(self) -> tuple[ClassExpr, ...]:
        return (self.cls,)

    def key(self) -> tuple:
        return ("type", normalize(self.cls), self.individual)


@dataclass(frozen=True)
class PropertyAssertion:
    prop: Iri
    subject: Iri
    object: Iri

    def expressions(self) -> tuple[ClassExpr, ...]:
        return ()

    def key(self) -> tuple:
        return ("prop", self.prop, self.subject, self.object)


@dataclass(frozen=True)
class Annotation:
    """Non-logical statement: ``rdfs:label`` text or an ``rdfs:seeAlso`` link."""

    subject: Iri
    prop: Iri
    value: Union[Literal, Iri]

    def expressions(self) -> tuple[ClassExpr, ...]:
        return ()

    def key(self) -> tuple:
        return ("annotation", self.subject, self.prop, self.value)


def label(subject: Iri, text: str) -> Annotation:
    return Annotation(subject, RDFS_LABEL, Literal(text))


Axiom = Union[SubClassOf, EquivalentClasses, DisjointClasses, ClassAssertion, PropertyAssertion, Annotation]


@dataclass
class Ontology:
    iri: Iri
    axioms: list[Axiom] = field(default_factory=list)
    declared_classes: set[Iri] = field(default_factory=set)
    declared_properties: set[Iri] = field(default_factory=set)
    _keys: set = field(default_factory=set, init=False, repr=False, compare=False)

    def add(self, axiom: Axiom) -> None:
        """Append ``axiom`` unless a structurally equal one is already present."""
        if len(self._keys) != len(self.axioms):
            self._keys = {a.key() for a in self.axioms}
        key = axiom.key()
        if key in self._keys:
            return
        self._keys.add(key)
        self.axioms.append(axiom)

    def declare_class(self, iri: Iri) -> Iri:
        self.declared_classes.add(iri)
        return iri

    def declare_property(self, iri: Iri) -> Iri:
        self.declared_properties.add(iri)
        return iri

    def copy(self) -> "Ontology":
        return Ontology(self.iri, list(self.axioms), set(self.declared_classes), set(self.declared_properties))

    def validate(self) -> None:
        for axiom in self.axioms:
            for expr in axiom.expressions():
                missing = named_classes(expr) - self.declared_classes
                if missing:
                    raise OntologyError(f"undeclared class {sorted(i.value for i in missing)[0]} in {type(axiom).__name__}")
                undeclared = properties(expr) - self.declared_properties
                if undeclared:
                    raise OntologyError(f"undeclared property {sorted(i.value for i in undeclared)[0]}")
            if isinstance(axiom, PropertyAssertion) and axiom.prop not in self.declared_properties:
                raise OntologyError(f"undeclared property {axiom.prop.value}")

    def canonical(self) -> tuple[frozenset, frozenset, frozenset]:
        """Order-insensitive structural identity, for comparing ontologies."""
        return (
            frozenset(a.key() for a in self.axioms),
            frozenset(self.declared_classes),
            frozenset(self.declared_properties),
        )

    def tbox(self) -> list[Axiom]:
        return [a for a in self.axioms if isinstance(a, (SubClassOf, EquivalentClasses, DisjointClasses))]

    def labels(self) -> dict[Iri, str]:
        return {
            a.subject: a.value.lexical
            for a in self.axioms
            if isinstance(a, Annotation) and a.prop == RDFS_LABEL and isinstance(a.value, Literal)
        }


# ---------------------------------------------------------------------------
# RDF mapping


def _expr_node(expr: ClassExpr, out: list[Triple]) -> Subject:
    if isinstance(expr, Named):
        return expr.iri
    node = fresh_blank()
    if isinstance(expr, (UnionOf, IntersectionOf)):
        out.append(Triple(node, RDF_TYPE, OWL_CLASS))
        pred = OWL_UNION if isinstance(expr, UnionOf) else OWL_INTERSECTION
        out.append(Triple(node, pred, _list_node([_expr_node(op, out) for op in expr.operands], out)))
    elif isinstance(expr, SomeValuesFrom):
        out.append(Triple(node, RDF_TYPE, OWL_RESTRICTION))
        out.append(Triple(node, OWL_ON_PROPERTY, expr.prop))
        out.append(Triple(node, OWL_SOME, _expr_node(expr.filler, out)))
    elif isinstance(expr, MinCardinality):
        out.append(Triple(node, RDF_TYPE, OWL_RESTRICTION))
        out.append(Triple(node, OWL_ON_PROPERTY, expr.prop))
        out.append(Triple(node, OWL_MIN_QCARD, Literal(str(expr.n), XSD_NNI)))
        out.append(Triple(node, OWL_ON_CLASS, _expr_node(expr.filler, out)))
    elif isinstance(expr, ComplementOf):
        out.append(Triple(node, RDF_TYPE, OWL_CLASS))
        out.append(Triple(node, OWL_COMPLEMENT, _expr_node(expr.operand, out)))
    else:
        raise OntologyError(f"unknown class expression {expr!r}")
    return node


def _list_node(items: list[Term], out: list[Triple]) -> Term:
    if not items:
        return RDF_NIL
    head = cell = fresh_blank()
    for k, item in enumerate(items):
        out.append(Triple(cell, RDF_FIRST, item))
        nxt = fresh_blank() if k < len(items) - 1 else RDF_NIL
        out.append(Triple(cell, RDF_REST, nxt))
        cell = nxt
    return head


def axiom_triples(axiom: Axiom) -> list[Triple]:
    out: list[Triple] = []
    if isinstance(axiom, SubClassOf):
        out.append(Triple(_expr_node(axiom.sub, out), RDFS_SUBCLASSOF, _expr_node(axiom.sup, out)))
    elif isinstance(axiom, EquivalentClasses):
        out.append(Triple(_expr_node(axiom.a, out), OWL_EQUIVALENT, _expr_node(axiom.b, out)))
    elif isinstance(axiom, DisjointClasses):
        if len(axiom.classes) == 2:
            out.append(Triple(axiom.classes[0].iri, OWL_DISJOINT_WITH, axiom.classes[1].iri))
        else:
            node = fresh_blank()
            out.append(Triple(node, RDF_TYPE, OWL_ALL_DISJOINT))
            out.append(Triple(node, OWL_MEMBERS, _list_node([c.iri for c in axiom.classes], out)))
    elif isinstance(axiom, ClassAssertion):
        out.append(Triple(axiom.individual, RDF_TYPE, _expr_node(axiom.cls, out)))
    elif isinstance(axiom, PropertyAssertion):
        out.append(Triple(axiom.subject, axiom.prop, axiom.object))
    elif isinstance(axiom, Annotation):
        out.append(Triple(axiom.subject, axiom.prop, axiom.value))
    else:
        raise OntologyError(f"unknown axiom {axiom!r}")
    return out


def to_triples(ontology: Ontology) -> Graph:
    graph = Graph()
    graph.add(Triple(ontology.iri, RDF_TYPE, OWL_ONTOLOGY))
    for cls in ontology.declared_classes:
        graph.add(Triple(cls, RDF_TYPE, OWL_CLASS))
    for prop in ontology.declared_properties:
        graph.add(Triple(prop, RDF_TYPE, OWL_OBJECT_PROPERTY))
    for axiom in ontology.axioms:
        graph.update(axiom_triples(axiom))
    return graph


class _Reader:
    def __init__(self, graph: Graph) -> None:
        self.g = graph

    def one(self, node: Subject, pred: Iri, what: str) -> Term:
        objs = self.g.objects(node, pred)
        if len(objs) != 1:
            raise OntologyError(f"{what}: expected exactly one {pred.value}, found {len(objs)}", node)
        obj = next(iter(objs))
        return obj

    def read_list(self, head: Term) -> list[Term]:
        items: list[Term] = []
        seen: set[Term] = set()
        cur = head
        while cur != RDF_NIL:
            if not isinstance(cur, BlankNode) or cur in seen:
                raise OntologyError("malformed RDF list", cur)
            seen.add(cur)
            firsts = self.g.objects(cur, RDF_FIRST)
            rests = self.g.objects(cur, RDF_REST)
            if len(firsts) != 1 or len(rests) != 1:
                raise OntologyError("dangling or branching rdf:rest chain", cur)
            first, rest = next(iter(firsts)), next(iter(rests))
            items.append(first)
            cur = rest
        return items

    def expr(self, node: Term) -> ClassExpr:
        if isinstance(node, Iri):
            return Named(node)
        if not isinstance(node, BlankNode):
            raise OntologyError("literal where a class expression was expected", node)
        types = self.g.objects(node, RDF_TYPE)
        if OWL_RESTRICTION in types:
            if not self.g.objects(node, OWL_ON_PROPERTY):
                raise OntologyError("restriction missing owl:onProperty", node)
            prop = self.one(node, OWL_ON_PROPERTY, "restriction")
            if not isinstance(prop, Iri):
                raise OntologyError("owl:onProperty must be an IRI", node)
            if self.g.objects(node, OWL_SOME):
                return SomeValuesFrom(prop, self.expr(self.one(node, OWL_SOME, "restriction")))
            if self.g.objects(node, OWL_MIN_QCARD):
                n = self.one(node, OWL_MIN_QCARD, "restriction")
                if not isinstance(n, Literal) or not n.lexical.isdigit():
                    raise OntologyError("cardinality must be a non-negative integer literal", node)
                filler = self.expr(self.one(node, OWL_ON_CLASS, "qualified cardinality"))
                return MinCardinality(int(n.lexical), prop, filler)
            raise OntologyError("unsupported restriction kind", node)
        for pred, kind in ((OWL_UNION, UnionOf), (OWL_INTERSECTION, IntersectionOf)):
            if self.g.objects(node, pred):
                items = self.read_list(self.one(node, pred, kind.__name__))
                if len(items) < 2:
                    raise OntologyError(f"{kind.__name__} list needs at least two members", node)
                return kind(tuple(self.expr(i) for i in items))
        if self.g.objects(node, OWL_COMPLEMENT):
            return ComplementOf(self.expr(self.one(node, OWL_COMPLEMENT, "complement")))
        raise OntologyError("blank node is not a class expression", node)


def from_triples(graph: Graph) -> Ontology:
    """Rebuild an :class:`Ontology` from its RDF encoding.

    Blank nodes are only followed from the axiom triples that reference them;
    a malformed structure raises :class:`OntologyError` naming the node.
    """
    r = _Reader(graph)
    heads = [t.s for t in graph.match(None, RDF_TYPE, OWL_ONTOLOGY) if isinstance(t.s, Iri)]
    if len(heads) > 1:
        raise OntologyError("more than one owl:Ontology header")
    onto = Ontology(heads[0] if heads else Iri("urn:x-ontology:anonymous"))
    classes = {t.s for t in graph.match(None, RDF_TYPE, OWL_CLASS) if isinstance(t.s, Iri)}
    props = {t.s for t in graph.match(None, RDF_TYPE, OWL_OBJECT_PROPERTY) if isinstance(t.s, Iri)}
    onto.declared_classes |= classes
    onto.declared_properties |= props

    axioms: list[Axiom] = []
    for t in sorted(graph.match(None, RDFS_SUBCLASSOF, None), key=_tkey):
        axioms.append(SubClassOf(r.expr(t.s), r.expr(t.o)))
    for t in sorted(graph.match(None, OWL_EQUIVALENT, None), key=_tkey):
        axioms.append(EquivalentClasses(r.expr(t.s), r.expr(t.o)))
    for t in sorted(graph.match(None, OWL_DISJOINT_WITH, None), key=_tkey):
        axioms.append(DisjointClasses((Named(t.s), Named(t.o))))
    for t in sorted(graph.match(None, RDF_TYPE, OWL_ALL_DISJOINT), key=_tkey):
        members = r.read_list(r.one(t.s, OWL_MEMBERS, "AllDisjointClasses"))
        axioms.append(DisjointClasses(tuple(Named(m) for m in members)))
    for t in sorted(graph.match(None, RDF_TYPE, None), key=_tkey):
        if t.o in _STRUCTURAL_TYPES or isinstance(t.s, BlankNode):
            continue
        axioms.append(ClassAssertion(r.expr(t.o), t.s))
    for prop in sorted(props, key=lambda p: p.value):
        for t in sorted(graph.match(None, prop, None), key=_tkey):
            if isinstance(t.s, Iri) and isinstance(t.o, Iri):
                axioms.append(PropertyAssertion(prop, t.s, t.o))
    for prop in ANNOTATION_PROPERTIES:
        for t in sorted(graph.match(None, prop, None), key=_tkey):
            if isinstance(t.s, Iri) and isinstance(t.o, (Literal, Iri)):
                axioms.append(Annotation(t.s, prop, t.o))
    for axiom in axioms:
        onto.add(axiom)
    return onto


def _tkey(t: Triple) -> tuple:
    return triple_sort_key(t)
