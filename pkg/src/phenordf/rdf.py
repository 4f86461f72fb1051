"""In-memory RDF terms, triples and a named-graph dataset.

Each graph keeps three nested-dict indexes (subject-first, predicate-object
first, object-first) so that any triple pattern can be answered from the
index whose leading positions are bound.
"""
from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple, Optional, Union

RDF = "http://www.w3.org/1999/02/22-rdf-syntax-ns#"
RDFS = "http://www.w3.org/2000/01/rdf-schema#"
OWL = "http://www.w3.org/2002/07/owl#"
XSD = "http://www.w3.org/2001/XMLSchema#"
DEFAULT_BASE = "https://www.caliberresearch.org/PhenotypeOntology#"

_ABSOLUTE_IRI = re.compile(r"^[A-Za-z][A-Za-z0-9+.\-]*:[^\s<>\"{}|\\^`]*$")


class TermError(ValueError):
    """Raised for malformed terms or triples."""


@dataclass(frozen=True, slots=True)
class Iri:
    value: str

    def __post_init__(self) -> None:
        if not _ABSOLUTE_IRI.match(self.value):
            raise TermError(f"not an absolute IRI: {self.value!r}")

    def __str__(self) -> str:
        return f"<{self.value}>"


@dataclass(frozen=True, slots=True)
class BlankNode:
    label: str

    def __str__(self) -> str:
        return f"_:{self.label}"


@dataclass(frozen=True, slots=True)
class Literal:
    lexical: str
    datatype: Iri = None  # type: ignore[assignment]
    lang: Optional[str] = None

    def __post_init__(self) -> None:
        if self.lang is not None:
            lang = self.lang.lower()
            object.__setattr__(self, "lang", lang)
            if self.datatype is not None and self.datatype != LANG_STRING:
                raise TermError("language-tagged literal must have datatype rdf:langString")
            object.__setattr__(self, "datatype", LANG_STRING)
        elif self.datatype is None:
            object.__setattr__(self, "datatype", XSD_STRING)
        elif self.datatype == LANG_STRING:
            raise TermError("rdf:langString literal requires a language tag")

    def __str__(self) -> str:
        text = '"' + escape_string(self.lexical) + '"'
        if self.lang:
            return f"{text}@{self.lang}"
        if self.datatype == XSD_STRING:
            return text
        return f"{text}^^{self.datatype}"


Term = Union[Iri, BlankNode, Literal]
Subject = Union[Iri, BlankNode]


class Triple(NamedTuple):
    s: Subject
    p: Iri
    o: Term


LANG_STRING = Iri(RDF + "langString")
XSD_STRING = Iri(XSD + "string")

RDF_TYPE = Iri(RDF + "type")
RDF_FIRST = Iri(RDF + "first")
RDF_REST = Iri(RDF + "rest")
RDF_NIL = Iri(RDF + "nil")
RDFS_LABEL = Iri(RDFS + "label")
RDFS_SUBCLASSOF = Iri(RDFS + "subClassOf")

STANDARD_PREFIXES = {
    "rdf": RDF,
    "rdfs": RDFS,
    "owl": OWL,
    "xsd": XSD,
}

_STRING_ESCAPES = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\r": "\\r", "\t": "\\t"}


def escape_string(text: str) -> str:
    return "".join(_STRING_ESCAPES.get(ch, ch) for ch in text)


_blank_ids = itertools.count()


def fresh_blank() -> BlankNode:
    """Return a blank node whose label is unique for this process."""
    return BlankNode(f"b{next(_blank_ids)}")


def validate_triple(t: Triple) -> Triple:
    s, p, o = t
    if not isinstance(s, (Iri, BlankNode)):
        raise TermError(f"subject must be an IRI or blank node, got {s!r}")
    if not isinstance(p, Iri):
        raise TermError(f"predicate must be an IRI, got {p!r}")
    if not isinstance(o, (Iri, BlankNode, Literal)):
        raise TermError(f"object must be an RDF term, got {o!r}")
    return t


def term_sort_key(term: Term) -> tuple:
    if isinstance(term, Iri):
        return (0, term.value)
    if isinstance(term, BlankNode):
        return (1, term.label)
    return (2, term.lexical, term.datatype.value, term.lang or "")


def triple_sort_key(t: Triple) -> tuple:
    return (term_sort_key(t.s), term_sort_key(t.p), term_sort_key(t.o))


class Graph:
    """A duplicate-free set of triples with three access indexes."""

    def __init__(self, triples: Iterable[Triple] = ()) -> None:
        self._spo: dict[Subject, dict[Iri, set[Term]]] = {}
        self._pos: dict[Iri, dict[Term, set[Subject]]] = {}
        self._osp: dict[Term, dict[Subject, set[Iri]]] = {}
        self._size = 0
        for t in triples:
            self.add(t)

    def __len__(self) -> int:
        return self._size

    def __iter__(self) -> Iterator[Triple]:
        for s, by_p in self._spo.items():
            for p, objs in by_p.items():
                for o in objs:
                    yield Triple(s, p, o)

    def __contains__(self, t: Triple) -> bool:
        objs = self._spo.get(t[0], {}).get(t[1])
        return objs is not None and t[2] in objs

    def add(self, t: Triple) -> bool:
        s, p, o = validate_triple(t)
        objs = self._spo.setdefault(s, {}).setdefault(p, set())
        if o in objs:
            return False
        objs.add(o)
        self._pos.setdefault(p, {}).setdefault(o, set()).add(s)
        self._osp.setdefault(o, {}).setdefault(s, set()).add(p)
        self._size += 1
        return True

    def update(self, triples: Iterable[Triple]) -> int:
        return sum(self.add(t) for t in triples)

    def discard(self, t: Triple) -> bool:
        if t not in self:
            return False
        s, p, o = t
        _drop(self._spo, s, p, o)
        _drop(self._pos, p, o, s)
        _drop(self._osp, o, s, p)
        self._size -= 1
        return True

    def match(
        self,
        s: Optional[Subject] = None,
        p: Optional[Iri] = None,
        o: Optional[Term] = None,
    ) -> Iterator[Triple]:
        if s is not None:
            by_p = self._spo.get(s)
            if not by_p:
                return
            if p is not None:
                objs = by_p.get(p, ())
                if o is not None:
                    if o in objs:
                        yield Triple(s, p, o)
                else:
                    for obj in objs:
                        yield Triple(s, p, obj)
            elif o is not None:
                for pred in self._osp.get(o, {}).get(s, ()):
                    yield Triple(s, pred, o)
            else:
                for pred, objs in by_p.items():
                    for obj in objs:
                        yield Triple(s, pred, obj)
        elif p is not None:
            by_o = self._pos.get(p)
            if not by_o:
                return
            if o is not None:
                for subj in by_o.get(o, ()):
                    yield Triple(subj, p, o)
            else:
                for obj, subjs in by_o.items():
                    for subj in subjs:
                        yield Triple(subj, p, obj)
        elif o is not None:
            for subj, preds in self._osp.get(o, {}).items():
                for pred in preds:
                    yield Triple(subj, pred, o)
        else:
            yield from self

    def count(
        self,
        s: Optional[Subject] = None,
        p: Optional[Iri] = None,
        o: Optional[Term] = None,
    ) -> int:
        """Cardinality of a pattern, cheap for the common shapes."""
        if s is None and p is None and o is None:
            return self._size
        if s is None and o is None:
            return sum(len(v) for v in self._pos.get(p, {}).values())
        if s is None and p is not None:
            return len(self._pos.get(p, {}).get(o, ()))
        return sum(1 for _ in self.match(s, p, o))

    def objects(self, s: Subject, p: Iri) -> set[Term]:
        return set(self._spo.get(s, {}).get(p, ()))

    def subjects(self, p: Iri, o: Term) -> set[Subject]:
        return set(self._pos.get(p, {}).get(o, ()))

    def value(self, s: Subject, p: Iri) -> Optional[Term]:
        objs = self._spo.get(s, {}).get(p)
        if not objs:
            return None
        if len(objs) > 1:
            raise TermError(f"{s} has {len(objs)} values for {p}, expected one")
        return next(iter(objs))

    def subject_set(self) -> set[Subject]:
        return set(self._spo)

    def object_refs(self, o: Term) -> int:
        return sum(len(preds) for preds in self._osp.get(o, {}).values())

    def via_spo(self) -> set[Triple]:
        return set(self)

    def via_pos(self) -> set[Triple]:
        return {Triple(s, p, o) for p, by_o in self._pos.items() for o, subjs in by_o.items() for s in subjs}

    def via_osp(self) -> set[Triple]:
        return {Triple(s, p, o) for o, by_s in self._osp.items() for s, preds in by_s.items() for p in preds}


def _drop(index: dict, a, b, c) -> None:
    inner = index[a]
    leaf = inner[b]
    leaf.discard(c)
    if not leaf:
        del inner[b]
        if not inner:
            del index[a]


class UnknownPrefixError(KeyError):
    def __init__(self, prefix: str) -> None:
        super().__init__(prefix)
        self.prefix = prefix

    def __str__(self) -> str:
        return f"unknown prefix {self.prefix!r}"


def resolve_prefixed(name: str, prefixes: dict[str, str]) -> Iri:
    prefix, sep, local = name.partition(":")
    if not sep:
        raise TermError(f"not a prefixed name: {name!r}")
    if prefix not in prefixes:
        raise UnknownPrefixError(prefix)
    return Iri(prefixes[prefix] + local)


class Dataset:
    """Named graphs plus a prefix table.

    The ``asserted`` and ``inferred`` graphs always exist.  ``materialized``
    is set by the reasoner and cleared by any insert into a graph other than
    the inferred one.
    """

    def __init__(self, base: str = DEFAULT_BASE) -> None:
        self.base = base
        self.prefixes: dict[str, str] = {**STANDARD_PREFIXES, "clb": base, "": base}
        self.graphs: dict[Iri, Graph] = {}
        self.asserted_name = Iri(base + "asserted")
        self.inferred_name = Iri(base + "inferred")
        self.graphs[self.asserted_name] = Graph()
        self.graphs[self.inferred_name] = Graph()
        self.materialized = False

    @property
    def asserted(self) -> Graph:
        return self.graphs[self.asserted_name]

    @property
    def inferred(self) -> Graph:
        return self.graphs[self.inferred_name]

    def graph(self, name: Iri) -> Graph:
        return self.graphs.setdefault(name, Graph())

    def insert(self, graph: Iri, t: Triple) -> bool:
        added = self.graph(graph).add(t)
        if added and graph != self.inferred_name:
            self.materialized = False
        return added

    def insert_all(self, graph: Iri, triples: Iterable[Triple]) -> int:
        return sum(self.insert(graph, t) for t in triples)

    def match(
        self,
        pattern: tuple[Optional[Subject], Optional[Iri], Optional[Term]] = (None, None, None),
        graph: Optional[Iri] = None,
    ) -> Iterator[Triple]:
        """Triples matching ``pattern`` in one graph, or in the merge of all graphs."""
        if graph is not None:
            g = self.graphs.get(graph)
            if g is not None:
                yield from g.match(*pattern)
            return
        populated = [g for g in self.graphs.values() if len(g)]
        if len(populated) == 1:
            yield from populated[0].match(*pattern)
            return
        seen: set[Triple] = set()
        for g in populated:
            for t in g.match(*pattern):
                if t not in seen:
                    seen.add(t)
                    yield t

    def count(self, pattern: tuple = (None, None, None)) -> int:
        return sum(g.count(*pattern) for g in self.graphs.values())

    def contains(self, t: Triple) -> bool:
        return any(t in g for g in self.graphs.values())

    def resolve(self, name: str) -> Iri:
        return resolve_prefixed(name, self.prefixes)

    def iri(self, local: str) -> Iri:
        return Iri(self.base + local)

    def __len__(self) -> int:
        return sum(len(g) for g in self.graphs.values())


def isomorphic(a: Iterable[Triple], b: Iterable[Triple]) -> bool:
    """Graph isomorphism allowing any bijective renaming of blank nodes."""
    ga, gb = set(a), set(b)
    if len(ga) != len(gb):
        return False
    ground_a = {t for t in ga if not _has_blank(t)}
    ground_b = {t for t in gb if not _has_blank(t)}
    if ground_a != ground_b:
        return False
    rest_a, rest_b = ga - ground_a, gb - ground_b
    colors_a, colors_b = _refine_colors(rest_a), _refine_colors(rest_b)
    if sorted(colors_a.values()) != sorted(colors_b.values()):
        return False
    candidates: dict[BlankNode, list[BlankNode]] = {}
    for node, color in colors_a.items():
        candidates[node] = sorted((m for m, c in colors_b.items() if c == color), key=lambda n: n.label)
    order = sorted(colors_a, key=lambda n: len(candidates[n]))
    touching: dict[BlankNode, list[Triple]] = {n: [] for n in colors_a}
    for t in rest_a:
        for x in {t.s, t.o}:
            if isinstance(x, BlankNode):
                touching[x].append(t)
    return _search(order, 0, {}, set(), candidates, touching, rest_a, rest_b)


def _has_blank(t: Triple) -> bool:
    return isinstance(t.s, BlankNode) or isinstance(t.o, BlankNode)


def _refine_colors(triples: set[Triple]) -> dict[BlankNode, int]:
    """Weisfeiler-Lehman style colour refinement of blank nodes."""
    blanks = {x for t in triples for x in (t.s, t.o) if isinstance(x, BlankNode)}
    colors = {n: 0 for n in blanks}

    def label(x: Term) -> object:
        return ("_", colors[x]) if isinstance(x, BlankNode) else x

    for _ in range(len(blanks) + 1):
        signature: dict[BlankNode, list] = {n: [] for n in blanks}
        for s, p, o in triples:
            if isinstance(s, BlankNode):
                signature[s].append(("out", p.value, repr(label(o))))
            if isinstance(o, BlankNode):
                signature[o].append(("in", p.value, repr(label(s))))
        new = {n: hash((colors[n], tuple(sorted(sig)))) for n, sig in signature.items()}
        stable = len(set(new.values())) == len(set(colors.values()))
        colors = new
        if stable:
            break
    return colors


def _search(order, i, mapping, used, candidates, touching, rest_a, rest_b) -> bool:
    if i == len(order):
        def rename(x):
            return mapping.get(x, x) if isinstance(x, BlankNode) else x
        return {Triple(rename(s), p, rename(o)) for s, p, o in rest_a} == rest_b
    node = order[i]
    for cand in candidates[node]:
        if cand in used:
            continue
        mapping[node] = cand
        used.add(cand)
        if _consistent(touching[node], mapping, rest_b) and _search(
            order, i + 1, mapping, used, candidates, touching, rest_a, rest_b
        ):
            return True
        del mapping[node]
        used.discard(cand)
    return False


def _consistent(triples, mapping, rest_b) -> bool:
    """Every triple whose blank nodes are all mapped must exist in the other graph."""
    for s, p, o in triples:
        if isinstance(s, BlankNode):
            if s not in mapping:
                continue
            s = mapping[s]
        if isinstance(o, BlankNode):
            if o not in mapping:
                continue
            o = mapping[o]
        if Triple(s, p, o) not in rest_b:
            return False
    return True
