"""Phenotype compiler: structural core, codelists, logic, EHR triples, cohorts.

The four stages mirror how a phenotype ontology is assembled by hand: a
fixed core vocabulary, classes generated from codelists, set logic over
those classes, and finally patient data expressed as ``obtained`` links.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Iterable, Optional
from urllib.parse import unquote

from .owl import (
    RDFS_SEEALSO,
    Annotation,
    ClassAssertion,
    ClassExpr,
    DisjointClasses,
    EquivalentClasses,
    IntersectionOf,
    MinCardinality,
    Named,
    Ontology,
    SomeValuesFrom,
    SubClassOf,
    UnionOf,
    label,
)
from .phenotype import (
    CodelistEntry,
    DefinitionError,
    EhrRecord,
    PhenotypeDef,
    RowDiagnostic,
    Terminology,
    category_class,
    code_individual,
    component_class,
    patient_individual,
    phenotype_code_class,
    subject_with_category,
    subject_with_component,
)
from .rdf import RDF_TYPE, XSD, Dataset, Iri, Literal, Triple
from .sparql import BGP, PrefixedName, Query, TriplePattern, Var, evaluate

CORE_CLASSES = ("subject", "code", "component", "category")
OBTAINED = "obtained"
EVENT_CLASS = "event"
EVENT_PROPS = ("event_subject", "event_code", "event_date", "event_source")
QUERY_PREFIXES = {
    "rdf": "http://www.w3.org/1999/02/22-rdf-syntax-ns#",
    "owl": "http://www.w3.org/2002/07/owl#",
    "rdfs": "http://www.w3.org/2000/01/rdf-schema#",
    "xsd": "http://www.w3.org/2001/XMLSchema#",
}


class CompileError(DefinitionError):
    pass


class CohortOverlapError(ValueError):
    def __init__(self, overlaps: dict[Iri, list[str]]) -> None:
        self.overlaps = overlaps
        shown = ", ".join(f"{p.value} in {'+'.join(c)}" for p, c in sorted(overlaps.items(), key=lambda kv: kv[0].value)[:10])
        super().__init__(f"{len(overlaps)} patient(s) belong to more than one cohort: {shown}")


def ontology_iri(base: str) -> Iri:
    return Iri(base.rstrip("#/") or base)


# ---------------------------------------------------------------------------
# step 1: structural core


def emit_core(phenotypes: Iterable[str], base: str) -> Ontology:
    onto = Ontology(ontology_iri(base))
    for name in CORE_CLASSES:
        onto.declare_class(Iri(base + name))
    onto.declare_property(Iri(base + OBTAINED))
    code = Named(Iri(base + "code"))
    for ph in phenotypes:
        scaffold = onto.declare_class(Iri(base + phenotype_code_class(ph)))
        onto.add(SubClassOf(Named(scaffold), code))
    return onto


# ---------------------------------------------------------------------------
# step 2: codelists


def ingest_codelist(
    entries: Iterable[CodelistEntry],
    into: Ontology,
    defn: PhenotypeDef,
    source: str = "<codelist>",
) -> tuple[Ontology, list[RowDiagnostic]]:
    """Add component, category and code classes/individuals for ``entries``.

    Every component of ``defn`` gets its class even when no entry names it.
    """
    base = defn.base_iri
    onto = into.copy()
    warnings: list[RowDiagnostic] = []
    phenotype = Named(Iri(base + phenotype_code_class(defn.name)))
    for comp in defn.components:
        cls = onto.declare_class(Iri(base + component_class(comp.name)))
        onto.add(SubClassOf(Named(cls), phenotype))
        if comp.label:
            onto.add(label(cls, comp.label))
        ind = Iri(base + f"component_{comp.name}")
        onto.add(ClassAssertion(Named(Iri(base + "component")), ind))
        onto.add(label(ind, comp.label or comp.name))
        for cat, text in sorted(comp.category_labels.items()):
            _declare_category(onto, base, comp.name, cat, text)

    seen: dict[tuple[str, str, str], int] = {}
    for row, e in enumerate(entries, 2):
        comp = defn.component(e.component)
        if comp is None:
            raise CompileError(f"codelist row names unknown component {e.component!r}", source, row)
        key = (e.component, e.terminology.value, e.code)
        if key in seen:
            if seen[key] != e.category:
                raise CompileError(
                    f"{e.terminology.value} {e.code} is in categories {seen[key]} and {e.category} of {e.component}",
                    source,
                    row,
                )
            warnings.append(RowDiagnostic(source, row, f"duplicate {e.terminology.value} {e.code} in {e.component} category {e.category}"))
            continue
        seen[key] = e.category
        cat = _declare_category(onto, base, e.component, e.category, comp.category_labels.get(e.category, ""))
        ind = Iri(base + code_individual(e.terminology.value, e.code))
        onto.add(ClassAssertion(Named(cat), ind))
        if e.description:
            onto.add(label(ind, e.description))
        external = defn.terminology_iris.get(e.terminology.value)
        if external:
            onto.add(Annotation(ind, RDFS_SEEALSO, Iri(external + e.code)))
    return onto, warnings


def _declare_category(onto: Ontology, base: str, component: str, category: int, text: str) -> Iri:
    cls = Iri(base + category_class(component, category))
    if cls not in onto.declared_classes:
        onto.declare_class(cls)
        onto.add(SubClassOf(Named(cls), Named(Iri(base + component_class(component)))))
        ind = Iri(base + f"category_{component}_{category}")
        onto.add(ClassAssertion(Named(Iri(base + "category")), ind))
        onto.add(label(ind, text or f"{component} category {category}"))
    if text:
        onto.add(label(cls, text))
    return cls


def code_index(ontology: Ontology) -> dict[tuple[str, str], Iri]:
    """(terminology, code) -> code individual, recovered from class assertions."""
    base = _base_of(ontology)
    terms = {t.value for t in Terminology}
    out: dict[tuple[str, str], Iri] = {}
    for a in ontology.axioms:
        if not isinstance(a, ClassAssertion) or not a.individual.value.startswith(base):
            continue
        local = a.individual.value[len(base):]
        term, sep, code = local.partition("_")
        if sep and term in terms:
            out[(term, unquote(code))] = a.individual
    return out


def _base_of(ontology: Ontology) -> str:
    subject = next((c.value for c in ontology.declared_classes if c.value.endswith("subject")), None)
    if subject is None:
        raise CompileError("ontology has no structural core (class 'subject' missing)")
    return subject[: -len("subject")]


# ---------------------------------------------------------------------------
# step 3: logic and cohort queries


@dataclass(frozen=True)
class CohortQuery:
    name: str
    query: Query
    oracle_class: Optional[str] = None


class _LogicCompiler:
    def __init__(self, defn: PhenotypeDef, onto: Ontology) -> None:
        self.defn, self.onto, self.base = defn, onto, defn.base_iri
        self.subject = Named(Iri(self.base + "subject"))
        self.obtained = Iri(self.base + OBTAINED)
        self.logic = {lc.name: i for i, lc in enumerate(defn.logic_classes)}

    def iri(self, local: str) -> Iri:
        return Iri(self.base + local)

    def fail(self, message: str, needle: Optional[str], pointer: str) -> CompileError:
        err = self.defn.error(message, needle, pointer)
        return CompileError(err.message, err.source, err.line, err.pointer)

    def code_class(self, ref: str, pointer: str) -> Iri:
        comp, sep, cat = ref.partition(":")
        if self.defn.component(comp) is None:
            raise self.fail(f"unknown component {comp!r}", ref, pointer)
        if not sep:
            return self.iri(component_class(comp))
        if not cat.isdigit() or self.iri(category_class(comp, int(cat))) not in self.onto.declared_classes:
            raise self.fail(f"component {comp!r} has no category {cat!r}", ref, pointer)
        return self.iri(category_class(comp, int(cat)))

    def holder(self, cls: Named, code: Iri) -> None:
        self.onto.declare_class(cls.iri)
        self.onto.add(EquivalentClasses(cls, IntersectionOf((self.subject, SomeValuesFrom(self.obtained, Named(code))))))

    def ref(self, name: str, pointer: str) -> Named:
        if name == "subject":
            return self.subject
        if ":" in name or self.defn.component(name) is not None:
            code = self.code_class(name, pointer)
            if ":" in name:
                comp, _, cat = name.partition(":")
                cls = Named(self.iri(subject_with_category(comp, int(cat))))
            else:
                cls = Named(self.iri(subject_with_component(name)))
            self.holder(cls, code)
            return cls
        if name in self.logic:
            return Named(self.iri(name))
        raise self.fail(f"unknown class reference {name!r}", name, pointer)

    def expr(self, e, pointer: str) -> ClassExpr:
        if isinstance(e, str):
            return self.ref(e, pointer)
        if "at_least_one" in e:
            code = self.code_class(e["at_least_one"], pointer + "/at_least_one")
            return IntersectionOf((self.subject, MinCardinality(1, self.obtained, Named(code))))
        kind = "union" if "union" in e else "intersection"
        ops = tuple(self.expr(x, f"{pointer}/{kind}/{i}") for i, x in enumerate(e[kind]))
        ops = tuple(dict.fromkeys(ops))
        if len(ops) == 1:
            return ops[0]
        return UnionOf(ops) if kind == "union" else IntersectionOf(ops)

    def references(self, e) -> set[str]:
        if isinstance(e, str):
            return {e} if e in self.logic else set()
        if "at_least_one" in e:
            return set()
        return set().union(*(self.references(x) for x in next(iter(e.values()))))

    def check_cycles(self) -> None:
        deps = {}
        for lc in self.defn.logic_classes:
            exprs = [lc.equivalent] if lc.union_of_subclasses is None else lc.union_of_subclasses
            deps[lc.name] = set().union(*(self.references(x) for x in exprs)) if exprs else set()
        state: dict[str, int] = {}

        def visit(n: str, path: list[str]) -> None:
            state[n] = 1
            for m in sorted(deps[n]):
                if state.get(m) == 1:
                    cycle = path[path.index(m):] + [m] if m in path else [n, m]
                    i = self.logic[m]
                    raise self.fail("cyclic class definition: " + " -> ".join(cycle), m, f"/logic_classes/{i}")
                if m not in state:
                    visit(m, path + [m])
            state[n] = 2

        for name in deps:
            if name not in state:
                visit(name, [name])


def compile_logic(defn: PhenotypeDef, ontology: Ontology) -> tuple[Ontology, list[CohortQuery]]:
    onto = ontology.copy()
    lc_ = _LogicCompiler(defn, onto)
    base = defn.base_iri

    comp_classes = [Named(Iri(base + component_class(c.name))) for c in defn.components]
    scaffold = Named(onto.declare_class(Iri(base + phenotype_code_class(defn.name))))
    if len(comp_classes) == 1:
        onto.add(EquivalentClasses(scaffold, comp_classes[0]))
    elif comp_classes:
        onto.add(EquivalentClasses(scaffold, UnionOf(tuple(comp_classes))))

    reserved = set(onto.declared_classes)
    for i, lc in enumerate(defn.logic_classes):
        iri = Iri(base + lc.name)
        if iri in reserved or lc.name in CORE_CLASSES or lc.name.startswith(("subject_with_", "phenotype_")) and lc.name.endswith("_code"):
            raise lc_.fail(f"logic class name {lc.name!r} collides with a generated class", lc.name, f"/logic_classes/{i}/name")
        if sum(other.name == lc.name for other in defn.logic_classes) > 1:
            raise lc_.fail(f"logic class {lc.name!r} defined twice", lc.name, f"/logic_classes/{i}/name")
        onto.declare_class(iri)
        if lc.label:
            onto.add(label(iri, lc.label))
    lc_.check_cycles()

    for i, lc in enumerate(defn.logic_classes):
        cls = Named(Iri(base + lc.name))
        pointer = f"/logic_classes/{i}"
        if lc.union_of_subclasses is None:
            onto.add(EquivalentClasses(cls, lc_.expr(lc.equivalent, pointer + "/equivalent")))
            continue
        parts = [lc_.expr(e, f"{pointer}/union_of_subclasses/{j}") for j, e in enumerate(lc.union_of_subclasses)]
        parts = list(dict.fromkeys(parts))
        for part in parts:
            onto.add(SubClassOf(part, cls))
        if len(parts) == 1:
            onto.add(EquivalentClasses(cls, parts[0]))
        elif parts:
            onto.add(EquivalentClasses(cls, UnionOf(tuple(parts))))

    for i, group in enumerate(defn.disjoint_classes):
        named = [lc_.ref(n, f"/disjoint_classes/{i}/{j}") for j, n in enumerate(group)]
        onto.add(DisjointClasses(tuple(dict.fromkeys(named))))

    queries = []
    names = set()
    for i, ch in enumerate(defn.cohorts):
        if ch.name in names:
            raise lc_.fail(f"cohort {ch.name!r} defined twice", ch.name, f"/cohorts/{i}/name")
        names.add(ch.name)
        include = lc_.ref(ch.include, f"/cohorts/{i}/include")
        excludes = [lc_.ref(x, f"/cohorts/{i}/exclude/{j}") for j, x in enumerate(ch.exclude)]
        queries.append(CohortQuery(ch.name, cohort_query(include.iri, [x.iri for x in excludes], base), ch.oracle_class))
    onto.validate()
    return onto, queries


def cohort_query(include: Iri, excludes: list[Iri], base: str) -> Query:
    """``SELECT ?subject`` over one type pattern, one NOT EXISTS block per exclusion."""
    prefixes = {**QUERY_PREFIXES, "clb": base}
    rdf_type = PrefixedName("rdf", "type")

    def local(iri: Iri) -> PrefixedName:
        return PrefixedName("clb", iri.value[len(base):]) if iri.value.startswith(base) else iri

    s = Var("subject")
    where = BGP((TriplePattern(s, rdf_type, local(include)),))
    negations = tuple(BGP((TriplePattern(s, rdf_type, local(x)),)) for x in excludes)
    return Query(prefixes, ("subject",), False, where, negations)


# ---------------------------------------------------------------------------
# step 4: EHR records


@dataclass
class IngestionReport:
    rows_read: int = 0
    rows_matched: int = 0
    rows_unmatched: int = 0
    rows_malformed: int = 0
    patients: int = 0
    obtained_triples: int = 0
    diagnostics: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "rows_read": self.rows_read,
            "rows_matched": self.rows_matched,
            "rows_unmatched": self.rows_unmatched,
            "rows_malformed": self.rows_malformed,
            "patients": self.patients,
            "obtained_triples": self.obtained_triples,
            "diagnostics": self.diagnostics,
        }


def event_iri(base: str, r: EhrRecord) -> Iri:
    digest = hashlib.sha1(f"{r.patient_id}|{r.source.value}|{r.terminology.value}|{r.code}|{r.date.isoformat()}".encode()).hexdigest()
    return Iri(f"{base}event_{digest[:20]}")


def ingest_ehr(
    records: Iterable[EhrRecord],
    into: Dataset,
    ontology: Ontology,
    diagnostics: Iterable[RowDiagnostic] = (),
) -> IngestionReport:
    """Assert each patient into ``subject`` and link matched codes via ``obtained``.

    ``diagnostics`` are the malformed-row reports from reading the CSV; they
    are counted here so one report covers the whole file.
    """
    base = _base_of(ontology)
    index = code_index(ontology)
    subject, obtained = Iri(base + "subject"), Iri(base + OBTAINED)
    event_cls = Iri(base + EVENT_CLASS)
    p_subj, p_code, p_date, p_src = (Iri(base + p) for p in EVENT_PROPS)
    g = into.asserted_name
    report = IngestionReport()
    for d in diagnostics:
        report.rows_read += 1
        report.rows_malformed += 1
        report.diagnostics.append(str(d))
    patients: set[str] = set()
    before = into.asserted.count(None, obtained, None)
    for r in records:
        report.rows_read += 1
        patient = Iri(base + patient_individual(r.patient_id))
        if r.patient_id not in patients:
            patients.add(r.patient_id)
            into.insert(g, Triple(patient, RDF_TYPE, subject))
        code = index.get((r.terminology.value, r.code))
        if code is None:
            report.rows_unmatched += 1
            continue
        report.rows_matched += 1
        into.insert(g, Triple(patient, obtained, code))
        ev = event_iri(base, r)
        into.insert(g, Triple(ev, RDF_TYPE, event_cls))
        into.insert(g, Triple(ev, p_subj, patient))
        into.insert(g, Triple(ev, p_code, code))
        into.insert(g, Triple(ev, p_date, Literal(r.date.isoformat(), Iri(XSD + "date"))))
        into.insert(g, Triple(ev, p_src, Literal(r.source.value)))
    report.patients = len(patients)
    report.obtained_triples = into.asserted.count(None, obtained, None) - before
    return report


# ---------------------------------------------------------------------------
# cohorts


@dataclass(frozen=True)
class Cohort:
    name: str
    members: frozenset[Iri]


def extract_cohorts(queries: list[CohortQuery], dataset: Dataset, disjoint: bool = False) -> list[Cohort]:
    cohorts = []
    for cq in queries:
        rows = evaluate(cq.query, dataset)
        cohorts.append(Cohort(cq.name, frozenset(r["subject"] for r in rows if isinstance(r["subject"], Iri))))
    if disjoint:
        seen: dict[Iri, list[str]] = {}
        for c in cohorts:
            for m in c.members:
                seen.setdefault(m, []).append(c.name)
        overlaps = {m: names for m, names in seen.items() if len(names) > 1}
        if overlaps:
            raise CohortOverlapError(overlaps)
    return cohorts


def unassigned(cohorts: list[Cohort], dataset: Dataset, base: str) -> set[Iri]:
    """Subjects that no cohort selected."""
    subjects = {t.s for t in dataset.match((None, RDF_TYPE, Iri(base + "subject")))}
    covered = set().union(*(c.members for c in cohorts)) if cohorts else set()
    return {s for s in subjects if isinstance(s, Iri)} - covered
