"""End-to-end orchestration shared by the CLI and the tests.

``build`` turns a definition plus codelists into an ontology and cohort
queries; ``run`` ingests EHR rows, materializes and extracts cohorts.  The
``write_*``/``load_*`` helpers define the on-disk artifact layout.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Union

from .compiler import (
    Cohort,
    CohortQuery,
    IngestionReport,
    compile_logic,
    emit_core,
    extract_cohorts,
    ingest_codelist,
    ingest_ehr,
)
from .oracle import classify_dataset
from .owl import Ontology, from_triples, to_triples
from .owlxml import export_owl_xml
from .phenotype import (
    CodelistEntry,
    DefinitionError,
    EhrRecord,
    PhenotypeDef,
    RowDiagnostic,
    load_definition,
    parse_definition,
    patient_id_of,
    read_codelist,
    read_ehr,
)
from .rdf import STANDARD_PREFIXES, Dataset, Graph
from .reasoner import InferenceResult, materialize
from .sparql import parse_query
from .turtle import load_turtle, serialize_turtle


class InputError(OSError):
    """A required input file is missing or unreadable."""


def bundled_path(*parts: str) -> Path:
    return Path(str(resources.files("phenordf").joinpath("data", *parts)))


def bundled_diabetes() -> Path:
    return bundled_path("diabetes", "diabetes.json")


# ---------------------------------------------------------------------------
# build


@dataclass
class BuildResult:
    definition: PhenotypeDef
    ontology: Ontology
    queries: list[CohortQuery]
    warnings: list[RowDiagnostic] = field(default_factory=list)

    def report(self) -> dict:
        return {
            "phenotype": self.definition.name,
            "classes": len(self.ontology.declared_classes),
            "properties": len(self.ontology.declared_properties),
            "axioms": len(self.ontology.axioms),
            "cohorts": [q.name for q in self.queries],
            "warnings": [str(w) for w in self.warnings],
        }


def read_codelists(defn: PhenotypeDef, base_dir: Union[str, Path]) -> dict[str, str]:
    """Raw codelist text per component, resolved relative to ``base_dir``."""
    out = {}
    for comp in defn.components:
        path = Path(base_dir) / comp.codelist
        if not path.is_file():
            raise defn.error(f"codelist file not found: {path}", comp.codelist)
        out[comp.name] = path.read_text(encoding="utf-8")
    return out


def build(defn: PhenotypeDef, codelists: dict[str, Union[str, list[CodelistEntry]]]) -> BuildResult:
    onto = emit_core([defn.name], defn.base_iri)
    warnings: list[RowDiagnostic] = []
    entries: list[CodelistEntry] = []
    for comp in defn.components:
        data = codelists.get(comp.name, [])
        if isinstance(data, str):
            rows, diags = read_codelist(data, comp.codelist)
            if diags:
                first = diags[0]
                raise DefinitionError(first.message, first.source, first.row)
            data = rows
        for e in data:
            if e.component != comp.name:
                raise DefinitionError(f"row for component {e.component!r} in the codelist of {comp.name!r}", comp.codelist)
        entries.extend(data)
    onto, warnings = ingest_codelist(entries, onto, defn)
    onto, queries = compile_logic(defn, onto)
    return BuildResult(defn, onto, queries, warnings)


def build_from_file(path: Union[str, Path], base_iri: Optional[str] = None) -> BuildResult:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"definition file not found: {path}")
    defn = load_definition(path)
    if base_iri:
        defn.base_iri = base_iri
    return build(defn, read_codelists(defn, path.parent))


def query_file_name(cohort: str) -> str:
    return f"{cohort}.rq"


def write_build(result: BuildResult, out: Union[str, Path], owl_xml: bool = False) -> None:
    out = Path(out)
    (out / "queries").mkdir(parents=True, exist_ok=True)
    prefixes = {**STANDARD_PREFIXES, "clb": result.definition.base_iri}
    (out / "ontology.ttl").write_text(serialize_turtle(to_triples(result.ontology), prefixes), encoding="utf-8")
    for q in result.queries:
        (out / "queries" / query_file_name(q.name)).write_text(q.query.to_text(), encoding="utf-8")
    if owl_xml:
        (out / "ontology.owl.xml").write_text(export_owl_xml(result.ontology), encoding="utf-8")
    (out / "build_report.json").write_text(json.dumps(result.report(), indent=2) + "\n", encoding="utf-8")


def load_build(defn: PhenotypeDef, out: Union[str, Path]) -> tuple[Ontology, list[CohortQuery]]:
    """Reload the ontology and the cohort queries written by :func:`write_build`."""
    out = Path(out)
    onto = load_ontology(out / "ontology.ttl")
    queries = []
    for ch in defn.cohorts:
        path = out / "queries" / query_file_name(ch.name)
        if not path.is_file():
            raise InputError(f"query file not found: {path}")
        queries.append(CohortQuery(ch.name, parse_query(path.read_text(encoding="utf-8")), ch.oracle_class))
    return onto, queries


def load_ontology(path: Union[str, Path]) -> Ontology:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"ontology file not found: {path}")
    return from_triples(load_turtle(path.read_text(encoding="utf-8"), str(path)))


# ---------------------------------------------------------------------------
# run


@dataclass
class RunResult:
    dataset: Dataset
    ingestion: IngestionReport
    inference: InferenceResult
    cohorts: list[Cohort]


def run(
    ontology: Ontology,
    queries: list[CohortQuery],
    records: list[EhrRecord],
    base: str,
    diagnostics: list[RowDiagnostic] = (),
    disjoint: bool = False,
) -> RunResult:
    dataset = Dataset(base)
    report = ingest_ehr(records, dataset, ontology, diagnostics)
    inference = materialize(ontology, dataset)
    cohorts = extract_cohorts(queries, dataset, disjoint)
    return RunResult(dataset, report, inference, cohorts)


def run_text(build_result: BuildResult, ehr_text: str, disjoint: bool = False) -> RunResult:
    records, diags = read_ehr(ehr_text)
    return run(build_result.ontology, build_result.queries, records, build_result.definition.base_iri, diags, disjoint)


def cohort_rows(cohorts: list[Cohort], base: str) -> list[tuple[str, str]]:
    return [(c.name, pid) for c in cohorts for pid in sorted(patient_id_of(m, base) for m in c.members)]


def cohorts_csv(cohorts: list[Cohort], base: str) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["cohort_name", "patient_id"])
    w.writerows(cohort_rows(cohorts, base))
    return buf.getvalue()


def single_cohort_csv(cohort: Cohort, base: str) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["patient_id"])
    for pid in sorted(patient_id_of(m, base) for m in cohort.members):
        w.writerow([pid])
    return buf.getvalue()


def write_run(result: RunResult, out: Union[str, Path]) -> None:
    out = Path(out)
    (out / "cohorts").mkdir(parents=True, exist_ok=True)
    ds = result.dataset
    prefixes = {**STANDARD_PREFIXES, "clb": ds.base}
    (out / "data.ttl").write_text(serialize_turtle(ds.asserted, prefixes), encoding="utf-8")
    (out / "inferred.ttl").write_text(serialize_turtle(ds.inferred, prefixes), encoding="utf-8")
    report = result.ingestion.to_json()
    report["inferred_assertions"] = len(result.inference.inferred_assertions)
    report["reasoner_rounds"] = result.inference.iterations
    report["inconsistencies"] = [[x.value for x in v] for v in result.inference.inconsistencies]
    (out / "ingestion_report.json").write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    (out / "cohorts.csv").write_text(cohorts_csv(result.cohorts, ds.base), encoding="utf-8")
    for c in result.cohorts:
        (out / "cohorts" / f"{c.name}.csv").write_text(single_cohort_csv(c, ds.base), encoding="utf-8")


def load_dataset(data: list[Union[str, Path]], inferred: list[Union[str, Path]] = (), base: Optional[str] = None) -> Dataset:
    """Dataset from Turtle files; ``inferred`` files go to the inferred graph."""
    from .rdf import DEFAULT_BASE

    ds = Dataset(base or DEFAULT_BASE)
    for paths, graph in ((data, ds.asserted_name), (inferred, ds.inferred_name)):
        for p in paths:
            p = Path(p)
            if not p.is_file():
                raise InputError(f"data file not found: {p}")
            ds.insert_all(graph, load_turtle(p.read_text(encoding="utf-8"), str(p)))
    ds.materialized = bool(inferred)
    return ds


# ---------------------------------------------------------------------------
# oracle comparison


def oracle_diff(
    defn: PhenotypeDef,
    cohorts: list[Cohort],
    queries: list[CohortQuery],
    ehr_text: str,
    codelists: dict[str, str],
) -> list[dict]:
    """Patients whose pipeline cohorts disagree with the direct classification."""
    expected = classify_dataset(
        ehr_text, codelists.values(), defn.evidence.get("type1", []), defn.evidence.get("type2", [])
    )
    mapping = {q.name: q.oracle_class for q in queries}
    got: dict[str, list[str]] = {}
    for c in cohorts:
        for m in c.members:
            got.setdefault(patient_id_of(m, defn.base_iri), []).append(c.name)
    diff = []
    for pid in sorted(set(expected) | set(got)):
        names = sorted(got.get(pid, []))
        classes = sorted({mapping.get(n) or "" for n in names})
        want = expected[pid].value if pid in expected else None
        if classes != ([want] if want else []):
            diff.append({"patient_id": pid, "expected": want, "cohorts": names})
    return diff


def load_graph(path: Union[str, Path]) -> Graph:
    path = Path(path)
    return load_turtle(path.read_text(encoding="utf-8"), str(path))


__all__ = [
    "BuildResult",
    "InputError",
    "RunResult",
    "build",
    "build_from_file",
    "bundled_diabetes",
    "cohorts_csv",
    "load_build",
    "load_dataset",
    "oracle_diff",
    "parse_definition",
    "run",
    "run_text",
    "write_build",
    "write_run",
]
