"""Phenotype definitions, codelists and EHR extracts as plain Python values.

Codelist CSV columns: ``component,category,terminology,code,description``.
EHR CSV columns: ``patient_id,source,terminology,code,date``.
"""
from __future__ import annotations

import csv
import datetime as dt
import enum
import io
import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Optional, Union
from urllib.parse import quote

import jsonschema

from .rdf import DEFAULT_BASE, Iri


class Terminology(str, enum.Enum):
    READ = "READ"
    ICD10 = "ICD10"
    ICD9 = "ICD9"
    OPCS4 = "OPCS4"
    BNF = "BNF"


class Source(str, enum.Enum):
    GPRD = "GPRD"
    HES = "HES"
    ONS = "ONS"


CODELIST_COLUMNS = ("component", "category", "terminology", "code", "description")
EHR_COLUMNS = ("patient_id", "source", "terminology", "code", "date")

_COMPONENT_NAME = re.compile(r"^[a-z][a-z0-9]*(?:_[a-z][a-z0-9]*)*$")
RESERVED_SEGMENTS = {"subject", "phenotype", "patient", "event", "component", "category", "code", "obtained"}


class DefinitionError(ValueError):
    """Invalid phenotype definition, reported with a location in the source file."""

    def __init__(self, message: str, source: Optional[str] = None, line: Optional[int] = None, pointer: str = "") -> None:
        self.message, self.source, self.line, self.pointer = message, source, line, pointer
        where = source or "<definition>"
        if line is not None:
            where += f":{line}"
        if pointer:
            where += f" ({pointer})"
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class RowDiagnostic:
    source: str
    row: int
    message: str

    def __str__(self) -> str:
        return f"{self.source}:{self.row}: {self.message}"


# ---------------------------------------------------------------------------
# generated names


def check_component_name(name: str) -> None:
    if not _COMPONENT_NAME.match(name):
        raise ValueError(f"component name {name!r} must be lower-case words joined by '_', none starting with a digit")
    if name.split("_")[0] in RESERVED_SEGMENTS:
        raise ValueError(f"component name {name!r} starts with a reserved word")


def component_class(component: str) -> str:
    return f"{component}_code"


def category_class(component: str, category: int) -> str:
    return f"{component}_{category}_code"


def subject_with_category(component: str, category: int) -> str:
    return f"subject_with_{component}_{category}_code"


def subject_with_component(component: str) -> str:
    return f"subject_with_{component}_code"


def phenotype_code_class(phenotype: str) -> str:
    return f"phenotype_{phenotype}_code"


def code_individual(terminology: str, code: str) -> str:
    return f"{terminology}_{quote(code, safe='')}"


def patient_individual(patient_id: str) -> str:
    return "patient_" + quote(patient_id, safe="")


def patient_id_of(iri: Iri, base: str) -> str:
    from urllib.parse import unquote

    local = iri.value[len(base):] if iri.value.startswith(base) else iri.value
    return unquote(local[len("patient_"):]) if local.startswith("patient_") else local


# ---------------------------------------------------------------------------
# CSV inputs


@dataclass(frozen=True)
class CodelistEntry:
    component: str
    category: int
    terminology: Terminology
    code: str
    description: str = ""

    def __post_init__(self) -> None:
        if not self.component:
            raise ValueError("component is empty")
        if not self.code:
            raise ValueError("code is empty")
        if self.category < 1:
            raise ValueError(f"category must be >= 1, got {self.category}")


@dataclass(frozen=True)
class EhrRecord:
    patient_id: str
    source: Source
    terminology: Terminology
    code: str
    date: dt.date

    def __post_init__(self) -> None:
        if not self.patient_id:
            raise ValueError("patient_id is empty")
        if not self.code:
            raise ValueError("code is empty")


def _rows(text: str, columns: tuple[str, ...], source: str):
    if not text.strip():
        return
    reader = csv.DictReader(io.StringIO(text))
    header = tuple(h.strip() for h in (reader.fieldnames or ()))
    if header != columns:
        raise DefinitionError(f"expected CSV header {','.join(columns)}, found {','.join(header) or 'nothing'}", source, 1)
    for row in reader:
        yield reader.line_num, {k.strip(): (v or "").strip() for k, v in row.items() if k is not None}


def read_codelist(text: str, source: str = "<codelist>") -> tuple[list[CodelistEntry], list[RowDiagnostic]]:
    entries, diags = [], []
    for line, row in _rows(text, CODELIST_COLUMNS, source):
        try:
            entries.append(
                CodelistEntry(
                    component=row["component"],
                    category=int(row["category"]),
                    terminology=Terminology(row["terminology"].upper()),
                    code=row["code"],
                    description=row["description"],
                )
            )
        except ValueError as err:
            diags.append(RowDiagnostic(source, line, str(err)))
    return entries, diags


def read_ehr(text: str, source: str = "<ehr>") -> tuple[list[EhrRecord], list[RowDiagnostic]]:
    records, diags = [], []
    for line, row in _rows(text, EHR_COLUMNS, source):
        try:
            records.append(
                EhrRecord(
                    patient_id=row["patient_id"],
                    source=Source(row["source"].upper()),
                    terminology=Terminology(row["terminology"].upper()),
                    code=row["code"],
                    date=dt.date.fromisoformat(row["date"]),
                )
            )
        except ValueError as err:
            diags.append(RowDiagnostic(source, line, str(err)))
    return records, diags


def write_codelist(entries: list[CodelistEntry]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CODELIST_COLUMNS)
    for e in entries:
        w.writerow([e.component, e.category, e.terminology.value, e.code, e.description])
    return buf.getvalue()


def write_ehr(records: list[EhrRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(EHR_COLUMNS)
    for r in records:
        w.writerow([r.patient_id, r.source.value, r.terminology.value, r.code, r.date.isoformat()])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# phenotype definition

SetExpr = Union[str, dict]


@dataclass
class Component:
    name: str
    codelist: str
    source: Source
    label: str = ""
    category_labels: dict[int, str] = field(default_factory=dict)


@dataclass
class LogicClass:
    name: str
    equivalent: Optional[SetExpr] = None
    union_of_subclasses: Optional[list[SetExpr]] = None
    label: str = ""


@dataclass
class CohortDef:
    name: str
    include: str
    exclude: list[str] = field(default_factory=list)
    oracle_class: Optional[str] = None


@dataclass
class PhenotypeDef:
    name: str
    base_iri: str = DEFAULT_BASE
    components: list[Component] = field(default_factory=list)
    logic_classes: list[LogicClass] = field(default_factory=list)
    cohorts: list[CohortDef] = field(default_factory=list)
    disjoint_cohorts: bool = False
    disjoint_classes: list[list[str]] = field(default_factory=list)
    evidence: dict[str, list[str]] = field(default_factory=dict)
    terminology_iris: dict[str, str] = field(default_factory=dict)
    source: Optional[str] = None
    text: Optional[str] = field(default=None, repr=False)

    def locate(self, needle: str) -> Optional[int]:
        """1-based line of the first quoted occurrence of ``needle`` in the source text."""
        if not self.text:
            return None
        quoted = json.dumps(needle)
        for n, line in enumerate(self.text.splitlines(), 1):
            if quoted in line:
                return n
        return None

    def error(self, message: str, needle: Optional[str] = None, pointer: str = "") -> DefinitionError:
        return DefinitionError(message, self.source, self.locate(needle) if needle else None, pointer)

    def component(self, name: str) -> Optional[Component]:
        return next((c for c in self.components if c.name == name), None)

    def to_json(self) -> dict[str, Any]:
        doc: dict[str, Any] = {"name": self.name, "base_iri": self.base_iri}
        doc["components"] = []
        for c in self.components:
            entry: dict[str, Any] = {"name": c.name, "codelist": c.codelist, "source": c.source.value}
            if c.label:
                entry["label"] = c.label
            if c.category_labels:
                entry["categories"] = {str(k): v for k, v in sorted(c.category_labels.items())}
            doc["components"].append(entry)
        if self.evidence:
            doc["evidence"] = self.evidence
        doc["logic_classes"] = []
        for lc in self.logic_classes:
            entry = {"name": lc.name}
            if lc.label:
                entry["label"] = lc.label
            if lc.union_of_subclasses is not None:
                entry["union_of_subclasses"] = lc.union_of_subclasses
            else:
                entry["equivalent"] = lc.equivalent
            doc["logic_classes"].append(entry)
        doc["cohorts"] = []
        for ch in self.cohorts:
            entry = {"name": ch.name, "include": ch.include, "exclude": list(ch.exclude)}
            if ch.oracle_class:
                entry["oracle_class"] = ch.oracle_class
            doc["cohorts"].append(entry)
        doc["disjoint_cohorts"] = self.disjoint_cohorts
        if self.disjoint_classes:
            doc["disjoint_classes"] = self.disjoint_classes
        if self.terminology_iris:
            doc["terminology_iris"] = self.terminology_iris
        return doc


def _schema() -> dict:
    return json.loads(resources.files("phenordf").joinpath("data/phenotype.schema.json").read_text("utf-8"))


def parse_definition(text: str, source: Optional[str] = None) -> PhenotypeDef:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise DefinitionError(err.msg, source, err.lineno) from None
    try:
        jsonschema.validate(doc, _schema())
    except jsonschema.ValidationError as err:
        pointer = "/" + "/".join(str(p) for p in err.absolute_path)
        needle = str(err.instance) if isinstance(err.instance, str) else None
        line = None
        if needle:
            line = PhenotypeDef(name="", text=text).locate(needle)
        raise DefinitionError(err.message, source, line, pointer) from None
    defn = PhenotypeDef(
        name=doc["name"],
        base_iri=doc.get("base_iri", DEFAULT_BASE),
        components=[
            Component(
                name=c["name"],
                codelist=c["codelist"],
                source=Source(c["source"]),
                label=c.get("label", ""),
                category_labels={int(k): v for k, v in c.get("categories", {}).items()},
            )
            for c in doc["components"]
        ],
        logic_classes=[
            LogicClass(
                name=lc["name"],
                equivalent=lc.get("equivalent"),
                union_of_subclasses=lc.get("union_of_subclasses"),
                label=lc.get("label", ""),
            )
            for lc in doc["logic_classes"]
        ],
        cohorts=[
            CohortDef(c["name"], c["include"], list(c.get("exclude", [])), c.get("oracle_class"))
            for c in doc["cohorts"]
        ],
        disjoint_cohorts=doc.get("disjoint_cohorts", False),
        disjoint_classes=doc.get("disjoint_classes", []),
        evidence={k: list(v) for k, v in doc.get("evidence", {}).items()},
        terminology_iris=doc.get("terminology_iris", {}),
        source=source,
        text=text,
    )
    for i, comp in enumerate(defn.components):
        try:
            check_component_name(comp.name)
        except ValueError as err:
            raise defn.error(str(err), comp.name, f"/components/{i}/name") from None
    return defn


def load_definition(path: Union[str, Path]) -> PhenotypeDef:
    path = Path(path)
    return parse_definition(path.read_text(encoding="utf-8"), str(path))


def parse_atom(atom: str) -> tuple[str, int]:
    component, _, category = atom.partition(":")
    return component, int(category)


def four_group_definition(
    name: str,
    components: list[Component],
    type1: list[str],
    type2: list[str],
    base_iri: str = DEFAULT_BASE,
) -> PhenotypeDef:
    """Definition in the shape of the diabetes algorithm for a given evidence mapping.

    ``type1``/``type2`` are ``component:category`` atoms.  Patients with both
    kinds of evidence form the unspecified group; each pairwise intersection
    of a type-1 atom with a type-2 atom is declared a subclass of it.
    """
    t1_class, t2_class = "subject_with_type1_evidence", "subject_with_type2_evidence"
    unknown = "subject_with_type_unknown_diabetes"
    pairs: list[SetExpr] = [{"intersection": [a, b]} for a in type1 for b in type2 if a != b]
    pairs += [a for a in type1 if a in type2]
    logic = [
        LogicClass(t1_class, union_of_subclasses=[]) if not type1 else LogicClass(t1_class, equivalent={"union": list(type1)}),
        LogicClass(t2_class, union_of_subclasses=[]) if not type2 else LogicClass(t2_class, equivalent={"union": list(type2)}),
        LogicClass(unknown, union_of_subclasses=pairs),
    ]
    cohorts = [
        CohortDef("type1", t1_class, [unknown], "Type1"),
        CohortDef("type2", t2_class, [unknown], "Type2"),
        CohortDef("unspecified", unknown, [], "Unspecified"),
        CohortDef("non_diabetic", "subject", [t1_class, t2_class], "NonDiabetic"),
    ]
    return PhenotypeDef(
        name=name,
        base_iri=base_iri,
        components=components,
        logic_classes=logic,
        cohorts=cohorts,
        disjoint_cohorts=True,
        evidence={"type1": list(type1), "type2": list(type2)},
    )
