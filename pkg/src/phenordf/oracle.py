"""Direct diabetes classification from the CSV inputs, with no RDF involved.

This module deliberately re-reads the CSV files itself and does not import
anything from the RDF, reasoner or SPARQL layers.
"""
from __future__ import annotations

import csv
import datetime as dt
import enum
import io
from dataclasses import dataclass, field
from typing import Iterable

TERMINOLOGIES = {"READ", "ICD10", "ICD9", "OPCS4", "BNF"}
SOURCES = {"GPRD", "HES", "ONS"}


class DiabetesClass(str, enum.Enum):
    TYPE1 = "Type1"
    TYPE2 = "Type2"
    UNSPECIFIED = "Unspecified"
    NON_DIABETIC = "NonDiabetic"


@dataclass
class PatientEvidence:
    patient_id: str
    t1_codes: set[tuple[str, str]] = field(default_factory=set)
    t2_codes: set[tuple[str, str]] = field(default_factory=set)


def classify(evidence: PatientEvidence) -> DiabetesClass:
    if evidence.t1_codes and evidence.t2_codes:
        return DiabetesClass.UNSPECIFIED
    if evidence.t1_codes:
        return DiabetesClass.TYPE1
    if evidence.t2_codes:
        return DiabetesClass.TYPE2
    return DiabetesClass.NON_DIABETIC


def _atoms_by_code(codelists: Iterable[str]) -> dict[tuple[str, str], set[str]]:
    """(terminology, code) -> {"component:category", ...}."""
    out: dict[tuple[str, str], set[str]] = {}
    for text in codelists:
        for row in csv.DictReader(io.StringIO(text)):
            try:
                category = int(row["category"])
            except (TypeError, ValueError):
                continue
            component = (row.get("component") or "").strip()
            code = (row.get("code") or "").strip()
            term = (row.get("terminology") or "").strip().upper()
            if not component or not code or term not in TERMINOLOGIES or category < 1:
                continue
            out.setdefault((term, code), set()).add(f"{component}:{category}")
    return out


def _valid(row: dict) -> bool:
    if not (row.get("patient_id") or "").strip() or not (row.get("code") or "").strip():
        return False
    if (row.get("terminology") or "").strip().upper() not in TERMINOLOGIES:
        return False
    if (row.get("source") or "").strip().upper() not in SOURCES:
        return False
    try:
        dt.date.fromisoformat((row.get("date") or "").strip())
    except ValueError:
        return False
    return True


def patient_evidence(ehr: str, codelists: Iterable[str], type1: Iterable[str], type2: Iterable[str]) -> dict[str, PatientEvidence]:
    lookup = _atoms_by_code(codelists)
    t1, t2 = set(type1), set(type2)
    out: dict[str, PatientEvidence] = {}
    for row in csv.DictReader(io.StringIO(ehr)):
        if not _valid(row):
            continue
        pid = row["patient_id"].strip()
        ev = out.setdefault(pid, PatientEvidence(pid))
        key = (row["terminology"].strip().upper(), row["code"].strip())
        atoms = lookup.get(key, set())
        if atoms & t1:
            ev.t1_codes.add(key)
        if atoms & t2:
            ev.t2_codes.add(key)
    return out


def classify_dataset(ehr: str, codelists: Iterable[str], type1: Iterable[str], type2: Iterable[str]) -> dict[str, DiabetesClass]:
    """Class of every patient with at least one well-formed EHR row."""
    evidence = patient_evidence(ehr, codelists, type1, type2)
    return {pid: classify(ev) for pid, ev in sorted(evidence.items())}


def to_csv(classes: dict[str, DiabetesClass]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["patient_id", "class"])
    for pid in sorted(classes):
        w.writerow([pid, classes[pid].value])
    return buf.getvalue()
