"""Random phenotype inputs for oracle comparison and throughput checks."""
from __future__ import annotations

import datetime as dt
import random
from dataclasses import dataclass

from .phenotype import (
    CodelistEntry,
    Component,
    EhrRecord,
    PhenotypeDef,
    Source,
    Terminology,
    four_group_definition,
    write_codelist,
    write_ehr,
)

_TERMS = (Terminology.READ, Terminology.ICD10, Terminology.ICD9)
_SOURCES = (Source.GPRD, Source.HES, Source.ONS)


@dataclass
class SyntheticCase:
    definition: PhenotypeDef
    codelists: dict[str, str]
    ehr: str
    seed: int


def _date(rng: random.Random) -> dt.date:
    return dt.date(1990, 1, 1) + dt.timedelta(days=rng.randrange(12000))


def random_case(
    seed: int,
    max_patients: int = 1000,
    max_codes: int = 50,
    n_components: int = 3,
    malformed_rate: float = 0.01,
) -> SyntheticCase:
    """Random codelists, evidence mapping and EHR extract.

    Codes may be shared between components, repeated within a category, or
    absent from every codelist; a few EHR rows are malformed on purpose.
    """
    rng = random.Random(seed)
    names = [f"comp{i}" for i in range(n_components)]
    components = [Component(n, f"{n}.csv", rng.choice(_SOURCES[:2])) for n in names]
    n_codes = rng.randint(1, max_codes)
    pool = [(rng.choice(_TERMS), f"X{k:03d}.{rng.randrange(10)}") for k in range(n_codes)]

    entries: dict[str, list[CodelistEntry]] = {n: [] for n in names}
    atoms = set()
    for term, code in pool:
        for comp in rng.sample(names, rng.choice((1, 1, 1, 2))):
            cat = rng.randint(1, 4)
            entries[comp].append(CodelistEntry(comp, cat, term, code, f"synthetic {code}"))
            atoms.add(f"{comp}:{cat}")
            if rng.random() < 0.05:
                entries[comp].append(CodelistEntry(comp, cat, term, code, f"synthetic {code}"))
    atoms = sorted(atoms)
    type1 = sorted(a for a in atoms if rng.random() < 0.35)
    type2 = sorted(a for a in atoms if rng.random() < 0.35)
    defn = four_group_definition("synthetic", components, type1, type2)

    noise = [(rng.choice(_TERMS), f"N{k:03d}") for k in range(10)]
    records: list[EhrRecord] = []
    for p in range(rng.randint(0, max_patients)):
        pid = f"p{p:05d}"
        for _ in range(rng.choice((0, 1, 1, 2, 3, 5)) or 1):
            term, code = rng.choice(pool) if rng.random() < 0.7 else rng.choice(noise)
            records.append(EhrRecord(pid, rng.choice(_SOURCES), term, code, _date(rng)))
    rng.shuffle(records)
    ehr = write_ehr(records)
    if malformed_rate and records:
        lines = ehr.splitlines()
        for i in range(1, len(lines)):
            if rng.random() < malformed_rate:
                parts = lines[i].split(",")
                parts[rng.choice((0, 4))] = rng.choice(("", "not-a-date"))
                lines[i] = ",".join(parts)
        ehr = "\n".join(lines) + "\n"
    return SyntheticCase(defn, {n: write_codelist(entries[n]) for n in names}, ehr, seed)


def scale_ehr(codes: list[tuple[Terminology, str]], n_patients: int, events: int, seed: int = 0) -> str:
    """``n_patients`` x ``events`` rows drawn from ``codes`` plus unrelated codes."""
    rng = random.Random(seed)
    noise = [(Terminology.READ, f"N{k:04d}") for k in range(200)]
    records = []
    for p in range(n_patients):
        for _ in range(events):
            term, code = rng.choice(codes) if rng.random() < 0.3 else rng.choice(noise)
            records.append(EhrRecord(f"s{p:06d}", rng.choice(_SOURCES), term, code, _date(rng)))
    return write_ehr(records)
