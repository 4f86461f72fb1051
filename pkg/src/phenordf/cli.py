"""Command-line entry point: ``phenordf build|run|query|export|oracle``.

Exit codes: 0 success, 1 I/O error, 2 compile or parse error, 3 consistency
or oracle-diff failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import pipeline
from .compiler import CohortOverlapError, unassigned
from .oracle import classify_dataset, to_csv
from .owl import OntologyError, to_triples
from .owlxml import export_owl_xml
from .phenotype import DefinitionError, load_definition, read_ehr
from .rdf import STANDARD_PREFIXES, TermError, UnknownPrefixError
from .reasoner import ReasonerError
from .sparql import SparqlError, evaluate, parse_query, results_to_csv, results_to_jsonl
from .turtle import TurtleError, serialize_ntriples, serialize_turtle

log = logging.getLogger("phenordf")

EXIT_OK, EXIT_IO, EXIT_COMPILE, EXIT_CONSISTENCY = 0, 1, 2, 3


def _definition(args) -> Path:
    return Path(args.definition) if args.definition else pipeline.bundled_diabetes()


def _build(args) -> pipeline.BuildResult:
    return pipeline.build_from_file(_definition(args), args.base_iri)


def cmd_build(args) -> int:
    result = _build(args)
    pipeline.write_build(result, args.out, owl_xml=args.owl_xml)
    for w in result.warnings:
        log.warning("%s", w)
    print(f"wrote {args.out}/ontology.ttl ({len(result.ontology.axioms)} axioms, {len(result.queries)} cohort queries)")
    return EXIT_OK


def cmd_run(args) -> int:
    defpath = _definition(args)
    result = _build(args)
    out = Path(args.out)
    pipeline.write_build(result, out, owl_xml=args.owl_xml)
    # later stages read only what was just written
    ontology, queries = pipeline.load_build(result.definition, out)
    ehr_path = Path(args.ehr)
    if not ehr_path.is_file():
        raise pipeline.InputError(f"EHR file not found: {ehr_path}")
    ehr_text = ehr_path.read_text(encoding="utf-8")
    records, diags = read_ehr(ehr_text, str(ehr_path))
    for d in diags:
        log.warning("skipped row %s", d)
    defn = result.definition
    check = args.verify_disjoint or defn.disjoint_cohorts
    run = pipeline.run(ontology, queries, records, defn.base_iri, diags, disjoint=check)
    pipeline.write_run(run, out)
    status = EXIT_OK
    if args.verify_disjoint:
        for ind, a, b in run.inference.inconsistencies:
            print(f"inconsistent: {ind.value} is in disjoint classes {a.value} and {b.value}", file=sys.stderr)
            status = EXIT_CONSISTENCY
        if defn.disjoint_cohorts:
            missing = unassigned(run.cohorts, run.dataset, defn.base_iri)
            for m in sorted(missing, key=lambda i: i.value):
                print(f"not in any cohort: {m.value}", file=sys.stderr)
                status = EXIT_CONSISTENCY
    if args.compare_oracle:
        if not defn.evidence:
            raise DefinitionError("--compare-oracle needs an 'evidence' mapping in the definition", defn.source)
        codelists = pipeline.read_codelists(defn, defpath.parent)
        diff = pipeline.oracle_diff(defn, run.cohorts, queries, ehr_text, codelists)
        (out / "oracle_diff.json").write_text(json.dumps(diff, indent=2) + "\n", encoding="utf-8")
        if diff:
            print(f"{len(diff)} patient(s) differ from the reference classification; see {out}/oracle_diff.json", file=sys.stderr)
            status = EXIT_CONSISTENCY
    sizes = ", ".join(f"{c.name}={len(c.members)}" for c in run.cohorts)
    print(f"{run.ingestion.patients} patients; cohorts: {sizes}")
    return status


def cmd_query(args) -> int:
    qpath = Path(args.query)
    if not qpath.is_file():
        raise pipeline.InputError(f"query file not found: {qpath}")
    query = parse_query(qpath.read_text(encoding="utf-8"))
    dataset = pipeline.load_dataset(args.data, args.inferred or [], args.base_iri)
    rows = evaluate(query, dataset)
    writer = results_to_jsonl if args.format == "jsonl" else results_to_csv
    text = writer(rows, query.projected_vars)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_export(args) -> int:
    if args.ontology:
        ontology = pipeline.load_ontology(args.ontology)
        base = args.base_iri or ontology.iri.value + "#"
    else:
        result = _build(args)
        ontology, base = result.ontology, result.definition.base_iri
    if args.format == "owl-xml":
        text = export_owl_xml(ontology)
    elif args.format == "ntriples":
        text = serialize_ntriples(to_triples(ontology))
    else:
        text = serialize_turtle(to_triples(ontology), {**STANDARD_PREFIXES, "clb": base})
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_oracle(args) -> int:
    defpath = _definition(args)
    if not defpath.is_file():
        raise pipeline.InputError(f"definition file not found: {defpath}")
    defn = load_definition(defpath)
    ehr_path = Path(args.ehr)
    if not ehr_path.is_file():
        raise pipeline.InputError(f"EHR file not found: {ehr_path}")
    codelists = pipeline.read_codelists(defn, defpath.parent)
    classes = classify_dataset(
        ehr_path.read_text(encoding="utf-8"),
        codelists.values(),
        defn.evidence.get("type1", []),
        defn.evidence.get("type2", []),
    )
    text = to_csv(classes)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="phenordf", description="Phenotype ontology compiler and cohort engine.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def definition_args(p: argparse.ArgumentParser) -> None:
        p.add_argument("--def", dest="definition", help="phenotype definition JSON (default: bundled diabetes)")
        p.add_argument("--base-iri", help="override the definition's base IRI")

    p = sub.add_parser("build", help="compile a definition into ontology.ttl and cohort queries")
    definition_args(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--owl-xml", action="store_true", help="also write ontology.owl.xml")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("run", help="build, ingest EHR rows, materialize and write cohorts")
    definition_args(p)
    p.add_argument("--ehr", required=True, help="EHR CSV (patient_id,source,terminology,code,date)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--owl-xml", action="store_true", help="also write ontology.owl.xml")
    p.add_argument("--verify-disjoint", action="store_true", help="fail on overlapping cohorts or disjointness violations")
    p.add_argument("--compare-oracle", action="store_true", help="diff cohorts against the direct classification")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("query", help="evaluate a SPARQL SELECT over Turtle files")
    p.add_argument("--data", action="append", required=True, help="asserted Turtle file (repeatable)")
    p.add_argument("--inferred", action="append", help="inferred Turtle file (repeatable)")
    p.add_argument("--query", required=True, help=".rq file")
    p.add_argument("--base-iri", help="namespace for the default and clb: prefixes")
    p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    p.add_argument("--output", help="write results here instead of stdout")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("export", help="serialize the ontology as Turtle, N-Triples or OWL/XML")
    definition_args(p)
    p.add_argument("--ontology", help="existing ontology.ttl instead of compiling a definition")
    p.add_argument("--format", choices=("turtle", "ntriples", "owl-xml"), default="owl-xml")
    p.add_argument("--output", help="write here instead of stdout")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("oracle", help="classify patients directly from the CSV inputs")
    definition_args(p)
    p.add_argument("--ehr", required=True, help="EHR CSV")
    p.add_argument("--output", help="write patient_id,class CSV here instead of stdout")
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (DefinitionError, TurtleError, SparqlError, OntologyError, ReasonerError, UnknownPrefixError, TermError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_COMPILE
    except CohortOverlapError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONSISTENCY
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
