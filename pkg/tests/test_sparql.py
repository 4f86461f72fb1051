from __future__ import annotations

import json
import random

import pytest

from conftest import DIABETES_DIR
from oracles import EX, bag, naive_evaluate, random_graph, random_query_text
from phenordf.rdf import DEFAULT_BASE, RDF_TYPE, Dataset, Iri, Literal, Triple
from phenordf.sparql import (
    SparqlSyntaxError,
    UnresolvedPrefixError,
    Var,
    evaluate,
    parse_query,
    results_to_csv,
    results_to_jsonl,
)

CLB = DEFAULT_BASE


def type1_query():
    return parse_query((DIABETES_DIR / "type1_only.rq").read_text(encoding="utf-8"))


def dataset_of(triples) -> Dataset:
    ds = Dataset()
    for t in triples:
        ds.insert(ds.asserted_name, t)
    ds.materialized = True
    return ds


def test_type1_query_structure():
    q = type1_query()
    assert q.projected_vars == ("subject",)
    assert not q.distinct
    r = q.resolved()
    assert len(r.where.patterns) == 1
    (pat,) = r.where.patterns
    assert tuple(pat) == (Var("subject"), RDF_TYPE, Iri(CLB + "subject_with_diabdiag_gprd_3_code"))
    assert len(r.negations) == 1
    assert r.negations[0].patterns[0].o == Iri(CLB + "subject_with_type_unknown_diabetes")


def test_type1_query_on_two_subjects():
    ds = dataset_of([
        Triple(Iri(CLB + "patient_a"), RDF_TYPE, Iri(CLB + "subject_with_diabdiag_gprd_3_code")),
        Triple(Iri(CLB + "patient_b"), RDF_TYPE, Iri(CLB + "subject_with_diabdiag_gprd_3_code")),
        Triple(Iri(CLB + "patient_b"), RDF_TYPE, Iri(CLB + "subject_with_type_unknown_diabetes")),
    ])
    assert [r["subject"] for r in evaluate(type1_query(), ds)] == [Iri(CLB + "patient_a")]


def test_universal_pattern_returns_every_triple():
    triples = random_graph(random.Random(2), 50)
    rows = evaluate(parse_query("SELECT ?s ?p ?o WHERE { ?s ?p ?o }"), dataset_of(triples))
    assert {(r["s"], r["p"], r["o"]) for r in rows} == {tuple(t) for t in triples}
    assert len(rows) == len(triples)


def test_select_star_projects_where_variables():
    q = parse_query("SELECT * WHERE { ?s a ?c . ?s ?p ?o }")
    assert q.projected_vars == ("s", "c", "p", "o")


def test_missing_brace_error_is_positioned():
    with pytest.raises(SparqlSyntaxError) as exc:
        parse_query("PREFIX clb: <https://x.org/#>\nSELECT ?s\nWHERE { ?s a clb:x .\n")
    assert exc.value.line is not None and exc.value.column is not None
    assert "}" in exc.value.message


def test_unprojected_variable_is_error():
    with pytest.raises(SparqlSyntaxError):
        parse_query("SELECT ?x WHERE { ?s ?p ?o }")


def test_unknown_prefix_is_named():
    q = parse_query("SELECT ?s WHERE { ?s a zz:thing }")
    with pytest.raises(UnresolvedPrefixError) as exc:
        evaluate(q, Dataset())
    assert "zz" in str(exc.value)
    assert exc.value.line == 1


def test_dataset_prefixes_are_fallback():
    ds = dataset_of([Triple(Iri(CLB + "p1"), RDF_TYPE, Iri(CLB + "subject"))])
    rows = evaluate(parse_query("SELECT ?s WHERE { ?s a clb:subject }"), ds)
    assert [r["s"] for r in rows] == [Iri(CLB + "p1")]
    # the query's own declaration wins
    rows = evaluate(parse_query("PREFIX clb: <http://other.org/#>\nSELECT ?s WHERE { ?s a clb:subject }"), ds)
    assert rows == []


def test_empty_dataset_gives_no_rows():
    assert evaluate(type1_query(), Dataset()) == []


def test_distinct_removes_duplicates():
    triples = {Triple(Iri(EX + "a"), Iri(EX + "p"), Iri(EX + f"o{k}")) for k in range(3)}
    ds = dataset_of(triples)
    assert len(evaluate(parse_query(f"PREFIX ex: <{EX}>\nSELECT ?s WHERE {{ ?s ex:p ?o }}"), ds)) == 3
    assert len(evaluate(parse_query(f"PREFIX ex: <{EX}>\nSELECT DISTINCT ?s WHERE {{ ?s ex:p ?o }}"), ds)) == 1


def test_evaluation_matches_naive_semantics():
    rng = random.Random(17)
    nonempty = 0
    for _ in range(150):
        triples = random_graph(rng, 40)
        q = parse_query(random_query_text(rng, triples))
        got = [tuple(r[v] for v in q.projected_vars) for r in evaluate(q, dataset_of(triples))]
        assert bag(got) == bag(naive_evaluate(q, triples))
        nonempty += bool(got)
    assert nonempty > 30


def test_adding_to_negated_pattern_only_shrinks_results():
    rng = random.Random(4)
    q = parse_query(f"PREFIX ex: <{EX}>\nSELECT ?x WHERE {{ ?x ex:q0 ?y . FILTER NOT EXISTS {{ ?x ex:q1 ?z }} }}")
    for _ in range(50):
        triples = random_graph(rng, 30)
        before = {r["x"] for r in evaluate(q, dataset_of(triples))}
        extra = Triple(rng.choice([t.s for t in triples] or [Iri(EX + "n0")]), Iri(EX + "q1"), Iri(EX + "n0"))
        after = {r["x"] for r in evaluate(q, dataset_of(triples | {extra}))}
        assert after <= before


def test_literals_in_patterns():
    ds = dataset_of([Triple(Iri(EX + "a"), Iri(EX + "v"), Literal("1", Iri("http://www.w3.org/2001/XMLSchema#integer"))),
                     Triple(Iri(EX + "b"), Iri(EX + "v"), Literal("1"))])
    rows = evaluate(parse_query(f'PREFIX ex: <{EX}>\nSELECT ?s WHERE {{ ?s ex:v 1 }}'), ds)
    assert [r["s"] for r in rows] == [Iri(EX + "a")]
    rows = evaluate(parse_query(f'PREFIX ex: <{EX}>\nSELECT ?s WHERE {{ ?s ex:v "1" }}'), ds)
    assert [r["s"] for r in rows] == [Iri(EX + "b")]


def test_query_text_round_trip():
    q = type1_query()
    assert parse_query(q.to_text()).structure() == q.structure()


def test_csv_and_jsonl_output():
    ds = dataset_of([
        Triple(Iri(EX + "a"), Iri(EX + "label"), Literal("x, \"y\"")),
        Triple(Iri(EX + "b"), Iri(EX + "label"), Literal("hi", lang="en")),
    ])
    q = parse_query(f"PREFIX ex: <{EX}>\nSELECT ?s ?l WHERE {{ ?s ex:label ?l }}")
    rows = evaluate(q, ds)
    csv_text = results_to_csv(rows, q.projected_vars)
    assert csv_text.splitlines()[0] == "s,l"
    assert f'{EX}a,"x, ""y"""' in csv_text
    lines = [json.loads(x) for x in results_to_jsonl(rows, q.projected_vars).splitlines()]
    assert lines[0]["s"] == {"type": "uri", "value": EX + "a"}
    assert lines[1]["l"] == {"type": "literal", "value": "hi", "xml:lang": "en"}
    assert results_to_csv([], ["s"]) == "s\n"
