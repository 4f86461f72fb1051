"""SELECT queries over basic graph patterns with FILTER NOT EXISTS.

Grammar accepted::

    query   := prologue SELECT DISTINCT? (var+ | '*') WHERE? group
    group   := '{' (triples | FILTER NOT EXISTS group) ('.'? ...)* '}'
    triples := term term term (';' term term)* (',' term)* '.'?

Prefixed names are kept unresolved until evaluation, where the query's own
PREFIX table takes precedence over the dataset's.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Union

from .rdf import (
    RDF_TYPE,
    XSD,
    XSD_STRING,
    BlankNode,
    Dataset,
    Iri,
    Literal,
    Term,
    TermError,
    Triple,
    term_sort_key,
)

log = logging.getLogger(__name__)


class SparqlError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None) -> None:
        self.message, self.line, self.column = message, line, column
        where = f"{line}:{column}: " if line is not None else ""
        super().__init__(where + message)


class SparqlSyntaxError(SparqlError):
    pass


class UnresolvedPrefixError(SparqlError):
    pass


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self) -> str:
        return "?" + self.name


@dataclass(frozen=True)
class PrefixedName:
    prefix: str
    local: str
    line: int = field(default=0, compare=False)
    column: int = field(default=0, compare=False)

    def __str__(self) -> str:
        return f"{self.prefix}:{self.local}"


PatternTerm = Union[Var, PrefixedName, Iri, Literal]


@dataclass(frozen=True)
class TriplePattern:
    s: PatternTerm
    p: PatternTerm
    o: PatternTerm

    def __iter__(self):
        return iter((self.s, self.p, self.o))

    def variables(self) -> list[str]:
        return [t.name for t in self if isinstance(t, Var)]


@dataclass(frozen=True)
class BGP:
    patterns: tuple[TriplePattern, ...]

    def variables(self) -> list[str]:
        seen: dict[str, None] = {}
        for pat in self.patterns:
            for v in pat.variables():
                seen.setdefault(v)
        return list(seen)


@dataclass(frozen=True)
class Query:
    prefixes: dict[str, str]
    projected_vars: tuple[str, ...]
    distinct: bool
    where: BGP
    negations: tuple[BGP, ...] = ()

    def resolved(self, fallback: Optional[dict[str, str]] = None) -> "Query":
        table = {**(fallback or {}), **self.prefixes}
        return Query(
            prefixes=dict(self.prefixes),
            projected_vars=self.projected_vars,
            distinct=self.distinct,
            where=_resolve_bgp(self.where, table),
            negations=tuple(_resolve_bgp(b, table) for b in self.negations),
        )

    def structure(self) -> tuple:
        """Prefix-independent identity used to compare two queries."""
        r = self.resolved()
        return (r.projected_vars, r.distinct, r.where, frozenset(r.negations))

    def to_text(self) -> str:
        lines = [f"PREFIX {p}: <{ns}>" for p, ns in self.prefixes.items()]
        head = "SELECT " + ("DISTINCT " if self.distinct else "") + " ".join("?" + v for v in self.projected_vars)
        lines.append(head)
        body = [_pattern_text(p) + " ." for p in self.where.patterns]
        for neg in self.negations:
            inner = " ".join(_pattern_text(p) + " ." for p in neg.patterns)
            body.append("FILTER NOT EXISTS { " + inner + " }")
        lines.append("WHERE {")
        lines.extend("  " + b for b in body)
        lines.append("}")
        return "\n".join(lines) + "\n"


def _pattern_text(p: TriplePattern) -> str:
    return " ".join("a" if t == RDF_TYPE else str(t) for t in p)


def _resolve_term(t: PatternTerm, table: dict[str, str]) -> PatternTerm:
    if isinstance(t, PrefixedName):
        if t.prefix not in table:
            raise UnresolvedPrefixError(f"unknown prefix {t.prefix!r}", t.line, t.column)
        try:
            return Iri(table[t.prefix] + t.local)
        except TermError as err:
            raise UnresolvedPrefixError(str(err), t.line, t.column) from None
    return t


def _resolve_bgp(bgp: BGP, table: dict[str, str]) -> BGP:
    return BGP(tuple(TriplePattern(*(_resolve_term(t, table) for t in p)) for p in bgp.patterns))


@dataclass(frozen=True)
class SolutionRow:
    bindings: dict[str, Term]

    def __getitem__(self, var: str) -> Term:
        return self.bindings[var]

    def key(self, order: Iterable[str]) -> tuple:
        return tuple(term_sort_key(self.bindings[v]) for v in order)


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"""
    (?P<WS>\s+|\#[^\n]*)
  | (?P<IRI><[^<>"{}|^`\\\x00-\x20]*>)
  | (?P<VAR>[?$][A-Za-z_][A-Za-z0-9_]*)
  | (?P<STRING>"(?:[^"\\\n]|\\.)*"|'(?:[^'\\\n]|\\.)*')
  | (?P<LANG>@[A-Za-z]+(?:-[A-Za-z0-9]+)*)
  | (?P<DTYPE>\^\^)
  | (?P<NUMBER>[+-]?(?:[0-9]+\.[0-9]+|[0-9]+))
  | (?P<PNAME>(?:[A-Za-z][A-Za-z0-9_\-]*)?:(?:[A-Za-z0-9_%\-]|\.(?=[A-Za-z0-9_%\-]))*)
  | (?P<BLANK>_:[A-Za-z0-9_]+)
  | (?P<WORD>[A-Za-z]+)
  | (?P<PUNCT>[{}.;,*])
    """,
    re.X,
)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _lex(text: str) -> list[_Tok]:
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise SparqlSyntaxError(f"unexpected character {text[pos]!r}", line, col)
        value = m.group()
        if m.lastgroup != "WS":
            toks.append(_Tok(m.lastgroup, value, line, col))
        if "\n" in value:
            line += value.count("\n")
            line_start = pos + value.rindex("\n") + 1
        pos = m.end()
    toks.append(_Tok("EOF", "", line, pos - line_start + 1))
    return toks


class _QueryParser:
    def __init__(self, text: str) -> None:
        self.toks = _lex(text)
        self.i = 0
        self.prefixes: dict[str, str] = {}

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def next(self) -> _Tok:
        tok = self.toks[self.i]
        if tok.kind != "EOF":
            self.i += 1
        return tok

    def fail(self, tok: _Tok, message: str):
        raise SparqlSyntaxError(message, tok.line, tok.col)

    def keyword(self, word: str) -> bool:
        tok = self.peek()
        if tok.kind == "WORD" and tok.text.upper() == word:
            self.next()
            return True
        return False

    def expect_keyword(self, word: str) -> None:
        if not self.keyword(word):
            tok = self.peek()
            self.fail(tok, f"expected {word}, found {tok.text or 'end of input'!r}")

    def punct(self, ch: str) -> bool:
        tok = self.peek()
        if tok.kind == "PUNCT" and tok.text == ch:
            self.next()
            return True
        return False

    def expect(self, ch: str) -> None:
        if not self.punct(ch):
            tok = self.peek()
            self.fail(tok, f"expected {ch!r}, found {tok.text or 'end of input'!r}")

    def parse(self) -> Query:
        prefixes = self.prefixes
        while self.keyword("PREFIX"):
            name = self.next()
            if name.kind != "PNAME" or not name.text.endswith(":"):
                self.fail(name, "expected prefix name ending in ':'")
            iri = self.next()
            if iri.kind != "IRI":
                self.fail(iri, "expected <IRI> after prefix name")
            prefixes[name.text[:-1]] = iri.text[1:-1]
        start = self.peek()
        self.expect_keyword("SELECT")
        distinct = self.keyword("DISTINCT")
        star = False
        projected: list[str] = []
        if self.punct("*"):
            star = True
        else:
            while self.peek().kind == "VAR":
                projected.append(self.next().text[1:])
            if not projected:
                self.fail(self.peek(), "expected projection variables or '*'")
        self.keyword("WHERE")
        where, negations = self.group(top=True)
        tail = self.peek()
        if tail.kind != "EOF":
            self.fail(tail, f"unexpected {tail.text!r} after query body")
        if not where:
            self.fail(start, "WHERE clause needs at least one triple pattern")
        bgp = BGP(tuple(where))
        if star:
            projected = bgp.variables()
        for v in projected:
            if v not in bgp.variables():
                self.fail(start, f"projected variable ?{v} does not occur in WHERE")
        return Query(prefixes, tuple(projected), distinct, bgp, tuple(negations))

    def group(self, top: bool) -> tuple[list[TriplePattern], list[BGP]]:
        self.expect("{")
        patterns: list[TriplePattern] = []
        negations: list[BGP] = []
        while True:
            tok = self.peek()
            if tok.kind == "EOF":
                self.fail(tok, "missing closing '}'")
            if self.punct("}"):
                return patterns, negations
            if self.punct("."):
                continue
            if tok.kind == "WORD" and tok.text.upper() == "FILTER":
                self.next()
                if not top:
                    self.fail(tok, "nested FILTER is not supported")
                self.expect_keyword("NOT")
                self.expect_keyword("EXISTS")
                inner, _ = self.group(top=False)
                if not inner:
                    self.fail(tok, "empty NOT EXISTS block")
                negations.append(BGP(tuple(inner)))
                continue
            self.triples(patterns)

    def triples(self, out: list[TriplePattern]) -> None:
        s = self.term(position="subject")
        while True:
            p = self.term(position="predicate")
            while True:
                o = self.term(position="object")
                out.append(TriplePattern(s, p, o))
                if not self.punct(","):
                    break
            if not self.punct(";"):
                return
            nxt = self.peek()
            if nxt.kind == "PUNCT" and nxt.text in ".}":
                return

    def term(self, position: str) -> PatternTerm:
        tok = self.next()
        if tok.kind == "VAR":
            return Var(tok.text[1:])
        if tok.kind == "IRI":
            try:
                return Iri(tok.text[1:-1])
            except TermError as err:
                self.fail(tok, str(err))
        if tok.kind == "PNAME":
            prefix, _, local = tok.text.partition(":")
            return PrefixedName(prefix, local, tok.line, tok.col)
        if tok.kind == "WORD" and tok.text == "a" and position == "predicate":
            return RDF_TYPE
        if position == "object":
            if tok.kind == "STRING":
                lexical = _unescape(tok.text[1:-1])
                nxt = self.peek()
                if nxt.kind == "LANG":
                    self.next()
                    return Literal(lexical, lang=nxt.text[1:])
                if nxt.kind == "DTYPE":
                    self.next()
                    dt = self.term(position="datatype")
                    if isinstance(dt, PrefixedName):
                        # literals are built eagerly, so their datatype must resolve now
                        try:
                            dt = _resolve_term(dt, self.prefixes)
                        except UnresolvedPrefixError as err:
                            raise SparqlSyntaxError(err.message, err.line, err.column) from None
                    return Literal(lexical, dt)
                return Literal(lexical, XSD_STRING)
            if tok.kind == "NUMBER":
                return Literal(tok.text, Iri(XSD + ("decimal" if "." in tok.text else "integer")))
            if tok.kind == "WORD" and tok.text in ("true", "false"):
                return Literal(tok.text, Iri(XSD + "boolean"))
        if position == "datatype" and tok.kind == "IRI":
            return Iri(tok.text[1:-1])
        if tok.kind == "BLANK":
            self.fail(tok, "blank nodes in patterns are not supported; use a variable")
        self.fail(tok, f"expected {position}, found {tok.text or 'end of input'!r}")


_ESC = {"t": "\t", "n": "\n", "r": "\r", '"': '"', "'": "'", "\\": "\\"}


def _unescape(body: str) -> str:
    return re.sub(r"\\(.)", lambda m: _ESC.get(m.group(1), m.group(1)), body)


def parse_query(text: str) -> Query:
    return _QueryParser(text).parse()


# ---------------------------------------------------------------------------
# evaluation

Binding = dict[str, Term]


def _bound(t: PatternTerm, row: Binding) -> Optional[Term]:
    if isinstance(t, Var):
        return row.get(t.name)
    return t


def _estimate(pat: TriplePattern, dataset: Dataset, bound_vars: set[str]) -> tuple[int, int]:
    """(negated bound-position count, constant-only cardinality)"""
    consts = [None if isinstance(t, Var) else t for t in pat]
    n_bound = sum(1 for t in pat if not isinstance(t, Var) or t.name in bound_vars)
    return (-n_bound, dataset.count(tuple(consts)))


def _plan(bgp: BGP, dataset: Dataset, bound_vars: set[str]) -> list[TriplePattern]:
    remaining = list(bgp.patterns)
    order: list[TriplePattern] = []
    bound = set(bound_vars)
    while remaining:
        best = min(remaining, key=lambda p: _estimate(p, dataset, bound))
        remaining.remove(best)
        order.append(best)
        bound.update(best.variables())
    return order


def _match_bgp(order: list[TriplePattern], dataset: Dataset, row: Binding) -> Iterator[Binding]:
    if not order:
        yield row
        return
    pat, rest = order[0], order[1:]
    s, p, o = (_bound(t, row) for t in pat)
    if isinstance(s, Literal) or (p is not None and not isinstance(p, Iri)):
        return
    for t in dataset.match((s, p, o)):
        ext = _extend(row, pat, t)
        if ext is not None:
            yield from _match_bgp(rest, dataset, ext)


def _extend(row: Binding, pat: TriplePattern, t: Triple) -> Optional[Binding]:
    new = row
    for term, value in zip(pat, t):
        if isinstance(term, Var):
            current = new.get(term.name)
            if current is None:
                if new is row:
                    new = dict(row)
                new[term.name] = value
            elif current != value:
                return None
    return new


def evaluate(query: Query, dataset: Dataset) -> list[SolutionRow]:
    """Evaluate over the merge of all graphs in ``dataset`` (asserted and inferred)."""
    if not dataset.materialized:
        log.warning("evaluating over a dataset that has not been materialized; only asserted facts are visible")
    q = query.resolved(dataset.prefixes)
    where_vars = set(q.where.variables())
    order = _plan(q.where, dataset, set())
    neg_plans = [(_plan(neg, dataset, where_vars), neg) for neg in q.negations]
    rows = []
    for binding in _match_bgp(order, dataset, {}):
        if any(_exists(plan, dataset, binding) for plan, _ in neg_plans):
            continue
        rows.append(SolutionRow({v: binding[v] for v in q.projected_vars}))
    if q.distinct:
        unique = {tuple(r.bindings[v] for v in q.projected_vars): r for r in rows}
        rows = list(unique.values())
    rows.sort(key=lambda r: r.key(q.projected_vars))
    return rows


def _exists(plan: list[TriplePattern], dataset: Dataset, binding: Binding) -> bool:
    for _ in _match_bgp(plan, dataset, binding):
        return True
    return False


# ---------------------------------------------------------------------------
# result formats


def _plain(term: Term) -> str:
    if isinstance(term, Iri):
        return term.value
    if isinstance(term, BlankNode):
        return f"_:{term.label}"
    return term.lexical


def results_to_csv(rows: list[SolutionRow], variables: Iterable[str]) -> str:
    variables = list(variables)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(variables)
    for row in rows:
        writer.writerow([_plain(row.bindings[v]) for v in variables])
    return buf.getvalue()


def _json_term(term: Term) -> dict:
    if isinstance(term, Iri):
        return {"type": "uri", "value": term.value}
    if isinstance(term, BlankNode):
        return {"type": "bnode", "value": term.label}
    out = {"type": "literal", "value": term.lexical}
    if term.lang:
        out["xml:lang"] = term.lang
    elif term.datatype != XSD_STRING:
        out["datatype"] = term.datatype.value
    return out


def results_to_jsonl(rows: list[SolutionRow], variables: Iterable[str]) -> str:
    variables = list(variables)
    return "".join(
        json.dumps({v: _json_term(row.bindings[v]) for v in variables}, sort_keys=True) + "\n" for row in rows
    )
