"""Turtle and N-Triples reading and writing.

Supported Turtle: ``@prefix``/``PREFIX`` directives, prefixed names, absolute
IRIs, string/numeric/boolean literals with datatype or language tag, the
``a`` keyword, ``;`` and ``,`` abbreviations, ``[ ... ]`` blank-node property
lists and ``( ... )`` collections.  Relative IRIs and ``@base`` are rejected.
"""
from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from typing import Iterable, Literal as Lit, Optional

from .rdf import (
    RDF_FIRST,
    RDF_NIL,
    RDF_REST,
    RDF_TYPE,
    XSD,
    XSD_STRING,
    BlankNode,
    Graph,
    Iri,
    Literal,
    Term,
    TermError,
    Triple,
    escape_string,
    fresh_blank,
)


@dataclass(frozen=True)
class ParseDiagnostic:
    line: int
    column: int
    message: str
    severity: Lit["error", "warning"] = "error"

    def __str__(self) -> str:
        return f"{self.line}:{self.column}: {self.severity}: {self.message}"


class TurtleError(ValueError):
    def __init__(self, diagnostics: list[ParseDiagnostic], source: str = "<string>") -> None:
        self.diagnostics = diagnostics
        self.source = source
        first = diagnostics[0]
        more = f" (+{len(diagnostics) - 1} more)" if len(diagnostics) > 1 else ""
        super().__init__(f"{source}:{first}{more}")


# ---------------------------------------------------------------------------
# lexer

_PN_PREFIX = r"(?:[A-Za-z][A-Za-z0-9_\-.]*[A-Za-z0-9_\-]|[A-Za-z])?"
_PN_LOCAL = r"(?:[A-Za-z0-9_:%\-]|\.(?=[A-Za-z0-9_:%\-.]*[A-Za-z0-9_:%\-]))*"

_TOKEN_SPEC = [
    ("WS", r"[ \t\r\n]+"),
    ("COMMENT", r"#[^\n]*"),
    ("IRIREF", r"<[^<>\"{}|^`\\\x00-\x20]*>"),
    ("LONG_STRING", r'"""(?:[^"\\]|\\.|"(?!""))*"""' + r"|'''(?:[^'\\]|\\.|'(?!''))*'''"),
    ("STRING", r'"(?:[^"\\\n\r]|\\.)*"' + r"|'(?:[^'\\\n\r]|\\.)*'"),
    ("BLANK", r"_:[A-Za-z0-9_](?:[A-Za-z0-9_\-.]*[A-Za-z0-9_\-])?"),
    ("LANGTAG", r"@[A-Za-z]+(?:-[A-Za-z0-9]+)*"),
    ("DOUBLE", r"[+-]?(?:[0-9]+\.[0-9]*[eE][+-]?[0-9]+|\.[0-9]+[eE][+-]?[0-9]+|[0-9]+[eE][+-]?[0-9]+)"),
    ("DECIMAL", r"[+-]?[0-9]*\.[0-9]+"),
    ("INTEGER", r"[+-]?[0-9]+"),
    ("DTYPE", r"\^\^"),
    ("PNAME", _PN_PREFIX + ":" + _PN_LOCAL),
    ("KEYWORD", r"[A-Za-z]+"),
    ("PUNCT", r"[.;,\[\]()]"),
]
_TOKEN_RE = re.compile("|".join(f"(?P<{name}>{pattern})" for name, pattern in _TOKEN_SPEC))


@dataclass
class _Token:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str, diagnostics: list[ParseDiagnostic]) -> list[_Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            diagnostics.append(ParseDiagnostic(line, col, f"unexpected character {text[pos]!r}"))
            tokens.append(_Token("ERROR", text[pos], line, col))
            pos += 1
            continue
        kind = m.lastgroup
        value = m.group()
        if kind not in ("WS", "COMMENT"):
            if kind == "LANGTAG" and value in ("@prefix", "@base"):
                kind = "KEYWORD"
            tokens.append(_Token(kind, value, line, col))
        newlines = value.count("\n")
        if newlines:
            line += newlines
            line_start = pos + value.rindex("\n") + 1
        pos = m.end()
    tokens.append(_Token("EOF", "", line, pos - line_start + 1))
    return tokens


_ESCAPE_RE = re.compile(r"\\(u[0-9A-Fa-f]{4}|U[0-9A-Fa-f]{8}|.)", re.S)
_SIMPLE_ESCAPES = {"t": "\t", "b": "\b", "n": "\n", "r": "\r", "f": "\f", '"': '"', "'": "'", "\\": "\\"}


def _unescape(body: str) -> str:
    def repl(m: re.Match) -> str:
        code = m.group(1)
        if code[0] in "uU" and len(code) > 1:
            return chr(int(code[1:], 16))
        if code in _SIMPLE_ESCAPES:
            return _SIMPLE_ESCAPES[code]
        raise ValueError(f"invalid escape \\{code}")

    return _ESCAPE_RE.sub(repl, body)


# ---------------------------------------------------------------------------
# parser


class _Syntax(Exception):
    def __init__(self, token: _Token, message: str) -> None:
        super().__init__(message)
        self.token = token
        self.message = message


class _Parser:
    def __init__(self, text: str, prefixes: Optional[dict[str, str]]) -> None:
        self.diagnostics: list[ParseDiagnostic] = []
        self.tokens = _tokenize(text, self.diagnostics)
        self.i = 0
        self.prefixes: dict[str, str] = dict(prefixes or {})
        self.bnodes: dict[str, BlankNode] = {}
        self.graph = Graph()
        self.pending: list[Triple] = []

    # token helpers
    def peek(self) -> _Token:
        return self.tokens[self.i]

    def next(self) -> _Token:
        tok = self.tokens[self.i]
        if tok.kind != "EOF":
            self.i += 1
        return tok

    def is_punct(self, ch: str) -> bool:
        tok = self.peek()
        return tok.kind == "PUNCT" and tok.text == ch

    def expect(self, ch: str) -> _Token:
        tok = self.next()
        if tok.kind != "PUNCT" or tok.text != ch:
            raise _Syntax(tok, f"expected {ch!r}, found {tok.text or 'end of input'!r}")
        return tok

    def emit(self, s, p, o) -> None:
        self.pending.append(Triple(s, p, o))

    # grammar
    def parse(self) -> tuple[Graph, list[ParseDiagnostic]]:
        while self.peek().kind != "EOF":
            start = self.i
            self.pending = []
            try:
                self.statement()
            except _Syntax as err:
                self.diagnostics.append(ParseDiagnostic(err.token.line, err.token.col, err.message))
                self.recover(start)
                continue
            for t in self.pending:
                self.graph.add(t)
        self.diagnostics.sort(key=lambda d: (d.line, d.column))
        return self.graph, self.diagnostics

    def recover(self, start: int) -> None:
        if self.i == start:
            self.i += 1
        while self.peek().kind != "EOF":
            tok = self.next()
            if tok.kind == "PUNCT" and tok.text == ".":
                return

    def statement(self) -> None:
        tok = self.peek()
        if tok.kind == "KEYWORD" and (tok.text == "@prefix" or tok.text.upper() == "PREFIX"):
            self.next()
            name = self.next()
            if name.kind != "PNAME" or not name.text.endswith(":") or name.text.count(":") != 1:
                raise _Syntax(name, "expected prefix name ending in ':'")
            iri = self.next()
            if iri.kind != "IRIREF":
                raise _Syntax(iri, "expected <IRI> in prefix declaration")
            self.prefixes[name.text[:-1]] = self.iri_value(iri)
            if tok.text == "@prefix":
                self.expect(".")
            return
        if tok.kind == "KEYWORD" and tok.text.lower() in ("@base", "base"):
            raise _Syntax(tok, "base IRIs are not supported")
        self.triples()
        self.expect(".")

    def triples(self) -> None:
        if self.is_punct("["):
            subject = self.blank_property_list()
            if self.is_punct("."):
                return
        else:
            subject = self.subject()
        self.predicate_object_list(subject)

    def subject(self):
        tok = self.peek()
        if tok.kind in ("IRIREF", "PNAME"):
            return self.iri()
        if tok.kind == "BLANK":
            return self.blank()
        if self.is_punct("("):
            return self.collection()
        raise _Syntax(tok, f"expected subject, found {tok.text or 'end of input'!r}")

    def predicate_object_list(self, subject) -> None:
        while True:
            pred = self.verb()
            self.object_list(subject, pred)
            if not self.is_punct(";"):
                return
            while self.is_punct(";"):
                self.next()
            if self.is_punct(".") or self.is_punct("]"):
                return

    def verb(self) -> Iri:
        tok = self.peek()
        if tok.kind == "KEYWORD" and tok.text == "a":
            self.next()
            return RDF_TYPE
        if tok.kind in ("IRIREF", "PNAME"):
            return self.iri()
        raise _Syntax(tok, f"expected predicate, found {tok.text or 'end of input'!r}")

    def object_list(self, subject, pred) -> None:
        self.emit(subject, pred, self.object())
        while self.is_punct(","):
            self.next()
            self.emit(subject, pred, self.object())

    def object(self) -> Term:
        tok = self.peek()
        if tok.kind in ("IRIREF", "PNAME"):
            return self.iri()
        if tok.kind == "BLANK":
            return self.blank()
        if self.is_punct("["):
            return self.blank_property_list()
        if self.is_punct("("):
            return self.collection()
        if tok.kind in ("STRING", "LONG_STRING"):
            return self.literal()
        if tok.kind in ("INTEGER", "DECIMAL", "DOUBLE"):
            self.next()
            dtype = {"INTEGER": "integer", "DECIMAL": "decimal", "DOUBLE": "double"}[tok.kind]
            return Literal(tok.text, Iri(XSD + dtype))
        if tok.kind == "KEYWORD" and tok.text in ("true", "false"):
            self.next()
            return Literal(tok.text, Iri(XSD + "boolean"))
        raise _Syntax(tok, f"expected object, found {tok.text or 'end of input'!r}")

    def literal(self) -> Literal:
        tok = self.next()
        quote = 3 if tok.kind == "LONG_STRING" else 1
        try:
            lexical = _unescape(tok.text[quote:-quote])
        except ValueError as err:
            raise _Syntax(tok, str(err)) from None
        nxt = self.peek()
        if nxt.kind == "LANGTAG":
            self.next()
            return Literal(lexical, lang=nxt.text[1:])
        if nxt.kind == "DTYPE":
            self.next()
            dt_tok = self.peek()
            if dt_tok.kind not in ("IRIREF", "PNAME"):
                raise _Syntax(dt_tok, "expected datatype IRI after '^^'")
            dtype = self.iri()
            try:
                return Literal(lexical, dtype)
            except TermError as err:
                raise _Syntax(dt_tok, str(err)) from None
        return Literal(lexical, XSD_STRING)

    def iri(self) -> Iri:
        tok = self.next()
        if tok.kind == "IRIREF":
            return Iri(self.iri_value(tok))
        prefix, _, local = tok.text.partition(":")
        if prefix not in self.prefixes:
            raise _Syntax(tok, f"unknown prefix {prefix!r}")
        try:
            return Iri(self.prefixes[prefix] + local)
        except TermError as err:
            raise _Syntax(tok, str(err)) from None

    def iri_value(self, tok: _Token) -> str:
        try:
            value = _unescape(tok.text[1:-1])
            Iri(value)
        except (ValueError, TermError):
            raise _Syntax(tok, f"relative or malformed IRI {tok.text}") from None
        return value

    def blank(self) -> BlankNode:
        tok = self.next()
        label = tok.text[2:]
        if label not in self.bnodes:
            self.bnodes[label] = fresh_blank()
        return self.bnodes[label]

    def blank_property_list(self) -> BlankNode:
        self.expect("[")
        node = fresh_blank()
        if not self.is_punct("]"):
            self.predicate_object_list(node)
        self.expect("]")
        return node

    def collection(self):
        self.expect("(")
        items = []
        while not self.is_punct(")"):
            if self.peek().kind == "EOF":
                raise _Syntax(self.peek(), "unterminated collection")
            items.append(self.object())
        self.expect(")")
        if not items:
            return RDF_NIL
        head = cell = fresh_blank()
        for k, item in enumerate(items):
            self.emit(cell, RDF_FIRST, item)
            nxt = fresh_blank() if k < len(items) - 1 else RDF_NIL
            self.emit(cell, RDF_REST, nxt)
            cell = nxt
        return head


def parse_turtle(text: str, prefixes: Optional[dict[str, str]] = None) -> tuple[Graph, list[ParseDiagnostic]]:
    """Parse Turtle; syntax errors become diagnostics and the bad statement is skipped."""
    graph, diags = _Parser(text, prefixes).parse()
    return graph, diags


def parse_turtle_with_prefixes(text: str) -> tuple[Graph, dict[str, str], list[ParseDiagnostic]]:
    parser = _Parser(text, None)
    graph, diags = parser.parse()
    return graph, parser.prefixes, diags


def load_turtle(text: str, source: str = "<string>") -> Graph:
    """Parse Turtle and raise :class:`TurtleError` on any error diagnostic."""
    graph, diags = parse_turtle(text)
    errors = [d for d in diags if d.severity == "error"]
    if errors:
        raise TurtleError(errors, source)
    return graph


# N-Triples is a syntactic subset of the Turtle accepted above.
parse_ntriples = parse_turtle


# ---------------------------------------------------------------------------
# serializer

_SAFE_LOCAL = re.compile(r"^(?:[A-Za-z0-9_]|%[0-9A-Fa-f]{2})(?:(?:[A-Za-z0-9_\-.]|%[0-9A-Fa-f]{2})*(?:[A-Za-z0-9_\-]|%[0-9A-Fa-f]{2}))?$")


class _Writer:
    def __init__(self, triples: set[Triple], prefixes: dict[str, str]) -> None:
        self.triples = triples
        self.prefixes = prefixes
        # longest namespace wins; ties go to the alphabetically first prefix
        self.namespaces = sorted(prefixes.items(), key=lambda kv: (-len(kv[1]), kv[0]))
        self.out: dict = {}
        for t in triples:
            self.out.setdefault(t.s, []).append(t)
        self.refs: dict[BlankNode, int] = {}
        for t in triples:
            if isinstance(t.o, BlankNode):
                self.refs[t.o] = self.refs.get(t.o, 0) + 1
        self.labels: dict[BlankNode, str] = {}
        self.inline = self._choose_inline()
        self._render_cache: dict[BlankNode, str] = {}

    # -- blank node layout
    def _choose_inline(self) -> set[BlankNode]:
        blanks = {x for t in self.triples for x in (t.s, t.o) if isinstance(x, BlankNode)}
        candidates = {b for b in blanks if self.refs.get(b, 0) == 1}
        colors = _stable_colors(self.triples)
        while True:
            roots = [s for s in self.out if s not in candidates]
            reached: set[BlankNode] = set()
            stack = list(roots)
            while stack:
                node = stack.pop()
                for t in self.out.get(node, ()):
                    if t.o in candidates and t.o not in reached:
                        reached.add(t.o)
                        stack.append(t.o)
            stranded = candidates - reached
            if not stranded:
                break
            # break a reference cycle at a canonical point
            candidates.discard(min(stranded, key=lambda b: (colors[b], b.label)))
        labelled = sorted(blanks - candidates, key=lambda b: (colors[b], b.label))
        self.labels = {b: f"b{k}" for k, b in enumerate(labelled)}
        return candidates

    def _list_items(self, node: BlankNode) -> Optional[list[Term]]:
        items = []
        seen = set()
        cur: Term = node
        while cur != RDF_NIL:
            if not isinstance(cur, BlankNode) or cur in seen or cur not in self.inline and cur is not node:
                return None
            seen.add(cur)
            outs = self.out.get(cur, [])
            if len(outs) != 2:
                return None
            by_p = {t.p: t.o for t in outs}
            if set(by_p) != {RDF_FIRST, RDF_REST}:
                return None
            items.append(by_p[RDF_FIRST])
            cur = by_p[RDF_REST]
        return items

    # -- term rendering
    def iri(self, iri: Iri) -> str:
        if iri == RDF_TYPE:
            return "a"
        return self.name(iri)

    def name(self, iri: Iri) -> str:
        value = iri.value
        for prefix, ns in self.namespaces:
            if value.startswith(ns):
                local = value[len(ns):]
                if local == "" or _SAFE_LOCAL.match(local):
                    return f"{prefix}:{local}"
        return f"<{value}>"

    def literal(self, lit: Literal) -> str:
        text = '"' + escape_string(lit.lexical) + '"'
        if lit.lang:
            return f"{text}@{lit.lang}"
        if lit.datatype == XSD_STRING:
            return text
        return f"{text}^^{self.name(lit.datatype)}"

    def obj(self, term: Term, depth: int) -> str:
        if isinstance(term, Iri):
            return self.name(term)
        if isinstance(term, Literal):
            return self.literal(term)
        if term in self.inline:
            return self.nested(term, depth)
        return f"_:{self.labels[term]}"

    def nested(self, node: BlankNode, depth: int) -> str:
        items = self._list_items(node)
        if items is not None:
            return "( " + " ".join(self.obj(i, depth + 1) for i in items) + " )"
        if not self.out.get(node):
            return "[]"
        return "[ " + self.pol(node, depth + 1) + " ]"

    def pol(self, subject, depth: int) -> str:
        indent = "    " * (depth + 1)
        by_p: dict[Iri, list[Term]] = {}
        for t in self.out[subject]:
            by_p.setdefault(t.p, []).append(t.o)
        parts = []
        for p in sorted(by_p, key=lambda x: x.value):
            objs = sorted((self.obj(o, depth) for o in by_p[p]))
            parts.append(self.iri(p) + " " + ", ".join(objs))
        return f" ;\n{indent}".join(parts)

    def subject_text(self, s) -> str:
        if isinstance(s, Iri):
            return self.name(s)
        if s in self.inline:
            return self.nested(s, 0)
        return f"_:{self.labels[s]}"

    def write(self) -> str:
        lines = [f"@prefix {p}: <{ns}> ." for p, ns in sorted(self.prefixes.items())]
        iri_subjects = sorted((s for s in self.out if isinstance(s, Iri)), key=lambda s: s.value)
        blank_subjects = sorted(
            (s for s in self.out if isinstance(s, BlankNode) and s not in self.inline),
            key=lambda s: self.labels[s],
        )
        blocks = []
        for s in iri_subjects + blank_subjects:
            blocks.append(self.subject_text(s) + " " + self.pol(s, 0) + " .")
        text = "\n".join(lines)
        if blocks:
            text += ("\n\n" if lines else "") + "\n\n".join(blocks)
        return text + "\n" if text else ""


def _stable_colors(triples: Iterable[Triple]) -> dict[BlankNode, str]:
    """Process-independent colour refinement used to order blank nodes."""
    triples = list(triples)
    blanks = {x for t in triples for x in (t.s, t.o) if isinstance(x, BlankNode)}
    colors = {b: "" for b in blanks}

    def lab(x: Term) -> str:
        if isinstance(x, BlankNode):
            return "_" + colors[x]
        if isinstance(x, Literal):
            return f"L{x.lexical}\x00{x.datatype.value}\x00{x.lang or ''}"
        return "I" + x.value

    distinct = 1
    for _ in range(len(blanks) + 1):
        sig: dict[BlankNode, list[str]] = {b: [] for b in blanks}
        for s, p, o in triples:
            if isinstance(s, BlankNode):
                sig[s].append(f">{p.value}\x01{lab(o)}")
            if isinstance(o, BlankNode):
                sig[o].append(f"<{p.value}\x01{lab(s)}")
        colors = {
            b: hashlib.sha1((colors[b] + "\x02" + "\x03".join(sorted(v))).encode()).hexdigest()
            for b, v in sig.items()
        }
        now = len(set(colors.values()))
        if now == distinct:
            break
        distinct = now
    return colors


def serialize_turtle(graph: Iterable[Triple], prefixes: Optional[dict[str, str]] = None) -> str:
    """Deterministic Turtle: subjects sorted by IRI, then predicates, then objects."""
    return _Writer(set(graph), dict(prefixes or {})).write()


def serialize_ntriples(graph: Iterable[Triple]) -> str:
    triples = set(graph)
    colors = _stable_colors(triples)
    labels = {b: f"b{k}" for k, b in enumerate(sorted(colors, key=lambda b: (colors[b], b.label)))}

    def term(x: Term) -> str:
        if isinstance(x, BlankNode):
            return f"_:{labels[x]}"
        return str(x)

    lines = sorted(f"{term(s)} {term(p)} {term(o)} ." for s, p, o in triples)
    return "".join(line + "\n" for line in lines)
