"""Phenotype ontologies over RDF/OWL: compile, classify and extract cohorts."""
from __future__ import annotations

from .rdf import BlankNode, Dataset, Graph, Iri, Literal, Triple, isomorphic, resolve_prefixed
from .turtle import parse_turtle, serialize_turtle
from .owl import Ontology, from_triples, to_triples
from .reasoner import entails, materialize
from .sparql import evaluate, parse_query

__version__ = "0.1.0"

__all__ = [
    "BlankNode",
    "Dataset",
    "Graph",
    "Iri",
    "Literal",
    "Ontology",
    "Triple",
    "entails",
    "evaluate",
    "from_triples",
    "isomorphic",
    "materialize",
    "parse_query",
    "parse_turtle",
    "resolve_prefixed",
    "serialize_turtle",
    "to_triples",
]
