"""Write-only OWL/XML export.

Element subset: Ontology, Declaration, SubClassOf, EquivalentClasses,
DisjointClasses, ClassAssertion, ObjectPropertyAssertion and
AnnotationAssertion (labels, see-also links); class expressions Class, ObjectUnionOf,
ObjectIntersectionOf, ObjectSomeValuesFrom, ObjectMinCardinality and
ObjectComplementOf.  One top-level element per declaration or axiom.
"""
from __future__ import annotations

import xml.etree.ElementTree as ET

from .owl import (
    Annotation,
    ClassAssertion,
    ClassExpr,
    ComplementOf,
    DisjointClasses,
    EquivalentClasses,
    IntersectionOf,
    MinCardinality,
    Named,
    Ontology,
    PropertyAssertion,
    SomeValuesFrom,
    SubClassOf,
    UnionOf,
)
from .rdf import Literal

OWL_NS = "http://www.w3.org/2002/07/owl#"


def _class_expr(parent: ET.Element, expr: ClassExpr) -> None:
    if isinstance(expr, Named):
        ET.SubElement(parent, "Class", IRI=expr.iri.value)
    elif isinstance(expr, (UnionOf, IntersectionOf)):
        tag = "ObjectUnionOf" if isinstance(expr, UnionOf) else "ObjectIntersectionOf"
        node = ET.SubElement(parent, tag)
        for op in expr.operands:
            _class_expr(node, op)
    elif isinstance(expr, SomeValuesFrom):
        node = ET.SubElement(parent, "ObjectSomeValuesFrom")
        ET.SubElement(node, "ObjectProperty", IRI=expr.prop.value)
        _class_expr(node, expr.filler)
    elif isinstance(expr, MinCardinality):
        node = ET.SubElement(parent, "ObjectMinCardinality", cardinality=str(expr.n))
        ET.SubElement(node, "ObjectProperty", IRI=expr.prop.value)
        _class_expr(node, expr.filler)
    elif isinstance(expr, ComplementOf):
        node = ET.SubElement(parent, "ObjectComplementOf")
        _class_expr(node, expr.operand)


def export_owl_xml(ontology: Ontology) -> str:
    root = ET.Element("Ontology", {"xmlns": OWL_NS, "ontologyIRI": ontology.iri.value})
    for iri in sorted(ontology.declared_classes, key=lambda i: i.value):
        decl = ET.SubElement(root, "Declaration")
        ET.SubElement(decl, "Class", IRI=iri.value)
    for iri in sorted(ontology.declared_properties, key=lambda i: i.value):
        decl = ET.SubElement(root, "Declaration")
        ET.SubElement(decl, "ObjectProperty", IRI=iri.value)
    seen = set()
    for axiom in ontology.axioms:
        key = axiom.key()
        if key in seen:
            continue
        seen.add(key)
        if isinstance(axiom, SubClassOf):
            node = ET.SubElement(root, "SubClassOf")
            _class_expr(node, axiom.sub)
            _class_expr(node, axiom.sup)
        elif isinstance(axiom, EquivalentClasses):
            node = ET.SubElement(root, "EquivalentClasses")
            _class_expr(node, axiom.a)
            _class_expr(node, axiom.b)
        elif isinstance(axiom, DisjointClasses):
            node = ET.SubElement(root, "DisjointClasses")
            for c in axiom.classes:
                _class_expr(node, c)
        elif isinstance(axiom, ClassAssertion):
            node = ET.SubElement(root, "ClassAssertion")
            _class_expr(node, axiom.cls)
            ET.SubElement(node, "NamedIndividual", IRI=axiom.individual.value)
        elif isinstance(axiom, PropertyAssertion):
            node = ET.SubElement(root, "ObjectPropertyAssertion")
            ET.SubElement(node, "ObjectProperty", IRI=axiom.prop.value)
            ET.SubElement(node, "NamedIndividual", IRI=axiom.subject.value)
            ET.SubElement(node, "NamedIndividual", IRI=axiom.object.value)
        elif isinstance(axiom, Annotation):
            node = ET.SubElement(root, "AnnotationAssertion")
            ET.SubElement(node, "AnnotationProperty", IRI=axiom.prop.value)
            ET.SubElement(node, "IRI").text = axiom.subject.value
            if isinstance(axiom.value, Literal):
                lit = ET.SubElement(node, "Literal")
                if axiom.value.lang:
                    lit.set("xml:lang", axiom.value.lang)
                lit.text = axiom.value.lexical
            else:
                ET.SubElement(node, "IRI").text = axiom.value.value
    ET.indent(root)
    return '<?xml version="1.0" encoding="UTF-8"?>\n' + ET.tostring(root, encoding="unicode") + "\n"
