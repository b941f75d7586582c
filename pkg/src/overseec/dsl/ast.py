"""AST node types for the costmap DSL."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

from ..maskops import GeometricCue, HierarchyEdge
from ..raster import Geometry


@dataclass(frozen=True)
class ClassRef:
    """Reference to a class mask by name: M("road")."""

    name: str


@dataclass(frozen=True)
class Ident:
    """Reference to a previously bound mask."""

    name: str


@dataclass(frozen=True)
class And:
    left: "MaskExpr"
    right: "MaskExpr"


@dataclass(frozen=True)
class Or:
    left: "MaskExpr"
    right: "MaskExpr"


@dataclass(frozen=True)
class Not:
    operand: "MaskExpr"


@dataclass(frozen=True)
class Remove:
    """REMOVE(A, B) = A AND NOT(B)."""

    left: "MaskExpr"
    right: "MaskExpr"


@dataclass(frozen=True)
class Cue:
    """A geometric cue applied to a mask expression."""

    operand: "MaskExpr"
    cue: GeometricCue


MaskExpr = Union[ClassRef, Ident, And, Or, Not, Remove, Cue]


@dataclass(frozen=True)
class ClassDecl:
    name: str
    geometry: Geometry


@dataclass(frozen=True)
class MaskBinding:
    ident: str
    expr: MaskExpr


@dataclass(frozen=True)
class CostRule:
    target: Union[ClassRef, Ident]
    weight: float


@dataclass(frozen=True)
class CostProgram:
    """A parsed costmap program, grouped by statement kind.

    Statement groups preserve source order; mask bindings may only refer
    to identifiers bound earlier (checked by `validate`).
    """

    classes: tuple[ClassDecl, ...] = ()
    masks: tuple[MaskBinding, ...] = ()
    hierarchy: tuple[HierarchyEdge, ...] = ()
    rules: tuple[CostRule, ...] = ()

    def class_names(self) -> set[str]:
        return {c.name for c in self.classes}

    def referenced_classes(self) -> set[str]:
        names: set[str] = set()
        for binding in self.masks:
            names |= _class_refs(binding.expr)
        for rule in self.rules:
            if isinstance(rule.target, ClassRef):
                names.add(rule.target.name)
        for edge in self.hierarchy:
            names.add(edge.child)
            names.add(edge.parent)
        return names


def _class_refs(expr: MaskExpr) -> set[str]:
    if isinstance(expr, ClassRef):
        return {expr.name}
    if isinstance(expr, Ident):
        return set()
    if isinstance(expr, (And, Or, Remove)):
        return _class_refs(expr.left) | _class_refs(expr.right)
    if isinstance(expr, Not):
        return _class_refs(expr.operand)
    if isinstance(expr, Cue):
        return _class_refs(expr.operand)
    raise TypeError(f"not a mask expression: {expr!r}")
