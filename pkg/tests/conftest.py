import numpy as np
import pytest

from overseec.dsl import (
    And,
    ClassDecl,
    ClassRef,
    CostProgram,
    CostRule,
    Cue,
    Ident,
    MaskBinding,
    Not,
    Or,
    Remove,
)
from overseec.maskops import BinaryMask, CueKind, GeometricCue, HierarchyEdge
from overseec.raster import Geometry, ProbabilityMap


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


def random_mask(rng, shape=(16, 16), density=0.3) -> BinaryMask:
    return BinaryMask(rng.random(shape) < density)


def random_probability(rng, shape=(16, 16)) -> ProbabilityMap:
    return ProbabilityMap(rng.random(shape))


# ---------------------------------------------------------------------------
# Random program generator used by the round-trip tests
# ---------------------------------------------------------------------------

_CLASS_POOL = (
    "road",
    "trail",
    "grass",
    "tree line",
    "water",
    "building",
    "baseball field",
    "gravel lot",
    "zone-7",
    "café patio",
)
_EXPR_KINDS = (
    "class_ref",
    "ident",
    "and",
    "or",
    "not",
    "remove",
    "near",
    "dilate",
    "erode",
    "edge",
    "center",
)
_RADIUS_KIND = {
    "near": CueKind.NEAR,
    "dilate": CueKind.DILATE,
    "erode": CueKind.ERODE,
    "edge": CueKind.EDGE,
}


def _number(rng, lo, hi) -> float:
    # rounded so repr() stays plain decimal, which the lexer requires
    return round(float(rng.uniform(lo, hi)), 3)


def random_expr(rng, class_names, bound_idents, depth=0):
    if depth >= 3:
        kinds = ("class_ref", "ident") if bound_idents else ("class_ref",)
    elif bound_idents:
        kinds = _EXPR_KINDS
    else:
        kinds = tuple(k for k in _EXPR_KINDS if k != "ident")
    kind = kinds[int(rng.integers(len(kinds)))]
    if kind == "class_ref":
        return ClassRef(class_names[int(rng.integers(len(class_names)))])
    if kind == "ident":
        return Ident(bound_idents[int(rng.integers(len(bound_idents)))])
    if kind in ("and", "or", "remove"):
        node = {"and": And, "or": Or, "remove": Remove}[kind]
        return node(
            random_expr(rng, class_names, bound_idents, depth + 1),
            random_expr(rng, class_names, bound_idents, depth + 1),
        )
    if kind == "not":
        return Not(random_expr(rng, class_names, bound_idents, depth + 1))
    if kind == "center":
        return Cue(
            random_expr(rng, class_names, bound_idents, depth + 1),
            GeometricCue(CueKind.CENTER),
        )
    return Cue(
        random_expr(rng, class_names, bound_idents, depth + 1),
        GeometricCue(_RADIUS_KIND[kind], radius=_number(rng, 0.0, 50.0)),
    )


def random_program(rng) -> CostProgram:
    """A syntactically valid program touching arbitrary grammar productions."""
    n_classes = int(rng.integers(1, 6))
    picks = rng.choice(len(_CLASS_POOL), size=n_classes, replace=False)
    names = [_CLASS_POOL[i] for i in picks]
    classes = tuple(
        ClassDecl(name, Geometry.LINEAR if rng.random() < 0.5 else Geometry.AREAL)
        for name in names
    )

    masks = []
    idents = []
    for i in range(int(rng.integers(0, 4))):
        ident = f"m{i}"
        masks.append(MaskBinding(ident, random_expr(rng, names, tuple(idents))))
        idents.append(ident)

    hierarchy = []
    if len(names) >= 2 and rng.random() < 0.5:
        child, parent = (names[i] for i in rng.choice(len(names), size=2, replace=False))
        hierarchy.append(HierarchyEdge(child=child, parent=parent))

    rules = []
    for _ in range(int(rng.integers(1, 4))):
        if idents and rng.random() < 0.4:
            target = Ident(idents[int(rng.integers(len(idents)))])
        else:
            target = ClassRef(names[int(rng.integers(len(names)))])
        rules.append(CostRule(target, _number(rng, 0.0, 10.0)))

    return CostProgram(classes, tuple(masks), tuple(hierarchy), tuple(rules))
