"""Semantic validation and deterministic evaluation of costmap programs."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from ..errors import ShapeMismatchError, UnknownClassError
from ..maskops import BinaryMask, CueKind, apply_hierarchy, center
from ..maskops import dilate as _dilate
from ..maskops import edge as _edge
from ..maskops import erode as _erode
from ..maskops import near as _near
from ..maskops import within_band as _within_band
from ..raster import Costmap, ProbabilityMap
from .ast import And, ClassRef, CostProgram, Cue, Ident, MaskExpr, Not, Or, Remove
from .errors import InvalidWeightError, TypeMismatchError, UnresolvedIdentError

BINARY = "binary"
SOFT = "soft"


@dataclass(frozen=True)
class EvalInputs:
    """Per-class refined masks and gated probability maps, all one shape."""

    masks: Mapping[str, BinaryMask]
    probabilities: Mapping[str, ProbabilityMap]

    def __post_init__(self) -> None:
        if set(self.masks) != set(self.probabilities):
            raise UnknownClassError(
                "mask classes and probability classes differ: "
                f"{sorted(set(self.masks) ^ set(self.probabilities))}"
            )
        shapes = {m.values.shape for m in self.masks.values()}
        shapes |= {p.values.shape for p in self.probabilities.values()}
        if len(shapes) > 1:
            raise ShapeMismatchError(f"inputs span multiple shapes: {sorted(shapes)}")

    @property
    def grid(self) -> tuple[int, int]:
        return next(iter(self.masks.values())).values.shape


def _infer_type(expr: MaskExpr, env: dict[str, str]) -> str:
    if isinstance(expr, ClassRef):
        return BINARY
    if isinstance(expr, Ident):
        if expr.name not in env:
            raise UnresolvedIdentError(f"mask identifier {expr.name!r} is not bound before use")
        return env[expr.name]
    if isinstance(expr, (And, Or, Remove)):
        operands = (expr.left, expr.right)
    elif isinstance(expr, (Not, Cue)):
        operands = (expr.operand,)
    else:
        raise TypeError(f"not a mask expression: {expr!r}")
    for op in operands:
        if _infer_type(op, env) is not BINARY:
            raise TypeMismatchError(
                f"{type(expr).__name__} requires binary operands; a graded (CENTER) "
                "mask may only be bound to an identifier and used as a cost target"
            )
    if isinstance(expr, Cue) and expr.cue.kind is CueKind.CENTER:
        return SOFT
    return BINARY


def validate(program: CostProgram, available_classes: Iterable[str]) -> CostProgram:
    """Check a parsed program against the available class set.

    Verifies that every referenced class exists, the hierarchy is acyclic,
    identifiers are bound before use, weights are finite and nonnegative,
    and operators are applied to binary masks. Returns the program unchanged.
    """
    available = set(available_classes)
    for name in sorted(program.class_names() | program.referenced_classes()):
        if name not in available:
            raise UnknownClassError(f"program references unknown class {name!r}")

    from ..maskops import toposort_hierarchy

    toposort_hierarchy(program.hierarchy)  # raises HierarchyCycleError on a cycle

    env: dict[str, str] = {}
    for binding in program.masks:
        env[binding.ident] = _infer_type(binding.expr, env)
    for rule in program.rules:
        if isinstance(rule.target, Ident) and rule.target.name not in env:
            raise UnresolvedIdentError(f"cost target {rule.target.name!r} is not bound")
        if not math.isfinite(rule.weight) or rule.weight < 0:
            raise InvalidWeightError(f"cost weight must be finite and >= 0, got {rule.weight}")
    return program


def _eval_expr(expr: MaskExpr, class_masks: Mapping[str, BinaryMask], env: dict[str, np.ndarray]):
    """Evaluate to a bool array (binary) or float array (graded)."""
    if isinstance(expr, ClassRef):
        return class_masks[expr.name].values
    if isinstance(expr, Ident):
        return env[expr.name]
    if isinstance(expr, And):
        return _eval_expr(expr.left, class_masks, env) & _eval_expr(expr.right, class_masks, env)
    if isinstance(expr, Or):
        return _eval_expr(expr.left, class_masks, env) | _eval_expr(expr.right, class_masks, env)
    if isinstance(expr, Not):
        return ~_eval_expr(expr.operand, class_masks, env)
    if isinstance(expr, Remove):
        return _eval_expr(expr.left, class_masks, env) & ~_eval_expr(expr.right, class_masks, env)
    if isinstance(expr, Cue):
        operand = BinaryMask(_eval_expr(expr.operand, class_masks, env))
        kind = expr.cue.kind
        if kind is CueKind.CENTER:
            return center(operand).values
        if kind is CueKind.NEAR:
            return _near(operand, expr.cue.radius).values
        if kind is CueKind.DILATE:
            return _dilate(operand, expr.cue.radius).values
        if kind is CueKind.ERODE:
            return _erode(operand, expr.cue.radius).values
        if kind is CueKind.EDGE:
            return _edge(operand, expr.cue.radius).values
        return _within_band(operand, expr.cue.inner, expr.cue.radius).values
    raise TypeError(f"not a mask expression: {expr!r}")


def evaluate(program: CostProgram, inputs: EvalInputs) -> Costmap:
    """Run a validated program over per-class inputs, yielding the costmap.

    Fixed pipeline: enforce hierarchies on the class masks, evaluate mask
    bindings (applying geometric cues), accumulate weighted per-rule
    contributions, fill pixels no rule covers with the accumulated maximum,
    then min-max normalize to [0, 1].

    Class-mask cost targets are weighted by the class's gated probability
    map; derived-mask targets carry implicit probability 1. If the covered
    region accumulates a single constant value, it normalizes to 0 and any
    uncovered region to 1; a fully covered constant map is all zeros.
    """
    missing = (program.class_names() | program.referenced_classes()) - set(inputs.masks)
    if missing:
        raise UnknownClassError(f"inputs missing classes: {sorted(missing)}")
    validate(program, inputs.masks.keys())

    class_masks = apply_hierarchy(dict(inputs.masks), program.hierarchy)

    env: dict[str, np.ndarray] = {}
    for binding in program.masks:
        env[binding.ident] = _eval_expr(binding.expr, class_masks, env)

    shape = inputs.grid
    accumulated = np.zeros(shape, dtype=np.float64)
    covered = np.zeros(shape, dtype=bool)
    for rule in program.rules:
        if isinstance(rule.target, ClassRef):
            mask = class_masks[rule.target.name].values
            soft = mask.astype(np.float64)
            contribution = rule.weight * soft * inputs.probabilities[rule.target.name].values
        else:
            resolved = env[rule.target.name]
            soft = resolved.astype(np.float64)
            contribution = rule.weight * soft
        accumulated += contribution
        covered |= soft > 0

    if not covered.any():
        return Costmap(np.zeros(shape))

    lo = accumulated[covered].min()
    hi = accumulated[covered].max()  # = C_max: uncovered pixels hold 0 <= hi
    uncovered = ~covered
    accumulated[uncovered] = hi
    if hi > lo:
        return Costmap((accumulated - lo) / (hi - lo))
    out = np.zeros(shape)
    out[uncovered] = 1.0
    return Costmap(out)
