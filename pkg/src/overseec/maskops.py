"""Pixel-wise mask algebra, distance transforms, morphology, and geometric cues."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping

import numpy as np
from numpy.typing import NDArray
from scipy import ndimage

from .errors import HierarchyCycleError, ShapeMismatchError, UnknownClassError
from .raster import BinaryMask, FloatRaster


class SoftMask(FloatRaster):
    """Graded mask in [0, 1]; a BinaryMask embeds as a SoftMask with {0, 1} values."""

    @classmethod
    def from_binary(cls, mask: BinaryMask) -> "SoftMask":
        return cls(mask.values.astype(np.float64))


class CueKind(str, Enum):
    NEAR = "near"
    WITHIN_BAND = "within_band"
    CENTER = "center"
    EDGE = "edge"
    DILATE = "dilate"
    ERODE = "erode"


@dataclass(frozen=True)
class GeometricCue:
    """A spatial-language mask transform (e.g. "near the road" -> near(r))."""

    kind: CueKind
    radius: float = 0.0
    inner: float = 0.0  # within_band only

    def __post_init__(self) -> None:
        if not isinstance(self.kind, CueKind):
            object.__setattr__(self, "kind", CueKind(self.kind))
        if self.radius < 0 or self.inner < 0:
            raise ValueError(f"cue radii must be >= 0, got {self}")
        if self.kind is CueKind.WITHIN_BAND and self.inner > self.radius:
            raise ValueError(f"band inner radius exceeds outer: {self}")


@dataclass(frozen=True)
class HierarchyEdge:
    """child is a semantic subset of parent (e.g. "baseball field" of "grass")."""

    child: str
    parent: str

    def __post_init__(self) -> None:
        if self.child == self.parent:
            raise ValueError(f"self-edge in hierarchy: {self.child!r}")


def _require_same_shape(a: BinaryMask, b: BinaryMask) -> None:
    if a.values.shape != b.values.shape:
        raise ShapeMismatchError(f"mask shapes differ: {a.values.shape} vs {b.values.shape}")


def mask_and(a: BinaryMask, b: BinaryMask) -> BinaryMask:
    _require_same_shape(a, b)
    return BinaryMask(a.values & b.values)


def mask_or(a: BinaryMask, b: BinaryMask) -> BinaryMask:
    _require_same_shape(a, b)
    return BinaryMask(a.values | b.values)


def mask_not(a: BinaryMask) -> BinaryMask:
    return BinaryMask(~a.values)


def remove(a: BinaryMask, b: BinaryMask) -> BinaryMask:
    """A minus B, defined as A AND NOT(B)."""
    _require_same_shape(a, b)
    return BinaryMask(a.values & ~b.values)


def empty_distance_sentinel(shape) -> float:
    # Exceeds any achievable in-grid distance.
    return float(shape.height + shape.width)


def distance_transform(mask: BinaryMask) -> NDArray[np.float64]:
    """Exact Euclidean distance (in pixels) from each pixel to the nearest set pixel.

    Zero on the mask itself. An all-zeros mask yields the H+W sentinel at
    every pixel. Distances are sqrt of exact integer squared offsets to the
    nearest set pixel, so they compare exactly against a nearest-seed scan.
    """
    values = mask.values
    if not values.any():
        return np.full(values.shape, empty_distance_sentinel(mask.shape))
    rows, cols = ndimage.distance_transform_edt(
        ~values, return_distances=False, return_indices=True
    )
    yy, xx = np.indices(values.shape)
    sq = (rows - yy).astype(np.int64) ** 2 + (cols - xx).astype(np.int64) ** 2
    return np.sqrt(sq.astype(np.float64))


def _inner_distance(mask: BinaryMask) -> NDArray[np.float64]:
    # Distance from each mask pixel to the nearest complement pixel; 0 outside.
    return distance_transform(mask_not(mask)) * mask.values


def disk_footprint(radius: float) -> NDArray[np.bool_]:
    """Discrete disk structuring element: offsets with Euclidean norm <= radius."""
    r = int(np.floor(radius))
    if r < 1:
        return np.ones((1, 1), dtype=bool)
    yy, xx = np.mgrid[-r : r + 1, -r : r + 1]
    return (yy * yy + xx * xx) <= radius * radius


def dilate(mask: BinaryMask, radius: float) -> BinaryMask:
    if radius < 0:
        raise ValueError("dilate radius must be >= 0")
    out = ndimage.binary_dilation(mask.values, structure=disk_footprint(radius))
    return BinaryMask(out)


def erode(mask: BinaryMask, radius: float) -> BinaryMask:
    if radius < 0:
        raise ValueError("erode radius must be >= 0")
    out = ndimage.binary_erosion(mask.values, structure=disk_footprint(radius))
    return BinaryMask(out)


def near(mask: BinaryMask, radius: float) -> BinaryMask:
    """Pixels strictly outside the mask within `radius` of it."""
    dist = distance_transform(mask)
    return BinaryMask((dist <= radius) & ~mask.values)


def within_band(mask: BinaryMask, inner: float, outer: float) -> BinaryMask:
    """Pixels outside the mask at distance in [inner, outer] from it."""
    dist = distance_transform(mask)
    return BinaryMask((dist >= inner) & (dist <= outer) & ~mask.values)


def center(mask: BinaryMask) -> SoftMask:
    """Graded centerline preference: inner distance normalized per connected component.

    Each component's medial axis reaches 1 regardless of its width; the value
    falls off toward the component boundary and is 0 outside the mask.
    """
    values = mask.values
    if not values.any():
        return SoftMask(np.zeros(values.shape))
    d_in = _inner_distance(mask)
    labels, n = ndimage.label(values, structure=np.ones((3, 3), dtype=bool))
    peaks = np.atleast_1d(ndimage.maximum(d_in, labels=labels, index=np.arange(1, n + 1)))
    lut = np.concatenate(([1.0], peaks))  # label 0 = background, never divided into
    return SoftMask(np.where(values, d_in / lut[labels], 0.0))


def edge(mask: BinaryMask, width: float) -> BinaryMask:
    """Pixels inside the mask within `width` of its boundary."""
    d_in = _inner_distance(mask)
    return BinaryMask((d_in <= width) & mask.values)


def apply_cue(mask: BinaryMask, cue: GeometricCue) -> SoftMask:
    """Apply one geometric cue, yielding a soft geometric-aware mask."""
    if cue.kind is CueKind.NEAR:
        result = near(mask, cue.radius)
    elif cue.kind is CueKind.WITHIN_BAND:
        result = within_band(mask, cue.inner, cue.radius)
    elif cue.kind is CueKind.CENTER:
        return center(mask)
    elif cue.kind is CueKind.EDGE:
        result = edge(mask, cue.radius)
    elif cue.kind is CueKind.DILATE:
        result = dilate(mask, cue.radius)
    elif cue.kind is CueKind.ERODE:
        result = erode(mask, cue.radius)
    else:  # pragma: no cover - enum is closed
        raise ValueError(f"unknown cue kind {cue.kind}")
    return SoftMask.from_binary(result)


def toposort_hierarchy(edges: Iterable[HierarchyEdge]) -> dict[str, set[str]]:
    """Map each parent to its transitive descendants, rejecting cycles."""
    children: dict[str, set[str]] = {}
    for e in edges:
        children.setdefault(e.parent, set()).add(e.child)

    descendants: dict[str, set[str]] = {}
    visiting: set[str] = set()

    def visit(node: str) -> set[str]:
        if node in descendants:
            return descendants[node]
        if node in visiting:
            raise HierarchyCycleError(f"hierarchy contains a cycle through {node!r}")
        visiting.add(node)
        acc: set[str] = set()
        for child in children.get(node, ()):
            acc.add(child)
            acc |= visit(child)
        visiting.discard(node)
        descendants[node] = acc
        return acc

    for parent in children:
        visit(parent)
    return {p: d for p, d in descendants.items() if d}


def apply_hierarchy(
    masks: Mapping[str, BinaryMask],
    edges: Iterable[HierarchyEdge],
) -> dict[str, BinaryMask]:
    """Enforce subset relations by removing descendant masks from each parent.

    Children and classes outside the hierarchy pass through unchanged.
    """
    edges = list(edges)
    for e in edges:
        for name in (e.child, e.parent):
            if name not in masks:
                raise UnknownClassError(f"hierarchy references unknown class {name!r}")
    descendants = toposort_hierarchy(edges)
    out = dict(masks)
    for parent, desc in descendants.items():
        union = np.zeros(masks[parent].values.shape, dtype=bool)
        for child in desc:
            _require_same_shape(masks[parent], masks[child])
            union |= masks[child].values
        out[parent] = remove(masks[parent], BinaryMask(union))
    return out
