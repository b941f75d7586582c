"""Evaluation metrics for planned routes and segmentation masks.

Route quality is scored against a ground-truth semantic labeling plus a
preference ranking over classes (rank 1 = most traversable). A route that
never leaves rank-1 terrain accrues zero regret.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from typing import Mapping, NamedTuple, Sequence

import numpy as np
from numpy.typing import NDArray

from .errors import OverseecError, ShapeMismatchError
from .planner import Path
from .raster import BinaryMask, GridShape


class MissingRankError(OverseecError):
    """A traversed class has no entry in the rank map."""


class UndefinedSlopeError(OverseecError):
    """Regression slope is undefined when all x values coincide."""


@dataclass(frozen=True)
class SemanticMap:
    """Integer label raster with a label -> class-name table."""

    ids: NDArray[np.int64]
    table: Mapping[int, str]

    def __post_init__(self) -> None:
        ids = np.asarray(self.ids, dtype=np.int64)
        if ids.ndim != 2:
            raise ValueError(f"semantic ids must be 2-D, got shape {ids.shape}")
        present = set(np.unique(ids).tolist())
        unknown = present - set(self.table)
        if unknown:
            raise ValueError(f"ids {sorted(unknown)} missing from the label table")
        object.__setattr__(self, "ids", ids)

    @property
    def shape(self) -> GridShape:
        return GridShape(*self.ids.shape)

    def class_at(self, x: int, y: int) -> str:
        return self.table[int(self.ids[y, x])]


class ScatterPoint(NamedTuple):
    length: int
    rrpi: float


def rrpi(path: Path, semantic: SemanticMap, ranks: Mapping[str, int]) -> int:
    """Route rank penalty: sum over pixels of (rank of traversed class - 1).

    Every rank must be a positive integer; a path entirely on rank-1 terrain
    scores 0.
    """
    for name, rank in ranks.items():
        if not isinstance(rank, int) or rank < 1:
            raise ValueError(f"rank for {name!r} must be an integer >= 1, got {rank!r}")
    shape = semantic.shape
    total = 0
    for x, y in path.pixels:
        if not shape.contains(x, y):
            raise ValueError(f"path pixel ({x},{y}) outside {shape.width}x{shape.height} grid")
        name = semantic.class_at(x, y)
        if name not in ranks:
            raise MissingRankError(f"class {name!r} has no rank")
        total += ranks[name] - 1
    return total


def kde_com(points: Sequence[tuple[float, float]]) -> tuple[float, float]:
    """Center of mass of a kernel density estimate over scatter points.

    For any symmetric kernel the density's center of mass coincides with the
    sample centroid, so this reduces to the mean point.
    """
    if not points:
        raise ValueError("need at least one point")
    xs = np.array([p[0] for p in points], dtype=np.float64)
    ys = np.array([p[1] for p in points], dtype=np.float64)
    return float(xs.mean()), float(ys.mean())


def regression_slope(points: Sequence[tuple[float, float]]) -> float:
    """Least-squares slope of y on x."""
    if len(points) < 2:
        raise ValueError("need at least two points")
    xs = np.array([p[0] for p in points], dtype=np.float64)
    ys = np.array([p[1] for p in points], dtype=np.float64)
    dx = xs - xs.mean()
    denom = float(np.sum(dx * dx))
    if denom == 0.0:
        raise UndefinedSlopeError("all x values are identical")
    return float(np.sum(dx * (ys - ys.mean())) / denom)


def mean_hausdorff(system: Path, references: Sequence[Path], shape: GridShape) -> float:
    """Directed mean distance from system pixels to the union of reference pixels,
    normalized by the grid diagonal.

    For each system pixel, the Euclidean distance to the nearest reference
    pixel is taken; the average is divided by sqrt(H^2 + W^2).
    """
    if not references:
        raise ValueError("need at least one reference path")
    ref_pixels = np.array(
        sorted({p for ref in references for p in ref.pixels}), dtype=np.float64
    )
    sys_pixels = np.array(system.pixels, dtype=np.float64)
    # pairwise distances; route scale keeps this comfortably in memory
    diff = sys_pixels[:, None, :] - ref_pixels[None, :, :]
    nearest = np.sqrt((diff**2).sum(axis=2)).min(axis=1)
    return float(nearest.mean() / shape.diagonal)


def iou(a: BinaryMask, b: BinaryMask) -> float:
    """Intersection over union of two masks; 1.0 when both are empty."""
    if a.values.shape != b.values.shape:
        raise ShapeMismatchError(f"mask shapes differ: {a.values.shape} vs {b.values.shape}")
    union = int(np.count_nonzero(a.values | b.values))
    if union == 0:
        return 1.0
    inter = int(np.count_nonzero(a.values & b.values))
    return inter / union


def evaluation_report(
    system_points: Sequence[tuple[float, float]],
    baseline_points: Sequence[tuple[float, float]],
) -> dict:
    """Summary statistics comparing system routes against a baseline.

    Both inputs are (path length, rrpi) scatter points over the same queries.
    """
    sys_com = kde_com(system_points)
    base_com = kde_com(baseline_points)
    wins = sum(1 for (_, s), (_, b) in zip(system_points, baseline_points) if s < b)
    report = {
        "queries": len(system_points),
        "system": {
            "com": list(sys_com),
            "mean_rrpi": float(np.mean([p[1] for p in system_points])),
        },
        "baseline": {
            "com": list(base_com),
            "mean_rrpi": float(np.mean([p[1] for p in baseline_points])),
        },
        "win_fraction": wins / len(system_points) if system_points else 0.0,
    }
    try:
        report["system"]["slope"] = regression_slope(system_points)
        report["baseline"]["slope"] = regression_slope(baseline_points)
    except (UndefinedSlopeError, ValueError):
        pass
    return report


def render_scatter_svg(
    system_points: Sequence[tuple[float, float]],
    baseline_points: Sequence[tuple[float, float]],
) -> bytes:
    """Length-vs-regret scatter plot with per-series centroids, as SVG."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4.5))
    for points, label, color in (
        (system_points, "system", "tab:blue"),
        (baseline_points, "baseline", "tab:orange"),
    ):
        if not points:
            continue
        xs = [p[0] for p in points]
        ys = [p[1] for p in points]
        ax.scatter(xs, ys, s=12, alpha=0.6, color=color, label=label)
        cx, cy = kde_com(points)
        ax.scatter([cx], [cy], s=90, marker="x", color=color)
    ax.set_xlabel("path length (pixels)")
    ax.set_ylabel("route rank penalty")
    ax.legend()
    buf = io.BytesIO()
    fig.savefig(buf, format="svg")
    plt.close(fig)
    return buf.getvalue()


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True)
