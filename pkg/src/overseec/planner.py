"""Dijkstra shortest-path planning on costmaps over an 8-connected pixel grid.

Pixel coordinates are (x, y) = (col, row). Edge weights combine geometric
step length (1 or sqrt(2)) with the mean endpoint cost plus a small floor
so zero-cost regions still prefer geometrically short routes:

    w(u, v) = step_len * (EPSILON + (C(u) + C(v)) / 2)
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from heapq import heappop, heappush
from typing import Sequence

import numpy as np

from .errors import OverseecError
from .raster import Costmap, GridShape

EPSILON = 0.01

_SQRT2 = math.sqrt(2.0)
# (dx, dy, step length)
_NEIGHBORS = (
    (-1, -1, _SQRT2), (0, -1, 1.0), (1, -1, _SQRT2),
    (-1, 0, 1.0), (1, 0, 1.0),
    (-1, 1, _SQRT2), (0, 1, 1.0), (1, 1, _SQRT2),
)

Pixel = tuple[int, int]


class DegenerateGridError(OverseecError):
    """The grid is too small to sample distinct start/goal pairs."""


@dataclass(frozen=True)
class Path:
    """An ordered pixel trajectory with its accumulated edge cost."""

    pixels: tuple[Pixel, ...]
    cost: float

    def __post_init__(self) -> None:
        if len(self.pixels) < 1:
            raise ValueError("a path holds at least one pixel")
        if len(set(self.pixels)) != len(self.pixels):
            raise ValueError("path revisits a pixel")
        for (x0, y0), (x1, y1) in zip(self.pixels, self.pixels[1:]):
            if max(abs(x1 - x0), abs(y1 - y0)) != 1:
                raise ValueError(f"({x0},{y0}) -> ({x1},{y1}) is not an 8-neighbor step")

    def __len__(self) -> int:
        return len(self.pixels)

    def to_json(self) -> str:
        return json.dumps({"pixels": [[x, y] for x, y in self.pixels], "cost": self.cost})

    @classmethod
    def from_json(cls, text: str) -> "Path":
        doc = json.loads(text)
        return cls(tuple((int(x), int(y)) for x, y in doc["pixels"]), float(doc["cost"]))


@dataclass(frozen=True)
class PlanQuery:
    start: Pixel
    goal: Pixel


def _check_bounds(shape: GridShape, pixel: Pixel, label: str) -> None:
    x, y = pixel
    if not shape.contains(x, y):
        raise ValueError(f"{label} ({x},{y}) outside {shape.width}x{shape.height} grid")


def step_cost(costmap: Costmap, u: Pixel, v: Pixel) -> float:
    """Weight of one grid move between 8-neighbor pixels."""
    step = _SQRT2 if (u[0] != v[0] and u[1] != v[1]) else 1.0
    values = costmap.values
    return step * (EPSILON + 0.5 * (values[u[1], u[0]] + values[v[1], v[0]]))


def path_cost(costmap: Costmap, pixels: Sequence[Pixel]) -> float:
    """Accumulated edge cost of an arbitrary 8-connected pixel sequence."""
    return sum(step_cost(costmap, u, v) for u, v in zip(pixels, pixels[1:]))


def plan(costmap: Costmap, query: PlanQuery) -> Path:
    """Dijkstra-optimal path from start to goal.

    Among equal-cost shortest paths, ties are broken by keeping the
    lexicographically smallest (x, y) predecessor at every node, making the
    returned path deterministic.
    """
    shape = costmap.shape
    _check_bounds(shape, query.start, "start")
    _check_bounds(shape, query.goal, "goal")
    if query.start == query.goal:
        return Path((query.start,), 0.0)

    height, width = shape.height, shape.width
    cost = costmap.values.ravel().tolist()
    start = query.start[1] * width + query.start[0]
    goal = query.goal[1] * width + query.goal[0]

    inf = math.inf
    dist = [inf] * (height * width)
    pred = [-1] * (height * width)
    dist[start] = 0.0
    heap: list[tuple[float, int]] = [(0.0, start)]

    while heap:
        d, u = heappop(heap)
        if d > dist[u]:
            continue
        if u == goal:
            break
        uy, ux = divmod(u, width)
        cu = cost[u]
        for dx, dy, step in _NEIGHBORS:
            vx = ux + dx
            vy = uy + dy
            if vx < 0 or vx >= width or vy < 0 or vy >= height:
                continue
            v = vy * width + vx
            nd = d + step * (EPSILON + 0.5 * (cu + cost[v]))
            if nd < dist[v]:
                dist[v] = nd
                pred[v] = u
                heappush(heap, (nd, v))
            elif nd == dist[v] and (ux, uy) < (pred[v] % width, pred[v] // width):
                pred[v] = u

    chain = [goal]
    node = goal
    while node != start:
        node = pred[node]
        chain.append(node)
    chain.reverse()
    pixels = tuple((idx % width, idx // width) for idx in chain)
    return Path(pixels, dist[goal])


def straight_line(start: Pixel, goal: Pixel) -> tuple[Pixel, ...]:
    """Bresenham pixel segment from start to goal (inclusive)."""
    x0, y0 = start
    x1, y1 = goal
    dx = abs(x1 - x0)
    dy = -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    pixels = []
    while True:
        pixels.append((x0, y0))
        if (x0, y0) == (x1, y1):
            break
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x0 += sx
        if e2 <= dx:
            err += dx
            y0 += sy
    return tuple(pixels)


def sample_queries(shape: GridShape, n: int, seed: int) -> list[PlanQuery]:
    """Draw n uniform start/goal pairs over the grid with start != goal."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if shape.height * shape.width < 2:
        raise DegenerateGridError(f"cannot pick distinct start/goal on {shape}")
    rng = np.random.default_rng(seed)
    queries = []
    for _ in range(n):
        sx, sy = int(rng.integers(shape.width)), int(rng.integers(shape.height))
        while True:
            gx, gy = int(rng.integers(shape.width)), int(rng.integers(shape.height))
            if (gx, gy) != (sx, sy):
                break
        queries.append(PlanQuery(start=(sx, sy), goal=(gx, gy)))
    return queries
