"""Raster value types, tile planning, overlap-averaged stitching, and thresholding.

All rasters are immutable wrappers around 2-D numpy arrays indexed
``[row, col]``. Public pixel coordinates elsewhere in the package are
``(x, y) = (col, row)``; only array indexing is row-major.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Union

import numpy as np
from numpy.typing import NDArray
from PIL import Image

from .errors import (
    CoverageError,
    InvalidTilingError,
    RasterFormatError,
    ShapeMismatchError,
)

# Binarization thresholds for the two geometry categories.
LINEAR_THRESHOLD = 0.4
AREAL_THRESHOLD = 0.8

# Defaults for tiled inference over large images.
DEFAULT_TILE_SIZE = 512
DEFAULT_OVERLAP = 64

RF32_MAGIC = b"RF32"


class Geometry(str, Enum):
    """Geometry category of a terrain class; selects the binarization threshold."""

    LINEAR = "linear"
    AREAL = "areal"

    @property
    def threshold(self) -> float:
        return LINEAR_THRESHOLD if self is Geometry.LINEAR else AREAL_THRESHOLD


@dataclass(frozen=True, order=True)
class GridShape:
    """Pixel dimensions of the working grid (height rows by width columns)."""

    height: int
    width: int

    def __post_init__(self) -> None:
        if self.height < 1 or self.width < 1:
            raise ValueError(f"grid dimensions must be >= 1, got {self.height}x{self.width}")

    def as_tuple(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def diagonal(self) -> float:
        return float(np.hypot(self.height, self.width))

    def contains(self, x: int, y: int) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height


@dataclass(frozen=True)
class ClassSpec:
    """A terrain class name with its geometry category."""

    name: str
    geometry: Geometry

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("class name must be nonempty")
        if not isinstance(self.geometry, Geometry):
            object.__setattr__(self, "geometry", Geometry(self.geometry))


def _as_grid(values, dtype) -> NDArray:
    arr = np.array(values, dtype=dtype, copy=True)
    if arr.ndim != 2:
        raise ValueError(f"raster must be 2-D, got ndim={arr.ndim}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"raster must be nonempty, got shape {arr.shape}")
    arr.flags.writeable = False
    return arr


class FloatRaster:
    """Immutable 2-D float64 raster with values constrained to [0, 1]."""

    __slots__ = ("values",)

    def __init__(self, values) -> None:
        arr = _as_grid(values, np.float64)
        if not np.all(np.isfinite(arr)):
            raise ValueError("raster values must be finite")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError(
                f"{type(self).__name__} values must lie in [0, 1], "
                f"got range [{arr.min()}, {arr.max()}]"
            )
        object.__setattr__(self, "values", arr)

    def __setattr__(self, name, value):
        raise AttributeError(f"{type(self).__name__} is immutable")

    @property
    def shape(self) -> GridShape:
        return GridShape(*self.values.shape)

    def __eq__(self, other) -> bool:
        return type(self) is type(other) and np.array_equal(self.values, other.values)

    def __repr__(self) -> str:
        return f"{type(self).__name__}(shape={self.values.shape})"


class ProbabilityMap(FloatRaster):
    """Per-pixel class probabilities in [0, 1]."""


class Costmap(FloatRaster):
    """Planner-ready scalar cost in [0, 1]; lower is more traversable."""


class BinaryMask:
    """Immutable 2-D boolean raster."""

    __slots__ = ("values",)

    def __init__(self, values) -> None:
        arr = np.asarray(values)
        if arr.dtype != np.bool_:
            if not np.isin(arr, (0, 1)).all():
                raise ValueError("mask values must be 0/1")
            arr = arr.astype(bool)
        object.__setattr__(self, "values", _as_grid(arr, np.bool_))

    def __setattr__(self, name, value):
        raise AttributeError("BinaryMask is immutable")

    @property
    def shape(self) -> GridShape:
        return GridShape(*self.values.shape)

    def count(self) -> int:
        return int(self.values.sum())

    def __eq__(self, other) -> bool:
        return isinstance(other, BinaryMask) and np.array_equal(self.values, other.values)

    def __repr__(self) -> str:
        return f"BinaryMask(shape={self.values.shape}, on={self.count()})"


@dataclass(frozen=True)
class TileSpec:
    """One tile of the cover: pixel origin plus the tile's own extent.

    Tiles are square of the nominal tile size except when the image itself
    is smaller than the tile along a dimension, in which case the tile
    spans that whole dimension.
    """

    row0: int
    col0: int
    height: int
    width: int
    index: int

    @property
    def slices(self) -> tuple[slice, slice]:
        return (slice(self.row0, self.row0 + self.height), slice(self.col0, self.col0 + self.width))


def _axis_origins(dim: int, tile: int, stride: int) -> list[int]:
    # Clamp the final origin so the last tile ends exactly at the border.
    if dim <= tile:
        return [0]
    origins = []
    pos = 0
    while pos + tile < dim:
        origins.append(pos)
        pos += stride
    origins.append(dim - tile)
    return origins


def plan_tiles(
    shape: GridShape,
    tile_size: int = DEFAULT_TILE_SIZE,
    overlap: int = DEFAULT_OVERLAP,
) -> list[TileSpec]:
    """Plan a deterministic row-major cover of `shape` with overlapping tiles.

    Origins advance by ``tile_size - overlap``; the final origin along each
    axis is clamped to the image border (edge tiles overlap more rather
    than padding). Every pixel is covered by at least one tile.
    """
    if tile_size < 1:
        raise InvalidTilingError(f"tile_size must be >= 1, got {tile_size}")
    if overlap < 0 or overlap >= tile_size:
        raise InvalidTilingError(
            f"overlap must satisfy 0 <= overlap < tile_size, got overlap={overlap} tile_size={tile_size}"
        )
    stride = tile_size - overlap
    rows = _axis_origins(shape.height, tile_size, stride)
    cols = _axis_origins(shape.width, tile_size, stride)
    tiles = []
    for r in rows:
        for c in cols:
            tiles.append(
                TileSpec(
                    row0=r,
                    col0=c,
                    height=min(tile_size, shape.height),
                    width=min(tile_size, shape.width),
                    index=len(tiles),
                )
            )
    return tiles


def stitch(
    tiles: Sequence[tuple[TileSpec, ProbabilityMap]],
    shape: GridShape | None = None,
) -> ProbabilityMap:
    """Combine per-tile probability maps into one full-resolution map.

    Each output pixel is the arithmetic mean of every tile prediction
    covering it (sum raster / count raster; no blend windowing).

    Args:
        tiles: (spec, map) pairs; each map must match its spec's extent.
        shape: full image shape. Inferred from the tile extents if omitted.

    Raises:
        ShapeMismatchError: a tile map does not match its TileSpec.
        CoverageError: some pixel of the output is covered by no tile.
    """
    if not tiles:
        raise CoverageError("cannot stitch an empty tile set")
    if shape is None:
        shape = GridShape(
            max(t.row0 + t.height for t, _ in tiles),
            max(t.col0 + t.width for t, _ in tiles),
        )
    total = np.zeros(shape.as_tuple(), dtype=np.float64)
    count = np.zeros(shape.as_tuple(), dtype=np.int64)
    for spec, pmap in tiles:
        if pmap.values.shape != (spec.height, spec.width):
            raise ShapeMismatchError(
                f"tile {spec.index}: map shape {pmap.values.shape} != spec extent "
                f"{(spec.height, spec.width)}"
            )
        if spec.row0 + spec.height > shape.height or spec.col0 + spec.width > shape.width:
            raise ShapeMismatchError(f"tile {spec.index} exceeds image bounds {shape}")
        total[spec.slices] += pmap.values
        count[spec.slices] += 1
    if (count == 0).any():
        n = int((count == 0).sum())
        raise CoverageError(f"{n} pixels covered by no tile")
    return ProbabilityMap(total / count)


def binarize(p: ProbabilityMap, geometry: Geometry) -> BinaryMask:
    """Threshold a probability map with the geometry-specific cutoff.

    A pixel is set iff its probability is >= the threshold (inclusive, so
    binarizing a map equal to the threshold is deterministic).
    """
    geometry = Geometry(geometry)
    return BinaryMask(p.values >= geometry.threshold)


def gate(p_hat: ProbabilityMap, m_hat: BinaryMask) -> ProbabilityMap:
    """Zero a probability map outside its binary mask."""
    if p_hat.values.shape != m_hat.values.shape:
        raise ShapeMismatchError(
            f"probability map {p_hat.values.shape} vs mask {m_hat.values.shape}"
        )
    return ProbabilityMap(np.where(m_hat.values, p_hat.values, 0.0))


# ---------------------------------------------------------------------------
# Raster file formats
# ---------------------------------------------------------------------------
#
# "RF32": magic b"RF32", u32 LE height, u32 LE width, then H*W float32 LE
# row-major. Binary masks travel as 8-bit grayscale PNG with values 0/255;
# input imagery is 8-bit RGB PNG.

PathOrBytes = Union[str, bytes, "io.IOBase"]


def rf32_bytes(values: NDArray | FloatRaster) -> bytes:
    if isinstance(values, FloatRaster):
        values = values.values
    arr = np.ascontiguousarray(values, dtype="<f4")
    if arr.ndim != 2:
        raise ValueError("RF32 stores 2-D rasters")
    h, w = arr.shape
    return RF32_MAGIC + struct.pack("<II", h, w) + arr.tobytes()


def write_rf32(path: str, values: NDArray | FloatRaster) -> None:
    with open(path, "wb") as fh:
        fh.write(rf32_bytes(values))


def read_rf32(src: PathOrBytes) -> NDArray[np.float32]:
    """Decode an RF32 raster into a float32 array."""
    if isinstance(src, bytes):
        data = src
    elif isinstance(src, str):
        with open(src, "rb") as fh:
            data = fh.read()
    else:
        data = src.read()
    if len(data) < 12 or data[:4] != RF32_MAGIC:
        raise RasterFormatError("not an RF32 raster (bad magic or truncated header)")
    h, w = struct.unpack("<II", data[4:12])
    if h < 1 or w < 1:
        raise RasterFormatError(f"RF32 dimensions must be >= 1, got {h}x{w}")
    expected = 12 + 4 * h * w
    if len(data) != expected:
        raise RasterFormatError(f"RF32 payload is {len(data)} bytes, expected {expected}")
    arr = np.frombuffer(data, dtype="<f4", offset=12).reshape(h, w)
    return arr.copy()


def mask_png_bytes(mask: BinaryMask) -> bytes:
    img = Image.fromarray(np.where(mask.values, 255, 0).astype(np.uint8), mode="L")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def mask_from_png(src: PathOrBytes) -> BinaryMask:
    try:
        img = Image.open(io.BytesIO(src) if isinstance(src, bytes) else src)
        img.load()
    except Exception as exc:
        raise RasterFormatError(f"cannot decode mask PNG: {exc}") from exc
    arr = np.asarray(img.convert("L"))
    return BinaryMask(arr >= 128)


def load_rgb_image(src: PathOrBytes) -> NDArray[np.uint8]:
    """Decode an 8-bit RGB PNG (or path to one) into an (H, W, 3) array."""
    try:
        img = Image.open(io.BytesIO(src) if isinstance(src, bytes) else src)
        img.load()
    except Exception as exc:
        raise RasterFormatError(f"cannot decode image: {exc}") from exc
    if img.width == 0 or img.height == 0:
        raise RasterFormatError("image has a zero dimension")
    return np.asarray(img.convert("RGB"))


def rgb_png_bytes(rgb: NDArray[np.uint8]) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(np.asarray(rgb, dtype=np.uint8), mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def heatmap_png_bytes(costmap: Costmap) -> bytes:
    """Render a costmap as a viridis-ramp RGB PNG (0 dark / low, 1 bright / high)."""
    from matplotlib import colormaps  # deferred; matplotlib import is slow

    rgba = colormaps["viridis"](costmap.values, bytes=True)
    return rgb_png_bytes(rgba[..., :3])
