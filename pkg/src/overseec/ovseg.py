"""Tiled open-vocabulary segmentation: coarse pass, refinement pass, gating.

Images are cut into overlapping tiles, each tile is scored by a segmentation
backend per class, and the tile probabilities are stitched back together by
averaging overlaps before any thresholding. A second backend refines the
coarse masks; refined probabilities are thresholded by class geometry and
gate the probability map for downstream cost synthesis.

Backends are protocols so tests and offline runs can use deterministic
fixtures instead of model servers.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Protocol

import numpy as np
import requests
from numpy.typing import NDArray

from .errors import OverseecError
from .interpret import ClassSet
from .maskops import dilate
from .raster import (
    DEFAULT_OVERLAP,
    DEFAULT_TILE_SIZE,
    BinaryMask,
    Geometry,
    GridShape,
    ProbabilityMap,
    binarize,
    gate,
    mask_png_bytes,
    plan_tiles,
    read_rf32,
    rf32_bytes,
    rgb_png_bytes,
    stitch,
)


class TileFailureError(OverseecError):
    """A backend kept failing on one tile."""


@dataclass(frozen=True)
class TilingParams:
    tile_size: int = DEFAULT_TILE_SIZE
    overlap: int = DEFAULT_OVERLAP


@dataclass(frozen=True)
class ClassMasks:
    """Everything the pipeline derives for one class.

    coarse_probability/coarse_mask come from the first pass, probability and
    mask from refinement, and gated is the refined probability zeroed outside
    the refined mask.
    """

    geometry: Geometry
    coarse_probability: ProbabilityMap
    coarse_mask: BinaryMask
    probability: ProbabilityMap
    mask: BinaryMask
    gated: ProbabilityMap


class SegBackend(Protocol):
    backend_id: str

    def segment_tile(self, tile: NDArray[np.uint8], class_name: str) -> ProbabilityMap: ...


class RefineBackend(Protocol):
    backend_id: str

    def refine_tile(
        self, tile: NDArray[np.uint8], coarse: BinaryMask, class_name: str
    ) -> ProbabilityMap: ...


class ColorKeyedSegBackend:
    """Fixture backend scoring pixels by exact color match.

    Pixels equal to a class's color score in_prob, everything else out_prob.
    Segmentation is purely tile-local, like a real model, so stitching and
    thresholding are exercised end to end.
    """

    def __init__(
        self,
        colors: Mapping[str, tuple[int, int, int]],
        in_prob: float = 0.9,
        out_prob: float = 0.05,
    ):
        self.colors = {name: tuple(color) for name, color in colors.items()}
        self.in_prob = in_prob
        self.out_prob = out_prob
        digest = hashlib.sha256(
            json.dumps(
                {"colors": {k: list(v) for k, v in sorted(self.colors.items())},
                 "in": in_prob, "out": out_prob},
                sort_keys=True,
            ).encode()
        ).hexdigest()[:12]
        self.backend_id = f"color-keyed-{digest}"

    def _probabilities(self, tile: NDArray[np.uint8], class_name: str) -> np.ndarray:
        if class_name not in self.colors:
            return np.full(tile.shape[:2], self.out_prob)
        match = np.all(tile == np.array(self.colors[class_name], dtype=np.uint8), axis=2)
        return np.where(match, self.in_prob, self.out_prob)

    def segment_tile(self, tile: NDArray[np.uint8], class_name: str) -> ProbabilityMap:
        return ProbabilityMap(self._probabilities(tile, class_name))


class ColorKeyedRefineBackend(ColorKeyedSegBackend):
    """Fixture refiner: color-match probabilities limited to the coarse prior.

    Scores are kept only within the coarse mask dilated by margin pixels; an
    empty coarse tile always refines to zero.
    """

    def __init__(
        self,
        colors: Mapping[str, tuple[int, int, int]],
        in_prob: float = 0.9,
        out_prob: float = 0.05,
        margin: float = 8.0,
    ):
        super().__init__(colors, in_prob, out_prob)
        self.margin = margin
        self.backend_id = f"{self.backend_id}-refine-m{margin:g}"

    def refine_tile(
        self, tile: NDArray[np.uint8], coarse: BinaryMask, class_name: str
    ) -> ProbabilityMap:
        if not coarse.values.any():
            return ProbabilityMap(np.zeros(tile.shape[:2]))
        support = dilate(coarse, self.margin).values
        return ProbabilityMap(np.where(support, self._probabilities(tile, class_name), 0.0))


class IdentityRefineBackend:
    """Refiner that returns the coarse mask itself as probabilities."""

    backend_id = "identity-refine"

    def refine_tile(
        self, tile: NDArray[np.uint8], coarse: BinaryMask, class_name: str
    ) -> ProbabilityMap:
        return ProbabilityMap(coarse.values.astype(np.float64))


class HttpSegBackend:
    """Client for a tile-scoring HTTP service.

    POSTs a PNG tile and a class name, expects a raster float response of the
    same height and width.
    """

    def __init__(self, endpoint: str, timeout: float = 60.0):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.backend_id = f"http:{self.endpoint}"

    def _post(self, route: str, files: dict, data: dict) -> ProbabilityMap:
        resp = requests.post(
            f"{self.endpoint}{route}", files=files, data=data, timeout=self.timeout
        )
        resp.raise_for_status()
        return ProbabilityMap(read_rf32(resp.content))

    def segment_tile(self, tile: NDArray[np.uint8], class_name: str) -> ProbabilityMap:
        return self._post(
            "/segment",
            files={"tile": ("tile.png", rgb_png_bytes(tile), "image/png")},
            data={"class": class_name},
        )


class HttpRefineBackend(HttpSegBackend):
    def refine_tile(
        self, tile: NDArray[np.uint8], coarse: BinaryMask, class_name: str
    ) -> ProbabilityMap:
        return self._post(
            "/refine",
            files={
                "tile": ("tile.png", rgb_png_bytes(tile), "image/png"),
                "coarse": ("coarse.png", mask_png_bytes(coarse), "image/png"),
            },
            data={"class": class_name},
        )


def _check_image(image: NDArray[np.uint8]) -> GridShape:
    if image.ndim != 3 or image.shape[2] != 3 or image.dtype != np.uint8:
        raise ValueError(f"expected uint8 RGB (H, W, 3) image, got {image.dtype} {image.shape}")
    return GridShape(image.shape[0], image.shape[1])


def _run_tiled(image: NDArray[np.uint8], tiling: TilingParams, class_name: str,
               tile_fn, retries: int = 1) -> ProbabilityMap:
    """Apply tile_fn(tile_pixels, tile_spec) over a tiling and stitch."""
    shape = _check_image(image)
    tiles = []
    for spec in plan_tiles(shape, tiling.tile_size, tiling.overlap):
        pixels = image[spec.slices]
        last: Exception | None = None
        for _ in range(retries + 1):
            try:
                prob = tile_fn(pixels, spec)
                last = None
                break
            except Exception as exc:  # noqa: BLE001 - every backend fault retries the tile
                last = exc
        if last is not None:
            raise TileFailureError(
                f"class {class_name!r} tile {spec.index}: {last}"
            ) from last
        if prob.values.shape != (spec.height, spec.width):
            raise TileFailureError(
                f"class {class_name!r} tile {spec.index}: backend returned shape "
                f"{prob.values.shape}, expected {(spec.height, spec.width)}"
            )
        tiles.append((spec, prob))
    return stitch(tiles, shape)


def coarse_segment(
    image: NDArray[np.uint8],
    classes: ClassSet,
    backend: SegBackend,
    tiling: TilingParams = TilingParams(),
) -> dict[str, tuple[ProbabilityMap, BinaryMask]]:
    """First pass: per-class stitched probabilities and geometry-thresholded masks."""
    out: dict[str, tuple[ProbabilityMap, BinaryMask]] = {}
    for spec in classes.classes:
        prob = _run_tiled(
            image, tiling, spec.name,
            lambda pixels, _spec, name=spec.name: backend.segment_tile(pixels, name),
        )
        out[spec.name] = (prob, binarize(prob, spec.geometry))
    return out


def refine(
    image: NDArray[np.uint8],
    classes: ClassSet,
    coarse: Mapping[str, tuple[ProbabilityMap, BinaryMask]],
    backend: RefineBackend,
    tiling: TilingParams = TilingParams(),
) -> dict[str, ClassMasks]:
    """Second pass: refine each coarse mask and gate the refined probability."""
    out: dict[str, ClassMasks] = {}
    for spec in classes.classes:
        coarse_prob, coarse_mask = coarse[spec.name]

        def tile_fn(pixels, tile_spec, name=spec.name):
            prior = BinaryMask(coarse_mask.values[tile_spec.slices])
            return backend.refine_tile(pixels, prior, name)

        prob = _run_tiled(image, tiling, spec.name, tile_fn)
        mask = binarize(prob, spec.geometry)
        out[spec.name] = ClassMasks(
            geometry=spec.geometry,
            coarse_probability=coarse_prob,
            coarse_mask=coarse_mask,
            probability=prob,
            mask=mask,
            gated=gate(prob, mask),
        )
    return out


def run_pipeline(
    image: NDArray[np.uint8],
    classes: ClassSet,
    seg_backend: SegBackend,
    refine_backend: RefineBackend,
    seg_tiling: TilingParams = TilingParams(),
    refine_tiling: TilingParams = TilingParams(),
    artifact_dir: Path | str | None = None,
) -> dict[str, ClassMasks]:
    """Coarse segmentation then refinement for every class in the set.

    With artifact_dir set, every intermediate raster is persisted there along
    with a manifest of paths and content hashes.
    """
    coarse = coarse_segment(image, classes, seg_backend, seg_tiling)
    masks = refine(image, classes, coarse, refine_backend, refine_tiling)
    if artifact_dir is not None:
        write_mask_artifacts(masks, artifact_dir)
    return masks


_MASK_FIELDS = ("coarse_probability", "coarse_mask", "probability", "mask", "gated")


def write_mask_artifacts(masks: Mapping[str, ClassMasks], out_dir: Path | str) -> dict:
    """Persist per-class rasters and return a manifest with their hashes.

    Probability maps are written as raster floats, masks as PNG; the manifest
    records relative path and SHA-256 per artifact, deterministically ordered.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest: dict = {"classes": {}}
    for name in sorted(masks):
        cm = masks[name]
        entry: dict = {"geometry": cm.geometry.value, "artifacts": {}}
        for field in _MASK_FIELDS:
            raster = getattr(cm, field)
            if isinstance(raster, BinaryMask):
                data = mask_png_bytes(raster)
                filename = f"{name}.{field}.png"
            else:
                data = rf32_bytes(raster)
                filename = f"{name}.{field}.rf32"
            (out_dir / filename).write_bytes(data)
            entry["artifacts"][field] = {
                "path": filename,
                "sha256": hashlib.sha256(data).hexdigest(),
            }
        manifest["classes"][name] = entry
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8"
    )
    return manifest
