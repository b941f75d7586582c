"""Shared exception types used across the raster and mask layers."""


class OverseecError(Exception):
    """Base class for all errors raised by this package."""


class ShapeMismatchError(OverseecError):
    """Two rasters that must share a grid shape do not."""


class InvalidTilingError(OverseecError):
    """Tiling parameters cannot produce a valid tile cover."""


class CoverageError(OverseecError):
    """A tile set leaves at least one pixel of the image uncovered."""


class RasterFormatError(OverseecError):
    """Raster bytes cannot be decoded (bad magic, truncation, wrong mode)."""


class HierarchyCycleError(OverseecError):
    """Subset edges between classes form a cycle."""


class UnknownClassError(OverseecError):
    """A class name was referenced that is not present in the class set."""
