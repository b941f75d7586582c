"""Open-vocabulary costmaps for aerial navigation.

A mission statement plus an aerial image goes through three stages:
interpretation (which terrain classes matter, how they rank), tiled
open-vocabulary segmentation (where each class is), and cost synthesis
(a small mask-algebra program evaluated into a normalized costmap that a
grid planner can route over).
"""

from . import dsl
from .errors import (
    CoverageError,
    HierarchyCycleError,
    InvalidTilingError,
    OverseecError,
    RasterFormatError,
    ShapeMismatchError,
    UnknownClassError,
)
from .interpret import (
    DEFAULT_CLASSES,
    ClassSet,
    HttpLLMBackend,
    LLMBackendConfig,
    StubLLMBackend,
    compose_program,
    derive_rank_map,
    identify_entities,
)
from .maskops import (
    BinaryMask,
    CueKind,
    GeometricCue,
    HierarchyEdge,
    SoftMask,
    apply_cue,
    apply_hierarchy,
    center,
    dilate,
    distance_transform,
    edge,
    erode,
    mask_and,
    mask_not,
    mask_or,
    near,
    remove,
    within_band,
)
from .metrics import (
    SemanticMap,
    iou,
    kde_com,
    mean_hausdorff,
    regression_slope,
    rrpi,
)
from .ovseg import (
    ClassMasks,
    ColorKeyedRefineBackend,
    ColorKeyedSegBackend,
    IdentityRefineBackend,
    TilingParams,
    coarse_segment,
    refine,
    run_pipeline,
)
from .planner import (
    EPSILON,
    Path,
    PlanQuery,
    path_cost,
    plan,
    sample_queries,
    straight_line,
)
from .raster import (
    AREAL_THRESHOLD,
    LINEAR_THRESHOLD,
    ClassSpec,
    Costmap,
    Geometry,
    GridShape,
    ProbabilityMap,
    TileSpec,
    binarize,
    gate,
    plan_tiles,
    read_rf32,
    rf32_bytes,
    stitch,
    write_rf32,
)
from .session import Engine, EngineConfig
from .store import ArtifactStore

__version__ = "0.1.0"

__all__ = [
    "AREAL_THRESHOLD",
    "ArtifactStore",
    "BinaryMask",
    "ClassMasks",
    "ClassSet",
    "ClassSpec",
    "ColorKeyedRefineBackend",
    "ColorKeyedSegBackend",
    "Costmap",
    "CoverageError",
    "CueKind",
    "DEFAULT_CLASSES",
    "EPSILON",
    "Engine",
    "EngineConfig",
    "Geometry",
    "GeometricCue",
    "GridShape",
    "HierarchyCycleError",
    "HierarchyEdge",
    "HttpLLMBackend",
    "IdentityRefineBackend",
    "InvalidTilingError",
    "LINEAR_THRESHOLD",
    "LLMBackendConfig",
    "OverseecError",
    "Path",
    "PlanQuery",
    "ProbabilityMap",
    "RasterFormatError",
    "SemanticMap",
    "ShapeMismatchError",
    "SoftMask",
    "StubLLMBackend",
    "TileSpec",
    "TilingParams",
    "UnknownClassError",
    "apply_cue",
    "apply_hierarchy",
    "binarize",
    "center",
    "coarse_segment",
    "compose_program",
    "derive_rank_map",
    "dilate",
    "distance_transform",
    "dsl",
    "edge",
    "erode",
    "gate",
    "identify_entities",
    "iou",
    "kde_com",
    "mask_and",
    "mask_not",
    "mask_or",
    "mean_hausdorff",
    "near",
    "path_cost",
    "plan",
    "plan_tiles",
    "read_rf32",
    "refine",
    "regression_slope",
    "remove",
    "rf32_bytes",
    "rrpi",
    "run_pipeline",
    "sample_queries",
    "stitch",
    "straight_line",
    "within_band",
    "write_rf32",
]
