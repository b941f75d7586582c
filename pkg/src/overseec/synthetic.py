"""A small labeled aerial scene for offline runs and end-to-end checks.

The scene is a grass field crossed by a grid of roads, with a few buildings
and two ponds. Every class has a unique flat color, so the color-keyed
fixture backends recover the ground truth exactly and the whole pipeline can
run without any model servers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .interpret import (
    StubLLMBackend,
    identify_entities,
    render_compose_prompt,
    render_entity_prompt,
    render_rank_prompt,
)
from .metrics import SemanticMap
from .raster import BinaryMask

SCENE_SIZE = 256

# semantic ids
GRASS, ROAD, WATER, BUILDING, TRAIL, TREE = 1, 2, 3, 4, 5, 6

ID_TABLE: dict[int, str] = {
    GRASS: "grass",
    ROAD: "road",
    WATER: "water",
    BUILDING: "building",
    TRAIL: "trail",
    TREE: "tree",
}

CLASS_COLORS: dict[str, tuple[int, int, int]] = {
    "grass": (106, 190, 69),
    "road": (128, 128, 128),
    "water": (58, 117, 196),
    "building": (184, 61, 48),
    "trail": (150, 111, 51),
    "tree": (34, 100, 34),
}

SCENE_PROMPT = (
    "Stay on the roads whenever possible, grass is acceptable, "
    "avoid the water, and never drive through buildings."
)

SCENE_RANKS: dict[str, int] = {
    "road": 1,
    "trail": 1,
    "grass": 2,
    "water": 3,
    "tree": 4,
    "building": 5,
}

SCENE_PROGRAM = """\
class "road" linear;
class "trail" linear;
class "grass" areal;
class "tree" areal;
class "water" areal;
class "building" areal;
cost M("road"): 0.05;
cost M("trail"): 0.05;
cost M("grass"): 0.35;
cost M("tree"): 0.5;
cost M("water"): 0.7;
cost M("building"): 1.0;
"""

_ENTITY_RESPONSE = json.dumps(
    {
        "classes": [
            {"name": "road", "geometry": "linear"},
            {"name": "grass", "geometry": "areal"},
            {"name": "water", "geometry": "areal"},
            {"name": "building", "geometry": "areal"},
        ]
    }
)

_RANK_RESPONSE = json.dumps(
    {"ranks": [{"name": name, "rank": rank} for name, rank in SCENE_RANKS.items()]}
)

_ROAD_BANDS = (64, 128, 192)
_ROAD_HALF = 3

_BUILDINGS = ((80, 16, 112, 48), (16, 140, 48, 172), (200, 96, 244, 116), (140, 220, 180, 250))
_PONDS = ((150, 18, 218, 54), (24, 88, 58, 116))


@dataclass(frozen=True)
class SyntheticScene:
    image: np.ndarray
    semantic: SemanticMap
    prompt: str
    ranks: dict[str, int]
    program_source: str
    colors: dict[str, tuple[int, int, int]]

    def ground_truth_mask(self, class_name: str) -> BinaryMask:
        target = {v: k for k, v in ID_TABLE.items()}[class_name]
        return BinaryMask(self.semantic.ids == target)


def build_scene(size: int = SCENE_SIZE) -> SyntheticScene:
    ids = np.full((size, size), GRASS, dtype=np.int64)
    for x0, y0, x1, y1 in _PONDS:
        ids[y0:y1 + 1, x0:x1 + 1] = WATER
    for x0, y0, x1, y1 in _BUILDINGS:
        ids[y0:y1 + 1, x0:x1 + 1] = BUILDING
    # roads drawn last so they bridge anything they cross
    for band in _ROAD_BANDS:
        lo, hi = band - _ROAD_HALF, band + _ROAD_HALF
        ids[lo:hi + 1, :] = ROAD
        ids[:, lo:hi + 1] = ROAD

    image = np.zeros((size, size, 3), dtype=np.uint8)
    for label, name in ID_TABLE.items():
        image[ids == label] = CLASS_COLORS[name]
    return SyntheticScene(
        image=image,
        semantic=SemanticMap(ids, ID_TABLE),
        prompt=SCENE_PROMPT,
        ranks=dict(SCENE_RANKS),
        program_source=SCENE_PROGRAM,
        colors=dict(CLASS_COLORS),
    )


def seed_llm_fixtures(scene: SyntheticScene, fixture_dir: Path | str) -> StubLLMBackend:
    """Write stub completions for the scene's prompt into fixture_dir.

    Covers the entity, compose, and rank calls, so a stub-backed run of the
    whole interpretation stage succeeds offline.
    """
    backend = StubLLMBackend(fixture_dir)
    backend.register(render_entity_prompt(scene.prompt), _ENTITY_RESPONSE)
    classes = identify_entities(scene.prompt, backend)
    backend.register(
        render_compose_prompt(scene.prompt, classes),
        "```\n" + scene.program_source + "```\n",
    )
    backend.register(render_rank_prompt(scene.prompt, classes), _RANK_RESPONSE)
    return backend


def write_scene(scene: SyntheticScene, out_dir: Path | str) -> Path:
    """Persist the scene (image, labels, prompt, fixtures) for CLI runs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    Image.fromarray(scene.image).save(out / "image.png")
    Image.fromarray(scene.semantic.ids.astype(np.uint8), mode="L").save(out / "semantic.png")
    (out / "table.json").write_text(
        json.dumps({str(k): v for k, v in ID_TABLE.items()}, indent=2), encoding="utf-8"
    )
    (out / "ranks.json").write_text(json.dumps(scene.ranks, indent=2), encoding="utf-8")
    (out / "prompt.txt").write_text(scene.prompt, encoding="utf-8")
    (out / "program.dsl").write_text(scene.program_source, encoding="utf-8")
    (out / "colors.json").write_text(
        json.dumps({k: list(v) for k, v in scene.colors.items()}, indent=2),
        encoding="utf-8",
    )
    seed_llm_fixtures(scene, out / "llm_fixtures")
    return out
