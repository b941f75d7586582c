"""Session orchestration: one place that runs the full workflow over a store.

A session tracks one uploaded image through interpretation, segmentation,
cost synthesis, and planning. All heavy artifacts live in the content store;
the session manifest only holds references, so every recorded output carries
its own integrity hash.

Per-class mask artifacts are cached by (image, class, geometry, backend ids,
tiling). Re-running segmentation with one extra class only pays for the new
class.
"""

from __future__ import annotations

import hashlib
import io
import json
import time
import uuid
from dataclasses import dataclass
from pathlib import Path

from . import dsl
from .errors import OverseecError
from .interpret import (
    ClassSet,
    LLMBackend,
    compose_program,
    derive_rank_map,
    identify_entities,
)
from .ovseg import ClassMasks, RefineBackend, SegBackend, TilingParams, run_pipeline
from .planner import Path as PlanPath
from .planner import PlanQuery, plan
from .raster import (
    BinaryMask,
    Costmap,
    ProbabilityMap,
    heatmap_png_bytes,
    load_rgb_image,
    mask_from_png,
    mask_png_bytes,
    read_rf32,
    rf32_bytes,
)
from .store import ArtifactStore

_MASK_FIELDS = ("coarse_probability", "coarse_mask", "probability", "mask", "gated")
_RF32_TYPE = "application/x-raster-f32"


class UnknownSessionError(OverseecError):
    """No session exists under the given id."""


class SessionStateError(OverseecError):
    """An operation needs session state that is not there yet."""


@dataclass(frozen=True)
class EngineConfig:
    seg_tiling: TilingParams = TilingParams()
    refine_tiling: TilingParams = TilingParams()
    retries: int = 3


class Engine:
    """Runs the workflow stages against a store and a set of backends."""

    def __init__(
        self,
        store: ArtifactStore,
        llm_backend: LLMBackend | None = None,
        seg_backend: SegBackend | None = None,
        refine_backend: RefineBackend | None = None,
        config: EngineConfig = EngineConfig(),
    ):
        self.store = store
        self.llm_backend = llm_backend
        self.seg_backend = seg_backend
        self.refine_backend = refine_backend
        self.config = config
        self._sessions_dir = store.root / "sessions"
        self._cache_dir = store.root / "cache"
        self._sessions_dir.mkdir(parents=True, exist_ok=True)
        self._cache_dir.mkdir(parents=True, exist_ok=True)

    # -- sessions ----------------------------------------------------------

    def upload_image(self, data: bytes) -> str:
        load_rgb_image(io.BytesIO(data))  # must decode
        return self.store.put(data, "image/png")

    def create_session(self, image_ref: str) -> dict:
        self.store.get(image_ref)  # must exist and verify
        manifest = {
            "id": uuid.uuid4().hex,
            "created_at": time.time(),
            "image": image_ref,
            "prompt": None,
            "classes": None,
            "ranks": None,
            "masks": {},
            "program": None,
            "costmap": None,
            "costmap_png": None,
            "plans": [],
        }
        self._write_manifest(manifest)
        return manifest

    def _manifest_path(self, session_id: str) -> Path:
        return self._sessions_dir / f"{session_id}.json"

    def _write_manifest(self, manifest: dict) -> None:
        self._manifest_path(manifest["id"]).write_text(
            json.dumps(manifest, indent=2), encoding="utf-8"
        )

    def manifest(self, session_id: str) -> dict:
        path = self._manifest_path(session_id)
        if not path.exists():
            raise UnknownSessionError(f"no session {session_id}")
        return json.loads(path.read_text(encoding="utf-8"))

    def verify_session(self, session_id: str) -> None:
        """Re-hash every artifact the manifest references."""
        manifest = self.manifest(session_id)
        refs = [manifest["image"], manifest["classes"], manifest["ranks"],
                manifest["program"], manifest["costmap"], manifest["costmap_png"]]
        refs += [ref for masks in manifest["masks"].values() for ref in masks.values()]
        for ref in refs:
            if ref is not None:
                self.store.get(ref)

    # -- interpretation ----------------------------------------------------

    def _require_llm(self) -> LLMBackend:
        if self.llm_backend is None:
            raise SessionStateError("no language-model backend configured")
        return self.llm_backend

    def interpret(self, session_id: str, prompt: str) -> dict:
        """Extract classes and a preference ranking from the prompt."""
        manifest = self.manifest(session_id)
        backend = self._require_llm()
        classes = identify_entities(prompt, backend, self.config.retries)
        ranks = derive_rank_map(prompt, classes, backend, self.config.retries)
        manifest["prompt"] = prompt
        manifest["classes"] = self.store.put_text(classes.to_json(), "application/json")
        manifest["ranks"] = self.store.put_json(ranks)
        self._write_manifest(manifest)
        return {"classes": manifest["classes"], "ranks": manifest["ranks"]}

    def session_classes(self, session_id: str) -> ClassSet:
        manifest = self.manifest(session_id)
        if manifest["classes"] is None:
            raise SessionStateError("session has no class set yet; run interpret first")
        return ClassSet.from_json(self.store.get_text(manifest["classes"]))

    # -- segmentation ------------------------------------------------------

    def _cache_key(self, image_ref: str, name: str, geometry: str) -> str:
        seg_id = getattr(self.seg_backend, "backend_id", "none")
        refine_id = getattr(self.refine_backend, "backend_id", "none")
        doc = {
            "image": image_ref,
            "class": name,
            "geometry": geometry,
            "seg_backend": seg_id,
            "refine_backend": refine_id,
            "seg_tiling": [self.config.seg_tiling.tile_size, self.config.seg_tiling.overlap],
            "refine_tiling": [self.config.refine_tiling.tile_size,
                              self.config.refine_tiling.overlap],
        }
        return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()

    def _cache_load(self, key: str) -> dict[str, str] | None:
        path = self._cache_dir / f"{key}.json"
        if not path.exists():
            return None
        refs = json.loads(path.read_text(encoding="utf-8"))
        if all(self.store.exists(ref) for ref in refs.values()):
            return refs
        return None

    def _store_class_masks(self, masks: ClassMasks) -> dict[str, str]:
        refs: dict[str, str] = {}
        for field in _MASK_FIELDS:
            raster = getattr(masks, field)
            if isinstance(raster, BinaryMask):
                refs[field] = self.store.put(mask_png_bytes(raster), "image/png")
            else:
                refs[field] = self.store.put(rf32_bytes(raster), _RF32_TYPE)
        return refs

    def segment(self, session_id: str, classes: ClassSet | None = None) -> dict:
        """Segment every class for the session image, reusing cached masks."""
        manifest = self.manifest(session_id)
        if classes is None:
            classes = self.session_classes(session_id)
        if self.seg_backend is None or self.refine_backend is None:
            raise SessionStateError("segmentation backends are not configured")
        image = load_rgb_image(io.BytesIO(self.store.get(manifest["image"])))

        per_class: dict[str, dict[str, str]] = {}
        for spec in classes.classes:
            key = self._cache_key(manifest["image"], spec.name, spec.geometry.value)
            refs = self._cache_load(key)
            if refs is None:
                result = run_pipeline(
                    image,
                    ClassSet((spec,), {spec.name: "prompt"}),
                    self.seg_backend,
                    self.refine_backend,
                    self.config.seg_tiling,
                    self.config.refine_tiling,
                )
                refs = self._store_class_masks(result[spec.name])
                (self._cache_dir / f"{key}.json").write_text(
                    json.dumps(refs, sort_keys=True), encoding="utf-8"
                )
            per_class[spec.name] = refs

        manifest = self.manifest(session_id)
        manifest["masks"] = per_class
        self._write_manifest(manifest)
        return {"masks": per_class}

    def _load_eval_inputs(self, manifest: dict) -> dsl.EvalInputs:
        if not manifest["masks"]:
            raise SessionStateError("session has no masks yet; run segment first")
        masks: dict[str, BinaryMask] = {}
        probs: dict[str, ProbabilityMap] = {}
        for name, refs in manifest["masks"].items():
            masks[name] = mask_from_png(self.store.get(refs["mask"]))
            probs[name] = ProbabilityMap(read_rf32(self.store.get(refs["gated"])))
        return dsl.EvalInputs(masks=masks, probabilities=probs)

    # -- cost synthesis ----------------------------------------------------

    def compose(
        self,
        session_id: str,
        prompt: str | None = None,
        program_source: str | None = None,
    ) -> dict:
        """Obtain a cost program (from source or the model) and evaluate it.

        Exactly one of prompt/program_source must be given. The program is
        stored in canonical form alongside the costmap it produced and a
        heatmap rendering.
        """
        if (prompt is None) == (program_source is None):
            raise ValueError("pass exactly one of prompt or program_source")
        manifest = self.manifest(session_id)
        inputs = self._load_eval_inputs(manifest)

        if program_source is not None:
            program = dsl.parse(program_source)
            dsl.validate(program, inputs.masks.keys())
        else:
            classes = self.session_classes(session_id)
            program = compose_program(prompt, classes, self._require_llm(), self.config.retries)

        costmap = dsl.evaluate(program, inputs)
        source = dsl.format_program(program)
        manifest["program"] = self.store.put_text(source, "text/plain")
        manifest["costmap"] = self.store.put(rf32_bytes(costmap), _RF32_TYPE)
        manifest["costmap_png"] = self.store.put(heatmap_png_bytes(costmap), "image/png")
        self._write_manifest(manifest)
        return {
            "program": manifest["program"],
            "costmap": manifest["costmap"],
            "costmap_png": manifest["costmap_png"],
        }

    # -- planning ----------------------------------------------------------

    def load_costmap(self, ref: str) -> Costmap:
        return Costmap(read_rf32(self.store.get(ref)))

    def plan_route(
        self,
        costmap_ref: str,
        start: tuple[int, int],
        goal: tuple[int, int],
        session_id: str | None = None,
    ) -> PlanPath:
        costmap = self.load_costmap(costmap_ref)
        path = plan(costmap, PlanQuery(start=tuple(start), goal=tuple(goal)))
        if session_id is not None:
            manifest = self.manifest(session_id)
            manifest["plans"].append(
                {
                    "start": list(start),
                    "goal": list(goal),
                    "costmap": costmap_ref,
                    "path": json.loads(path.to_json()),
                }
            )
            self._write_manifest(manifest)
        return path
