"""Command-line entry points.

Backends are picked with small spec strings so offline fixture runs and real
model servers use the same commands:

  --llm-backend     stub:DIR | http:URL[#MODEL]
  --seg-backend     fixture:DIR | http:URL
  --refine-backend  fixture:DIR | identity | http:URL

A fixture directory holds colors.json mapping class names to RGB triples.

Usage mistakes exit with status 2 (click's convention); runtime failures
print a one-line JSON error to stderr and exit 1.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import dsl
from .errors import OverseecError
from .interpret import ClassSet, HttpLLMBackend, LLMBackendConfig, StubLLMBackend
from .metrics import SemanticMap, iou, mean_hausdorff, rrpi
from .ovseg import (
    ColorKeyedRefineBackend,
    ColorKeyedSegBackend,
    HttpRefineBackend,
    HttpSegBackend,
    IdentityRefineBackend,
    TilingParams,
)
from .planner import Path as PlanPath
from .raster import (
    ClassSpec,
    Costmap,
    GridShape,
    heatmap_png_bytes,
    load_rgb_image,
    mask_from_png,
    read_rf32,
    write_rf32,
)
from .session import Engine, EngineConfig
from .store import ArtifactStore


def _fail(exc: Exception) -> None:
    doc = {"error": {"type": type(exc).__name__, "message": str(exc)}}
    click.echo(json.dumps(doc), err=True)
    sys.exit(1)


def _load_colors(fixture_dir: str) -> dict[str, tuple[int, int, int]]:
    path = Path(fixture_dir) / "colors.json"
    if not path.is_file():
        raise click.UsageError(f"fixture directory {fixture_dir!r} has no colors.json")
    doc = json.loads(path.read_text(encoding="utf-8"))
    return {name: tuple(rgb) for name, rgb in doc.items()}


def _llm_backend(spec: str | None):
    if spec is None:
        return None
    kind, _, rest = spec.partition(":")
    if kind == "stub":
        return StubLLMBackend(rest)
    if kind == "http":
        url, _, model = rest.partition("#")
        return HttpLLMBackend(LLMBackendConfig(endpoint=url, model=model or "default"))
    raise click.UsageError(f"unknown llm backend spec {spec!r}")


def _seg_backend(spec: str):
    kind, _, rest = spec.partition(":")
    if kind == "fixture":
        return ColorKeyedSegBackend(_load_colors(rest))
    if kind == "http":
        return HttpSegBackend(rest)
    raise click.UsageError(f"unknown seg backend spec {spec!r}")


def _refine_backend(spec: str):
    kind, _, rest = spec.partition(":")
    if kind == "fixture":
        return ColorKeyedRefineBackend(_load_colors(rest))
    if kind == "identity":
        return IdentityRefineBackend()
    if kind == "http":
        return HttpRefineBackend(rest)
    raise click.UsageError(f"unknown refine backend spec {spec!r}")


def _parse_pixel(text: str) -> tuple[int, int]:
    try:
        x, y = text.split(",")
        return int(x), int(y)
    except ValueError:
        raise click.UsageError(f"expected X,Y integers, got {text!r}") from None


def _engine(store_dir: str, llm: str | None, seg: str | None, refine: str | None,
            tile_size: int, overlap: int) -> Engine:
    tiling = TilingParams(tile_size=tile_size, overlap=overlap)
    return Engine(
        ArtifactStore(store_dir),
        llm_backend=_llm_backend(llm),
        seg_backend=_seg_backend(seg) if seg else None,
        refine_backend=_refine_backend(refine) if refine else None,
        config=EngineConfig(seg_tiling=tiling, refine_tiling=tiling),
    )


@click.group()
def main() -> None:
    """Costmaps from aerial imagery and natural-language mission statements."""


@main.command()
@click.option("--image", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--prompt", default=None, help="Mission statement for the model.")
@click.option("--program", "program_file", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="Cost program file; skips the compose model call.")
@click.option("--llm-backend", "llm", default=None, help="stub:DIR or http:URL[#MODEL]")
@click.option("--seg-backend", "seg", required=True, help="fixture:DIR or http:URL")
@click.option("--refine-backend", "refine", required=True, help="fixture:DIR, identity, or http:URL")
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option("--tile-size", default=512, show_default=True)
@click.option("--overlap", default=64, show_default=True)
@click.option("--route", "routes", multiple=True, metavar="X,Y:X,Y",
              help="Plan start:goal on the produced costmap (repeatable).")
def run(image, prompt, program_file, llm, seg, refine, out, tile_size, overlap, routes):
    """Full pipeline: interpret, segment, compose, and optionally plan."""
    if prompt is None and program_file is None:
        raise click.UsageError("pass --prompt, --program, or both")
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        engine = _engine(str(out_dir / "store"), llm, seg, refine, tile_size, overlap)
        image_ref = engine.upload_image(Path(image).read_bytes())
        session = engine.create_session(image_ref)["id"]

        program_source = None
        if program_file is not None:
            program_source = Path(program_file).read_text(encoding="utf-8")
            program = dsl.parse(program_source)
            classes = ClassSet(
                tuple(ClassSpec(d.name, d.geometry) for d in program.classes)
            )
            if prompt is not None and engine.llm_backend is not None:
                engine.interpret(session, prompt)
                classes = engine.session_classes(session)
        else:
            engine.interpret(session, prompt)
            classes = engine.session_classes(session)

        engine.segment(session, classes)
        if program_source is not None:
            refs = engine.compose(session, program_source=program_source)
        else:
            refs = engine.compose(session, prompt=prompt)

        (out_dir / "program.dsl").write_text(
            engine.store.get_text(refs["program"]), encoding="utf-8"
        )
        (out_dir / "costmap.rf32").write_bytes(engine.store.get(refs["costmap"]))
        (out_dir / "costmap.png").write_bytes(engine.store.get(refs["costmap_png"]))

        plans = []
        for route in routes:
            start_s, _, goal_s = route.partition(":")
            path = engine.plan_route(
                refs["costmap"], _parse_pixel(start_s), _parse_pixel(goal_s), session
            )
            plans.append(json.loads(path.to_json()))
        if plans:
            (out_dir / "routes.json").write_text(json.dumps(plans, indent=2))

        manifest = engine.manifest(session)
        (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2))
        click.echo(json.dumps({"session": session, **refs}))
    except OverseecError as exc:
        _fail(exc)


@main.command()
@click.option("--image", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--classes", "classes_file", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Class set JSON (name/geometry entries).")
@click.option("--seg-backend", "seg", required=True)
@click.option("--refine-backend", "refine", required=True)
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option("--tile-size", default=512, show_default=True)
@click.option("--overlap", default=64, show_default=True)
def segment(image, classes_file, seg, refine, out, tile_size, overlap):
    """Segment an image into per-class masks and write them with a manifest."""
    from .ovseg import run_pipeline, write_mask_artifacts

    try:
        classes = ClassSet.from_json(Path(classes_file).read_text(encoding="utf-8"))
        pixels = load_rgb_image(image)
        tiling = TilingParams(tile_size=tile_size, overlap=overlap)
        masks = run_pipeline(
            pixels, classes, _seg_backend(seg), _refine_backend(refine), tiling, tiling
        )
        write_mask_artifacts(masks, out)
        click.echo(json.dumps({"classes": sorted(masks), "out": str(out)}))
    except OverseecError as exc:
        _fail(exc)


def _load_mask_dir(mask_dir: Path) -> dsl.EvalInputs:
    manifest = json.loads((mask_dir / "manifest.json").read_text(encoding="utf-8"))
    masks = {}
    probs = {}
    from .raster import ProbabilityMap

    for name, entry in manifest["classes"].items():
        mask_path = mask_dir / entry["artifacts"]["mask"]["path"]
        gated_path = mask_dir / entry["artifacts"]["gated"]["path"]
        masks[name] = mask_from_png(str(mask_path))
        probs[name] = ProbabilityMap(read_rf32(str(gated_path)))
    return dsl.EvalInputs(masks=masks, probabilities=probs)


@main.command()
@click.option("--masks", "mask_dir", required=True, type=click.Path(file_okay=False, exists=True),
              help="Directory written by `overseec segment`.")
@click.option("--program", "program_file", default=None,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--prompt", default=None)
@click.option("--llm-backend", "llm", default=None)
@click.option("--out", required=True, type=click.Path(file_okay=False))
def compose(mask_dir, program_file, prompt, llm, out):
    """Evaluate a cost program (given or model-written) over segmented masks."""
    if (program_file is None) == (prompt is None):
        raise click.UsageError("pass exactly one of --program or --prompt")
    try:
        inputs = _load_mask_dir(Path(mask_dir))
        if program_file is not None:
            program = dsl.parse(Path(program_file).read_text(encoding="utf-8"))
            dsl.validate(program, inputs.masks.keys())
        else:
            from .interpret import compose_program, identify_entities

            backend = _llm_backend(llm)
            if backend is None:
                raise click.UsageError("--prompt needs --llm-backend")
            classes = identify_entities(prompt, backend)
            program = compose_program(prompt, classes, backend)
        costmap = dsl.evaluate(program, inputs)
        out_dir = Path(out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "program.dsl").write_text(dsl.format_program(program), encoding="utf-8")
        write_rf32(str(out_dir / "costmap.rf32"), costmap)
        (out_dir / "costmap.png").write_bytes(heatmap_png_bytes(costmap))
        click.echo(json.dumps({"out": str(out_dir)}))
    except OverseecError as exc:
        _fail(exc)


@main.command()
@click.option("--costmap", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--start", required=True, metavar="X,Y")
@click.option("--goal", required=True, metavar="X,Y")
@click.option("--out", default=None, type=click.Path(dir_okay=False))
def plan(costmap, start, goal, out):
    """Plan the cheapest route between two pixels on a costmap."""
    from .planner import PlanQuery
    from .planner import plan as plan_route

    try:
        grid = Costmap(read_rf32(costmap))
        path = plan_route(grid, PlanQuery(_parse_pixel(start), _parse_pixel(goal)))
    except (OverseecError, ValueError) as exc:
        _fail(exc)
        return
    text = path.to_json()
    if out:
        Path(out).write_text(text, encoding="utf-8")
    click.echo(text)


@main.group(name="eval")
def eval_group() -> None:
    """Route and mask quality metrics."""


def _load_path(path_file: str) -> PlanPath:
    return PlanPath.from_json(Path(path_file).read_text(encoding="utf-8"))


@eval_group.command(name="rrpi")
@click.option("--path", "path_file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--semantic", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Grayscale PNG of semantic ids.")
@click.option("--table", required=True, type=click.Path(exists=True, dir_okay=False),
              help="JSON mapping id -> class name.")
@click.option("--ranks", "ranks_file", required=True, type=click.Path(exists=True, dir_okay=False))
def eval_rrpi(path_file, semantic, table, ranks_file):
    """Route rank penalty of a planned path against ground truth."""
    import numpy as np
    from PIL import Image

    try:
        ids = np.asarray(Image.open(semantic).convert("L")).astype(np.int64)
        id_table = {int(k): v for k, v in
                    json.loads(Path(table).read_text(encoding="utf-8")).items()}
        ranks = json.loads(Path(ranks_file).read_text(encoding="utf-8"))
        value = rrpi(_load_path(path_file), SemanticMap(ids, id_table), ranks)
        click.echo(json.dumps({"rrpi": value}))
    except (OverseecError, ValueError) as exc:
        _fail(exc)


@eval_group.command(name="hausdorff")
@click.option("--system", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--reference", "references", required=True, multiple=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--height", required=True, type=int)
@click.option("--width", required=True, type=int)
def eval_hausdorff(system, references, height, width):
    """Mean distance from a system route to reference routes, diagonal-normalized."""
    try:
        value = mean_hausdorff(
            _load_path(system),
            [_load_path(ref) for ref in references],
            GridShape(height, width),
        )
        click.echo(json.dumps({"mean_hausdorff": value}))
    except (OverseecError, ValueError) as exc:
        _fail(exc)


@eval_group.command(name="iou")
@click.option("--a", "a_file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--b", "b_file", required=True, type=click.Path(exists=True, dir_okay=False))
def eval_iou(a_file, b_file):
    """Intersection over union of two mask PNGs."""
    try:
        value = iou(mask_from_png(a_file), mask_from_png(b_file))
        click.echo(json.dumps({"iou": value}))
    except (OverseecError, ValueError) as exc:
        _fail(exc)


@main.command()
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option("--size", default=256, show_default=True)
def scene(out, size):
    """Write the built-in demo scene (image, labels, fixtures) for offline runs."""
    from .synthetic import build_scene, write_scene

    write_scene(build_scene(size), out)
    click.echo(json.dumps({"out": str(out)}))


@main.command()
@click.option("--store", "store_dir", default=None, type=click.Path(file_okay=False))
@click.option("--host", default=None)
@click.option("--port", default=None, type=int)
@click.option("--llm-backend", "llm", default=None)
@click.option("--seg-backend", "seg", default=None)
@click.option("--refine-backend", "refine", default=None)
@click.option("--workers", default=None, type=int)
@click.option("--tile-size", default=None, type=int)
@click.option("--overlap", default=None, type=int)
@click.option("--config", "config_file", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="JSON config; flags override it, OVERSEEC_* env vars sit between.")
def serve(store_dir, host, port, llm, seg, refine, workers, tile_size, overlap, config_file):
    """Run the HTTP service."""
    import os

    import uvicorn

    from .service import create_app

    settings = {
        "store": "overseec-store", "host": "127.0.0.1", "port": 8000,
        "llm": None, "seg": None, "refine": None, "workers": 2,
        "tile_size": 512, "overlap": 64,
    }
    if config_file:
        settings.update(json.loads(Path(config_file).read_text(encoding="utf-8")))
    for key in settings:
        env = os.environ.get(f"OVERSEEC_{key.upper()}")
        if env is not None:
            settings[key] = type(settings[key])(env) if settings[key] is not None else env
    flags = {"store": store_dir, "host": host, "port": port, "llm": llm, "seg": seg,
             "refine": refine, "workers": workers, "tile_size": tile_size,
             "overlap": overlap}
    settings.update({k: v for k, v in flags.items() if v is not None})

    engine = _engine(settings["store"], settings["llm"], settings["seg"],
                     settings["refine"], settings["tile_size"], settings["overlap"])
    app = create_app(engine, workers=settings["workers"])
    uvicorn.run(app, host=settings["host"], port=settings["port"])


if __name__ == "__main__":
    main()
