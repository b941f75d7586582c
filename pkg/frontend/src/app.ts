/** Operator console: upload an image, prompt the pipeline, inspect per-class
 * overlays and the costmap heatmap, plan routes by clicking, and edit the
 * cost program. Rendering is a projection of the session manifest; nothing
 * is computed client-side beyond reading raster headers and values. */

import { ApiClient, ClassEntry, SessionManifest } from "./api";
import { Rf32Raster, decodeRf32, pngDimensions, rasterValue } from "./raster";
import {
  SessionView,
  caretFromError,
  pixelFromClick,
  polylinePoints,
  projectView,
} from "./state";

export interface AppOptions {
  client: ApiClient;
  pollIntervalMs?: number;
}

export interface App {
  root: HTMLElement;
  loadSession(sessionId: string): Promise<void>;
  /** Resolves once every in-flight operation has finished. */
  settle(): Promise<void>;
  view(): SessionView | null;
}

type Stage = "interpret" | "segment" | "compose";

const SVG_NS = "http://www.w3.org/2000/svg";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  testId?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (testId) node.dataset.testid = testId;
  if (text) node.textContent = text;
  return node;
}

function readFileBytes(file: File): Promise<Uint8Array> {
  return new Promise((resolve, reject) => {
    const reader = new FileReader();
    reader.onerror = () => reject(reader.error ?? new Error("file read failed"));
    reader.onload = () => resolve(new Uint8Array(reader.result as ArrayBuffer));
    reader.readAsArrayBuffer(file);
  });
}

export function createApp(root: HTMLElement, options: AppOptions): App {
  const client = options.client;
  const pollInterval = options.pollIntervalMs ?? 1000;

  let sessionId: string | null = null;
  let dims: { width: number; height: number } | null = null;
  let view: SessionView | null = null;
  let lastAppliedSource = "";
  let sourceHistory: string[] = [];
  let pendingStart: [number, number] | null = null;
  let dragging: { planIndex: number; which: "start" | "goal" } | null = null;
  const rasterCache = new Map<string, Rf32Raster>();
  const pending = new Set<Promise<unknown>>();

  // --- static DOM -----------------------------------------------------
  root.classList.add("overseec-app");

  const controls = el("section");
  const imageInput = el("input", "image-input") as HTMLInputElement;
  imageInput.type = "file";
  imageInput.accept = "image/png";
  const promptForm = el("form", "prompt-form");
  const promptInput = el("input", "prompt-input") as HTMLInputElement;
  promptInput.type = "text";
  promptInput.placeholder = "Mission statement";
  const promptButton = el("button", "prompt-run", "Run");
  promptButton.type = "submit";
  promptForm.append(promptInput, promptButton);
  const stageStatus = el("div", "stage-status");
  const stageLabels = new Map<Stage, HTMLElement>();
  for (const stage of ["interpret", "segment", "compose"] as Stage[]) {
    const label = el("span", `stage-${stage}`, `${stage}: idle`);
    stageLabels.set(stage, label);
    stageStatus.append(label);
  }
  const sessionLabel = el("div", "session-id");
  const errorBanner = el("div", "error-banner");
  errorBanner.hidden = true;
  controls.append(imageInput, promptForm, stageStatus, sessionLabel, errorBanner);

  const viewport = el("section");
  const layers = el("div", "layers");
  layers.style.position = "relative";
  const baseImage = el("img", "base-image") as HTMLImageElement;
  const overlayBox = el("div", "overlay-box");
  const costmapImage = el("img", "costmap-image") as HTMLImageElement;
  costmapImage.style.display = "none";
  const planLayer = document.createElementNS(SVG_NS, "svg");
  planLayer.dataset.testid = "plan-layer";
  layers.append(baseImage, overlayBox, costmapImage, planLayer);
  const probeReadout = el("div", "probe-readout");
  const classList = el("div", "class-list");
  viewport.append(layers, probeReadout, classList);

  const editor = el("section");
  const programEditor = el("textarea", "program-editor") as HTMLTextAreaElement;
  programEditor.rows = 12;
  const applyButton = el("button", "apply-program", "Apply");
  const revertButton = el("button", "revert-program", "Revert");
  const caretNote = el("div", "editor-caret");
  editor.append(programEditor, applyButton, revertButton, caretNote);

  root.append(controls, viewport, editor);

  // --- async bookkeeping ----------------------------------------------
  function track<T>(work: Promise<T>): Promise<T> {
    const wrapped = work.finally(() => pending.delete(wrapped));
    pending.add(wrapped);
    return wrapped;
  }

  async function settle(): Promise<void> {
    while (pending.size > 0) {
      await Promise.allSettled([...pending]);
    }
  }

  function showError(message: string, retry?: () => void): void {
    errorBanner.hidden = false;
    errorBanner.textContent = message;
    if (retry) {
      const button = el("button", "error-retry", "Retry");
      button.addEventListener("click", () => {
        clearError();
        retry();
      });
      errorBanner.append(" ", button);
    }
  }

  function clearError(): void {
    errorBanner.hidden = true;
    errorBanner.textContent = "";
  }

  function setStage(stage: Stage, text: string): void {
    const label = stageLabels.get(stage);
    if (label) label.textContent = `${stage}: ${text}`;
  }

  function editorDirty(): boolean {
    return programEditor.value !== lastAppliedSource;
  }

  // --- rendering --------------------------------------------------------
  function renderClassLayers(current: SessionView): void {
    overlayBox.replaceChildren();
    classList.replaceChildren();
    for (const layer of current.classLayers) {
      let img: HTMLImageElement | null = null;
      if (layer.refs) {
        img = el("img") as HTMLImageElement;
        img.dataset.testid = `overlay-${layer.name}`;
        img.className = "overlay";
        img.src = client.artifactUrl(layer.refs.mask);
        img.style.display = layer.visible ? "" : "none";
        overlayBox.append(img);
      }
      const row = el("label");
      row.dataset.testid = `class-row-${layer.name}`;
      const toggle = el("input") as HTMLInputElement;
      toggle.type = "checkbox";
      toggle.checked = layer.visible;
      toggle.dataset.testid = `toggle-${layer.name}`;
      toggle.addEventListener("change", () => {
        layer.visible = toggle.checked;
        if (img) img.style.display = layer.visible ? "" : "none";
      });
      const swatch = el("span");
      swatch.style.background = layer.color;
      swatch.className = "swatch";
      row.append(toggle, swatch, ` ${layer.name} (${layer.geometry})`);
      classList.append(row);
    }
  }

  function renderCostmap(current: SessionView): void {
    if (current.costmapPngRef) {
      costmapImage.src = client.artifactUrl(current.costmapPngRef);
      costmapImage.style.display = "";
    } else {
      costmapImage.style.display = "none";
    }
  }

  function marker(
    planIndex: number,
    which: "start" | "goal",
    at: [number, number],
  ): SVGCircleElement {
    const dot = document.createElementNS(SVG_NS, "circle");
    dot.setAttribute("cx", String(at[0] + 0.5));
    dot.setAttribute("cy", String(at[1] + 0.5));
    dot.setAttribute("r", which === "start" ? "2" : "3");
    dot.setAttribute("class", `marker marker-${which}`);
    dot.dataset.testid = `marker-${which}-${planIndex}`;
    dot.addEventListener("pointerdown", (event) => {
      event.stopPropagation();
      dragging = { planIndex, which };
    });
    return dot;
  }

  // All manifest plans render; the latest is the active one. Replanning by
  // drag appends a plan server-side and the new path becomes active, so a
  // reload reproduces exactly what is on screen.
  function renderPlans(current: SessionView): void {
    planLayer.replaceChildren();
    current.plans.forEach((plan, index) => {
      const active = index === current.plans.length - 1;
      const line = document.createElementNS(SVG_NS, "polyline");
      line.setAttribute("points", polylinePoints(plan.pixels));
      line.setAttribute("fill", "none");
      line.setAttribute("class", active ? "plan-active" : "plan-history");
      line.dataset.testid = `plan-line-${index}`;
      planLayer.append(line, marker(index, "start", plan.start), marker(index, "goal", plan.goal));
    });
    if (pendingStart) {
      const dot = document.createElementNS(SVG_NS, "circle");
      dot.setAttribute("cx", String(pendingStart[0] + 0.5));
      dot.setAttribute("cy", String(pendingStart[1] + 0.5));
      dot.setAttribute("r", "2");
      dot.dataset.testid = "marker-pending";
      planLayer.append(dot);
    }
  }

  function renderView(current: SessionView): void {
    sessionLabel.textContent = current.sessionId;
    baseImage.src = client.artifactUrl(current.imageRef);
    if (dims) {
      baseImage.width = dims.width;
      baseImage.height = dims.height;
      planLayer.setAttribute("viewBox", `0 0 ${dims.width} ${dims.height}`);
      planLayer.setAttribute("width", String(dims.width));
      planLayer.setAttribute("height", String(dims.height));
    }
    renderClassLayers(current);
    renderCostmap(current);
    renderPlans(current);
  }

  async function refresh(): Promise<SessionView> {
    if (!sessionId) throw new Error("no session");
    const manifest = await client.manifest(sessionId);
    let classes: ClassEntry[] | null = null;
    if (manifest.classes) {
      const parsed = await client.artifactJson<{ classes: ClassEntry[] }>(manifest.classes);
      classes = parsed.classes;
    }
    view = projectView(manifest, classes);
    renderView(view);
    return view;
  }

  // --- pipeline actions -------------------------------------------------
  async function runStage(
    stage: Stage,
    submit: () => Promise<string>,
  ): Promise<Record<string, string>> {
    setStage(stage, "running");
    const started = Date.now();
    try {
      const jobId = await submit();
      const info = await client.pollJob(jobId, pollInterval);
      setStage(stage, `done (${((Date.now() - started) / 1000).toFixed(1)}s)`);
      return info.outputs ?? {};
    } catch (err) {
      setStage(stage, "failed");
      throw err;
    }
  }

  async function runPipeline(prompt: string): Promise<void> {
    if (!sessionId) {
      showError("upload an image first");
      return;
    }
    clearError();
    const id = sessionId;
    try {
      await runStage("interpret", () => client.submitInterpret(id, prompt));
      const interpreted = await refresh(); // classes are known before masks exist
      const cached =
        interpreted.classLayers.length > 0 &&
        interpreted.classLayers.every((layer) => layer.refs !== null);
      if (cached) {
        // every class already has masks in the store; no segment job needed
        setStage("segment", "cache hit");
      } else {
        await runStage("segment", () => client.submitSegment(id));
        await refresh();
      }
      await runStage("compose", () => client.submitCompose(id, { prompt }));
      const current = await refresh();
      if (current.programRef) {
        lastAppliedSource = await client.artifactText(current.programRef);
        programEditor.value = lastAppliedSource;
        sourceHistory = [];
      }
    } catch (err) {
      showError((err as Error).message, () => void track(runPipeline(prompt)));
    }
  }

  async function applyProgram(source: string): Promise<void> {
    if (!sessionId) {
      showError("upload an image first");
      return;
    }
    caretNote.textContent = "";
    const id = sessionId;
    const previous = lastAppliedSource;
    try {
      await runStage("compose", () => client.submitCompose(id, { program: source }));
      if (previous && previous !== source) sourceHistory.push(previous);
      lastAppliedSource = source;
      await refresh();
    } catch (err) {
      const message = (err as Error).message;
      const caret = caretFromError(message);
      caretNote.textContent = caret
        ? `line ${caret.line}, col ${caret.col}: ${message}`
        : message;
    }
  }

  async function planBetween(start: [number, number], goal: [number, number]): Promise<void> {
    if (!sessionId || !view?.costmapRef) return;
    await client.plan(view.costmapRef, start, goal, sessionId);
    await refresh();
  }

  // --- probe --------------------------------------------------------------
  async function raster(ref: string): Promise<Rf32Raster> {
    const cached = rasterCache.get(ref);
    if (cached) return cached;
    const decoded = decodeRf32(await client.artifactBytes(ref));
    rasterCache.set(ref, decoded);
    return decoded;
  }

  async function probe(pixel: [number, number]): Promise<void> {
    if (!view) return;
    const [x, y] = pixel;
    const parts: string[] = [`(${x}, ${y})`];
    if (view.costmapRef) {
      const costmap = await raster(view.costmapRef);
      parts.push(`cost ${rasterValue(costmap, x, y).toFixed(3)}`);
    }
    for (const layer of view.classLayers) {
      if (layer.refs) {
        const gated = await raster(layer.refs.gated);
        parts.push(`${layer.name} ${rasterValue(gated, x, y).toFixed(3)}`);
      }
    }
    probeReadout.textContent = parts.join(" | ");
  }

  // --- event wiring ---------------------------------------------------------
  imageInput.addEventListener("change", () => {
    const file = imageInput.files?.[0];
    if (!file) return;
    clearError();
    track(
      (async () => {
        const bytes = await readFileBytes(file);
        dims = pngDimensions(bytes);
        const ref = await client.uploadImage(bytes);
        sessionId = await client.createSession(ref);
        await refresh();
      })().catch((err) => showError((err as Error).message)),
    );
  });

  promptForm.addEventListener("submit", (event) => {
    event.preventDefault();
    const prompt = promptInput.value.trim();
    if (!prompt) return;
    if (editorDirty() && lastAppliedSource) {
      showError("unsaved program edits; discard them to run the prompt", () => {
        programEditor.value = lastAppliedSource;
        void track(runPipeline(prompt));
      });
      return;
    }
    track(runPipeline(prompt));
  });

  applyButton.addEventListener("click", () => {
    track(applyProgram(programEditor.value));
  });

  revertButton.addEventListener("click", () => {
    const previous = sourceHistory.pop();
    if (previous === undefined) return;
    programEditor.value = previous;
    track(applyProgram(previous));
  });

  function eventPixel(event: MouseEvent): [number, number] | null {
    if (!dims) return null;
    const rect = planLayer.getBoundingClientRect();
    return pixelFromClick(rect, dims.width, dims.height, event.clientX, event.clientY);
  }

  planLayer.addEventListener("click", (event) => {
    const pixel = eventPixel(event as MouseEvent);
    if (!pixel || !view?.costmapRef) return;
    if (!pendingStart) {
      pendingStart = pixel;
      if (view) renderPlans(view);
      return;
    }
    const start = pendingStart;
    pendingStart = null;
    track(planBetween(start, pixel).catch((err) => showError((err as Error).message)));
  });

  planLayer.addEventListener("pointerup", (event) => {
    if (!dragging || !view) return;
    const grabbed = dragging;
    dragging = null;
    const pixel = eventPixel(event as MouseEvent);
    const plan = view.plans[grabbed.planIndex];
    if (!pixel || !plan) return;
    const start = grabbed.which === "start" ? pixel : plan.start;
    const goal = grabbed.which === "goal" ? pixel : plan.goal;
    track(planBetween(start, goal).catch((err) => showError((err as Error).message)));
  });

  planLayer.addEventListener("pointermove", (event) => {
    if (dragging) return;
    const pixel = eventPixel(event as MouseEvent);
    if (!pixel) return; // outside the image: leave the readout as-is
    track(probe(pixel).catch(() => undefined));
  });

  return {
    root,
    settle,
    view: () => view,
    loadSession: (id: string) =>
      track(
        (async () => {
          sessionId = id;
          const manifest = await client.manifest(id);
          const imageBytes = await client.artifactBytes(manifest.image);
          dims = pngDimensions(imageBytes);
          const current = await refresh();
          if (current.programRef) {
            lastAppliedSource = await client.artifactText(current.programRef);
            programEditor.value = lastAppliedSource;
          }
        })(),
      ),
  };
}
