/** Pure view-state helpers. The UI is a projection of service artifacts:
 * everything here derives from the session manifest and its refs, so a
 * reload rebuilds the identical view. */

import type { ClassEntry, MaskRefs, PlanRecord, SessionManifest } from "./api";

export interface ClassLayer {
  name: string;
  geometry: "linear" | "areal";
  color: string;
  visible: boolean;
  refs: MaskRefs | null;
}

export interface PlanView {
  start: [number, number];
  goal: [number, number];
  pixels: [number, number][];
  cost: number;
}

export interface SessionView {
  sessionId: string;
  imageRef: string;
  prompt: string | null;
  classLayers: ClassLayer[];
  programRef: string | null;
  costmapRef: string | null;
  costmapPngRef: string | null;
  plans: PlanView[];
}

// distinct hues for mask overlays, assigned by class order
export const OVERLAY_PALETTE = [
  "#e6194b",
  "#3cb44b",
  "#4363d8",
  "#f58231",
  "#911eb4",
  "#46f0f0",
  "#f032e6",
  "#bcf60c",
  "#fabebe",
  "#008080",
];

export function overlayColor(index: number): string {
  return OVERLAY_PALETTE[index % OVERLAY_PALETTE.length];
}

/**
 * Build the view model from the manifest plus the decoded classes artifact.
 * Class order follows the classes artifact (prompt classes first), and each
 * layer picks up its mask refs when segmentation has produced them.
 */
export function projectView(
  manifest: SessionManifest,
  classes: ClassEntry[] | null,
): SessionView {
  const layers: ClassLayer[] = (classes ?? []).map((entry, i) => ({
    name: entry.name,
    geometry: entry.geometry,
    color: overlayColor(i),
    visible: true,
    refs: manifest.masks[entry.name] ?? null,
  }));
  return {
    sessionId: manifest.id,
    imageRef: manifest.image,
    prompt: manifest.prompt,
    classLayers: layers,
    programRef: manifest.program,
    costmapRef: manifest.costmap,
    costmapPngRef: manifest.costmap_png,
    plans: manifest.plans.map(planView),
  };
}

export function planView(record: PlanRecord): PlanView {
  return {
    start: record.start,
    goal: record.goal,
    pixels: record.path.pixels,
    cost: record.path.cost,
  };
}

/** Extract the caret position from a program-error message, if it has one. */
export function caretFromError(message: string): { line: number; col: number } | null {
  const match = /\(line (\d+), col (\d+)\)/.exec(message);
  if (!match) return null;
  return { line: Number(match[1]), col: Number(match[2]) };
}

/**
 * Map a client-coordinate event onto image pixels. When the element has no
 * layout box (headless DOM), client coordinates are taken as pixels
 * directly. Returns null outside the image.
 */
export function pixelFromClick(
  rect: { left: number; top: number; width: number; height: number },
  imageWidth: number,
  imageHeight: number,
  clientX: number,
  clientY: number,
): [number, number] | null {
  const scaleX = rect.width > 0 ? imageWidth / rect.width : 1;
  const scaleY = rect.height > 0 ? imageHeight / rect.height : 1;
  const x = Math.floor((clientX - rect.left) * scaleX);
  const y = Math.floor((clientY - rect.top) * scaleY);
  if (x < 0 || y < 0 || x >= imageWidth || y >= imageHeight) return null;
  return [x, y];
}

/** SVG polyline points attribute for a path, one point per pixel center. */
export function polylinePoints(pixels: [number, number][]): string {
  return pixels.map(([x, y]) => `${x + 0.5},${y + 0.5}`).join(" ");
}
