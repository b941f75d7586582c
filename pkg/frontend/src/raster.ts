/** Client-side raster header/payload readers. Decoding only, no computation. */

export interface Rf32Raster {
  height: number;
  width: number;
  values: Float32Array;
}

const PNG_SIGNATURE = [0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a];

/**
 * Read width/height from a PNG's IHDR chunk without decoding the image.
 * The session manifest stores refs, not dimensions, so the viewer sizes
 * its layers from the uploaded bytes directly.
 */
export function pngDimensions(bytes: Uint8Array): { width: number; height: number } {
  if (bytes.length < 24 || !PNG_SIGNATURE.every((b, i) => bytes[i] === b)) {
    throw new Error("not a PNG file");
  }
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  // IHDR is always the first chunk: width/height are big-endian at 16/20
  return { width: view.getUint32(16, false), height: view.getUint32(20, false) };
}

/** Decode an RF32 raster: "RF32" magic, LE uint32 height/width, then float32 rows. */
export function decodeRf32(data: ArrayBuffer | Uint8Array): Rf32Raster {
  const bytes = data instanceof Uint8Array ? data : new Uint8Array(data);
  if (bytes.length < 12 || String.fromCharCode(...bytes.subarray(0, 4)) !== "RF32") {
    throw new Error("not an RF32 raster");
  }
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  const height = view.getUint32(4, true);
  const width = view.getUint32(8, true);
  const expected = 12 + 4 * height * width;
  if (height < 1 || width < 1 || bytes.length !== expected) {
    throw new Error(`RF32 payload is ${bytes.length} bytes, expected ${expected}`);
  }
  const start = bytes.byteOffset + 12;
  const values =
    start % 4 === 0
      ? new Float32Array(bytes.buffer, start, height * width)
      : new Float32Array(bytes.slice(12).buffer);
  return { height, width, values };
}

/** Value at pixel (x, y); throws if out of bounds. */
export function rasterValue(raster: Rf32Raster, x: number, y: number): number {
  if (x < 0 || y < 0 || x >= raster.width || y >= raster.height) {
    throw new Error(`pixel (${x}, ${y}) outside ${raster.width}x${raster.height}`);
  }
  return raster.values[y * raster.width + x];
}
