/** Minimal raw-RGB image handling for the optional rendering pipeline.
 *
 * There is no renderer at desk scale, so images stay simple: interleaved
 * 8-bit RGB buffers with binary PPM (P6) I/O for interchange. Stitching
 * concatenates three equal-height views left to right; the half-resize
 * mirrors the training-time memory optimization.
 */

export interface RawImage {
  width: number;
  height: number;
  /** Interleaved RGB, length = width * height * 3. */
  data: Uint8Array;
}

export function makeImage(width: number, height: number, fill: [number, number, number] = [0, 0, 0]): RawImage {
  const data = new Uint8Array(width * height * 3);
  for (let i = 0; i < width * height; i++) {
    data[3 * i] = fill[0];
    data[3 * i + 1] = fill[1];
    data[3 * i + 2] = fill[2];
  }
  return { width, height, data };
}

/** Horizontal concatenation of three equal-height views (left, center, right). */
export function stitchPanorama(views: RawImage[]): RawImage {
  if (views.length !== 3) {
    throw new Error(`stitchPanorama expects exactly 3 views, got ${views.length}`);
  }
  const height = views[0].height;
  if (!views.every((v) => v.height === height)) {
    throw new Error("stitchPanorama requires equal-height views");
  }
  const width = views.reduce((acc, v) => acc + v.width, 0);
  const out = new Uint8Array(width * height * 3);
  let xOffset = 0;
  for (const view of views) {
    for (let y = 0; y < height; y++) {
      const srcStart = y * view.width * 3;
      const dstStart = (y * width + xOffset) * 3;
      out.set(view.data.subarray(srcStart, srcStart + view.width * 3), dstStart);
    }
    xOffset += view.width;
  }
  return { width, height, data: out };
}

/** Box-filtered half-resolution resize (2x2 averaging, floor dimensions). */
export function resizeHalf(image: RawImage): RawImage {
  const width = Math.floor(image.width / 2);
  const height = Math.floor(image.height / 2);
  if (width === 0 || height === 0) {
    throw new Error("image too small to halve");
  }
  const out = new Uint8Array(width * height * 3);
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      for (let c = 0; c < 3; c++) {
        const a = image.data[((2 * y) * image.width + 2 * x) * 3 + c];
        const b = image.data[((2 * y) * image.width + 2 * x + 1) * 3 + c];
        const d = image.data[((2 * y + 1) * image.width + 2 * x) * 3 + c];
        const e = image.data[((2 * y + 1) * image.width + 2 * x + 1) * 3 + c];
        out[(y * width + x) * 3 + c] = Math.round((a + b + d + e) / 4);
      }
    }
  }
  return { width, height, data: out };
}

export function encodePpm(image: RawImage): Uint8Array {
  const header = Buffer.from(`P6\n${image.width} ${image.height}\n255\n`, "ascii");
  return Buffer.concat([header, Buffer.from(image.data)]);
}

export function decodePpm(bytes: Uint8Array): RawImage {
  const buf = Buffer.from(bytes);
  // header: magic, width, height, maxval, separated by whitespace
  let pos = 0;
  const fields: string[] = [];
  while (fields.length < 4 && pos < buf.length) {
    while (pos < buf.length && /\s/.test(String.fromCharCode(buf[pos]))) pos++;
    if (buf[pos] === 0x23) {
      // comment line
      while (pos < buf.length && buf[pos] !== 0x0a) pos++;
      continue;
    }
    let start = pos;
    while (pos < buf.length && !/\s/.test(String.fromCharCode(buf[pos]))) pos++;
    fields.push(buf.subarray(start, pos).toString("ascii"));
  }
  if (fields[0] !== "P6") throw new Error(`unsupported PPM magic ${fields[0]}`);
  const [width, height, maxval] = fields.slice(1).map((f) => parseInt(f, 10));
  if (maxval !== 255) throw new Error("only 8-bit PPM supported");
  pos += 1; // single whitespace after maxval
  const expected = width * height * 3;
  const data = new Uint8Array(buf.subarray(pos, pos + expected));
  if (data.length !== expected) throw new Error("truncated PPM payload");
  return { width, height, data };
}
