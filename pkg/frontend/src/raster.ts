/** Scene rasterizer + minimal PNG encoder (RGBA, zlib via node, no AA).
 *
 * Kept deliberately simple: 1px-ish strokes, midpoint circles, bitmap text.
 * Good enough for quick-look raster output; publication figures use SVG.
 */

import { deflateSync } from "node:zlib";

import { GLYPH_H, GLYPH_W, glyphRows } from "./font5x7.js";
import { Scene, Shape } from "./scene.js";

export class Raster {
  readonly width: number;
  readonly height: number;
  readonly data: Uint8Array;

  constructor(width: number, height: number, background: string) {
    this.width = width;
    this.height = height;
    this.data = new Uint8Array(width * height * 4);
    const [r, g, b] = parseColor(background);
    for (let i = 0; i < width * height; i++) {
      this.data.set([r, g, b, 255], i * 4);
    }
  }

  set(x: number, y: number, rgb: [number, number, number]): void {
    x = Math.round(x);
    y = Math.round(y);
    if (x < 0 || y < 0 || x >= this.width || y >= this.height) return;
    this.data.set([rgb[0], rgb[1], rgb[2], 255], (y * this.width + x) * 4);
  }
}

export function parseColor(spec: string): [number, number, number] {
  const m = /^#([0-9a-fA-F]{6})$/.exec(spec.trim());
  if (!m) return [0, 0, 0];
  const v = parseInt(m[1], 16);
  return [(v >> 16) & 255, (v >> 8) & 255, v & 255];
}

function drawLine(img: Raster, x1: number, y1: number, x2: number, y2: number, rgb: [number, number, number], width: number, dash?: string): void {
  const dashes = dash ? dash.split(",").map(Number) : null;
  let x = Math.round(x1);
  let y = Math.round(y1);
  const xe = Math.round(x2);
  const ye = Math.round(y2);
  const dx = Math.abs(xe - x);
  const dy = -Math.abs(ye - y);
  const sx = x < xe ? 1 : -1;
  const sy = y < ye ? 1 : -1;
  let err = dx + dy;
  let dist = 0;
  const thick = Math.max(1, Math.round(width));
  for (;;) {
    const on = !dashes || dist % (dashes[0] + dashes[1]) < dashes[0];
    if (on) {
      for (let ox = 0; ox < thick; ox++) {
        for (let oy = 0; oy < thick; oy++) img.set(x + ox - (thick >> 1), y + oy - (thick >> 1), rgb);
      }
    }
    if (x === xe && y === ye) break;
    const e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y += sy;
    }
    dist += 1;
  }
}

function drawCircle(img: Raster, cx: number, cy: number, r: number, rgb: [number, number, number]): void {
  const rr = Math.max(1, Math.round(r));
  for (let y = -rr; y <= rr; y++) {
    for (let x = -rr; x <= rr; x++) {
      if (x * x + y * y <= rr * rr) img.set(cx + x, cy + y, rgb);
    }
  }
}

function drawText(img: Raster, s: Extract<Shape, { kind: "text" }>): void {
  const rgb = parseColor(s.color);
  const scale = Math.max(1, Math.round(s.size / 8));
  const adv = (GLYPH_W + 1) * scale;
  const total = s.text.length * adv - scale;
  let ox: number;
  if (s.anchor === "middle") ox = s.x - total / 2;
  else if (s.anchor === "end") ox = s.x - total;
  else ox = s.x;
  const oy = s.y - GLYPH_H * scale;
  const rot = ((s.rotate ?? 0) * Math.PI) / 180;
  const cos = Math.cos(rot);
  const sin = Math.sin(rot);
  for (let ci = 0; ci < s.text.length; ci++) {
    const rows = glyphRows(s.text[ci]);
    for (let gy = 0; gy < GLYPH_H; gy++) {
      for (let gx = 0; gx < GLYPH_W; gx++) {
        if (!((rows[gy] >> (4 - gx)) & 1)) continue;
        for (let px = 0; px < scale; px++) {
          for (let py = 0; py < scale; py++) {
            const lx = ox + ci * adv + gx * scale + px;
            const ly = oy + gy * scale + py;
            if (rot === 0) {
              img.set(lx, ly, rgb);
            } else {
              const rx = s.x + (lx - s.x) * cos - (ly - s.y) * sin;
              const ry = s.y + (lx - s.x) * sin + (ly - s.y) * cos;
              img.set(rx, ry, rgb);
            }
          }
        }
      }
    }
  }
}

export function rasterize(scene: Scene, shapes: Shape[]): Raster {
  const img = new Raster(scene.width, scene.height, scene.background);
  for (const s of [...scene.shapes, ...shapes]) {
    switch (s.kind) {
      case "line":
        drawLine(img, s.x1, s.y1, s.x2, s.y2, parseColor(s.color), s.width, s.dash);
        break;
      case "polyline":
        for (let i = 1; i < s.pts.length; i++) {
          drawLine(img, s.pts[i - 1][0], s.pts[i - 1][1], s.pts[i][0], s.pts[i][1], parseColor(s.color), s.width, s.dash);
        }
        break;
      case "circle":
        drawCircle(img, s.cx, s.cy, s.r, parseColor(s.fill));
        break;
      case "rect": {
        const rgb = parseColor(s.fill);
        for (let y = 0; y < s.h; y++) {
          for (let x = 0; x < s.w; x++) img.set(s.x + x, s.y + y, rgb);
        }
        break;
      }
      case "text":
        drawText(img, s);
        break;
    }
  }
  return img;
}

// ---------------------------------------------------------------------------
// PNG container
// ---------------------------------------------------------------------------

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    table[n] = c >>> 0;
  }
  return table;
})();

function crc32(buf: Uint8Array): number {
  let c = 0xffffffff;
  for (const b of buf) c = CRC_TABLE[(c ^ b) & 0xff] ^ (c >>> 8);
  return (c ^ 0xffffffff) >>> 0;
}

function chunk(type: string, payload: Uint8Array): Uint8Array {
  const out = new Uint8Array(12 + payload.length);
  const view = new DataView(out.buffer);
  view.setUint32(0, payload.length);
  for (let i = 0; i < 4; i++) out[4 + i] = type.charCodeAt(i);
  out.set(payload, 8);
  view.setUint32(8 + payload.length, crc32(out.subarray(4, 8 + payload.length)));
  return out;
}

export function encodePng(img: Raster): Uint8Array {
  const { width, height, data } = img;
  const ihdr = new Uint8Array(13);
  const v = new DataView(ihdr.buffer);
  v.setUint32(0, width);
  v.setUint32(4, height);
  ihdr[8] = 8; // bit depth
  ihdr[9] = 6; // RGBA
  const raw = new Uint8Array(height * (1 + width * 4));
  for (let y = 0; y < height; y++) {
    raw[y * (1 + width * 4)] = 0; // filter: none
    raw.set(data.subarray(y * width * 4, (y + 1) * width * 4), y * (1 + width * 4) + 1);
  }
  const idat = deflateSync(raw, { level: 9 });
  const sig = Uint8Array.from([137, 80, 78, 71, 13, 10, 26, 10]);
  const parts = [sig, chunk("IHDR", ihdr), chunk("IDAT", idat), chunk("IEND", new Uint8Array(0))];
  const total = parts.reduce((a, p) => a + p.length, 0);
  const out = new Uint8Array(total);
  let off = 0;
  for (const p of parts) {
    out.set(p, off);
    off += p.length;
  }
  return out;
}
