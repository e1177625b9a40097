/** Build the figure scene: axes, markers with error bars, optional
 * polynomial guide curves, legend. */

import { FigureSpec, LoadedCurve } from "./figspec.js";
import { polyfit } from "./polyfit.js";
import { PALETTE, Scene, Shape } from "./scene.js";
import { fmtTick, linearScale, niceTicks, padded } from "./scale.js";

const W = 640;
const H = 440;
const MARGIN = { left: 72, right: 24, top: 40, bottom: 56 };

export interface Figure {
  scene: Scene;
  groups: { cls: string; label?: string; shapes: Shape[] }[];
}

export function buildFigure(spec: FigureSpec, curves: LoadedCurve[]): Figure {
  const xs = curves.flatMap((c) => c.x);
  const ys = curves.flatMap((c, ) => c.y.map((v, i) => v + (c.yerr ? c.yerr[i] : 0)));
  const ysLo = curves.flatMap((c) => c.y.map((v, i) => v - (c.yerr ? c.yerr[i] : 0)));
  const xDom = padded(Math.min(...xs), Math.max(...xs));
  const yDom = padded(Math.min(...ysLo), Math.max(...ys));
  const sx = linearScale(xDom, [MARGIN.left, W - MARGIN.right]);
  const sy = linearScale(yDom, [H - MARGIN.bottom, MARGIN.top]);

  const frame: Shape[] = [];
  const x0 = MARGIN.left;
  const x1 = W - MARGIN.right;
  const y0 = H - MARGIN.bottom;
  const y1 = MARGIN.top;
  frame.push({ kind: "line", x1: x0, y1: y0, x2: x1, y2: y0, color: "#333", width: 1, cls: "axis" });
  frame.push({ kind: "line", x1: x0, y1: y0, x2: x0, y2: y1, color: "#333", width: 1, cls: "axis" });
  for (const t of niceTicks(sx.domain[0], sx.domain[1])) {
    const px = sx.map(t);
    frame.push({ kind: "line", x1: px, y1: y0, x2: px, y2: y0 + 5, color: "#333", width: 1, cls: "tick" });
    frame.push({ kind: "text", x: px, y: y0 + 18, text: fmtTick(t), size: 11, color: "#333", anchor: "middle", cls: "tick-label" });
  }
  for (const t of niceTicks(sy.domain[0], sy.domain[1])) {
    const py = sy.map(t);
    frame.push({ kind: "line", x1: x0 - 5, y1: py, x2: x0, y2: py, color: "#333", width: 1, cls: "tick" });
    frame.push({ kind: "text", x: x0 - 8, y: py + 4, text: fmtTick(t), size: 11, color: "#333", anchor: "end", cls: "tick-label" });
    frame.push({ kind: "line", x1: x0, y1: py, x2: x1, y2: py, color: "#e5e5e5", width: 0.5, cls: "grid" });
  }
  if (spec.xlabel) {
    frame.push({ kind: "text", x: (x0 + x1) / 2, y: H - 14, text: spec.xlabel, size: 13, color: "#111", anchor: "middle", cls: "xlabel" });
  }
  if (spec.ylabel) {
    frame.push({ kind: "text", x: 18, y: (y0 + y1) / 2, text: spec.ylabel, size: 13, color: "#111", anchor: "middle", rotate: -90, cls: "ylabel" });
  }
  if (spec.title) {
    frame.push({ kind: "text", x: (x0 + x1) / 2, y: 22, text: spec.title, size: 14, color: "#111", anchor: "middle", cls: "title" });
  }

  const groups: Figure["groups"] = [];
  curves.forEach((curve, ci) => {
    const color = PALETTE[ci % PALETTE.length];
    const shapes: Shape[] = [];
    const order = curve.x.map((_, i) => i).sort((a, b) => curve.x[a] - curve.x[b]);
    const gx = order.map((i) => curve.x[i]);
    const gy = order.map((i) => curve.y[i]);
    const degree = spec.guide_degree ?? null;
    if (degree !== null && gx.length > 1) {
      const fit = polyfit(gx, gy, degree);
      const pts: [number, number][] = [];
      const lo = Math.min(...gx);
      const hi = Math.max(...gx);
      for (let i = 0; i <= 100; i++) {
        const v = lo + ((hi - lo) * i) / 100;
        pts.push([sx.map(v), sy.map(fit(v))]);
      }
      shapes.push({ kind: "polyline", pts, color, width: 1.5, cls: "guide" });
    }
    order.forEach((i) => {
      const px = sx.map(curve.x[i]);
      const py = sy.map(curve.y[i]);
      if (curve.yerr) {
        const e = curve.yerr[i];
        const yLo = sy.map(curve.y[i] - e);
        const yHi = sy.map(curve.y[i] + e);
        shapes.push({ kind: "line", x1: px, y1: yLo, x2: px, y2: yHi, color, width: 1, cls: "errorbar" });
        shapes.push({ kind: "line", x1: px - 3, y1: yLo, x2: px + 3, y2: yLo, color, width: 1, cls: "errorbar-cap" });
        shapes.push({ kind: "line", x1: px - 3, y1: yHi, x2: px + 3, y2: yHi, color, width: 1, cls: "errorbar-cap" });
      }
      shapes.push({ kind: "circle", cx: px, cy: py, r: 3.2, fill: color, cls: "marker" });
    });
    // legend entry
    const ly = MARGIN.top + 6 + ci * 18;
    shapes.push({ kind: "circle", cx: x1 - 130, cy: ly, r: 3.2, fill: color, cls: "legend-marker" });
    shapes.push({ kind: "text", x: x1 - 120, y: ly + 4, text: curve.label, size: 12, color: "#111", anchor: "start", cls: "legend-label" });
    groups.push({ cls: "series", label: curve.label, shapes });
  });

  return { scene: { width: W, height: H, background: "#ffffff", shapes: frame }, groups };
}

/** y-pixel for a data value under the same scaling buildFigure uses (test hook). */
export function yPixelFor(spec: FigureSpec, curves: LoadedCurve[], value: number): number {
  const ys = curves.flatMap((c) => c.y.map((v, i) => v + (c.yerr ? c.yerr[i] : 0)));
  const ysLo = curves.flatMap((c) => c.y.map((v, i) => v - (c.yerr ? c.yerr[i] : 0)));
  const yDom = padded(Math.min(...ysLo), Math.max(...ys));
  return linearScale(yDom, [H - MARGIN.bottom, MARGIN.top]).map(value);
}
