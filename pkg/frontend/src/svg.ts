/** Serialize a scene to a standalone SVG document (deterministic bytes). */

import { Scene, Shape } from "./scene.js";

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;").replace(/"/g, "&quot;");
}

function num(v: number): string {
  return Number(v.toFixed(3)).toString();
}

function attrs(pairs: [string, string | undefined][]): string {
  return pairs
    .filter(([, v]) => v !== undefined)
    .map(([k, v]) => ` ${k}="${v}"`)
    .join("");
}

function shapeSvg(s: Shape): string {
  const cls: [string, string | undefined] = ["class", s.cls];
  switch (s.kind) {
    case "line":
      return `<line${attrs([
        cls,
        ["x1", num(s.x1)],
        ["y1", num(s.y1)],
        ["x2", num(s.x2)],
        ["y2", num(s.y2)],
        ["stroke", s.color],
        ["stroke-width", num(s.width)],
        ["stroke-dasharray", s.dash],
      ])}/>`;
    case "polyline":
      return `<polyline${attrs([
        cls,
        ["points", s.pts.map(([x, y]) => `${num(x)},${num(y)}`).join(" ")],
        ["fill", "none"],
        ["stroke", s.color],
        ["stroke-width", num(s.width)],
        ["stroke-dasharray", s.dash],
      ])}/>`;
    case "circle":
      return `<circle${attrs([cls, ["cx", num(s.cx)], ["cy", num(s.cy)], ["r", num(s.r)], ["fill", s.fill]])}/>`;
    case "rect":
      return `<rect${attrs([
        cls,
        ["x", num(s.x)],
        ["y", num(s.y)],
        ["width", num(s.w)],
        ["height", num(s.h)],
        ["fill", s.fill],
        ["stroke", s.stroke],
      ])}/>`;
    case "text": {
      const transform = s.rotate ? `rotate(${num(s.rotate)} ${num(s.x)} ${num(s.y)})` : undefined;
      return `<text${attrs([
        cls,
        ["x", num(s.x)],
        ["y", num(s.y)],
        ["font-size", num(s.size)],
        ["fill", s.color],
        ["text-anchor", s.anchor],
        ["font-family", "Helvetica, Arial, sans-serif"],
        ["transform", transform],
      ])}>${esc(s.text)}</text>`;
    }
  }
}

export function renderSvg(scene: Scene, groups: { cls: string; label?: string; shapes: Shape[] }[]): string {
  const head =
    `<svg xmlns="http://www.w3.org/2000/svg" width="${scene.width}" height="${scene.height}" ` +
    `viewBox="0 0 ${scene.width} ${scene.height}">`;
  const bg = `<rect width="${scene.width}" height="${scene.height}" fill="${scene.background}"/>`;
  const body = scene.shapes.map(shapeSvg);
  const grouped = groups.map(
    (g) =>
      `<g class="${g.cls}"${g.label !== undefined ? ` data-label="${esc(g.label)}"` : ""}>` +
      g.shapes.map(shapeSvg).join("") +
      "</g>"
  );
  return [head, bg, ...body, ...grouped, "</svg>"].join("\n") + "\n";
}
