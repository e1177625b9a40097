/** Figure-spec schema and validation.
 *
 * {
 *   "curves": [{"csv": "fig2a_cc100.csv", "label": "C_c = 100"}, ...],
 *   "x": "axis_value",
 *   "y": "im_probability",
 *   "yerr": "im_stderr",          // optional error-bar column
 *   "xlabel": "...", "ylabel": "...",
 *   "title": "...",               // optional
 *   "out": "fig2a.svg",
 *   "format": "svg" | "png",
 *   "guide_degree": 3 | null      // optional polynomial guide curve
 * }
 *
 * Relative csv/out paths are resolved against the spec file's directory.
 */

import { existsSync, readFileSync } from "node:fs";
import path from "node:path";

import { parseCsv, Table } from "./csv.js";

export interface CurveSpec {
  csv: string;
  label: string;
}

export interface FigureSpec {
  curves: CurveSpec[];
  x: string;
  y: string;
  yerr?: string | null;
  xlabel?: string;
  ylabel?: string;
  title?: string;
  out: string;
  format: "svg" | "png";
  guide_degree?: number | null;
}

export interface LoadedCurve {
  label: string;
  x: number[];
  y: number[];
  yerr: number[] | null;
}

export class SpecError extends Error {}

export function loadSpec(specPath: string): { spec: FigureSpec; curves: LoadedCurve[]; outPath: string } {
  const baseDir = path.dirname(path.resolve(specPath));
  const spec = JSON.parse(readFileSync(specPath, "utf-8")) as FigureSpec;
  if (!Array.isArray(spec.curves) || spec.curves.length === 0) {
    throw new SpecError("figure spec needs a non-empty curves list");
  }
  if (!spec.x || !spec.y || !spec.out) {
    throw new SpecError("figure spec needs x, y and out fields");
  }
  if (spec.format !== "svg" && spec.format !== "png") {
    throw new SpecError(`format must be "svg" or "png", got ${JSON.stringify(spec.format)}`);
  }
  const curves = spec.curves.map((c) => loadCurve(baseDir, c, spec));
  return { spec, curves, outPath: path.resolve(baseDir, spec.out) };
}

function loadCurve(baseDir: string, curve: CurveSpec, spec: FigureSpec): LoadedCurve {
  const csvPath = path.resolve(baseDir, curve.csv);
  if (!existsSync(csvPath)) {
    throw new SpecError(`curve ${JSON.stringify(curve.label)}: csv not found: ${csvPath}`);
  }
  const table: Table = parseCsv(readFileSync(csvPath, "utf-8"));
  const needed = [spec.x, spec.y, ...(spec.yerr ? [spec.yerr] : [])];
  const missing = needed.filter((c) => !table.columns.includes(c));
  if (missing.length > 0) {
    throw new SpecError(`curve ${JSON.stringify(curve.label)}: missing columns: ${missing.join(", ")}`);
  }
  // skipped sweep points have empty metric cells; drop them
  const ok = table.rows.filter((r) => r[spec.x] !== "" && r[spec.y] !== "");
  return {
    label: curve.label,
    x: ok.map((r) => Number(r[spec.x])),
    y: ok.map((r) => Number(r[spec.y])),
    yerr: spec.yerr ? ok.map((r) => Number(r[spec.yerr as string])) : null,
  };
}
