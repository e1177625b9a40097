#!/usr/bin/env node
/** plotkit <figure-spec.json> [...more specs]
 *
 * Renders sweep CSVs into SVG or PNG figures; see figspec.ts for the schema.
 * Exit codes: 0 ok, 2 spec/schema error.
 */

import { writeFileSync } from "node:fs";

import { loadSpec, SpecError } from "./figspec.js";
import { buildFigure } from "./plot.js";
import { encodePng, rasterize } from "./raster.js";
import { renderSvg } from "./svg.js";

export function renderSpecFile(specPath: string): string {
  const { spec, curves, outPath } = loadSpec(specPath);
  const figure = buildFigure(spec, curves);
  if (spec.format === "svg") {
    writeFileSync(outPath, renderSvg(figure.scene, figure.groups));
  } else {
    const img = rasterize(
      figure.scene,
      figure.groups.flatMap((g) => g.shapes)
    );
    writeFileSync(outPath, encodePng(img));
  }
  return outPath;
}

export function main(argv: string[]): number {
  if (argv.length === 0) {
    console.error("usage: plotkit <figure-spec.json> [...]");
    return 2;
  }
  try {
    for (const specPath of argv) {
      const out = renderSpecFile(specPath);
      console.log(`wrote ${out}`);
    }
    return 0;
  } catch (err) {
    if (err instanceof SpecError) {
      console.error(`figure-spec error: ${err.message}`);
      return 2;
    }
    throw err;
  }
}

const invokedDirectly = process.argv[1] && import.meta.url.endsWith(process.argv[1].split("/").pop() as string);
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
