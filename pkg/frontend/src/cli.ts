#!/usr/bin/env node
/** Render an SVG figure from a solver run directory.
 *
 * Usage:
 *   nudgefem-figures --dir results/saturation/smooth/mean_value \
 *                    --kind saturation --out figures/smooth_mean.svg
 */
import { parseArgs } from "node:util";
import { mkdirSync, writeFileSync } from "node:fs";
import { dirname } from "node:path";
import { readRunDirectory } from "./data.js";
import { FigureKind, renderFigure } from "./figure.js";

export function main(argv: string[]): number {
  const { values } = parseArgs({
    args: argv,
    options: {
      dir: { type: "string" },
      kind: { type: "string" },
      out: { type: "string" },
      "y-min": { type: "string" },
      "y-max": { type: "string" },
    },
  });
  if (!values.dir || !values.out) {
    console.error("required: --dir <run directory> --out <svg path> [--kind saturation|convergence]");
    return 2;
  }
  const kind = (values.kind ?? "saturation") as FigureKind;
  if (kind !== "saturation" && kind !== "convergence") {
    console.error(`unknown figure kind: ${values.kind}`);
    return 2;
  }
  try {
    const data = readRunDirectory(values.dir);
    const svg = renderFigure(
      data,
      kind,
      values["y-min"] !== undefined ? Number(values["y-min"]) : undefined,
      values["y-max"] !== undefined ? Number(values["y-max"]) : undefined,
    );
    mkdirSync(dirname(values.out), { recursive: true });
    writeFileSync(values.out, svg);
  } catch (err) {
    console.error(err instanceof Error ? err.message : String(err));
    return 1;
  }
  return 0;
}

if (import.meta.url === `file://${process.argv[1]}`) {
  process.exit(main(process.argv.slice(2)));
}
