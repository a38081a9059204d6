#!/usr/bin/env node
/**
 * milestoning-plot --kind <kind> --in <csv> [--in <csv>] --out <svg>
 *                  [--title T] [--overlay partition.csv] [--width N] [--height N]
 *
 * Kinds: flux-bars | reservoir-scatter | milestone-hist | heatmap | convergence
 */

import { writeFileSync } from "fs";
import { SchemaError } from "./csv.js";
import { FigureRequest, render } from "./render.js";

export function parseArgs(argv: string[]): FigureRequest {
  const inputs: string[] = [];
  let kind = "";
  let output = "";
  let title: string | undefined;
  let overlay: string | undefined;
  let width: number | undefined;
  let height: number | undefined;
  for (let i = 0; i < argv.length; i++) {
    const a = argv[i];
    const next = () => {
      i += 1;
      if (i >= argv.length) throw new SchemaError(`missing value after ${a}`);
      return argv[i];
    };
    switch (a) {
      case "--kind":
        kind = next();
        break;
      case "--in":
        inputs.push(next());
        break;
      case "--out":
        output = next();
        break;
      case "--title":
        title = next();
        break;
      case "--overlay":
        overlay = next();
        break;
      case "--width":
        width = Number(next());
        break;
      case "--height":
        height = Number(next());
        break;
      default:
        throw new SchemaError(`unknown flag ${a}`);
    }
  }
  const kinds = ["flux-bars", "reservoir-scatter", "milestone-hist", "heatmap", "convergence"];
  if (!kinds.includes(kind)) {
    throw new SchemaError(`--kind must be one of ${kinds.join(", ")}`);
  }
  if (inputs.length === 0) throw new SchemaError("at least one --in is required");
  if (!output) throw new SchemaError("--out is required");
  return { kind: kind as FigureRequest["kind"], inputs, output, title, overlay, width, height };
}

export function main(argv: string[]): number {
  let req: FigureRequest;
  try {
    req = parseArgs(argv);
    const { svg, note } = render(req);
    writeFileSync(req.output, svg, "utf-8");
    console.log(`${req.output}: ${note}`);
    return 0;
  } catch (err) {
    if (err instanceof SchemaError || err instanceof Error) {
      console.error(`error: ${err.message}`);
      return 1;
    }
    throw err;
  }
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url.endsWith(process.argv[1].split("/").pop() ?? "");
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
