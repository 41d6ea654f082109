#!/usr/bin/env node
/**
 * figviz <kind> --in CSV [--in2 CSV] --out PNG [--style FILE]
 *
 * Kinds: curves, diagnostics, heatmap, segment, sweep.  Exit code 0 on
 * success; schema mismatches and bad arguments exit nonzero with the
 * columns found vs wanted on stderr.
 */
import * as fs from "fs";
import { Kind, RENDERERS } from "./charts";
import { encodePng } from "./png";
import { loadStyle } from "./style";

interface Args {
  kind: Kind;
  inputs: string[];
  out: string;
  style?: string;
}

function parseArgs(argv: string[]): Args {
  if (argv.length === 0) {
    throw new Error(
      "usage: figviz <curves|diagnostics|heatmap|segment|sweep> " +
      "--in CSV [--in2 CSV] --out PNG [--style FILE]");
  }
  const kind = argv[0] as Kind;
  if (!(kind in RENDERERS)) {
    throw new Error(`unknown figure kind '${kind}'; expected one of ` +
      Object.keys(RENDERERS).join(", "));
  }
  const args: Args = { kind, inputs: [], out: "" };
  for (let i = 1; i < argv.length; i += 2) {
    const flag = argv[i];
    const value = argv[i + 1];
    if (value === undefined) {
      throw new Error(`flag ${flag} needs a value`);
    }
    switch (flag) {
      case "--in":
        args.inputs.unshift(value);
        break;
      case "--in2":
        args.inputs.push(value);
        break;
      case "--out":
        args.out = value;
        break;
      case "--style":
        args.style = value;
        break;
      default:
        throw new Error(`unknown flag ${flag}`);
    }
  }
  if (args.inputs.length === 0 || !args.out) {
    throw new Error("both --in and --out are required");
  }
  return args;
}

export function main(argv: string[]): number {
  const args = parseArgs(argv);
  const style = loadStyle(args.style);
  const raster = RENDERERS[args.kind](args.inputs[0], style);
  fs.writeFileSync(args.out, encodePng(raster.width, raster.height,
                                       raster.data));
  process.stdout.write(`wrote ${args.out} (${raster.width}x` +
    `${raster.height})\n`);
  return 0;
}

if (require.main === module) {
  try {
    process.exit(main(process.argv.slice(2)));
  } catch (err) {
    process.stderr.write(`error: ${(err as Error).message}\n`);
    process.exit(1);
  }
}
