#!/usr/bin/env node
import { readFileSync, writeFileSync } from "node:fs";
import yargs from "yargs";
import { hideBin } from "yargs/helpers";
import { FIGURE_KINDS, FigureKind, render } from "./figures.js";

export function run(argv: string[]): number {
  let args: { csv: string; kind: string; out: string };
  try {
    args = yargs(argv)
      .option("csv", { type: "string", demandOption: true,
                       describe: "input results/timeseries CSV" })
      .option("kind", { type: "string", demandOption: true,
                        choices: FIGURE_KINDS as unknown as string[] })
      .option("out", { type: "string", demandOption: true,
                       describe: "output SVG path" })
      .strict()
      .exitProcess(false)
      .parseSync();
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }

  let text: string;
  try {
    text = readFileSync(args.csv, "utf-8");
  } catch (err) {
    console.error(`error: cannot read ${args.csv}: ${(err as Error).message}`);
    return 1;
  }
  let svg: string;
  try {
    svg = render(args.kind as FigureKind, text);
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
  writeFileSync(args.out, svg);
  return 0;
}

const entry = process.argv[1] ?? "";
if (entry.endsWith("cli.js") || entry.endsWith("secoal-plot")) {
  process.exit(run(hideBin(process.argv)));
}
