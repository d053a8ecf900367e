#!/usr/bin/env node
/**
 * plots <mean-diff|cov-trace|two-panel|gap-vs-M> --csv <file> [--csv <file> ...] --out <figure.svg> [--title <text>]
 *
 * Reads comparison-harness CSVs and writes one deterministic SVG figure.
 * Never recomputes statistics; the CSVs are the single source of truth.
 */

import { readFileSync, writeFileSync } from "fs";

import { parseSeriesCsv } from "./csv.js";
import { PANELS, PanelKind, renderFigure } from "./panels.js";

export interface CliArgs {
  panel: PanelKind;
  csvPaths: string[];
  out: string;
  title?: string;
}

export function parseArgs(argv: string[]): CliArgs {
  if (!argv.length) {
    throw new Error(`usage: plots <${PANELS.join("|")}> --csv <file> [--csv <file> ...] --out <figure.svg>`);
  }
  const [panel, ...rest] = argv;
  if (!(PANELS as readonly string[]).includes(panel)) {
    throw new Error(`unknown panel "${panel}"; expected one of: ${PANELS.join(", ")}`);
  }
  const csvPaths: string[] = [];
  let out: string | null = null;
  let title: string | undefined;
  for (let i = 0; i < rest.length; i++) {
    const flag = rest[i];
    const value = rest[i + 1];
    if (flag === "--csv" || flag === "--out" || flag === "--title") {
      if (value === undefined) throw new Error(`${flag} needs a value`);
      if (flag === "--csv") csvPaths.push(value);
      else if (flag === "--out") out = value;
      else title = value;
      i++;
    } else {
      throw new Error(`unknown flag "${flag}"`);
    }
  }
  if (!csvPaths.length) throw new Error("at least one --csv is required");
  if (!out) throw new Error("--out is required");
  return { panel: panel as PanelKind, csvPaths, out, title };
}

export function main(argv: string[]): number {
  let args: CliArgs;
  try {
    args = parseArgs(argv);
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
  try {
    const tables = args.csvPaths.map((p) => parseSeriesCsv(p, readFileSync(p, "utf-8")));
    writeFileSync(args.out, renderFigure(args.panel, tables, args.title));
    console.log(`wrote ${args.out}`);
    return 0;
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

if (process.argv[1] && /cli\.(ts|js)$/.test(process.argv[1])) {
  process.exit(main(process.argv.slice(2)));
}
