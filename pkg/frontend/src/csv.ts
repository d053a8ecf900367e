/**
 * Reader for the comparison-harness CSV schema.
 *
 * Base columns:
 *   t,mean_diff_norm,mean_diff_stderr,opt_cov_trace,opt_cov_stderr,
 *   emp_cov_trace,emp_cov_stderr,cov_gap,cov_gap_stderr
 * optionally followed by theory columns:
 *   theory_P,theory_QM,theory_gap,theory_bound
 *
 * The header is validated before anything is plotted; a mismatch raises an
 * error naming the offending columns.  Statistics are never recomputed here.
 */

export const BASE_COLUMNS = [
  "t",
  "mean_diff_norm",
  "mean_diff_stderr",
  "opt_cov_trace",
  "opt_cov_stderr",
  "emp_cov_trace",
  "emp_cov_stderr",
  "cov_gap",
  "cov_gap_stderr",
] as const;

export const THEORY_COLUMNS = ["theory_P", "theory_QM", "theory_gap", "theory_bound"] as const;

export interface SeriesTable {
  /** Source path, used for labels and for the M / lambda tags. */
  path: string;
  columns: string[];
  /** Column-major numeric data, one array per column. */
  data: Map<string, number[]>;
  hasTheory: boolean;
  /** Ensemble size parsed from a `_M<digits>` filename tag, if present. */
  M: number | null;
  /** Sampling rate parsed from a `_lam<number>` filename tag, if present. */
  lambda: number | null;
}

export function mFromFilename(path: string): number | null {
  const m = /_M(\d+)\.csv$/.exec(path);
  return m ? Number(m[1]) : null;
}

export function lambdaFromFilename(path: string): number | null {
  const m = /_lam([0-9eE.+-]+)_M\d+\.csv$/.exec(path);
  return m ? Number(m[1]) : null;
}

function validateHeader(header: string[], path: string): boolean {
  const base = BASE_COLUMNS as readonly string[];
  const full = [...base, ...THEORY_COLUMNS];
  const matches = (want: readonly string[]) =>
    header.length === want.length && want.every((c, i) => header[i] === c);
  if (matches(base)) return false;
  if (matches(full)) return true;
  const missing = base.filter((c) => !header.includes(c));
  const unexpected = header.filter((c) => !full.includes(c));
  const parts = [`${path}: header does not match the harness CSV schema`];
  if (missing.length) parts.push(`missing columns: ${missing.join(", ")}`);
  if (unexpected.length) parts.push(`unexpected columns: ${unexpected.join(", ")}`);
  if (!missing.length && !unexpected.length) parts.push(`column order differs from the schema`);
  throw new Error(parts.join("; "));
}

export function parseSeriesCsv(path: string, text: string): SeriesTable {
  const lines = text.split("\n").filter((line) => line.length > 0);
  if (lines.length < 2) {
    throw new Error(`${path}: expected a header and at least one data row`);
  }
  const header = lines[0].split(",");
  const hasTheory = validateHeader(header, path);
  const data = new Map<string, number[]>(header.map((c) => [c, []]));
  for (let i = 1; i < lines.length; i++) {
    const cells = lines[i].split(",");
    if (cells.length !== header.length) {
      throw new Error(`${path}: row ${i + 1} has ${cells.length} cells, expected ${header.length}`);
    }
    for (let j = 0; j < header.length; j++) {
      data.get(header[j])!.push(Number(cells[j]));
    }
  }
  return {
    path,
    columns: header,
    data,
    hasTheory,
    M: mFromFilename(path),
    lambda: lambdaFromFilename(path),
  };
}

export function column(table: SeriesTable, name: string): number[] {
  const values = table.data.get(name);
  if (!values) {
    throw new Error(`${table.path}: column ${name} is not present`);
  }
  return values;
}

/** Mean of a column over the second half of the time grid (settled window). */
export function lateWindowMean(table: SeriesTable, name: string): number {
  const t = column(table, "t");
  const values = column(table, name);
  const tHalf = t[t.length - 1] / 2;
  let sum = 0;
  let count = 0;
  for (let i = 0; i < t.length; i++) {
    if (t[i] >= tHalf) {
      sum += values[i];
      count += 1;
    }
  }
  return sum / count;
}
