/** Parsers for the solver's run outputs (CSV/TSV/meta.json). */
import { readFileSync, readdirSync, existsSync } from "node:fs";
import { join } from "node:path";

export interface RunSeries {
  /** label derived from the file name, e.g. "mu64_l6" */
  name: string;
  t: number[];
  errL2: number[];
  errH1: number[];
}

export interface GammaRow {
  /** mu exactly as printed in gamma.tsv */
  mu: string;
  /** fitted decay rate exactly as printed ("nan" when no decay phase) */
  gamma: string;
  windowStart: number;
  windowEnd: number;
  decayed: boolean;
}

export interface RatesRow {
  level: number;
  /** remaining columns by header name; "-" parses to null */
  values: Record<string, number | null>;
}

export function parseRunCsv(text: string, name: string): RunSeries {
  const lines = text.trim().split("\n");
  if (lines[0] !== "t,err_l2,err_h1semi") {
    throw new Error(`unexpected CSV header: ${lines[0]}`);
  }
  const t: number[] = [];
  const errL2: number[] = [];
  const errH1: number[] = [];
  for (const line of lines.slice(1)) {
    const cells = line.split(",");
    if (cells.length !== 3) throw new Error(`malformed CSV row: ${line}`);
    t.push(Number(cells[0]));
    errL2.push(Number(cells[1]));
    errH1.push(Number(cells[2]));
  }
  return { name, t, errL2, errH1 };
}

export function parseGammaTsv(text: string): GammaRow[] {
  const lines = text.trim().split("\n");
  if (lines[0] !== "mu\tgamma\twindow_start\twindow_end\tdecayed") {
    throw new Error(`unexpected gamma.tsv header: ${lines[0]}`);
  }
  return lines.slice(1).map((line) => {
    const [mu, gamma, w0, w1, decayed] = line.split("\t");
    return {
      mu,
      gamma,
      windowStart: Number(w0),
      windowEnd: Number(w1),
      decayed: decayed === "true",
    };
  });
}

export function parseRatesTsv(text: string): RatesRow[] {
  const lines = text.trim().split("\n");
  const header = lines[0].split("\t");
  if (header[0] !== "level") {
    throw new Error(`unexpected rates.tsv header: ${lines[0]}`);
  }
  return lines.slice(1).map((line) => {
    const cells = line.split("\t");
    const values: Record<string, number | null> = {};
    header.slice(1).forEach((key, i) => {
      const cell = cells[i + 1];
      values[key] = cell === "-" ? null : Number(cell);
    });
    return { level: Number(cells[0]), values };
  });
}

export interface RunDirectory {
  dir: string;
  /** nudged runs sorted by (mu, level) as encoded in the file names */
  runs: RunSeries[];
  references: RunSeries[];
  gamma: GammaRow[] | null;
  rates: RatesRow[] | null;
}

const RUN_PATTERN = /^mu(.+)_l(\d+)\.csv$/;
const REF_PATTERN = /^ref_(projected|zero)_l(\d+)\.csv$/;

function numericKey(name: string): [number, number] {
  const run = RUN_PATTERN.exec(name);
  if (run) return [Number(run[1]), Number(run[2])];
  const ref = REF_PATTERN.exec(name);
  if (ref) return [Infinity, Number(ref[2])];
  return [Infinity, Infinity];
}

/** Read every run output in a directory produced by the solver CLI. */
export function readRunDirectory(dir: string): RunDirectory {
  if (!existsSync(dir)) throw new Error(`missing run directory: ${dir}`);
  const entries = readdirSync(dir).sort((a, b) => {
    const [ma, la] = numericKey(a);
    const [mb, lb] = numericKey(b);
    return ma - mb || la - lb || a.localeCompare(b);
  });
  const runs: RunSeries[] = [];
  const references: RunSeries[] = [];
  for (const entry of entries) {
    const path = join(dir, entry);
    if (RUN_PATTERN.test(entry)) {
      runs.push(parseRunCsv(readFileSync(path, "utf8"), entry.replace(/\.csv$/, "")));
    } else if (REF_PATTERN.test(entry)) {
      references.push(parseRunCsv(readFileSync(path, "utf8"), entry.replace(/\.csv$/, "")));
    }
  }
  if (runs.length === 0) {
    throw new Error(`no run CSVs (mu<mu>_l<level>.csv) found in ${dir}`);
  }
  const gammaPath = join(dir, "gamma.tsv");
  const ratesPath = join(dir, "rates.tsv");
  return {
    dir,
    runs,
    references,
    gamma: existsSync(gammaPath)
      ? parseGammaTsv(readFileSync(gammaPath, "utf8"))
      : null,
    rates: existsSync(ratesPath)
      ? parseRatesTsv(readFileSync(ratesPath, "utf8"))
      : null,
  };
}
