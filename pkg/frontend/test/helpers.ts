import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

export function makeCsv(rows: [number, number, number][]): string {
  const lines = ["t,err_l2,err_h1semi"];
  for (const [t, e2, e1] of rows) lines.push(`${t},${e2},${e1}`);
  return lines.join("\n") + "\n";
}

export function decayCsv(gamma: number, scale: number, n = 16): string {
  const rows: [number, number, number][] = [];
  for (let k = 0; k <= n; k += 1) {
    const t = (3 * k) / n;
    const e = scale * Math.exp(-gamma * t) + 1e-5;
    rows.push([t, e, 2 * e]);
  }
  return makeCsv(rows);
}

export interface SyntheticOptions {
  mus?: string[];
  gammaRows?: string[];
  withRefs?: boolean;
}

/** Build a synthetic saturation run directory and return its path. */
export function syntheticRunDir(opts: SyntheticOptions = {}): string {
  const dir = mkdtempSync(join(tmpdir(), "nudgefem-fig-"));
  const mus = opts.mus ?? ["4", "64"];
  mus.forEach((mu, i) => {
    writeFileSync(join(dir, `mu${mu}_l6.csv`), decayCsv(1 + i, 2.0));
  });
  if (opts.withRefs ?? true) {
    writeFileSync(join(dir, "ref_projected_l6.csv"), decayCsv(0.05, 0.01));
    writeFileSync(join(dir, "ref_zero_l6.csv"), decayCsv(0.05, 2.0));
  }
  const gammaRows = opts.gammaRows ?? [
    "4\t1\t0.4\t2.0\ttrue",
    "64\t2.3\t0.4\t2.0\ttrue",
  ];
  writeFileSync(
    join(dir, "gamma.tsv"),
    ["mu\tgamma\twindow_start\twindow_end\tdecayed", ...gammaRows].join("\n") + "\n",
  );
  return dir;
}
