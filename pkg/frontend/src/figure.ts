/** Deterministic SVG rendering of saturation / convergence figures.
 *
 * Semilog-y error-vs-time plots: one curve per mu (saturation) or per level
 * (convergence), the two non-nudged reference curves (solid projected-IC,
 * dashed zero-IC), and a slope triangle annotated with the fitted decay
 * rate taken verbatim from gamma.tsv when present. Rendering is a pure
 * function of the input files: no timestamps, fixed styles.
 */
import { GammaRow, RunDirectory, RunSeries } from "./data.js";

export type FigureKind = "saturation" | "convergence";

export interface FigureSpec {
  runDir: string;
  kind: FigureKind;
  outPath: string;
  yMin?: number;
  yMax?: number;
}

/** Log-scale floor: values at or below this are clamped before log10. */
export const LOG_FLOOR = 1e-16;

const WIDTH = 720;
const HEIGHT = 480;
const MARGIN = { left: 70, right: 170, top: 30, bottom: 50 };

const PALETTE = [
  "#1f77b4", "#d62728", "#2ca02c", "#9467bd",
  "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;");
}

function curveLabel(kind: FigureKind, name: string): string {
  const match = /^mu(.+)_l(\d+)$/.exec(name);
  if (!match) return name;
  return kind === "saturation" ? `mu=${match[1]}` : `level ${match[2]}`;
}

interface Scale {
  x(t: number): number;
  y(e: number): number;
  tMax: number;
  logMin: number;
  logMax: number;
}

function makeScale(series: RunSeries[], yMin?: number, yMax?: number): Scale {
  const tMax = Math.max(...series.map((s) => s.t[s.t.length - 1]));
  let lo = Infinity;
  let hi = -Infinity;
  for (const s of series) {
    for (const e of s.errL2) {
      const v = Math.log10(Math.max(e, LOG_FLOOR));
      lo = Math.min(lo, v);
      hi = Math.max(hi, v);
    }
  }
  const logMin = yMin !== undefined ? Math.log10(yMin) : Math.floor(lo) - 0.2;
  const logMax = yMax !== undefined ? Math.log10(yMax) : Math.ceil(hi) + 0.2;
  const plotW = WIDTH - MARGIN.left - MARGIN.right;
  const plotH = HEIGHT - MARGIN.top - MARGIN.bottom;
  return {
    x: (t) => MARGIN.left + (t / tMax) * plotW,
    y: (e) => {
      const v = Math.log10(Math.max(e, LOG_FLOOR));
      return MARGIN.top + ((logMax - v) / (logMax - logMin)) * plotH;
    },
    tMax,
    logMin,
    logMax,
  };
}

function polyline(s: RunSeries, scale: Scale, stroke: string,
                  dash: string | null): string {
  const pts = s.t
    .map((t, i) => `${scale.x(t).toFixed(2)},${scale.y(s.errL2[i]).toFixed(2)}`)
    .join(" ");
  const dashAttr = dash ? ` stroke-dasharray="${dash}"` : "";
  return `<polyline fill="none" stroke="${stroke}" stroke-width="1.5"${dashAttr} points="${pts}"/>`;
}

function axes(scale: Scale): string {
  const parts: string[] = [];
  const x0 = MARGIN.left;
  const x1 = WIDTH - MARGIN.right;
  const y0 = HEIGHT - MARGIN.bottom;
  const y1 = MARGIN.top;
  parts.push(`<rect x="${x0}" y="${y1}" width="${x1 - x0}" height="${y0 - y1}" fill="none" stroke="#000"/>`);
  // x ticks every 0.5 time units
  for (let t = 0; t <= scale.tMax + 1e-9; t += 0.5) {
    const x = scale.x(t);
    parts.push(`<line x1="${x.toFixed(2)}" y1="${y0}" x2="${x.toFixed(2)}" y2="${y0 + 5}" stroke="#000"/>`);
    parts.push(`<text x="${x.toFixed(2)}" y="${y0 + 20}" font-size="11" text-anchor="middle">${t}</text>`);
  }
  parts.push(`<text x="${(x0 + x1) / 2}" y="${HEIGHT - 12}" font-size="12" text-anchor="middle">t</text>`);
  // y ticks at integer powers of ten
  for (let p = Math.ceil(scale.logMin); p <= Math.floor(scale.logMax); p += 1) {
    const y = scale.y(Math.pow(10, p));
    parts.push(`<line x1="${x0 - 5}" y1="${y.toFixed(2)}" x2="${x0}" y2="${y.toFixed(2)}" stroke="#000"/>`);
    parts.push(`<text x="${x0 - 8}" y="${(y + 4).toFixed(2)}" font-size="11" text-anchor="end">1e${p}</text>`);
  }
  parts.push(`<text x="18" y="${(y0 + y1) / 2}" font-size="12" text-anchor="middle" transform="rotate(-90 18 ${(y0 + y1) / 2})">L2 error</text>`);
  return parts.join("\n");
}

function legend(entries: { label: string; color: string; dash: string | null }[]): string {
  const x = WIDTH - MARGIN.right + 12;
  return entries
    .map((entry, i) => {
      const y = MARGIN.top + 16 + i * 18;
      const dashAttr = entry.dash ? ` stroke-dasharray="${entry.dash}"` : "";
      return (
        `<line x1="${x}" y1="${y}" x2="${x + 24}" y2="${y}" stroke="${entry.color}" stroke-width="1.5"${dashAttr}/>` +
        `<text x="${x + 30}" y="${y + 4}" font-size="11">${esc(entry.label)}</text>`
      );
    })
    .join("\n");
}

/** Pick the gamma row to annotate: the decayed fit of the largest mu. */
export function annotationRow(gamma: GammaRow[]): GammaRow | null {
  const decayed = gamma.filter((g) => g.decayed);
  if (decayed.length === 0) return null;
  return decayed.reduce((a, b) => (Number(b.mu) > Number(a.mu) ? b : a));
}

function slopeTriangle(row: GammaRow, scale: Scale): string {
  const gammaValue = Number(row.gamma);
  const t0 = row.windowStart;
  const t1 = Math.min(row.windowEnd, t0 + Math.max((row.windowEnd - t0) / 2, 0.1));
  // reference line of slope -gamma in log space, placed inside the window
  const e0 = Math.pow(10, scale.logMax - 1);
  const e1 = e0 * Math.exp(-gammaValue * (t1 - t0));
  const xA = scale.x(t0);
  const yA = scale.y(e0);
  const xB = scale.x(t1);
  const yB = scale.y(Math.max(e1, LOG_FLOOR));
  return (
    `<path d="M ${xA.toFixed(2)} ${yA.toFixed(2)} L ${xB.toFixed(2)} ${yA.toFixed(2)} L ${xB.toFixed(2)} ${yB.toFixed(2)} Z" fill="none" stroke="#333"/>` +
    `<text x="${(xB + 6).toFixed(2)}" y="${((yA + yB) / 2).toFixed(2)}" font-size="11" class="gamma-annotation">&#947; = ${esc(row.gamma)}</text>`
  );
}

export function renderFigure(data: RunDirectory, kind: FigureKind,
                             yMin?: number, yMax?: number): string {
  const all = [...data.runs, ...data.references];
  const scale = makeScale(all, yMin, yMax);
  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}">`,
  );
  parts.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="#fff"/>`);
  parts.push(axes(scale));

  const legendEntries: { label: string; color: string; dash: string | null }[] = [];
  data.runs.forEach((s, i) => {
    const color = PALETTE[i % PALETTE.length];
    parts.push(polyline(s, scale, color, null));
    legendEntries.push({ label: curveLabel(kind, s.name), color, dash: null });
  });
  for (const ref of data.references) {
    const dash = ref.name.startsWith("ref_zero") ? "6,3" : null;
    parts.push(polyline(ref, scale, "#000", dash));
    legendEntries.push({
      label: ref.name.startsWith("ref_zero") ? "reference (zero IC)" : "reference (projected IC)",
      color: "#000",
      dash,
    });
  }
  parts.push(legend(legendEntries));

  if (kind === "saturation" && data.gamma) {
    const row = annotationRow(data.gamma);
    if (row) parts.push(slopeTriangle(row, scale));
  }
  parts.push("</svg>");
  return parts.join("\n") + "\n";
}
