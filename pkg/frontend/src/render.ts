/** SVG figure renderer: stacked reference-vs-actual panels with step
 * boundary annotations, written without any drawing dependency. */

import {
  SimLog,
  SchemaError,
  column,
  requireColumns,
  stepBoundaries,
} from "./simlog.js";

export interface PlotSpec {
  channels: string[]; // actual-value column names; ref_<name> is overlaid when present
  title?: string;
  width?: number;
  panelHeight?: number;
}

export const BASE_CHANNELS = ["x", "y", "z", "roll", "pitch", "yaw"];
export const ARM_CHANNELS = ["qm1", "qm2", "qm3", "qm4"];
export const ACTUATOR_GROUPS: { label: string; cols: string[] }[] = [
  { label: "thrust T [N]", cols: ["act_T1", "act_T2", "act_T3", "act_T4"] },
  { label: "tilt alpha [rad]", cols: ["act_alpha1", "act_alpha2", "act_alpha3", "act_alpha4"] },
  { label: "twist beta [rad]", cols: ["act_beta1", "act_beta2", "act_beta3", "act_beta4"] },
];

export function defaultChannels(): string[] {
  return [...BASE_CHANNELS, ...ARM_CHANNELS];
}

const STEP_GLYPHS = ["①", "②", "③", "④", "⑤", "⑥", "⑦", "⑧"];
const SERIES_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

interface Scale {
  (v: number): number;
}

function linearScale(lo: number, hi: number, a: number, b: number): Scale {
  const span = hi - lo || 1.0;
  return (v: number) => a + ((v - lo) / span) * (b - a);
}

function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (Number.isFinite(v)) {
      if (v < lo) lo = v;
      if (v > hi) hi = v;
    }
  }
  if (!Number.isFinite(lo)) return [0, 1];
  if (hi - lo < 1e-9) {
    lo -= 0.5;
    hi += 0.5;
  }
  return [lo, hi];
}

function polyline(t: number[], v: number[], sx: Scale, sy: Scale): string {
  const pts: string[] = [];
  for (let i = 0; i < t.length; i++) {
    if (Number.isFinite(v[i])) {
      pts.push(`${sx(t[i]).toFixed(2)},${sy(v[i]).toFixed(2)}`);
    }
  }
  return pts.join(" ");
}

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

interface Panel {
  label: string;
  series: { values: number[]; color: string; dashed: boolean; name: string }[];
}

export function renderFigure(log: SimLog, spec: PlotSpec): string {
  if (!spec.channels || spec.channels.length === 0) {
    throw new SchemaError("no channels selected");
  }
  requireColumns(log, ["t", ...spec.channels]);
  const t = column(log, "t");
  const panels: Panel[] = [];
  for (const ch of spec.channels) {
    const series = [
      { values: column(log, ch), color: SERIES_COLORS[1], dashed: false, name: ch },
    ];
    const refName = `ref_${ch}`;
    if (log.columns.includes(refName)) {
      series.unshift({
        values: column(log, refName),
        color: SERIES_COLORS[0],
        dashed: true,
        name: refName,
      });
    }
    panels.push({ label: ch, series });
  }
  for (const group of ACTUATOR_GROUPS) {
    if (group.cols.every((c) => log.columns.includes(c))) {
      panels.push({
        label: group.label,
        series: group.cols.map((c, i) => ({
          values: column(log, c),
          color: SERIES_COLORS[i % SERIES_COLORS.length],
          dashed: false,
          name: c,
        })),
      });
    }
  }

  const width = spec.width ?? 1180;
  const panelH = spec.panelHeight ?? 110;
  const cols = 2;
  const rowsN = Math.ceil(panels.length / cols);
  const margin = { left: 56, right: 12, top: 34, bottom: 24 };
  const header = 34;
  const height = header + rowsN * (panelH + 14) + 10;
  const panelW = Math.floor((width - 20) / cols) - 10;
  const boundaries = stepBoundaries(log.events);
  const [t0, t1] = extent(t);

  const out: string[] = [];
  out.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
      `viewBox="0 0 ${width} ${height}" font-family="Helvetica, Arial, sans-serif">`,
  );
  out.push(`<rect width="${width}" height="${height}" fill="white"/>`);
  if (spec.title) {
    out.push(
      `<text x="${width / 2}" y="20" text-anchor="middle" font-size="15" font-weight="bold">` +
        `${esc(spec.title)}</text>`,
    );
  }
  panels.forEach((panel, k) => {
    const col = k % cols;
    const row = Math.floor(k / cols);
    const ox = 10 + col * (panelW + 10);
    const oy = header + row * (panelH + 14);
    const x0 = ox + margin.left;
    const x1 = ox + panelW - margin.right;
    const y0 = oy + 16;
    const y1 = oy + panelH - 14;
    const sx = linearScale(t0, t1, x0, x1);
    const all = panel.series.flatMap((s) => s.values);
    const [lo, hi] = extent(all);
    const sy = linearScale(lo, hi, y1, y0);
    out.push(
      `<g class="panel" data-label="${esc(panel.label)}">`,
      `<rect x="${x0}" y="${y0}" width="${x1 - x0}" height="${y1 - y0}" ` +
        `fill="none" stroke="#999" stroke-width="0.7"/>`,
      `<text x="${ox + 6}" y="${oy + 12}" font-size="11" font-weight="bold">` +
        `${esc(panel.label)}</text>`,
      `<text x="${x0 - 4}" y="${sy(hi) + 8}" font-size="9" text-anchor="end">${hi.toPrecision(3)}</text>`,
      `<text x="${x0 - 4}" y="${sy(lo)}" font-size="9" text-anchor="end">${lo.toPrecision(3)}</text>`,
    );
    boundaries.forEach((b, i) => {
      const bx = sx(b.t);
      out.push(
        `<line class="step-boundary" x1="${bx.toFixed(2)}" y1="${y0}" x2="${bx.toFixed(2)}" ` +
          `y2="${y1}" stroke="#bbb" stroke-width="0.7" stroke-dasharray="3,3"/>`,
      );
      if (k === 0) {
        out.push(
          `<text class="step-glyph" x="${(bx + 3).toFixed(2)}" y="${y0 + 10}" font-size="11">` +
            `${STEP_GLYPHS[i] ?? `#${i + 1}`}</text>`,
        );
      }
    });
    for (const s of panel.series) {
      const dash = s.dashed ? ' stroke-dasharray="5,3"' : "";
      out.push(
        `<polyline fill="none" stroke="${s.color}" stroke-width="1.1"${dash} ` +
          `points="${polyline(t, s.values, sx, sy)}"/>`,
      );
    }
    out.push(`</g>`);
  });
  out.push("</svg>");
  return out.join("\n");
}
