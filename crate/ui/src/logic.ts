// Pure helpers: request validation, URL state and plot downsampling.

import type { Exposome, InterventionRequest, Violation } from "./api.js";

export const MAX_STEPS = 2000;
export const MAX_PASSES = 500;
export const MAX_POINTS = 2000;

export interface ExposomeField {
  key: keyof Exposome;
  label: string;
  unit: string;
  min: number;
  max?: number;
}

export const EXPOSOME_FIELDS: ExposomeField[] = [
  { key: "ace_inhibitor_dose", label: "Benazepril", unit: "mg/day", min: 0 },
  { key: "heparin_dose", label: "Heparin", unit: "U/ml", min: 0 },
  { key: "calorie_intake", label: "Diet", unit: "kcal/day", min: 0 },
  { key: "exercise_level", label: "Exercise", unit: "0–1", min: 0, max: 1 },
  { key: "infection_onset", label: "Infection onset", unit: "s", min: 0 },
];

/** Mirrors the service's checks so bad edits never leave the browser. */
export function validateRequest(req: InterventionRequest): Violation[] {
  const out: Violation[] = [];
  if (!req.scenario_id) out.push({ field: "scenario_id", message: "pick a scenario" });
  for (const f of EXPOSOME_FIELDS) {
    const v = req.exposome?.[f.key];
    if (v === undefined || v === null) continue;
    if (typeof v !== "number" || !Number.isFinite(v) || v < f.min || (f.max !== undefined && v > f.max)) {
      const range = f.max === undefined ? `≥ ${f.min}` : `in [${f.min}, ${f.max}]`;
      out.push({ field: `exposome.${f.key}`, message: `${f.label} must be ${range}` });
    }
  }
  const steps = req.horizon_steps;
  if (steps !== undefined && !(Number.isInteger(steps) && steps >= 1 && steps <= MAX_STEPS)) {
    out.push({ field: "horizon_steps", message: `must lie in 1..=${MAX_STEPS}` });
  }
  const passes = req.passes;
  if (passes !== undefined && !(Number.isInteger(passes) && passes >= 2 && passes <= MAX_PASSES)) {
    out.push({ field: "passes", message: `must lie in 2..=${MAX_PASSES}` });
  }
  if (req.level !== undefined && !(req.level > 0 && req.level < 1)) {
    out.push({ field: "level", message: "must lie in (0, 1)" });
  }
  return out;
}

/** Every `k`-th index so at most `max` remain, always keeping the last. */
export function downsampleIndices(n: number, max = MAX_POINTS): number[] {
  if (n <= max) return Array.from({ length: n }, (_, i) => i);
  const k = Math.ceil(n / max);
  const out: number[] = [];
  for (let i = 0; i < n; i += k) out.push(i);
  if (out[out.length - 1] !== n - 1) out[out.length - 1] = n - 1;
  return out;
}

export interface ViewState {
  runs: string[];
  group: string;
  vars: string[];
  hidden: string[];
}

export const DEFAULT_VIEW: ViewState = { runs: [], group: "heart", vars: ["p_ra", "p_rv", "p_la", "p_lv"], hidden: [] };

const list = (s: string | null) => (s ? s.split(",").filter(Boolean) : []);

export function encodeView(v: ViewState): string {
  const p = new URLSearchParams();
  if (v.runs.length) p.set("runs", v.runs.join(","));
  p.set("group", v.group);
  p.set("vars", v.vars.join(","));
  if (v.hidden.length) p.set("hidden", v.hidden.join(","));
  return p.toString();
}

export function decodeView(query: string): ViewState {
  const p = new URLSearchParams(query);
  return {
    runs: list(p.get("runs")),
    group: p.get("group") ?? DEFAULT_VIEW.group,
    vars: p.has("vars") ? list(p.get("vars")) : [...DEFAULT_VIEW.vars],
    hidden: list(p.get("hidden")),
  };
}

/** Tags async responses so a slower, older one cannot overwrite a newer one. */
export class Latest {
  private seq = 0;
  begin(): number {
    return ++this.seq;
  }
  isCurrent(ticket: number): boolean {
    return ticket === this.seq;
  }
}

/** A band whose lower and upper edges coincide everywhere is drawn as a line only. */
export function bandIsDegenerate(lo: number[], hi: number[]): boolean {
  return lo.every((v, i) => v === hi[i]);
}

export function axisLabel(pc: number, ratio: number[]): string {
  const r = ratio[pc];
  return r === undefined ? `PC${pc + 1}` : `PC${pc + 1} (${(100 * r).toFixed(1)}%)`;
}
