// What-if console wiring: scenario editor, run chips, endpoint charts and
// phase-space overlay. All statistics come from the API.

import { ApiError, Client, type BundleSummary, type InterventionRequest, type RunRecord, type ScenarioEntry } from "./api.js";
import { drawEndpoint, drawPhase, PALETTE } from "./charts.js";
import { decodeView, encodeView, EXPOSOME_FIELDS, Latest, validateRequest, type ViewState } from "./logic.js";

const client = new Client();
const $ = <T extends HTMLElement>(id: string) => document.getElementById(id) as T;

let view: ViewState = decodeView(location.search);
let scenarios: ScenarioEntry[] = [];
const runs = new Map<string, RunRecord>();
const bundles = new Map<string, BundleSummary>();
const phaseTicket = new Latest();

function notice(msg: string): void {
  const el = document.createElement("div");
  el.className = "notice";
  el.textContent = msg;
  $("notices").append(el);
  setTimeout(() => el.remove(), 8000);
}

function saveView(): void {
  history.replaceState(null, "", `?${encodeView(view)}`);
}

function colorOf(id: string): string {
  return PALETTE[Math.max(0, view.runs.indexOf(id)) % PALETTE.length];
}

function renderEditor(): void {
  const sel = $<HTMLSelectElement>("scenario");
  sel.innerHTML = scenarios.map((s) => `<option value="${s.id}">${s.name}</option>`).join("");
  const fields = $("fields");
  fields.innerHTML = "";
  for (const f of EXPOSOME_FIELDS) {
    const row = document.createElement("label");
    row.innerHTML = `${f.label} <input name="${f.key}" type="number" step="any" placeholder="unchanged"> <small>${f.unit}</small> <span class="err" data-field="exposome.${f.key}"></span>`;
    fields.append(row);
  }
}

function readRequest(): InterventionRequest {
  const form = $<HTMLFormElement>("editor");
  const data = new FormData(form);
  const exposome: Record<string, number> = {};
  for (const f of EXPOSOME_FIELDS) {
    const raw = String(data.get(f.key) ?? "").trim();
    if (raw !== "") exposome[f.key] = Number(raw);
  }
  return {
    scenario_id: String(data.get("scenario")),
    exposome,
    horizon_steps: Number(data.get("steps")),
    passes: Number(data.get("passes")),
  };
}

function showViolations(vs: { field: string; message: string }[]): void {
  document.querySelectorAll<HTMLElement>(".err").forEach((e) => (e.textContent = ""));
  for (const v of vs) {
    const el = document.querySelector<HTMLElement>(`.err[data-field="${v.field}"]`);
    if (el) el.textContent = v.message;
    else notice(`${v.field}: ${v.message}`);
  }
}

async function submit(ev: Event): Promise<void> {
  ev.preventDefault();
  const req = readRequest();
  const problems = validateRequest(req);
  showViolations(problems);
  if (problems.length) return;
  try {
    const run = await client.forecast(req);
    runs.set(run.id, run);
    view.runs.push(run.id);
    saveView();
    renderChips();
    void poll(run.id);
  } catch (e) {
    if (e instanceof ApiError && e.status === 422) showViolations(e.violations);
    else notice(`forecast failed: ${(e as Error).message}`);
  }
}

async function poll(id: string): Promise<void> {
  for (;;) {
    try {
      const run = await client.run(id);
      runs.set(id, run);
      renderChips();
      if (run.status === "done") {
        bundles.set(id, await client.bundle(id));
        await redraw();
        return;
      }
      if (run.status === "failed") {
        notice(`run ${id} failed: ${run.error ?? "unknown error"}`);
        return;
      }
    } catch (e) {
      notice(`run ${id}: ${(e as Error).message}`);
      return;
    }
    await new Promise((r) => setTimeout(r, 1000));
  }
}

function renderChips(): void {
  const box = $("chips");
  box.innerHTML = "";
  for (const id of view.runs) {
    const run = runs.get(id);
    const chip = document.createElement("button");
    const scenario = (run?.config?.scenario_id as string | undefined) ?? "";
    chip.textContent = `${id} ${scenario} · ${run?.status ?? "…"}`;
    chip.style.borderColor = colorOf(id);
    chip.className = view.hidden.includes(id) ? "chip off" : "chip";
    chip.onclick = () => {
      view.hidden = view.hidden.includes(id) ? view.hidden.filter((h) => h !== id) : [...view.hidden, id];
      saveView();
      renderChips();
      void redraw(false);
    };
    box.append(chip);
  }
}

let lastPhase: Awaited<ReturnType<typeof client.phase>> | null = null;

async function redraw(refetchPhase = true): Promise<void> {
  const done = view.runs.filter((id) => bundles.has(id));
  const charts = $("charts");
  charts.innerHTML = "";
  if (!done.length) return;
  const time = bundles.get(done[0])!.time_s;
  for (const name of view.vars) {
    const series = done
      .filter((id) => !view.hidden.includes(id) && bundles.get(id)!.time_s.length === time.length)
      .flatMap((id) => {
        const v = bundles.get(id)!.variables.find((x) => x.name === name);
        return v ? [{ label: id, color: colorOf(id), summary: v }] : [];
      });
    const c = document.createElement("canvas");
    c.width = 460;
    c.height = 220;
    charts.append(c);
    drawEndpoint(c, time, series, name);
  }
  if (refetchPhase || !lastPhase) {
    const ticket = phaseTicket.begin();
    try {
      const phase = done.length > 1 ? (await client.compare(done, view.group)).phase : await client.phase(done[0], view.group);
      if (!phaseTicket.isCurrent(ticket)) return;
      lastPhase = phase;
    } catch (e) {
      if (!phaseTicket.isCurrent(ticket)) return;
      const msg = e instanceof ApiError && e.code === "degenerate_projection" ? `${e.message}` : `phase: ${(e as Error).message}`;
      notice(msg);
      return;
    }
  }
  const colors = new Map(view.runs.map((id) => [id, colorOf(id)] as [string, string]));
  drawPhase($<HTMLCanvasElement>("phase"), lastPhase!, colors, new Set(view.hidden));
}

async function init(): Promise<void> {
  try {
    scenarios = await client.scenarios();
    const groups = await client.groups();
    const gsel = $<HTMLSelectElement>("group");
    gsel.innerHTML = groups.map((g) => `<option ${g.group === view.group ? "selected" : ""}>${g.group}</option>`).join("");
    gsel.onchange = () => {
      view.group = gsel.value;
      saveView();
      void redraw();
    };
    const vars = $<HTMLInputElement>("vars");
    vars.value = view.vars.join(",");
    vars.onchange = () => {
      view.vars = vars.value.split(",").map((s) => s.trim()).filter(Boolean);
      saveView();
      void redraw(false);
    };
  } catch (e) {
    notice(`cannot reach the service: ${(e as Error).message}`);
  }
  renderEditor();
  $<HTMLFormElement>("editor").onsubmit = submit;
  renderChips();
  for (const id of view.runs) void poll(id);
}

void init();
