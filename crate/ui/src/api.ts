// Typed client for the twin service JSON API.

export interface Exposome {
  ace_inhibitor_dose: number;
  heparin_dose: number;
  calorie_intake: number;
  exercise_level: number;
  infection_onset: number | null;
}

export interface Scenario {
  initial_state?: Record<string, number>;
  exposome: Exposome;
  horizon_s: number;
  dt: number;
  seed: number;
}

export interface ScenarioEntry {
  id: string;
  name: string;
  description: string;
  scenario: Scenario;
  fixture: boolean;
}

export type RunStatus = "pending" | "running" | "done" | "failed";

export interface RunRecord {
  id: string;
  kind: string;
  config: Record<string, unknown>;
  status: RunStatus;
  artifacts: Record<string, { sha256: string; bytes: number; media_type: string }>;
  error?: string;
  created_ms: number;
  updated_ms: number;
}

export interface VariableSummary {
  name: string;
  mean: number[];
  var: number[];
  lo: number[];
  hi: number[];
}

export interface BundleSummary {
  passes: number;
  steps: number;
  time_s: number[];
  level: number;
  tau_inv: number;
  variables: VariableSummary[];
}

export interface ProjectedRun {
  label: string;
  passes: number;
  steps: number;
  points: [number, number][];
  density: { bins: number; x_range: [number, number]; y_range: [number, number]; density: number[] };
}

export interface PhaseResult {
  group: string;
  variables: string[];
  loadings: [number, number][];
  explained_ratio: number[];
  runs: ProjectedRun[];
}

export interface InterventionRequest {
  scenario_id: string;
  exposome?: Partial<Exposome>;
  horizon_steps?: number;
  passes?: number;
  seed?: number;
  level?: number;
}

export interface Violation {
  field: string;
  message: string;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
    readonly violations: Violation[],
  ) {
    super(message);
  }
}

type Fetch = (input: string, init?: RequestInit) => Promise<Response>;

export class Client {
  constructor(
    private readonly base = "",
    private readonly fetcher: Fetch = (i, init) => fetch(i, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetcher(this.base + path, init);
    const body = await resp.json().catch(() => ({}));
    if (!resp.ok) {
      const e = body?.error ?? {};
      throw new ApiError(resp.status, e.code ?? "http_error", e.message ?? resp.statusText, e.violations ?? []);
    }
    return body as T;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.request<T>(path, { method: "POST", headers: { "content-type": "application/json" }, body: JSON.stringify(body) });
  }

  async groups(): Promise<{ group: string; variables: string[] }[]> {
    return (await this.request<{ groups: { group: string; variables: string[] }[] }>("/groups")).groups;
  }

  async scenarios(): Promise<ScenarioEntry[]> {
    return (await this.request<{ scenarios: ScenarioEntry[] }>("/scenarios")).scenarios;
  }

  async run(id: string): Promise<RunRecord> {
    return (await this.request<{ run: RunRecord }>(`/runs/${encodeURIComponent(id)}`)).run;
  }

  async forecast(req: InterventionRequest): Promise<RunRecord> {
    return (await this.post<{ run: RunRecord }>("/runs/forecast", req)).run;
  }

  async bundle(id: string): Promise<BundleSummary> {
    return (await this.request<{ summary: BundleSummary }>(`/runs/${encodeURIComponent(id)}/bundle`)).summary;
  }

  async compare(runIds: string[], group: string): Promise<{ time_s: number[]; phase: PhaseResult }> {
    return this.post("/runs/compare", { run_ids: runIds, group });
  }

  async phase(id: string, group: string): Promise<PhaseResult> {
    const q = `?group=${encodeURIComponent(group)}`;
    return (await this.request<{ phase: PhaseResult }>(`/runs/${encodeURIComponent(id)}/phase${q}`)).phase;
  }
}
