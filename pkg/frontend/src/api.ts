/**
 * Thin typed client for the harpia REST service.
 *
 * The fetch implementation is injectable so tests can mock the server.
 */

import type { RLEMask } from "./rle.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export interface DatasetInfo {
  id: string;
  shape: [number, number, number];
  dtype: string;
  spacing: [number, number, number];
  window: [number, number];
  status: string;
}

export type JobState = "queued" | "running" | "done" | "failed" | "cancelled";

export interface JobInfo {
  id: string;
  op: string;
  state: JobState;
  error?: string | null;
  report?: Record<string, number> | null;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

export class HarpiaClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = fetch,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    if (!resp.ok) {
      let detail = resp.statusText;
      try {
        const body = await resp.json();
        detail = body.detail ?? detail;
      } catch {
        /* non-JSON error body; keep the status text */
      }
      throw new ApiError(resp.status, detail);
    }
    return (await resp.json()) as T;
  }

  private post<T>(path: string, payload: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  registerDataset(dataPath: string): Promise<{ id: string }> {
    return this.post("/datasets", { data_path: dataPath });
  }

  datasetInfo(id: string): Promise<DatasetInfo> {
    return this.request(`/datasets/${id}`);
  }

  sliceUrl(id: string, axis: string, index: number, window?: [number, number]): string {
    const query = window ? `?low=${window[0]}&high=${window[1]}` : "";
    return `${this.baseUrl}/datasets/${id}/slice/${axis}/${index}${query}`;
  }

  labelOverlayUrl(id: string, axis: string, index: number): string {
    return `${this.baseUrl}/datasets/${id}/labels/${axis}/${index}`;
  }

  submitJob(dataset: string, op: string, params: Record<string, unknown> = {}): Promise<{ id: string }> {
    return this.post("/jobs", { dataset, op, params });
  }

  listJobs(): Promise<{ jobs: JobInfo[] }> {
    return this.request("/jobs");
  }

  job(id: string): Promise<JobInfo> {
    return this.request(`/jobs/${id}`);
  }

  cancelJob(id: string): Promise<{ state: JobState }> {
    return this.post(`/jobs/${id}/cancel`, {});
  }

  wand(
    dataset: string,
    args: { axis: string; index: number; seed: [number, number]; tolerance: number; label?: number },
  ): Promise<RLEMask> {
    return this.post(`/datasets/${dataset}/annotate/wand`, args);
  }

  lasso(
    dataset: string,
    args: { axis: string; index: number; polygon: [number, number][]; label?: number },
  ): Promise<RLEMask> {
    return this.post(`/datasets/${dataset}/annotate/lasso`, args);
  }

  snakes(
    dataset: string,
    args: {
      axis: string;
      index: number;
      init: RLEMask;
      iterations?: number;
      smoothing?: number;
      balloon?: number;
      lambda1?: number;
      lambda2?: number;
    },
  ): Promise<RLEMask> {
    return this.post(`/datasets/${dataset}/annotate/snakes`, args);
  }

  applyMask(
    dataset: string,
    mask: RLEMask,
    mode: "set" | "erase" = "set",
  ): Promise<{ applied: number; mode: string }> {
    return this.post(`/datasets/${dataset}/annotate/apply`, { mask, mode });
  }

  undoLabels(dataset: string): Promise<{ ok: boolean }> {
    return this.post(`/datasets/${dataset}/labels/undo`, {});
  }
}
