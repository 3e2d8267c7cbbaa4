/**
 * Polling job panel: periodically fetches the job list, renders each job as
 * a row view-model, and notifies when a label-producing job completes so
 * the overlay can refresh.  Rendering is pure data so tests need no DOM.
 */

import type { HarpiaClient, JobInfo, JobState } from "./api.js";

export interface JobRow {
  id: string;
  op: string;
  state: JobState;
  badge: string;
  cancellable: boolean;
}

export interface PanelView {
  rows: JobRow[];
  emptyMessage: string | null;
}

const BADGES: Record<JobState, string> = {
  queued: "⏳ queued",
  running: "▶ running",
  done: "✓ done",
  failed: "✗ failed",
  cancelled: "⊘ cancelled",
};

export function renderJobs(jobs: JobInfo[]): PanelView {
  return {
    rows: jobs.map((job) => ({
      id: job.id,
      op: job.op,
      state: job.state,
      badge: BADGES[job.state],
      cancellable: job.state === "queued" || job.state === "running",
    })),
    emptyMessage: jobs.length === 0 ? "no jobs yet" : null,
  };
}

export class JobPanel {
  view: PanelView = renderJobs([]);
  /** States each job has been seen in, in observation order. */
  history = new Map<string, JobState[]>();
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private client: HarpiaClient,
    private onJobDone: (job: JobInfo) => void = () => {},
    private intervalMs = 1000,
  ) {}

  async poll(): Promise<PanelView> {
    const { jobs } = await this.client.listJobs();
    for (const job of jobs) {
      const seen = this.history.get(job.id) ?? [];
      if (seen[seen.length - 1] !== job.state) {
        seen.push(job.state);
        this.history.set(job.id, seen);
        if (job.state === "done") {
          this.onJobDone(job);
        }
      }
    }
    this.view = renderJobs(jobs);
    return this.view;
  }

  async cancel(jobId: string): Promise<void> {
    await this.client.cancelJob(jobId);
    await this.poll();
  }

  start(): void {
    if (this.timer !== null) return;
    this.timer = setInterval(() => void this.poll(), this.intervalMs);
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }
}
