// Session state machine: one in-flight request per kind, answer buttons
// disabled while a sampling job runs, skip list handled client-side.

import { ApiClient } from "./api.js";
import { Answer, DesignTuple, PosteriorPayload, QueryPayload } from "./types.js";

export type Phase = "loading" | "waiting-samples" | "ready" | "submitting" | "error";

export interface ConsoleState {
  phase: Phase;
  posterior: PosteriorPayload | null;
  query: QueryPayload | null;
  skipped: DesignTuple[];
  round: number;
  error: string | null;
}

export class SessionController {
  state: ConsoleState = {
    phase: "loading",
    posterior: null,
    query: null,
    skipped: [],
    round: 0,
    error: null,
  };
  private listeners: Array<(s: ConsoleState) => void> = [];

  constructor(private api: ApiClient, private pollMs = 500) {}

  onChange(fn: (s: ConsoleState) => void): void {
    this.listeners.push(fn);
  }

  private emit(patch: Partial<ConsoleState>): void {
    this.state = { ...this.state, ...patch };
    for (const fn of this.listeners) fn(this.state);
  }

  get answersEnabled(): boolean {
    return this.state.phase === "ready" && this.state.query !== null;
  }

  /** The uncertainty trace must have rounds_completed + 1 entries. */
  get uncertaintyTrace(): number[] {
    return this.state.posterior?.uncertainty_trace ?? [];
  }

  async refresh(): Promise<void> {
    try {
      const posterior = await this.api.posterior();
      const query = await this.api.query(this.state.skipped).catch(() => null);
      this.emit({
        phase: query ? "ready" : "waiting-samples",
        posterior,
        query,
        round: posterior.uncertainty_trace.length - 1,
        error: null,
      });
    } catch (err) {
      // 409 before the first sampling round completes
      this.emit({ phase: "waiting-samples", error: null });
    }
  }

  /** Poll until the initial posterior is available. */
  async start(sleep?: (ms: number) => Promise<void>): Promise<void> {
    const wait = sleep ?? ((ms: number) => new Promise<void>((r) => setTimeout(r, ms)));
    for (;;) {
      await this.refresh();
      if (this.state.phase === "ready") return;
      await wait(this.pollMs);
    }
  }

  async submit(answer: Answer, sleep?: (ms: number) => Promise<void>): Promise<void> {
    const query = this.state.query;
    if (!this.answersEnabled || !query) {
      throw new Error("no active query to answer");
    }
    this.emit({ phase: "submitting" });
    try {
      const job = await this.api.answer(query.design, answer);
      await this.api.pollJob(job, this.pollMs, sleep);
      this.emit({ skipped: [] });
      await this.refresh();
    } catch (err) {
      this.emit({ phase: "error", error: String(err) });
      throw err;
    }
  }

  /** Skip requests the next-best design without answering. */
  async skip(): Promise<void> {
    const query = this.state.query;
    if (!this.answersEnabled || !query) return;
    const skipped = [...this.state.skipped, query.design];
    this.emit({ skipped });
    const next = await this.api.query(skipped).catch(() => null);
    this.emit({ query: next, phase: next ? "ready" : "waiting-samples" });
  }
}
