/** One scenario panel: debounced refresh, a single in-flight sweep, stale
 *  responses discarded by token. */

import { Client, type SweepProgress } from "./api.js";
import { closedFormBody, sweepBody, type ScenarioState } from "./scenario.js";
import type { ClosedFormResponse, ClusterDoc, SweepResponse } from "./types.js";

export interface PanelResult {
  sweep: SweepResponse;
  closedForm: ClosedFormResponse;
}

export interface PanelHooks {
  onResult(result: PanelResult): void;
  onError(message: string): void;
  onProgress?(p: SweepProgress | null): void;
  onBusy?(busy: boolean): void;
}

export class SweepPanel {
  private token = 0;

  constructor(
    private client: Client,
    private hooks: PanelHooks,
  ) {}

  /** Kick off a sweep + closed-form pair for the scenario.  A newer refresh
   *  invalidates this one: its response is dropped on arrival. */
  async refresh(
    state: ScenarioState,
    presets: Map<string, ClusterDoc>,
  ): Promise<void> {
    const token = ++this.token;
    this.hooks.onBusy?.(true);
    this.hooks.onProgress?.(null);
    try {
      const [sweep, closedForm] = await Promise.all([
        this.client.sweep(sweepBody(state, presets), (p) => {
          if (token === this.token) this.hooks.onProgress?.(p);
        }),
        this.client.closedForm(closedFormBody(state, presets)),
      ]);
      if (token !== this.token) return; // a newer refresh superseded this one
      this.hooks.onResult({ sweep, closedForm });
    } catch (err) {
      if (token !== this.token) return;
      this.hooks.onError(err instanceof Error ? err.message : String(err));
    } finally {
      if (token === this.token) {
        this.hooks.onBusy?.(false);
        this.hooks.onProgress?.(null);
      }
    }
  }
}

export interface Debounced<A extends unknown[]> {
  (...args: A): void;
  cancel(): void;
  flush(): void;
}

/** Trailing-edge debounce for slider/typing input. */
export function debounce<A extends unknown[]>(
  fn: (...args: A) => void,
  delayMs: number,
): Debounced<A> {
  let timer: ReturnType<typeof setTimeout> | null = null;
  let pending: A | null = null;
  const wrapped = ((...args: A) => {
    pending = args;
    if (timer !== null) clearTimeout(timer);
    timer = setTimeout(() => {
      timer = null;
      const args2 = pending!;
      pending = null;
      fn(...args2);
    }, delayMs);
  }) as Debounced<A>;
  wrapped.cancel = () => {
    if (timer !== null) clearTimeout(timer);
    timer = null;
    pending = null;
  };
  wrapped.flush = () => {
    if (timer === null) return;
    clearTimeout(timer);
    timer = null;
    const args = pending!;
    pending = null;
    fn(...args);
  };
  return wrapped;
}
