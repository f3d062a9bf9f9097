/**
 * Slider session state with debounced, coalesced server updates.
 *
 * Invariants enforced here:
 * - at most one PATCH in flight; slider moves during a flight coalesce
 *   into the next one (latest value wins);
 * - responses carry a sequence number; anything superseded is discarded,
 *   so the preview never shows state older than the sliders;
 * - on transport failure the sliders revert to the last acknowledged
 *   values.
 */

export interface PatchResult {
  strengths: number[];
  preview: string;
  recomputed_ops: number;
  intermediates?: string[];
}

export type PatchFn = (strengths: number[]) => Promise<PatchResult>;

export interface SessionEvents {
  /** Preview (and optional intermediates) accepted from the server. */
  onPreview(result: PatchResult): void;
  /** Slider values changed programmatically (revert, reset). */
  onStrengths(strengths: number[]): void;
  onError(message: string): void;
}

interface Timers {
  set(fn: () => void, ms: number): ReturnType<typeof setTimeout>;
  clear(handle: ReturnType<typeof setTimeout>): void;
}

const DEFAULT_DEBOUNCE_MS = 60;

export class SliderSession {
  private desired: number[];
  private acknowledged: number[];
  private readonly predicted: number[];
  private debounceHandle: ReturnType<typeof setTimeout> | null = null;
  private inFlight = false;
  private nextSeq = 1;
  private appliedSeq = 0;
  private patchCount = 0;

  constructor(
    private readonly patch: PatchFn,
    private readonly events: SessionEvents,
    initialStrengths: number[],
    predictedStrengths: number[] = initialStrengths,
    private readonly debounceMs: number = DEFAULT_DEBOUNCE_MS,
    private readonly timers: Timers = {
      set: (fn, ms) => setTimeout(fn, ms),
      clear: (h) => clearTimeout(h),
    },
  ) {
    this.desired = [...initialStrengths];
    this.acknowledged = [...initialStrengths];
    this.predicted = [...predictedStrengths];
  }

  get strengths(): number[] {
    return [...this.desired];
  }

  get sentPatchCount(): number {
    return this.patchCount;
  }

  get pending(): boolean {
    return this.inFlight || this.debounceHandle !== null;
  }

  /** Slider k moved; schedules a coalesced PATCH of the full array. */
  setStrength(k: number, value: number): void {
    this.desired[k] = value;
    this.schedule();
  }

  /** Restore the server-predicted strengths (reset button). */
  resetToPredicted(): void {
    this.desired = [...this.predicted];
    this.events.onStrengths(this.strengths);
    this.schedule();
  }

  private schedule(): void {
    if (this.debounceHandle !== null) {
      this.timers.clear(this.debounceHandle);
    }
    this.debounceHandle = this.timers.set(() => {
      this.debounceHandle = null;
      void this.flush();
    }, this.debounceMs);
  }

  private dirty(): boolean {
    return this.desired.some((v, i) => v !== this.acknowledged[i]);
  }

  private async flush(): Promise<void> {
    if (this.inFlight) return; // the active flight re-flushes when done
    if (!this.dirty()) return;
    const seq = this.nextSeq++;
    const payload = [...this.desired];
    this.inFlight = true;
    this.patchCount++;
    try {
      const result = await this.patch(payload);
      if (seq > this.appliedSeq) {
        this.appliedSeq = seq;
        this.acknowledged = [...result.strengths];
        // the server clamps; reflect that on sliders that match the payload
        for (let i = 0; i < this.desired.length; i++) {
          if (this.desired[i] === payload[i]) this.desired[i] = result.strengths[i];
        }
        this.events.onPreview(result);
        this.events.onStrengths(this.strengths);
      }
    } catch (err) {
      this.desired = [...this.acknowledged];
      this.events.onStrengths(this.strengths);
      const message =
        err && typeof err === "object" && "message" in err
          ? String((err as { message: unknown }).message)
          : "update failed";
      this.events.onError(message);
    } finally {
      this.inFlight = false;
      if (this.dirty()) void this.flush(); // coalesced follow-up
    }
  }
}
