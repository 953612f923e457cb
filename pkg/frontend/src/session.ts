import { DetectClient, DetectResponse } from "./client";

export type Verdict = "vulnerable" | "clean" | "neutral";

export interface SessionState {
  language: string;
  buffer: string;
  threshold: number;
  verdict: Verdict;
  lastResponse: DetectResponse | null;
  inFlight: boolean;
  offline: boolean;
}

export interface ThresholdStore {
  load(): number | null;
  save(value: number): void;
}

const THRESHOLD_KEY = "evd-playground-threshold";

/** Browser-backed store; swap out in tests. */
export function localStorageThresholdStore(storage: Storage): ThresholdStore {
  return {
    load() {
      const raw = storage.getItem(THRESHOLD_KEY);
      if (raw === null) return null;
      const value = Number(raw);
      return Number.isFinite(value) && value >= 0 && value <= 1 ? value : null;
    },
    save(value: number) {
      storage.setItem(THRESHOLD_KEY, String(value));
    },
  };
}

export interface SessionOptions {
  client: DetectClient;
  debounceMs?: number;
  defaultThreshold?: number;
  language?: string;
  store?: ThresholdStore;
}

/**
 * Editor state machine: debounces edits into at most one in-flight detect
 * request, discards responses older than the latest edit, and re-evaluates
 * the verdict client-side when the threshold slider moves.
 */
export class EditorSession {
  readonly state: SessionState;
  private readonly client: DetectClient;
  private readonly debounceMs: number;
  private readonly store: ThresholdStore | null;
  private readonly listeners: Array<(state: SessionState) => void> = [];
  private epoch = 0;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private abort: AbortController | null = null;

  constructor(options: SessionOptions) {
    this.client = options.client;
    this.debounceMs = options.debounceMs ?? 300;
    this.store = options.store ?? null;
    const persisted = this.store?.load() ?? null;
    this.state = {
      language: options.language ?? "javascript",
      buffer: "",
      threshold: persisted ?? options.defaultThreshold ?? 0.5,
      verdict: "neutral",
      lastResponse: null,
      inFlight: false,
      offline: false,
    };
  }

  subscribe(listener: (state: SessionState) => void): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    for (const listener of this.listeners) listener(this.state);
  }

  /** Inclusive threshold, matching the service's decision rule. */
  private judge(score: number): Verdict {
    return score >= this.state.threshold ? "vulnerable" : "clean";
  }

  onEdit(buffer: string): void {
    this.state.buffer = buffer;
    this.epoch += 1;
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = null;
    if (buffer.trim() === "") {
      // clearing the buffer resets the badge and drops any pending work
      this.abort?.abort();
      this.state.verdict = "neutral";
      this.state.lastResponse = null;
      this.state.inFlight = false;
      this.emit();
      return;
    }
    this.timer = setTimeout(() => {
      this.timer = null;
      void this.fire();
    }, this.debounceMs);
    this.emit();
  }

  onThresholdChange(value: number): void {
    if (!(value >= 0 && value <= 1)) {
      throw new RangeError(`threshold out of range: ${value}`);
    }
    this.state.threshold = value;
    this.store?.save(value);
    // re-evaluate the current response locally; no network round trip
    if (this.state.lastResponse !== null) {
      this.state.verdict = this.judge(this.state.lastResponse.score);
    }
    this.emit();
  }

  onLanguageChange(language: string): void {
    this.state.language = language;
    this.emit();
  }

  private async fire(): Promise<void> {
    const epoch = this.epoch;
    this.abort?.abort();
    const controller = new AbortController();
    this.abort = controller;
    this.state.inFlight = true;
    this.emit();
    try {
      const response = await this.client.detect(
        {
          language: this.state.language,
          snippet: this.state.buffer,
          threshold_override: this.state.threshold,
        },
        controller.signal,
      );
      if (epoch !== this.epoch) return; // a newer edit superseded this response
      this.state.offline = false;
      this.state.lastResponse = response;
      this.state.verdict = this.judge(response.score);
    } catch (err) {
      if (controller.signal.aborted) return;
      if (epoch !== this.epoch) return;
      this.state.offline = true;
    } finally {
      if (epoch === this.epoch) {
        this.state.inFlight = false;
        this.emit();
      }
    }
  }
}
