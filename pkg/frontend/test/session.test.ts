import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { DetectClient, DetectResponse } from "../src/client";
import { EditorSession, localStorageThresholdStore, ThresholdStore } from "../src/session";

interface Call {
  url: string;
  body: any;
  signal: AbortSignal | undefined;
  resolve: (resp: DetectResponse) => void;
  reject: (err: unknown) => void;
}

/** Fetch stub that records calls and lets the test settle them manually. */
function makeFetch() {
  const calls: Call[] = [];
  const fetchFn = (url: string, init?: RequestInit) =>
    new Promise<Response>((resolve, reject) => {
      const call: Call = {
        url,
        body: init?.body ? JSON.parse(init.body as string) : null,
        signal: init?.signal ?? undefined,
        resolve: (resp) =>
          resolve({ ok: true, status: 200, json: async () => resp } as unknown as Response),
        reject,
      };
      init?.signal?.addEventListener("abort", () =>
        reject(new DOMException("aborted", "AbortError")),
      );
      calls.push(call);
    });
  return { calls, fetchFn };
}

function response(score: number, cwe: string | null = null): DetectResponse {
  return {
    verdict: score >= 0.5 ? "vulnerable" : "clean",
    score,
    cwe,
    model_version: "test/fmt1",
    elapsed_ms: 1.5,
  };
}

function memoryStore(initial: number | null = null): ThresholdStore & { saved: number[] } {
  let value = initial;
  const saved: number[] = [];
  return {
    saved,
    load: () => value,
    save(v: number) {
      value = v;
      saved.push(v);
    },
  };
}

function makeSession(options: { store?: ThresholdStore; threshold?: number } = {}) {
  const { calls, fetchFn } = makeFetch();
  const client = new DetectClient("http://svc", fetchFn);
  const session = new EditorSession({
    client,
    debounceMs: 300,
    defaultThreshold: options.threshold ?? 0.5,
    store: options.store,
  });
  return { session, calls };
}

beforeEach(() => {
  vi.useFakeTimers();
});

afterEach(() => {
  vi.useRealTimers();
});

describe("debounce", () => {
  it("sends exactly one request for two edits inside one window", async () => {
    const { session, calls } = makeSession();
    session.onEdit("const a");
    vi.advanceTimersByTime(100);
    session.onEdit("const a = req.query");
    vi.advanceTimersByTime(299);
    expect(calls.length).toBe(0);
    vi.advanceTimersByTime(1);
    expect(calls.length).toBe(1);
    expect(calls[0].body.snippet).toBe("const a = req.query");
  });

  it("sends separate requests for edits in separate windows", async () => {
    const { session, calls } = makeSession();
    session.onEdit("one");
    vi.advanceTimersByTime(300);
    calls[0].resolve(response(0.1));
    await vi.runAllTimersAsync();
    session.onEdit("two");
    vi.advanceTimersByTime(300);
    expect(calls.length).toBe(2);
  });

  it("posts to /v1/detect with the session threshold as override", () => {
    const { session, calls } = makeSession({ threshold: 0.25 });
    session.onEdit("x");
    vi.advanceTimersByTime(300);
    expect(calls[0].url).toBe("http://svc/v1/detect");
    expect(calls[0].body.threshold_override).toBe(0.25);
    expect(calls[0].body.language).toBe("javascript");
  });
});

describe("verdict rendering", () => {
  it("flags a high-scoring snippet", async () => {
    const { session, calls } = makeSession();
    session.onEdit("db.query(raw + input)");
    vi.advanceTimersByTime(300);
    calls[0].resolve(response(0.93, "CWE-89"));
    await vi.runAllTimersAsync();
    expect(session.state.verdict).toBe("vulnerable");
    expect(session.state.lastResponse?.cwe).toBe("CWE-89");
    expect(session.state.inFlight).toBe(false);
  });

  it("clearing the buffer resets the badge without a request", async () => {
    const { session, calls } = makeSession();
    session.onEdit("db.query(raw)");
    vi.advanceTimersByTime(300);
    calls[0].resolve(response(0.9));
    await vi.runAllTimersAsync();
    expect(session.state.verdict).toBe("vulnerable");
    session.onEdit("");
    expect(session.state.verdict).toBe("neutral");
    expect(session.state.lastResponse).toBeNull();
    vi.advanceTimersByTime(1000);
    expect(calls.length).toBe(1);
  });
});

describe("stale responses", () => {
  it("discards a response that arrives after a newer edit", async () => {
    const { session, calls } = makeSession();
    session.onEdit("first");
    vi.advanceTimersByTime(300);
    session.onEdit("second");
    vi.advanceTimersByTime(300);
    expect(calls.length).toBe(2);
    // settle the requests out of order: the stale one last
    calls[1].resolve(response(0.1));
    await vi.runAllTimersAsync();
    calls[0].resolve(response(0.99));
    await vi.runAllTimersAsync();
    expect(session.state.verdict).toBe("clean");
  });

  it("aborts the superseded in-flight request", () => {
    const { session, calls } = makeSession();
    session.onEdit("first");
    vi.advanceTimersByTime(300);
    expect(calls[0].signal?.aborted).toBe(false);
    session.onEdit("second");
    vi.advanceTimersByTime(300);
    expect(calls[0].signal?.aborted).toBe(true);
    expect(calls[1].signal?.aborted).toBe(false);
  });
});

describe("threshold slider", () => {
  it("re-evaluates the shown verdict with no network round trip", async () => {
    const { session, calls } = makeSession();
    session.onEdit("maybe risky");
    vi.advanceTimersByTime(300);
    calls[0].resolve(response(0.7));
    await vi.runAllTimersAsync();
    expect(session.state.verdict).toBe("vulnerable"); // 0.7 >= 0.5

    session.onThresholdChange(0.8);
    expect(session.state.verdict).toBe("clean");
    session.onThresholdChange(0.6);
    expect(session.state.verdict).toBe("vulnerable");
    expect(calls.length).toBe(1); // still only the original request
  });

  it("slider at zero flags every response", async () => {
    const { session, calls } = makeSession();
    session.onEdit("harmless()");
    vi.advanceTimersByTime(300);
    calls[0].resolve(response(0.0001));
    await vi.runAllTimersAsync();
    session.onThresholdChange(0);
    expect(session.state.verdict).toBe("vulnerable");
  });

  it("rejects out-of-range values", () => {
    const { session } = makeSession();
    expect(() => session.onThresholdChange(1.5)).toThrow(RangeError);
    expect(() => session.onThresholdChange(-0.1)).toThrow(RangeError);
  });

  it("persists changes and restores the persisted value", () => {
    const store = memoryStore();
    const { session } = makeSession({ store });
    session.onThresholdChange(0.35);
    expect(store.saved).toEqual([0.35]);

    const { session: restored } = makeSession({ store });
    expect(restored.state.threshold).toBe(0.35);
  });
});

describe("offline handling", () => {
  it("sets the offline flag on network failure without crashing", async () => {
    const { session, calls } = makeSession();
    session.onEdit("anything");
    vi.advanceTimersByTime(300);
    calls[0].reject(new TypeError("network down"));
    await vi.runAllTimersAsync();
    expect(session.state.offline).toBe(true);
    expect(session.state.inFlight).toBe(false);
  });

  it("clears the offline flag once a request succeeds", async () => {
    const { session, calls } = makeSession();
    session.onEdit("one");
    vi.advanceTimersByTime(300);
    calls[0].reject(new TypeError("network down"));
    await vi.runAllTimersAsync();
    session.onEdit("two");
    vi.advanceTimersByTime(300);
    calls[1].resolve(response(0.2));
    await vi.runAllTimersAsync();
    expect(session.state.offline).toBe(false);
    expect(session.state.verdict).toBe("clean");
  });
});

describe("localStorage store adapter", () => {
  function fakeStorage(): Storage {
    const map = new Map<string, string>();
    return {
      getItem: (k) => map.get(k) ?? null,
      setItem: (k, v) => void map.set(k, v),
      removeItem: (k) => void map.delete(k),
      clear: () => map.clear(),
      key: () => null,
      get length() {
        return map.size;
      },
    } as Storage;
  }

  it("round-trips a threshold", () => {
    const store = localStorageThresholdStore(fakeStorage());
    expect(store.load()).toBeNull();
    store.save(0.42);
    expect(store.load()).toBe(0.42);
  });

  it("ignores corrupted values", () => {
    const storage = fakeStorage();
    storage.setItem("evd-playground-threshold", "garbage");
    expect(localStorageThresholdStore(storage).load()).toBeNull();
    storage.setItem("evd-playground-threshold", "7");
    expect(localStorageThresholdStore(storage).load()).toBeNull();
  });
});
