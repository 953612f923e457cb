export interface DetectRequest {
  language: string;
  snippet: string;
  threshold_override?: number;
  client_id?: string;
}

export interface DetectResponse {
  verdict: string;
  score: number;
  cwe: string | null;
  model_version: string;
  elapsed_ms: number;
}

export interface HealthResponse {
  status: string;
  model_version?: string;
  request_count?: number;
  p50_ms?: number | null;
  p95_ms?: number | null;
  threshold?: number;
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Thin wrapper over the service's two endpoints. */
export class DetectClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  async detect(request: DetectRequest, signal?: AbortSignal): Promise<DetectResponse> {
    const resp = await this.fetchFn(`${this.baseUrl}/v1/detect`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(request),
      signal,
    });
    if (!resp.ok) {
      throw new Error(`detect failed with status ${resp.status}`);
    }
    return (await resp.json()) as DetectResponse;
  }

  async health(signal?: AbortSignal): Promise<HealthResponse> {
    const resp = await this.fetchFn(`${this.baseUrl}/v1/health`, { signal });
    if (!resp.ok) {
      throw new Error(`health failed with status ${resp.status}`);
    }
    return (await resp.json()) as HealthResponse;
  }
}
