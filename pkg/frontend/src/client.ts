import { AnalyzeRequest, AnalyzeResponse, SchemaError, parseAnalyzeResponse } from "./types.js";

export const DEFAULT_BASE_URL = "http://127.0.0.1:8701";

/** Minimal slice of fetch the client needs; tests substitute fakes. */
export interface ResponseLike {
  ok: boolean;
  status: number;
  json(): Promise<unknown>;
}

export type FetchLike = (
  input: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<ResponseLike>;

const LOOPBACK_HOSTS = new Set(["127.0.0.1", "localhost", "[::1]"]);

/**
 * The panel only ever talks to a local service. Anything that is not a
 * plain-http loopback URL is rejected before a request can be built.
 */
export function normalizeBaseUrl(raw: string): string {
  let url: URL;
  try {
    url = new URL(raw);
  } catch {
    throw new Error(`base URL '${raw}' is not a valid URL`);
  }
  if (url.protocol !== "http:" || !LOOPBACK_HOSTS.has(url.hostname)) {
    throw new Error(`base URL must be http on a loopback host, got '${raw}'`);
  }
  return url.origin;
}

function defaultFetch(): FetchLike {
  // bound so the browser does not see an unqualified `this`
  return globalThis.fetch.bind(globalThis) as FetchLike;
}

export class AnalyzeClient {
  private baseUrl: string;
  private readonly fetchImpl: FetchLike;

  constructor(baseUrl: string = DEFAULT_BASE_URL, fetchImpl?: FetchLike) {
    this.baseUrl = normalizeBaseUrl(baseUrl);
    this.fetchImpl = fetchImpl ?? defaultFetch();
  }

  setBaseUrl(raw: string): void {
    this.baseUrl = normalizeBaseUrl(raw);
  }

  getBaseUrl(): string {
    return this.baseUrl;
  }

  /**
   * POST the draft to /analyze. Network errors propagate as-is (the caller
   * maps them to service-unreachable); non-200 replies and malformed bodies
   * become SchemaError.
   */
  async analyze(draft: AnalyzeRequest): Promise<AnalyzeResponse> {
    const response = await this.fetchImpl(`${this.baseUrl}/analyze`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(draft),
    });
    if (!response.ok) {
      throw new SchemaError(`service rejected the request (HTTP ${response.status})`);
    }
    let body: unknown;
    try {
      body = await response.json();
    } catch {
      throw new SchemaError("response body is not valid JSON");
    }
    return parseAnalyzeResponse(body);
  }

  /** GET /health; false on any failure. */
  async health(): Promise<boolean> {
    try {
      const response = await this.fetchImpl(`${this.baseUrl}/health`);
      return response.ok;
    } catch {
      return false;
    }
  }
}
