import { AnalyzeResponse } from "./types.js";

export type PanelStatus = "idle" | "pending" | "ok" | "service-unreachable";

export interface DraftFormState {
  status: PanelStatus;
  /** Present only in status "ok". */
  lastResponse: AnalyzeResponse | null;
  /** Set when the service reply or the panel configuration is unusable. */
  lastError: string | null;
}

export function initialState(): DraftFormState {
  return { status: "idle", lastResponse: null, lastError: null };
}

/**
 * Latest-wins reconciliation for in-flight analyze requests.
 *
 * Every dispatch takes a sequence number; only the newest number may settle
 * the state, so a response that arrives after the form has moved on is
 * discarded and the banner always matches the latest form content.
 */
export class FormSession {
  private seq = 0;
  state: DraftFormState = initialState();

  /** Start a request: bumps the sequence and enters "pending". */
  begin(): number {
    this.seq += 1;
    this.state = { status: "pending", lastResponse: null, lastError: null };
    return this.seq;
  }

  isCurrent(seq: number): boolean {
    return seq === this.seq;
  }

  /** Apply a successful response; returns false when `seq` is stale. */
  complete(seq: number, response: AnalyzeResponse): boolean {
    if (!this.isCurrent(seq)) {
      return false;
    }
    this.state = { status: "ok", lastResponse: response, lastError: null };
    return true;
  }

  /** Network-level failure: the service could not be reached at all. */
  fail(seq: number): boolean {
    if (!this.isCurrent(seq)) {
      return false;
    }
    this.state = { status: "service-unreachable", lastResponse: null, lastError: null };
    return true;
  }

  /** Contract failure: the service answered but the body is unusable. */
  reject(seq: number, message: string): boolean {
    if (!this.isCurrent(seq)) {
      return false;
    }
    this.error(message);
    return true;
  }

  /** Local error (e.g. bad base URL) — not tied to any request. */
  error(message: string): void {
    this.state = { status: "idle", lastResponse: null, lastError: message };
  }
}
