/**
 * Wires the issue-entry form to the recommendation service.
 *
 * Typing is never blocked: requests ride a 500 ms trailing debounce, every
 * dispatch gets a sequence number, and only the newest response may settle
 * the banner (stale in-flight replies are discarded).
 */

import { AnalyzeClient, DEFAULT_BASE_URL, FetchLike } from "./client.js";
import { debounce } from "./debounce.js";
import { BannerElements, renderState } from "./render.js";
import { FormSession } from "./state.js";
import { AnalyzeRequest, SchemaError } from "./types.js";

export const DEBOUNCE_MS = 500;

type TextControl = HTMLInputElement | HTMLTextAreaElement;

export interface PanelControls {
  summary: TextControl;
  description: TextControl;
  product: TextControl;
  component: TextControl;
  platform: TextControl;
  op_sys: TextControl;
  severity: TextControl;
  priority: TextControl;
  status: TextControl;
  keywords: TextControl;
  baseUrl: TextControl;
  banner: HTMLElement;
  chips: HTMLElement;
  retry: HTMLElement;
  meta: HTMLElement;
  health: HTMLElement;
}

const OPTIONAL_FIELDS = [
  "product",
  "component",
  "platform",
  "op_sys",
  "severity",
  "priority",
  "status",
] as const;

const DRAFT_FIELDS = ["summary", "description", ...OPTIONAL_FIELDS, "keywords"] as const;

/** Snapshot the form into an AnalyzeRequest; empty optionals are omitted. */
export function readDraft(controls: PanelControls): AnalyzeRequest {
  const draft: AnalyzeRequest = {
    summary: controls.summary.value,
    description: controls.description.value,
  };
  for (const name of OPTIONAL_FIELDS) {
    const value = controls[name].value;
    if (value !== "") {
      draft[name] = value;
    }
  }
  const keywords = controls.keywords.value
    .split(",")
    .map((k) => k.trim())
    .filter((k) => k !== "");
  if (keywords.length > 0) {
    draft.keywords = keywords;
  }
  return draft;
}

export interface PanelHandle {
  session: FormSession;
  client: AnalyzeClient;
  /** Bypass the debounce (used by the retry button). */
  dispatchNow(): Promise<void>;
  /** Update the health indicator from GET /health. */
  pingHealth(): Promise<void>;
}

export interface PanelOptions {
  fetchImpl?: FetchLike;
  debounceMs?: number;
}

export function wirePanel(controls: PanelControls, options: PanelOptions = {}): PanelHandle {
  const session = new FormSession();
  const client = new AnalyzeClient(controls.baseUrl.value || DEFAULT_BASE_URL, options.fetchImpl);
  const els: BannerElements = {
    banner: controls.banner,
    chips: controls.chips,
    retry: controls.retry,
    meta: controls.meta,
  };

  const dispatch = async (): Promise<void> => {
    debounced.cancel();
    const draft = readDraft(controls);
    const seq = session.begin();
    renderState(els, session.state);
    try {
      const response = await client.analyze(draft);
      session.complete(seq, response);
    } catch (err) {
      if (err instanceof SchemaError) {
        session.reject(seq, err.message);
      } else {
        session.fail(seq);
      }
    }
    // stale settlements above are no-ops, so this render is always current
    renderState(els, session.state);
  };

  const debounced = debounce(() => {
    void dispatch();
  }, options.debounceMs ?? DEBOUNCE_MS);

  for (const name of DRAFT_FIELDS) {
    controls[name].addEventListener("input", () => debounced());
  }

  controls.baseUrl.addEventListener("change", () => {
    try {
      client.setBaseUrl(controls.baseUrl.value);
    } catch (err) {
      debounced.cancel();
      session.error(err instanceof Error ? err.message : String(err));
      renderState(els, session.state);
    }
  });

  controls.retry.addEventListener("click", () => {
    void dispatch();
  });

  const pingHealth = async (): Promise<void> => {
    const up = await client.health();
    controls.health.textContent = up ? "service: up" : "service: down";
    controls.health.dataset.state = up ? "up" : "down";
  };

  renderState(els, session.state);

  return { session, client, dispatchNow: dispatch, pingHealth };
}
