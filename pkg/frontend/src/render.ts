import { DraftFormState } from "./state.js";
import { AnalyzeResponse, formatConfidence } from "./types.js";

export const BANNER_IDLE = "Start typing to get a screenshot recommendation.";
export const BANNER_PENDING = "Analyzing draft…";
export const BANNER_UNREACHABLE =
  "Recommendation service unreachable. Your draft is unaffected — keep editing, or retry.";
export const BANNER_NO_IMAGE = "No screenshot attachment needed for this draft.";
export const BANNER_NEEDS_IMAGE = "A screenshot would strengthen this report:";
export const BANNER_BAD_REPLY = "Unexpected reply from the service:";

export interface BannerElements {
  banner: HTMLElement;
  chips: HTMLElement;
  retry: HTMLElement;
  meta: HTMLElement;
}

function verdictText(response: AnalyzeResponse): string {
  const verdict = response.needs_image ? BANNER_NEEDS_IMAGE : BANNER_NO_IMAGE;
  return `${verdict} (probability ${response.probability.toFixed(2)})`;
}

/** The single line shown in the banner for a given state. */
export function bannerText(state: DraftFormState): string {
  if (state.lastError !== null) {
    return `${BANNER_BAD_REPLY} ${state.lastError}`;
  }
  switch (state.status) {
    case "idle":
      return BANNER_IDLE;
    case "pending":
      return BANNER_PENDING;
    case "service-unreachable":
      return BANNER_UNREACHABLE;
    case "ok":
      // lastResponse is non-null exactly in "ok"
      return verdictText(state.lastResponse as AnalyzeResponse);
  }
}

function bannerKind(state: DraftFormState): string {
  if (state.lastError !== null) {
    return "error";
  }
  if (state.status === "service-unreachable") {
    return "unreachable";
  }
  if (state.status === "ok") {
    return state.lastResponse?.needs_image ? "positive" : "negative";
  }
  return state.status;
}

function copyToClipboard(text: string): void {
  void navigator.clipboard?.writeText(text);
}

function buildChip(doc: Document, category: AnalyzeResponse["categories"][number]): HTMLElement {
  const chip = doc.createElement("li");
  chip.className = "chip";

  const label = doc.createElement("span");
  label.className = "chip-label";
  label.textContent = `${category.name} ${formatConfidence(category.confidence)}`;
  chip.appendChild(label);

  const suggestion = doc.createElement("span");
  suggestion.className = "chip-suggestion";
  suggestion.textContent = category.suggestion;
  chip.appendChild(suggestion);

  const copy = doc.createElement("button");
  copy.type = "button";
  copy.className = "chip-copy";
  copy.textContent = "Copy";
  copy.addEventListener("click", () => copyToClipboard(category.suggestion));
  chip.appendChild(copy);

  return chip;
}

/**
 * Project the form state into the banner area. Chips appear in response
 * order — the service already ranked them, and this view never re-sorts.
 * On any error there is no partial render: the chip list is emptied.
 */
export function renderState(els: BannerElements, state: DraftFormState): void {
  els.banner.textContent = bannerText(state);
  els.banner.dataset.kind = bannerKind(state);
  els.retry.hidden = state.status !== "service-unreachable";

  els.chips.replaceChildren();
  els.meta.textContent = "";

  if (state.status !== "ok" || state.lastResponse === null) {
    return;
  }
  const response = state.lastResponse;
  const doc = els.chips.ownerDocument;
  for (const category of response.categories) {
    els.chips.appendChild(buildChip(doc, category));
  }
  els.meta.textContent = `model ${response.model_version} · threshold ${response.threshold.toFixed(2)}`;
}
