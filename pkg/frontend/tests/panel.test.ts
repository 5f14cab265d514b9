import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { ResponseLike } from "../src/client.js";
import { PanelControls, readDraft, wirePanel } from "../src/panel.js";
import { BANNER_BAD_REPLY, BANNER_UNREACHABLE } from "../src/render.js";

interface RecordedCall {
  url: string;
  method: string | undefined;
  draft: Record<string, unknown> | undefined;
  resolve(body: unknown): void;
  resolveRaw(response: ResponseLike): void;
  rejectNetwork(): void;
}

function fakeFetch() {
  const calls: RecordedCall[] = [];
  const impl = (
    url: string,
    init?: { method?: string; headers?: Record<string, string>; body?: string },
  ): Promise<ResponseLike> =>
    new Promise((resolve, reject) => {
      calls.push({
        url,
        method: init?.method,
        draft: init?.body === undefined ? undefined : JSON.parse(init.body),
        resolve: (body: unknown) =>
          resolve({ ok: true, status: 200, json: async () => body }),
        resolveRaw: resolve,
        rejectNetwork: () => reject(new TypeError("fetch failed")),
      });
    });
  return { impl, calls };
}

function buildControls(): PanelControls {
  document.body.innerHTML = `
    <input id="f-summary">
    <textarea id="f-description"></textarea>
    <input id="f-product"><input id="f-component"><input id="f-platform">
    <input id="f-op-sys"><input id="f-severity"><input id="f-priority">
    <input id="f-status"><input id="f-keywords">
    <input id="f-base-url" value="http://127.0.0.1:8701">
    <div id="banner"></div><button id="retry" hidden>Retry</button>
    <ul id="chips"></ul><div id="meta"></div><span id="health"></span>
  `;
  const byId = <T extends HTMLElement>(id: string) => document.getElementById(id) as T;
  return {
    summary: byId<HTMLInputElement>("f-summary"),
    description: byId<HTMLTextAreaElement>("f-description"),
    product: byId<HTMLInputElement>("f-product"),
    component: byId<HTMLInputElement>("f-component"),
    platform: byId<HTMLInputElement>("f-platform"),
    op_sys: byId<HTMLInputElement>("f-op-sys"),
    severity: byId<HTMLInputElement>("f-severity"),
    priority: byId<HTMLInputElement>("f-priority"),
    status: byId<HTMLInputElement>("f-status"),
    keywords: byId<HTMLInputElement>("f-keywords"),
    baseUrl: byId<HTMLInputElement>("f-base-url"),
    banner: byId("banner"),
    chips: byId("chips"),
    retry: byId("retry"),
    meta: byId("meta"),
    health: byId("health"),
  };
}

function type(control: HTMLInputElement | HTMLTextAreaElement, text: string): void {
  control.value = text;
  control.dispatchEvent(new Event("input", { bubbles: true }));
}

function positiveBody(tag: string): Record<string, unknown> {
  return {
    needs_image: true,
    probability: 0.9,
    threshold: 0.5,
    categories: [{ name: "Code", confidence: 0.7, suggestion: `attach ${tag}` }],
    model_version: tag.padEnd(12, "0").slice(0, 12),
  };
}

// pumps the microtask queue so settled fetch promises propagate
async function flush(): Promise<void> {
  for (let i = 0; i < 10; i++) {
    await Promise.resolve();
  }
}

const EDITABLE: (keyof PanelControls)[] = [
  "summary",
  "description",
  "product",
  "component",
  "platform",
  "op_sys",
  "severity",
  "priority",
  "status",
  "keywords",
  "baseUrl",
];

function expectEditable(controls: PanelControls): void {
  for (const name of EDITABLE) {
    expect((controls[name] as HTMLInputElement).disabled).toBe(false);
  }
}

describe("readDraft", () => {
  it("always includes summary and description, omits empty optionals", () => {
    const controls = buildControls();
    const draft = readDraft(controls);
    expect(draft).toEqual({ summary: "", description: "" });
  });

  it("splits keywords on commas and trims them", () => {
    const controls = buildControls();
    controls.summary.value = "menu is broken";
    controls.component.value = "Preferences";
    controls.keywords.value = "crash, menu ,  ui-glitch,";
    const draft = readDraft(controls);
    expect(draft.component).toBe("Preferences");
    expect(draft.keywords).toEqual(["crash", "menu", "ui-glitch"]);
    expect(draft.product).toBeUndefined();
  });
});

describe("wirePanel", () => {
  beforeEach(() => vi.useFakeTimers());
  afterEach(() => vi.useRealTimers());

  it("sends one request 500 ms after a single edit", async () => {
    const { impl, calls } = fakeFetch();
    const controls = buildControls();
    wirePanel(controls, { fetchImpl: impl });

    type(controls.summary, "crash when saving");
    await vi.advanceTimersByTimeAsync(499);
    expect(calls).toHaveLength(0);
    await vi.advanceTimersByTimeAsync(1);
    expect(calls).toHaveLength(1);
    expect(calls[0].url).toBe("http://127.0.0.1:8701/analyze");
    expect(calls[0].method).toBe("POST");
    expect(calls[0].draft).toEqual({ summary: "crash when saving", description: "" });
  });

  it("issues at most 6 requests during a 3 s typing burst", async () => {
    const { impl, calls } = fakeFetch();
    const controls = buildControls();
    wirePanel(controls, { fetchImpl: impl });

    let text = "";
    for (let t = 0; t < 3000; t += 100) {
      text += "x";
      type(controls.summary, text);
      await vi.advanceTimersByTimeAsync(100);
    }
    expect(calls.length).toBeLessThanOrEqual(6);

    await vi.advanceTimersByTimeAsync(500);
    expect(calls.length).toBeGreaterThanOrEqual(1);
    expect(calls.length).toBeLessThanOrEqual(7);
  });

  it("renders the response matching the latest form state when replies arrive out of order", async () => {
    const { impl, calls } = fakeFetch();
    const controls = buildControls();
    const handle = wirePanel(controls, { fetchImpl: impl });

    type(controls.summary, "first");
    await vi.advanceTimersByTimeAsync(500);
    type(controls.summary, "second");
    await vi.advanceTimersByTimeAsync(500);
    expect(calls).toHaveLength(2);
    expect(calls[0].draft?.summary).toBe("first");
    expect(calls[1].draft?.summary).toBe("second");

    // newer reply lands first...
    calls[1].resolve(positiveBody("second"));
    await flush();
    expect(handle.session.state.status).toBe("ok");
    expect(controls.chips.textContent).toContain("attach second");

    // ...then the stale one, which must be discarded
    calls[0].resolve(positiveBody("first"));
    await flush();
    expect(handle.session.state.lastResponse?.categories[0].suggestion).toBe("attach second");
    expect(controls.chips.textContent).toContain("attach second");
    expect(controls.chips.textContent).not.toContain("attach first");
  });

  it("maps network failure to service-unreachable with a working retry", async () => {
    const { impl, calls } = fakeFetch();
    const controls = buildControls();
    const handle = wirePanel(controls, { fetchImpl: impl });

    type(controls.summary, "no service yet");
    await vi.advanceTimersByTimeAsync(500);
    calls[0].rejectNetwork();
    await flush();

    expect(handle.session.state.status).toBe("service-unreachable");
    expect(controls.banner.textContent).toBe(BANNER_UNREACHABLE);
    expect(controls.retry.hidden).toBe(false);
    expectEditable(controls);

    // retry bypasses the debounce
    controls.retry.dispatchEvent(new Event("click"));
    expect(calls).toHaveLength(2);
    calls[1].resolve(positiveBody("retried"));
    await flush();
    expect(handle.session.state.status).toBe("ok");
    expect(controls.retry.hidden).toBe(true);
  });

  it("treats a positive verdict without categories as a schema violation", async () => {
    const { impl, calls } = fakeFetch();
    const controls = buildControls();
    const handle = wirePanel(controls, { fetchImpl: impl });

    type(controls.summary, "bad body");
    await vi.advanceTimersByTimeAsync(500);
    calls[0].resolve({ ...positiveBody("bad"), categories: [] });
    await flush();

    expect(handle.session.state.lastError).toContain("categories is empty");
    expect(controls.banner.dataset.kind).toBe("error");
    expect(controls.banner.textContent).toContain(BANNER_BAD_REPLY);
    expect(controls.chips.children).toHaveLength(0);
    expectEditable(controls);
  });

  it("treats a non-200 reply as a contract error, not unreachability", async () => {
    const { impl, calls } = fakeFetch();
    const controls = buildControls();
    const handle = wirePanel(controls, { fetchImpl: impl });

    type(controls.summary, "rejected");
    await vi.advanceTimersByTimeAsync(500);
    calls[0].resolveRaw({ ok: false, status: 400, json: async () => ({ error: "nope" }) });
    await flush();

    expect(handle.session.state.status).toBe("idle");
    expect(handle.session.state.lastError).toContain("HTTP 400");
    expect(controls.banner.dataset.kind).toBe("error");
  });

  it("keeps the form editable in every status", async () => {
    const { impl, calls } = fakeFetch();
    const controls = buildControls();
    wirePanel(controls, { fetchImpl: impl });
    expectEditable(controls); // idle

    type(controls.summary, "hello");
    await vi.advanceTimersByTimeAsync(500);
    expectEditable(controls); // pending

    calls[0].resolve(positiveBody("ok"));
    await flush();
    expectEditable(controls); // ok

    type(controls.summary, "hello again");
    await vi.advanceTimersByTimeAsync(500);
    calls[1].rejectNetwork();
    await flush();
    expectEditable(controls); // service-unreachable

    // typing after an outage still works and re-enters pending
    type(controls.summary, "hello once more");
    await vi.advanceTimersByTimeAsync(500);
    expect(calls).toHaveLength(3);
  });

  it("only ever targets the configured loopback base URL", async () => {
    const { impl, calls } = fakeFetch();
    const controls = buildControls();
    wirePanel(controls, { fetchImpl: impl });

    type(controls.summary, "a");
    await vi.advanceTimersByTimeAsync(500);

    controls.baseUrl.value = "http://localhost:9999";
    controls.baseUrl.dispatchEvent(new Event("change"));
    type(controls.summary, "ab");
    await vi.advanceTimersByTimeAsync(500);

    // a non-loopback URL is refused outright
    controls.baseUrl.value = "http://bugs.example.org:8701";
    controls.baseUrl.dispatchEvent(new Event("change"));
    expect(controls.banner.dataset.kind).toBe("error");
    expect(controls.banner.textContent).toContain("loopback");

    type(controls.summary, "abc");
    await vi.advanceTimersByTimeAsync(500);

    expect(calls.map((c) => c.url)).toEqual([
      "http://127.0.0.1:8701/analyze",
      "http://localhost:9999/analyze",
      "http://localhost:9999/analyze",
    ]);
  });

  it("reports service health through the indicator", async () => {
    const { impl, calls } = fakeFetch();
    const controls = buildControls();
    const handle = wirePanel(controls, { fetchImpl: impl });

    const ping = handle.pingHealth();
    expect(calls[0].url).toBe("http://127.0.0.1:8701/health");
    calls[0].resolveRaw({ ok: true, status: 200, json: async () => ({ status: "ok" }) });
    await ping;
    expect(controls.health.textContent).toBe("service: up");
    expect(controls.health.dataset.state).toBe("up");

    const second = handle.pingHealth();
    calls[1].rejectNetwork();
    await second;
    expect(controls.health.textContent).toBe("service: down");
    expect(controls.health.dataset.state).toBe("down");
  });
});
