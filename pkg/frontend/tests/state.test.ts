import { describe, expect, it } from "vitest";

import { FormSession } from "../src/state.js";
import { AnalyzeResponse } from "../src/types.js";

function response(version: string): AnalyzeResponse {
  return {
    needs_image: true,
    probability: 0.9,
    threshold: 0.5,
    categories: [{ name: "Code", confidence: 0.7, suggestion: "attach code" }],
    model_version: version,
  };
}

describe("FormSession", () => {
  it("moves idle -> pending -> ok for a single request", () => {
    const session = new FormSession();
    expect(session.state.status).toBe("idle");
    const seq = session.begin();
    expect(session.state.status).toBe("pending");
    expect(session.state.lastResponse).toBeNull();
    expect(session.complete(seq, response("a"))).toBe(true);
    expect(session.state.status).toBe("ok");
    expect(session.state.lastResponse?.model_version).toBe("a");
  });

  it("discards a stale response that arrives after a newer dispatch", () => {
    const session = new FormSession();
    const first = session.begin();
    const second = session.begin();
    expect(session.complete(first, response("stale"))).toBe(false);
    expect(session.state.status).toBe("pending");
    expect(session.complete(second, response("fresh"))).toBe(true);
    expect(session.state.lastResponse?.model_version).toBe("fresh");
  });

  it("a stale response cannot overwrite a settled newer one", () => {
    const session = new FormSession();
    const first = session.begin();
    const second = session.begin();
    session.complete(second, response("fresh"));
    expect(session.complete(first, response("stale"))).toBe(false);
    expect(session.fail(first)).toBe(false);
    expect(session.state.status).toBe("ok");
    expect(session.state.lastResponse?.model_version).toBe("fresh");
  });

  it("maps network failure of the current request to service-unreachable", () => {
    const session = new FormSession();
    const seq = session.begin();
    expect(session.fail(seq)).toBe(true);
    expect(session.state.status).toBe("service-unreachable");
    expect(session.state.lastResponse).toBeNull();
  });

  it("maps contract failure to an error with no rendered response", () => {
    const session = new FormSession();
    const seq = session.begin();
    expect(session.reject(seq, "bad body")).toBe(true);
    expect(session.state.status).toBe("idle");
    expect(session.state.lastError).toBe("bad body");
    expect(session.state.lastResponse).toBeNull();
  });

  it("keeps lastResponse non-null exactly in status ok", () => {
    const session = new FormSession();
    const check = () =>
      expect(session.state.lastResponse !== null).toBe(session.state.status === "ok");

    check();
    const a = session.begin();
    check();
    session.complete(a, response("a"));
    check();
    const b = session.begin();
    check();
    session.fail(b);
    check();
    const c = session.begin();
    session.reject(c, "oops");
    check();
    session.error("bad base url");
    check();
  });
});
