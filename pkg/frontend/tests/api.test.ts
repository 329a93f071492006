import { describe, expect, it } from "vitest";

import { ApiClient, ApiError, NetworkError } from "../src/api.js";

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

describe("url building", () => {
  const api = new ApiClient("http://x");

  it("skips undefined params", () => {
    expect(api.url("/api/timeline", { from: undefined, to: undefined })).toBe(
      "http://x/api/timeline",
    );
    expect(api.url("/api/timeline", { from: 3, to: 9 })).toBe(
      "http://x/api/timeline?from=3&to=9",
    );
  });

  it("encodes concept ids", () => {
    expect(api.url("/api/concepts/c 1")).toBe("http://x/api/concepts/c 1");
    const calls: string[] = [];
    const client = new ApiClient("", async (url) => {
      calls.push(url);
      return jsonResponse({ v: 1, concept: {} });
    });
    void client.concept("c/1");
    expect(calls[0]).toBe("/api/concepts/c%2F1");
  });
});

describe("error mapping", () => {
  it("maps server errors to ApiError with the server message", async () => {
    const api = new ApiClient("", async () => jsonResponse({ v: 1, error: "window 7 not available" }, 404));
    await expect(api.timeline()).rejects.toMatchObject({ status: 404, message: "window 7 not available" });
  });

  it("maps fetch failures to NetworkError", async () => {
    const api = new ApiClient("", async () => {
      throw new TypeError("fetch failed");
    });
    await expect(api.alerts()).rejects.toBeInstanceOf(NetworkError);
  });

  it("maps label 404 to 'concept not found'", async () => {
    const api = new ApiClient("", async () => jsonResponse({ v: 1, error: "concept c9 not found" }, 404));
    await expect(api.label("c9", "malicious", "", "k")).rejects.toMatchObject({
      status: 404,
      message: "concept not found",
    });
  });
});

describe("label POST", () => {
  it("sends severity, note and the idempotency key", async () => {
    let captured: { url: string; init?: RequestInit } | null = null;
    const api = new ApiClient("", async (url, init) => {
      captured = { url, init };
      return jsonResponse({ v: 1, status: "applied", concept: "c1", severity: "malicious" });
    });
    const resp = await api.label("c1", "malicious", "mirai", "key-7");
    expect(resp.status).toBe("applied");
    expect(captured!.url).toBe("/api/concepts/c1/label");
    expect(captured!.init?.method).toBe("POST");
    expect(JSON.parse(String(captured!.init?.body))).toEqual({
      severity: "malicious",
      note: "mirai",
      key: "key-7",
    });
  });
});
