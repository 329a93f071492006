import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { Poller } from "../src/poll.js";

describe("Poller", () => {
  beforeEach(() => vi.useFakeTimers());
  afterEach(() => vi.useRealTimers());

  it("refreshes on start and then every interval", async () => {
    let calls = 0;
    const poller = new Poller(async () => {
      calls++;
    }, 30_000);
    poller.start();
    await vi.advanceTimersByTimeAsync(0);
    expect(calls).toBe(1);
    await vi.advanceTimersByTimeAsync(90_000);
    expect(calls).toBe(4);
    poller.stop();
  });

  it("flags the view stale after a failure and clears it on recovery", async () => {
    let fail = true;
    const poller = new Poller(async () => {
      if (fail) throw new Error("api down");
    }, 1000);
    await poller.tick();
    expect(poller.view.stale).toBe(true);
    expect(poller.view.lastError).toBe("api down");
    fail = false;
    await poller.tick();
    expect(poller.view.stale).toBe(false);
    expect(poller.view.lastError).toBeNull();
  });

  it("start is idempotent and stop halts the loop", async () => {
    let calls = 0;
    const poller = new Poller(async () => {
      calls++;
    }, 1000);
    poller.start();
    poller.start();
    await vi.advanceTimersByTimeAsync(2500);
    poller.stop();
    const after = calls;
    await vi.advanceTimersByTimeAsync(5000);
    expect(calls).toBe(after);
    expect(calls).toBe(3); // one immediate + two intervals
  });
});
