// Polling loop: the UI holds no state of its own, it just re-reads the API
// every interval. A failed cycle flips the view stale until the next success.

export interface PollView {
  stale: boolean;
  lastError: string | null;
  cycles: number;
}

export class Poller {
  view: PollView = { stale: false, lastError: null, cycles: 0 };
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private readonly refresh: () => Promise<void>,
    public intervalMs = 30_000,
  ) {}

  async tick(): Promise<void> {
    try {
      await this.refresh();
      this.view = { stale: false, lastError: null, cycles: this.view.cycles + 1 };
    } catch (err) {
      this.view = {
        stale: true,
        lastError: err instanceof Error ? err.message : String(err),
        cycles: this.view.cycles + 1,
      };
    }
  }

  start(): void {
    if (this.timer !== null) return;
    void this.tick();
    this.timer = setInterval(() => void this.tick(), this.intervalMs);
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }
}
