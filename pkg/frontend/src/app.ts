// Application controller: fetch -> derive -> hand HTML to the mount points.
// All view state is derived from the latest API responses; a refresh loses
// nothing but the scroll position.

import { ApiClient } from "./api.js";
import { LabelSubmitter } from "./labels.js";
import { Poller } from "./poll.js";
import { renderAlerts, renderConceptDetail, renderStaleBanner, renderTriageQueue } from "./render.js";
import { Stack, renderTimelineSvg, stackSeries } from "./timeline.js";
import { buildTriageQueue } from "./triage.js";
import type { ConceptSummary, Severity, TimelineResponse } from "./types.js";

export interface Mounts {
  banner(html: string): void;
  timeline(html: string): void;
  triage(html: string): void;
  alerts(html: string): void;
  detail(html: string): void;
  labelStatus(conceptId: string, text: string): void;
}

export class App {
  readonly poller: Poller;
  readonly labels: LabelSubmitter;
  stack: Stack | null = null;
  concepts: Record<string, ConceptSummary> = {};
  selected: string | null = null;

  constructor(
    private readonly api: ApiClient,
    private readonly mounts: Mounts,
    pollIntervalMs = 30_000,
  ) {
    this.poller = new Poller(() => this.refresh(), pollIntervalMs);
    this.labels = new LabelSubmitter(api);
  }

  async refresh(): Promise<void> {
    try {
      const [timeline, conceptsResp, alertsResp] = await Promise.all([
        this.api.timeline(),
        this.api.concepts(),
        this.api.alerts(),
      ]);
      this.concepts = Object.fromEntries(conceptsResp.concepts.map((c) => [c.id, c]));
      this.renderAll(timeline, alertsResp.alerts);
      this.mounts.banner(renderStaleBanner(false, null));
      if (this.selected) {
        await this.showDetail(this.selected);
      }
    } catch (err) {
      this.mounts.banner(
        renderStaleBanner(true, err instanceof Error ? err.message : String(err)),
      );
      throw err;
    }
  }

  private renderAll(timeline: TimelineResponse, alerts: Parameters<typeof renderAlerts>[0]): void {
    this.stack = stackSeries(timeline);
    const meta = Object.fromEntries(
      Object.entries(this.concepts).map(([id, c]) => [
        id,
        { category: c.category, severity: c.severity },
      ]),
    );
    this.mounts.timeline(renderTimelineSvg(this.stack, meta));
    this.mounts.triage(
      renderTriageQueue(buildTriageQueue(Object.values(this.concepts), timeline.series)),
    );
    this.mounts.alerts(renderAlerts(alerts, this.concepts));
  }

  async showDetail(conceptId: string): Promise<void> {
    this.selected = conceptId;
    const resp = await this.api.concept(conceptId);
    this.mounts.detail(renderConceptDetail(resp.concept));
  }

  async submitLabel(conceptId: string, severity: Severity, note: string): Promise<void> {
    this.mounts.labelStatus(conceptId, "saving…");
    const outcome = await this.labels.submit(conceptId, severity, note);
    if (outcome.ok) {
      this.mounts.labelStatus(
        conceptId,
        outcome.response.status === "queued" ? "queued for next window" : "saved",
      );
      // pull fresh state so the badge reflects the server's truth
      await this.poller.tick();
    } else {
      this.mounts.labelStatus(
        conceptId,
        outcome.retryable ? `${outcome.message}` : `failed: ${outcome.message}`,
      );
    }
  }
}
