// HTML renderers. Pure string builders so they are testable without a DOM;
// main.ts mounts them and wires events by delegation on data-* attributes.

import { colorFor } from "./colors.js";
import type { TriageItem } from "./triage.js";
import type { AlertItem, ConceptDetail, ConceptSummary } from "./types.js";

export function esc(text: unknown): string {
  return String(text)
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

export function formatSequence(ports: number[]): string {
  const shown = ports.slice(0, 12).join(", ");
  return ports.length > 12 ? `[${shown}, …]` : `[${shown}]`;
}

export function severityBadge(severity: string): string {
  return `<span class="badge sev-${esc(severity)}">${esc(severity)}</span>`;
}

export function renderStaleBanner(stale: boolean, message: string | null): string {
  if (!stale) return "";
  return (
    `<div class="stale-banner" role="alert">Data may be stale — API unreachable` +
    (message ? ` (${esc(message)})` : "") +
    `. Retrying…</div>`
  );
}

export function renderTriageQueue(items: TriageItem[]): string {
  if (items.length === 0) {
    return `<div class="empty-state">Nothing to triage — every concept is labeled.</div>`;
  }
  const rows = items.map(({ concept, size }) => {
    const exemplar = concept.exemplars[0] ? formatSequence(concept.exemplars[0]) : "—";
    return (
      `<li class="triage-item" data-concept="${esc(concept.id)}">` +
      `<span class="swatch" style="background:${colorFor(concept.id)}"></span>` +
      `<span class="cid">${esc(concept.id)}</span>` +
      `<span class="size">${size} src</span>` +
      `<span class="cat">${esc(concept.category)}</span>` +
      `<span class="seq">${esc(exemplar)}</span>` +
      `<span class="seen">first w${concept.first_seen}</span>` +
      `</li>`
    );
  });
  return `<ul class="triage-list">${rows.join("")}</ul>`;
}

export function renderConceptDetail(detail: ConceptDetail): string {
  const exemplars = detail.exemplars
    .map((seq) => `<li><code>${esc(formatSequence(seq))}</code></li>`)
    .join("");
  const context = detail.port_context
    .map((ctx) => {
      const neighbors = ctx.neighbors
        .map(([port, sim]) => `${port} (${sim.toFixed(2)})`)
        .join(", ");
      return `<li><b>${ctx.port}</b> ↔ ${esc(neighbors)}</li>`;
    })
    .join("");
  const history = detail.history
    .map(
      (h) =>
        `<li>${severityBadge(h.severity ?? "?")} ${esc(h.note ?? "")}` +
        ` <span class="muted">${esc(h.author ?? "")} ${esc(h.ts ?? "")}</span></li>`,
    )
    .join("");
  return (
    `<div class="detail" data-concept="${esc(detail.id)}">` +
    `<h3><span class="swatch" style="background:${colorFor(detail.id)}"></span>` +
    `${esc(detail.id)} ${severityBadge(detail.severity)}</h3>` +
    `<p class="muted">${esc(detail.category)} · first w${detail.first_seen} · ` +
    `last w${detail.last_seen} · seen ${detail.occurrences}×</p>` +
    (detail.note ? `<p class="note">${esc(detail.note)}</p>` : "") +
    `<h4>Exemplar sequences</h4><ul class="exemplars">${exemplars || "<li>—</li>"}</ul>` +
    `<h4>Nearest ports</h4><ul class="port-context">${context || "<li>no embedding table loaded</li>"}</ul>` +
    `<h4>Label</h4>` +
    `<form class="label-form" data-concept="${esc(detail.id)}">` +
    `<select name="severity">` +
    ["malicious", "suspicious", "benign", "unlabeled"]
      .map((s) => `<option value="${s}"${s === detail.severity ? " selected" : ""}>${s}</option>`)
      .join("") +
    `</select>` +
    `<input name="note" type="text" placeholder="note" value="${esc(detail.note)}">` +
    `<button type="submit">Save</button>` +
    `<span class="label-status" data-status></span>` +
    `</form>` +
    (history ? `<h4>History</h4><ul class="history">${history}</ul>` : "") +
    `</div>`
  );
}

export function renderAlerts(alerts: AlertItem[], concepts: Record<string, ConceptSummary>): string {
  if (alerts.length === 0) {
    return `<div class="empty-state">No alerts yet.</div>`;
  }
  const rows = [...alerts]
    .sort((a, b) => b.window - a.window)
    .map((a) => {
      const severity = concepts[a.concept]?.severity ?? "unlabeled";
      return (
        `<li class="alert kind-${esc(a.kind)}" data-concept="${esc(a.concept)}" ` +
        `data-kind="${esc(a.kind)}" data-window="${a.window}">` +
        `<span class="kind">${esc(a.kind)}</span>` +
        `<span class="cid">${esc(a.concept)}</span> ${severityBadge(severity)}` +
        `<span class="size">${a.size} src</span>` +
        `<span class="win">w${a.window}</span>` +
        `<span class="muted">${esc(a.ts)}</span>` +
        `</li>`
      );
    });
  return `<ul class="alert-list">${rows.join("")}</ul>`;
}
