// Browser bootstrap: mount points, event delegation, tooltip. Everything
// interesting lives in the tested modules this file wires together.

import { ApiClient } from "./api.js";
import { App, Mounts } from "./app.js";
import { bandAt, sizeAt } from "./timeline.js";
import type { Severity } from "./types.js";

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node;
}

const mounts: Mounts = {
  banner: (html) => (el("banner").innerHTML = html),
  timeline: (html) => (el("timeline").innerHTML = html),
  triage: (html) => (el("triage").innerHTML = html),
  alerts: (html) => (el("alerts").innerHTML = html),
  detail: (html) => (el("detail").innerHTML = html),
  labelStatus: (conceptId, text) => {
    const form = document.querySelector(`.label-form[data-concept="${conceptId}"]`);
    const status = form?.querySelector("[data-status]");
    if (status) status.textContent = text;
  },
};

const app = new App(new ApiClient(""), mounts);

function conceptOf(target: EventTarget | null): string | null {
  let node = target as HTMLElement | null;
  while (node) {
    const concept = node.dataset?.concept;
    if (concept && concept !== "__noise__") return concept;
    node = node.parentElement;
  }
  return null;
}

document.addEventListener("click", (event) => {
  const concept = conceptOf(event.target);
  if (concept && !(event.target as HTMLElement).closest("form")) {
    void app.showDetail(concept);
  }
});

document.addEventListener("submit", (event) => {
  const form = event.target as HTMLFormElement;
  if (!form.classList.contains("label-form")) return;
  event.preventDefault();
  const concept = form.dataset.concept;
  if (!concept) return;
  const severity = (form.elements.namedItem("severity") as HTMLSelectElement).value as Severity;
  const note = (form.elements.namedItem("note") as HTMLInputElement).value;
  void app.submitLabel(concept, severity, note);
});

// timeline hover tooltip: map cursor to (window, volume), look the band up
const tooltip = el("tooltip");
el("timeline").addEventListener("mousemove", (event) => {
  const svg = (event.target as HTMLElement).closest("svg.timeline") as SVGSVGElement | null;
  const stack = app.stack;
  if (!svg || !stack || stack.windows.length === 0) {
    tooltip.hidden = true;
    return;
  }
  const rect = svg.getBoundingClientRect();
  const fx = (event.clientX - rect.left) / rect.width;
  const fy = (event.clientY - rect.top) / rect.height;
  // inverse of the renderer's geometry (padLeft 48 / pad 8 over 900x260)
  const position = Math.round(((fx * 900 - 48) / (900 - 56)) * (stack.windows.length - 1));
  const volume = ((260 - 22 - fy * 260) / (260 - 30)) * stack.maxTotal;
  if (position < 0 || position >= stack.windows.length) {
    tooltip.hidden = true;
    return;
  }
  const concept = bandAt(stack, position, volume);
  if (!concept) {
    tooltip.hidden = true;
    return;
  }
  const size = sizeAt(stack, concept, position);
  const label = concept === "__noise__" ? "noise" : concept;
  const category =
    concept === "__noise__" ? "NoiseOutliers" : app.concepts[concept]?.category ?? "";
  tooltip.hidden = false;
  tooltip.textContent = `w${stack.windows[position]} · ${label} · ${size} src · ${category}`;
  tooltip.style.left = `${event.clientX + 12}px`;
  tooltip.style.top = `${event.clientY + 12}px`;
});
el("timeline").addEventListener("mouseleave", () => (tooltip.hidden = true));

app.poller.start();
