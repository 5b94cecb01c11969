/** Pure HTML renderers. No DOM access here, so everything is testable as
 *  strings and fixture mode shares the exact code path with live mode. */

import { barsFor, topBadge } from "./format.js";
import type { BoxDoc, DiagnosisDoc, KnowledgeRef, PodDoc } from "./types.js";

export interface OverlayRect {
  leftPct: number;
  topPct: number;
  widthPct: number;
  heightPct: number;
}

const clamp = (value: number, lo: number, hi: number) =>
  Math.min(hi, Math.max(lo, value));

/** Box corners (processed-image pixels) to clamped percentage geometry. */
export function overlayRect(box: BoxDoc, extent: number): OverlayRect {
  const left = clamp((box.x_min / extent) * 100, 0, 100);
  const top = clamp((box.y_min / extent) * 100, 0, 100);
  const right = clamp((box.x_max / extent) * 100, 0, 100);
  const bottom = clamp((box.y_max / extent) * 100, 0, 100);
  return {
    leftPct: left,
    topPct: top,
    widthPct: Math.max(0, right - left),
    heightPct: Math.max(0, bottom - top),
  };
}

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function renderBars(pod: PodDoc): string {
  const rows = barsFor(pod.probs).map(
    (bar) => `
    <div class="bar-row" data-class="${escapeHtml(bar.name)}" data-percent="${bar.percent}">
      <span class="bar-label">${escapeHtml(bar.name)}</span>
      <span class="bar-track"><span class="bar-fill" style="width:${bar.width}%"></span></span>
      <span class="bar-value">${bar.percent}%</span>
    </div>`,
  );
  return rows.join("");
}

function renderKnowledge(ref: KnowledgeRef | undefined): string {
  if (!ref) {
    return "";
  }
  const items = (values: string[]) =>
    values.map((v) => `<li>${escapeHtml(v)}</li>`).join("");
  const gallery = ref.images
    .map((src) => `<img class="kb-image" src="${escapeHtml(src)}" alt="">`)
    .join("");
  return `
    <details class="knowledge">
      <summary>Show more about ${escapeHtml(ref.display_name)}</summary>
      <h4>Symptoms</h4><ul>${items(ref.symptoms)}</ul>
      <h4>What to do</h4><ul>${items(ref.treatments)}</ul>
      ${gallery}
    </details>`;
}

function renderFeedbackControls(podIndex: number): string {
  return `
    <div class="feedback">
      <button type="button" data-feedback="not_the_result" data-pod="${podIndex}">Not the result</button>
      <button type="button" data-feedback="not_the_disease" data-pod="${podIndex}">Not the disease</button>
      <span class="feedback-status" data-pod-status="${podIndex}"></span>
    </div>`;
}

export function renderPodCard(
  pod: PodDoc,
  index: number,
  knowledge: Map<string, KnowledgeRef>,
): string {
  const top = pod.probs[pod.top] ?? 0;
  return `
    <section class="pod-card" data-pod-card="${index}">
      <span class="badge" data-badge="${index}">${escapeHtml(topBadge(pod.top, top))}</span>
      ${renderBars(pod)}
      ${renderKnowledge(knowledge.get(pod.top))}
      ${renderFeedbackControls(index)}
    </section>`;
}

function renderOverlays(pods: PodDoc[], extent: number): string {
  return pods
    .map((pod, index) => {
      const rect = overlayRect(pod.box, extent);
      const style =
        `left:${rect.leftPct}%;top:${rect.topPct}%;` +
        `width:${rect.widthPct}%;height:${rect.heightPct}%`;
      return `
      <div class="overlay" data-overlay="${index}" style="${style}">
        <span class="overlay-tag">${escapeHtml(pod.top)}</span>
      </div>`;
    })
    .join("");
}

export function renderEmptyState(imageId: string): string {
  return `
    <section class="empty-state">
      <p>No pods detected in image <code>${escapeHtml(imageId)}</code>.</p>
      <p>Try a closer photo of a single pod.</p>
    </section>`;
}

/** The whole case view: processed photo with overlays, one card per pod. */
export function renderCaseView(
  doc: DiagnosisDoc,
  imageUrl: string | null,
  extent: number,
): string {
  if (doc.pods.length === 0) {
    return renderEmptyState(doc.image_id);
  }
  const knowledge = new Map(doc.kb_refs.map((ref) => [ref.class, ref]));
  const photo = imageUrl
    ? `<div class="photo-frame">
         <img class="photo" src="${escapeHtml(imageUrl)}" alt="processed pod photo">
         ${renderOverlays(doc.pods, extent)}
       </div>`
    : "";
  const cards = doc.pods
    .map((pod, index) => renderPodCard(pod, index, knowledge))
    .join("");
  return `${photo}<div class="cards">${cards}</div>`;
}

export type ErrorKind = "undecodable" | "backend" | "unreachable";

/** Distinct, user-readable error screens; never a silent failure. */
export function renderErrorScreen(kind: ErrorKind, message: string): string {
  const blocks: Record<ErrorKind, { title: string; hint: string; retry: boolean }> = {
    undecodable: {
      title: "That file is not a readable photo",
      hint: "Upload a JPEG or PNG image of the pod and try again.",
      retry: false,
    },
    backend: {
      title: "The detector could not process this photo",
      hint: "The image was fine but the detection backend failed.",
      retry: false,
    },
    unreachable: {
      title: "Diagnosis service unavailable",
      hint: "Check your connection; the upload can be retried.",
      retry: true,
    },
  };
  const block = blocks[kind];
  const retry = block.retry
    ? `<button type="button" data-retry>Retry upload</button>`
    : "";
  return `
    <section class="error-screen error-${kind}" data-error="${kind}">
      <h3>${escapeHtml(block.title)}</h3>
      <p>${escapeHtml(block.hint)}</p>
      <p class="error-detail">${escapeHtml(message)}</p>
      ${retry}
    </section>`;
}
