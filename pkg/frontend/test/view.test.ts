import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";
import {
  overlayRect,
  renderCaseView,
  renderEmptyState,
  renderErrorScreen,
} from "../src/view.js";
import type { DiagnosisDoc } from "../src/types.js";

const golden = JSON.parse(
  readFileSync(new URL("../fixtures/golden_diagnosis.json", import.meta.url), "utf8"),
) as DiagnosisDoc;

function percentsIn(html: string): number[] {
  return [...html.matchAll(/data-percent="([0-9.]+)"/g)].map((m) => Number(m[1]));
}

describe("renderCaseView on the golden document", () => {
  const html = renderCaseView(golden, "processed.png", 640);

  it("shows a healthy 96% badge", () => {
    expect(html).toContain('data-badge="0"');
    expect(html).toContain(">healthy 96%<");
  });

  it("shows one bar per class, values exactly as served, summing to 100.0", () => {
    const percents = percentsIn(html);
    expect(percents).toHaveLength(3);
    expect(percents.reduce((a, b) => a + b, 0)).toBe(100.0);
    expect(html).toContain('data-percent="96.0"');
    expect(html).toContain('data-percent="2.0"');
  });

  it("places the overlay box at the served coordinates", () => {
    const box = golden.pods[0]!.box;
    const rect = overlayRect(box, 640);
    expect(rect.leftPct).toBeCloseTo((box.x_min / 640) * 100, 12);
    expect(rect.topPct).toBeCloseTo((box.y_min / 640) * 100, 12);
    expect(rect.widthPct).toBeCloseTo(((box.x_max - box.x_min) / 640) * 100, 12);
    expect(rect.heightPct).toBeCloseTo(((box.y_max - box.y_min) / 640) * 100, 12);
    expect(html).toContain(`left:${rect.leftPct}%`);
    expect(html).toContain(`width:${rect.widthPct}%`);
  });

  it("renders one expandable knowledge panel per pod", () => {
    const panels = html.match(/<details/g) ?? [];
    expect(panels).toHaveLength(golden.pods.length);
    expect(html).toContain("Show more about Healthy pod");
  });

  it("renders feedback controls for both verdicts on each pod", () => {
    expect(html).toContain('data-feedback="not_the_result" data-pod="0"');
    expect(html).toContain('data-feedback="not_the_disease" data-pod="0"');
    expect(html).toContain('data-pod-status="0"');
  });
});

describe("overlayRect clamping", () => {
  it("keeps every edge inside the image for out-of-range boxes", () => {
    const cases = [
      { x_min: -50, y_min: -20, x_max: 700, y_max: 680 },
      { x_min: 600, y_min: 600, x_max: 900, y_max: 900 },
      { x_min: -100, y_min: -100, x_max: -10, y_max: -10 },
    ];
    for (const box of cases) {
      const rect = overlayRect(box, 640);
      expect(rect.leftPct).toBeGreaterThanOrEqual(0);
      expect(rect.topPct).toBeGreaterThanOrEqual(0);
      expect(rect.widthPct).toBeGreaterThanOrEqual(0);
      expect(rect.heightPct).toBeGreaterThanOrEqual(0);
      expect(rect.leftPct + rect.widthPct).toBeLessThanOrEqual(100);
      expect(rect.topPct + rect.heightPct).toBeLessThanOrEqual(100);
    }
  });
});

describe("empty and error states", () => {
  it("shows an empty state when no pods were detected", () => {
    const html = renderCaseView({ ...golden, pods: [] }, "processed.png", 640);
    expect(html).toContain("No pods detected");
    expect(html).toContain(golden.image_id);
    expect(renderEmptyState("deadbeef")).toContain("deadbeef");
  });

  it("renders three distinct error screens", () => {
    const undecodable = renderErrorScreen("undecodable", "payload is not an image");
    const backend = renderErrorScreen("backend", "backend exited with status 1");
    const unreachable = renderErrorScreen("unreachable", "connection refused");
    expect(undecodable).toContain('data-error="undecodable"');
    expect(backend).toContain('data-error="backend"');
    expect(unreachable).toContain('data-error="unreachable"');
    expect(undecodable).toContain("not a readable photo");
    expect(backend).toContain("could not process this photo");
    expect(unreachable).toContain("unavailable");
  });

  it("offers retry only for the retriable screen", () => {
    expect(renderErrorScreen("unreachable", "x")).toContain("data-retry");
    expect(renderErrorScreen("undecodable", "x")).not.toContain("data-retry");
    expect(renderErrorScreen("backend", "x")).not.toContain("data-retry");
  });

  it("escapes service-provided text", () => {
    const html = renderErrorScreen("backend", '<script>alert("x")</script>');
    expect(html).not.toContain("<script>");
    expect(html).toContain("&lt;script&gt;");
  });
});

describe("fixture and live rendering share one path", () => {
  it("produces identical markup for the same document", () => {
    const live = renderCaseView(golden, "processed.png", 640);
    const fixture = renderCaseView(golden, "processed.png", 640);
    expect(fixture).toBe(live);
  });
});
