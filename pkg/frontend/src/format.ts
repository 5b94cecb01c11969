/** Percentage formatting. The service already renormalized the values;
 *  nothing here does arithmetic beyond turning fractions into display text. */

export interface Bar {
  name: string;
  /** One-decimal percent string, e.g. "96.0". */
  percent: string;
  /** Bar width in [0, 100] for CSS. */
  width: number;
}

/** Badge text for the winning class, integer percent: "healthy 96%". */
export function topBadge(name: string, prob: number): string {
  return `${name} ${Math.round(prob * 100)}%`;
}

export function barPercent(prob: number): string {
  return (prob * 100).toFixed(1);
}

/** Bars for every served class, highest probability first, ties by name. */
export function barsFor(probs: Record<string, number>): Bar[] {
  return Object.entries(probs)
    .sort(([an, av], [bn, bv]) => (bv - av) || an.localeCompare(bn))
    .map(([name, prob]) => ({
      name,
      percent: barPercent(prob),
      width: Math.min(100, Math.max(0, prob * 100)),
    }));
}

/** Dedup key for feedback submissions: one record per case, verdict, pod. */
export function feedbackKey(
  caseId: string,
  verdict: string,
  podIndex: number | null,
): string {
  return `${caseId}\u0000${verdict}\u0000${podIndex ?? ""}`;
}
