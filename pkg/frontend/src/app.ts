import { ApiError } from "./api.js";
import { feedbackKey } from "./format.js";
import { renderCaseView, renderErrorScreen } from "./view.js";
import type { ErrorKind } from "./view.js";
import type { DiagnoseResponse, DiagnosisDoc, FeedbackRecord, FeedbackVerdict } from "./types.js";

/** What the app needs from the service client; PodSentryClient satisfies it. */
export interface DiagnosisApi {
  diagnose(image: Blob | ArrayBuffer | Uint8Array, backend?: string): Promise<DiagnoseResponse>;
  caseImageUrl(caseId: string): string;
  sendFeedback(
    caseId: string,
    verdict: FeedbackVerdict,
    podIndex?: number | null,
    freeText?: string | null,
  ): Promise<{ record: FeedbackRecord; created: boolean }>;
}

/** Rendering target; main.ts backs this with real DOM elements. */
export interface ViewSurface {
  show(html: string): void;
  setBusy(busy: boolean): void;
  setPodStatus(podIndex: number | null, text: string): void;
}

export function errorKindFor(error: ApiError): ErrorKind {
  if (error.code === "undecodable_image") {
    return "undecodable";
  }
  if (error.code === "service_unreachable" || error.retriable) {
    return "unreachable";
  }
  return "backend";
}

/**
 * UI state machine. One diagnose request runs at a time; uploads that arrive
 * while one is in flight wait in order. Feedback submission is deduplicated
 * per case, verdict, and pod before any request is sent.
 */
export class App {
  private readonly queue: Blob[] = [];
  private draining = false;
  private caseId: string | null = null;
  private lastFailed: Blob | null = null;
  private readonly submitted = new Set<string>();

  constructor(
    private readonly client: DiagnosisApi,
    private readonly surface: ViewSurface,
    private readonly extent: number = 640,
    private readonly backend?: string,
  ) {}

  get pendingUploads(): number {
    return this.queue.length;
  }

  /** Queue an uploaded photo; starts immediately unless one is in flight. */
  async upload(image: Blob): Promise<void> {
    this.queue.push(image);
    if (this.draining) {
      return;
    }
    this.draining = true;
    this.surface.setBusy(true);
    try {
      for (let next = this.queue.shift(); next !== undefined; next = this.queue.shift()) {
        await this.diagnoseOne(next);
      }
    } finally {
      this.draining = false;
      this.surface.setBusy(false);
    }
  }

  private async diagnoseOne(image: Blob): Promise<void> {
    try {
      const response = await this.client.diagnose(image, this.backend);
      this.caseId = response.case_id;
      this.lastFailed = null;
      const imageUrl = this.client.caseImageUrl(response.case_id);
      this.surface.show(renderCaseView(response.diagnosis, imageUrl, this.extent));
    } catch (error) {
      this.lastFailed = image;
      this.showError(error);
    }
  }

  /** Re-submit the upload that last failed, if any. */
  async retry(): Promise<void> {
    if (this.lastFailed !== null) {
      await this.upload(this.lastFailed);
    }
  }

  /**
   * Send feedback for the current case. Returns the stored record, or null
   * when nothing was sent (no case yet, or this key was already submitted).
   */
  async submitFeedback(
    verdict: FeedbackVerdict,
    podIndex: number | null = null,
    freeText: string | null = null,
  ): Promise<FeedbackRecord | null> {
    if (this.caseId === null) {
      this.surface.setPodStatus(podIndex, "Upload a photo first.");
      return null;
    }
    const key = feedbackKey(this.caseId, verdict, podIndex);
    if (this.submitted.has(key)) {
      this.surface.setPodStatus(podIndex, "Already recorded.");
      return null;
    }
    this.submitted.add(key);
    try {
      const { record, created } = await this.client.sendFeedback(
        this.caseId,
        verdict,
        podIndex,
        freeText,
      );
      this.surface.setPodStatus(podIndex, created ? "Recorded, thank you." : "Already recorded.");
      return record;
    } catch (error) {
      this.submitted.delete(key);
      this.surface.setPodStatus(podIndex, "Could not record feedback; try again.");
      if (!(error instanceof ApiError)) {
        throw error;
      }
      return null;
    }
  }

  /** Render a stored diagnosis document offline, same path as live results. */
  showFixture(doc: DiagnosisDoc, imageUrl: string | null): void {
    this.caseId = null;
    this.surface.show(renderCaseView(doc, imageUrl, this.extent));
  }

  private showError(error: unknown): void {
    const apiError =
      error instanceof ApiError ? error : new ApiError("internal", String(error), 0, false);
    this.surface.show(renderErrorScreen(errorKindFor(apiError), apiError.message));
  }
}
