import type {
  CaseDoc,
  DiagnoseResponse,
  ErrorBody,
  FeedbackRecord,
  FeedbackVerdict,
} from "./types.js";

/** Error raised for any non-2xx response or transport failure. */
export class ApiError extends Error {
  readonly code: string;
  readonly status: number;
  readonly retriable: boolean;

  constructor(code: string, message: string, status: number, retriable: boolean) {
    super(message);
    this.name = "ApiError";
    this.code = code;
    this.status = status;
    this.retriable = retriable;
  }
}

async function raiseFor(response: Response): Promise<never> {
  let code = `http_${response.status}`;
  let message = response.statusText || "request failed";
  let retriable = response.status >= 500;
  try {
    const body = (await response.json()) as ErrorBody;
    code = body.error.code;
    message = body.error.message;
    retriable = body.error.retriable ?? retriable;
  } catch {
    // non-JSON error body; keep the HTTP-level defaults
  }
  throw new ApiError(code, message, response.status, retriable);
}

/**
 * Thin client for the diagnosis service.
 *
 * Every method maps one endpoint and returns the parsed document; failures
 * become ApiError with the service's error code, including
 * "service_unreachable" when the fetch itself fails.
 */
export class PodSentryClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    let response: Response;
    try {
      response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    } catch (cause) {
      throw new ApiError(
        "service_unreachable",
        `cannot reach the diagnosis service: ${String(cause)}`,
        0,
        true,
      );
    }
    if (!response.ok) {
      await raiseFor(response);
    }
    return response;
  }

  async health(): Promise<{ status: string }> {
    const response = await this.request("/v1/health");
    return (await response.json()) as { status: string };
  }

  /** Upload raw image bytes; the optional backend selects a configured one. */
  async diagnose(
    image: Blob | ArrayBuffer | Uint8Array,
    backend?: string,
  ): Promise<DiagnoseResponse> {
    const query = backend ? `?backend=${encodeURIComponent(backend)}` : "";
    const response = await this.request(`/v1/diagnose${query}`, {
      method: "POST",
      body: image as BodyInit,
      headers: { "Content-Type": "application/octet-stream" },
    });
    return (await response.json()) as DiagnoseResponse;
  }

  async getCase(caseId: string): Promise<CaseDoc> {
    const response = await this.request(`/v1/cases/${encodeURIComponent(caseId)}`);
    return (await response.json()) as CaseDoc;
  }

  caseImageUrl(caseId: string): string {
    return `${this.baseUrl}/v1/cases/${encodeURIComponent(caseId)}/image`;
  }

  /** Returns the stored record plus whether this submission created it. */
  async sendFeedback(
    caseId: string,
    verdict: FeedbackVerdict,
    podIndex: number | null = null,
    freeText: string | null = null,
  ): Promise<{ record: FeedbackRecord; created: boolean }> {
    const payload: Record<string, unknown> = { verdict };
    if (podIndex !== null) {
      payload.pod_index = podIndex;
    }
    if (freeText !== null) {
      payload.free_text = freeText;
    }
    const response = await this.request(`/v1/cases/${encodeURIComponent(caseId)}/feedback`, {
      method: "POST",
      body: JSON.stringify(payload),
      headers: { "Content-Type": "application/json" },
    });
    return {
      record: (await response.json()) as FeedbackRecord,
      created: response.status === 201,
    };
  }
}
