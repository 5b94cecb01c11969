/** Wire types for the documents and responses served under /v1. */

export interface BoxDoc {
  x_min: number;
  y_min: number;
  x_max: number;
  y_max: number;
}

export interface PodDoc {
  box: BoxDoc;
  /** Renormalized class probabilities keyed by class name; sums to 1. */
  probs: Record<string, number>;
  top: string;
}

export interface KnowledgeRef {
  class: string;
  display_name: string;
  symptoms: string[];
  treatments: string[];
  images: string[];
}

export interface DiagnosisDoc {
  schema: string;
  image_id: string;
  pods: PodDoc[];
  kb_refs: KnowledgeRef[];
}

export type FeedbackVerdict = "not_the_result" | "not_the_disease";

export interface FeedbackRecord {
  schema: string;
  id: string;
  image_id: string;
  verdict: FeedbackVerdict;
  pod_index: number | null;
  free_text: string | null;
  submitted_at: string;
}

export interface CaseDoc {
  schema: string;
  case_id: string;
  image_id: string;
  processed_image: string;
  backend: { kind: string; parameters: Record<string, string> };
  config_digest: string;
  created_at: string;
  diagnosis: DiagnosisDoc;
  feedback: FeedbackRecord[];
}

export interface DiagnoseResponse {
  case_id: string;
  diagnosis: DiagnosisDoc;
}

export interface ErrorBody {
  error: {
    code: string;
    message: string;
    retriable?: boolean;
  };
}
