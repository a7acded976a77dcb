// JSON shapes exchanged with the annotation service. Field names mirror the
// server schemas exactly; do not rename.

export type Category =
  | "number"
  | "name"
  | "word"
  | "context"
  | "not_checkable"
  | "other";

export const CATEGORIES: Category[] = [
  "number",
  "name",
  "word",
  "context",
  "not_checkable",
  "other",
];

export interface SpanJson {
  doc_id: string;
  start: number;
  end: number;
  surface?: string;
}

export interface AnnotationJson {
  annotator_id: string;
  span: SpanJson;
  category: Category | null;
  correction: string | null;
  explanation: string | null;
  half?: string;
}

export interface AnnotationSetJson {
  doc_id: string;
  annotator_id: string;
  status: string;
  annotations: AnnotationJson[];
}

export interface TokenJson {
  index: number;
  char_start: number;
  char_end: number;
  surface: string;
}

export interface DocumentJson {
  doc_id: string;
  system_id: string;
  text: string;
  tokens: TokenJson[];
  metadata: Record<string, string>;
}

export interface DocListEntry {
  doc_id: string;
  system_id: string;
  n_tokens: number;
  submissions: Record<string, number>;
  complete: boolean;
}

export interface TaxonomyCategory {
  name: Category;
  label: string;
  definition: string;
}

export interface Taxonomy {
  categories: TaxonomyCategory[];
  guidance: { id: string; text: string }[];
}

export interface QualificationResult {
  candidate_id: string;
  found: number;
  reference_total: number;
  fraction: number;
  passed: boolean;
  threshold: number;
}
