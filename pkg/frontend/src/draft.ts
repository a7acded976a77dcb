// Annotation drafts: what the annotator is editing before submission.
// Serialization mirrors the server's annotation schema exactly.

import { TokenRange, rangeLength } from "./selection.js";
import {
  AnnotationJson,
  AnnotationSetJson,
  Category,
  DocumentJson,
} from "./types.js";

export interface AnnotationDraft {
  range: TokenRange | null;
  category: Category | null;
  // Submitting without a category is allowed only after the annotator
  // explicitly confirms they mean "no type".
  noTypeConfirmed: boolean;
  correction: string;
  explanation: string;
  dirty: boolean;
}

export function emptyDraft(): AnnotationDraft {
  return {
    range: null,
    category: null,
    noTypeConfirmed: false,
    correction: "",
    explanation: "",
    dirty: false,
  };
}

export function draftProblems(draft: AnnotationDraft): string[] {
  const problems: string[] = [];
  if (rangeLength(draft.range) === 0) {
    problems.push("select at least one token");
  }
  if (draft.category === null && !draft.noTypeConfirmed) {
    problems.push("pick a category, or confirm \"no type\"");
  }
  return problems;
}

export function canSubmit(draft: AnnotationDraft): boolean {
  return draftProblems(draft).length === 0;
}

export function spanSurface(doc: DocumentJson, range: TokenRange): string {
  const first = doc.tokens[range.start];
  const last = doc.tokens[range.end - 1];
  return doc.text.slice(first.char_start, last.char_end);
}

export function toAnnotation(
  draft: AnnotationDraft,
  doc: DocumentJson,
  annotatorId: string
): AnnotationJson {
  const problems = draftProblems(draft);
  if (problems.length > 0 || draft.range === null) {
    throw new Error(`draft not submittable: ${problems.join("; ")}`);
  }
  if (draft.range.end > doc.tokens.length) {
    throw new Error("selection outside the document");
  }
  return {
    annotator_id: annotatorId,
    span: {
      doc_id: doc.doc_id,
      start: draft.range.start,
      end: draft.range.end,
      surface: spanSurface(doc, draft.range),
    },
    category: draft.category,
    correction: draft.correction.trim() === "" ? null : draft.correction.trim(),
    explanation: draft.explanation.trim() === "" ? null : draft.explanation.trim(),
  };
}

export function setToJson(
  drafts: AnnotationDraft[],
  doc: DocumentJson,
  annotatorId: string,
  status: string = "main"
): AnnotationSetJson {
  return {
    doc_id: doc.doc_id,
    annotator_id: annotatorId,
    status,
    annotations: drafts.map((d) => toAnnotation(d, doc, annotatorId)),
  };
}

export function annotationToDraft(ann: AnnotationJson): AnnotationDraft {
  return {
    range: { start: ann.span.start, end: ann.span.end },
    category: ann.category,
    noTypeConfirmed: ann.category === null,
    correction: ann.correction ?? "",
    explanation: ann.explanation ?? "",
    dirty: false,
  };
}
