// Local draft persistence, so a page reload never loses work in progress.

import { AnnotationDraft } from "./draft.js";

export interface KeyValueStore {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

function key(docId: string, annotatorId: string): string {
  return `spangold:drafts:${docId}:${annotatorId}`;
}

export function saveDrafts(
  store: KeyValueStore,
  docId: string,
  annotatorId: string,
  drafts: AnnotationDraft[]
): void {
  store.setItem(key(docId, annotatorId), JSON.stringify(drafts));
}

export function loadDrafts(
  store: KeyValueStore,
  docId: string,
  annotatorId: string
): AnnotationDraft[] {
  const raw = store.getItem(key(docId, annotatorId));
  if (raw === null) {
    return [];
  }
  try {
    const parsed = JSON.parse(raw);
    return Array.isArray(parsed) ? (parsed as AnnotationDraft[]) : [];
  } catch {
    return [];
  }
}

export function clearDrafts(
  store: KeyValueStore,
  docId: string,
  annotatorId: string
): void {
  store.removeItem(key(docId, annotatorId));
}
