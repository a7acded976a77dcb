// Thin client for the annotation service. All mutations surface conflicts
// (409) and validation failures (422) as structured results; network errors
// propagate as exceptions for the retry banner.

import {
  AnnotationSetJson,
  DocListEntry,
  DocumentJson,
  QualificationResult,
  Taxonomy,
} from "./types.js";

export type PutOutcome =
  | { ok: true; version: number }
  | { ok: false; kind: "conflict"; currentVersion: number }
  | { ok: false; kind: "invalid"; reasons: { reason: string; message?: string }[] };

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private token: string | null = null,
    private fetchImpl: FetchLike = (input, init) => fetch(input, init)
  ) {}

  private headers(extra: Record<string, string> = {}): Record<string, string> {
    const base: Record<string, string> = { ...extra };
    if (this.token) {
      base["Authorization"] = `Bearer ${this.token}`;
    }
    return base;
  }

  private async getJson<T>(path: string): Promise<T> {
    const response = await this.fetchImpl(this.baseUrl + path, {
      headers: this.headers(),
    });
    if (!response.ok) {
      throw new Error(`GET ${path} failed: ${response.status}`);
    }
    return (await response.json()) as T;
  }

  listDocs(): Promise<DocListEntry[]> {
    return this.getJson("/api/docs");
  }

  getDoc(docId: string): Promise<DocumentJson> {
    return this.getJson(`/api/docs/${encodeURIComponent(docId)}`);
  }

  getTaxonomy(): Promise<Taxonomy> {
    return this.getJson("/api/taxonomy");
  }

  async getAnnotations(
    docId: string,
    annotatorId: string
  ): Promise<{ set: AnnotationSetJson; version: number } | null> {
    const path = `/api/docs/${encodeURIComponent(docId)}/annotations/${encodeURIComponent(annotatorId)}`;
    const response = await this.fetchImpl(this.baseUrl + path, {
      headers: this.headers(),
    });
    if (response.status === 404) {
      return null;
    }
    if (!response.ok) {
      throw new Error(`GET ${path} failed: ${response.status}`);
    }
    const body = await response.json();
    const version: number = body.version ?? 0;
    delete body.version;
    return { set: body as AnnotationSetJson, version };
  }

  async putAnnotations(
    set: AnnotationSetJson,
    version: number
  ): Promise<PutOutcome> {
    const path = `/api/docs/${encodeURIComponent(set.doc_id)}/annotations/${encodeURIComponent(set.annotator_id)}`;
    const response = await this.fetchImpl(this.baseUrl + path, {
      method: "PUT",
      headers: this.headers({ "Content-Type": "application/json" }),
      body: JSON.stringify({ ...set, version }),
    });
    if (response.ok) {
      const body = await response.json();
      return { ok: true, version: body.version };
    }
    if (response.status === 409) {
      const body = await response.json();
      return {
        ok: false,
        kind: "conflict",
        currentVersion: body.detail?.current_version ?? version,
      };
    }
    if (response.status === 422) {
      const body = await response.json();
      const reasons = Array.isArray(body.detail) ? body.detail : [body.detail];
      return { ok: false, kind: "invalid", reasons };
    }
    throw new Error(`PUT ${path} failed: ${response.status}`);
  }

  async qualify(
    annotatorId: string,
    set: AnnotationSetJson
  ): Promise<QualificationResult> {
    const path = `/api/qualify/${encodeURIComponent(annotatorId)}`;
    const response = await this.fetchImpl(this.baseUrl + path, {
      method: "POST",
      headers: this.headers({ "Content-Type": "application/json" }),
      body: JSON.stringify(set),
    });
    if (!response.ok) {
      throw new Error(`POST ${path} failed: ${response.status}`);
    }
    return (await response.json()) as QualificationResult;
  }

  async nextAssignment(annotatorId: string): Promise<string | null> {
    const body = await this.getJson<{ doc_id: string | null }>(
      `/api/assignment/${encodeURIComponent(annotatorId)}`
    );
    return body.doc_id;
  }
}
