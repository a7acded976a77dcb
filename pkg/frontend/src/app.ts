// DOM wiring for the annotation screen: token click-drag selection, category
// legend, draft list, submission with conflict handling, qualification mode.

import { ApiClient, PutOutcome } from "./api.js";
import {
  AnnotationDraft,
  annotationToDraft,
  canSubmit,
  draftProblems,
  emptyDraft,
  setToJson,
  spanSurface,
  toAnnotation,
} from "./draft.js";
import { containsToken, rangeFromDrag } from "./selection.js";
import { clearDrafts, loadDrafts, saveDrafts } from "./storage.js";
import { Category, DocumentJson, Taxonomy } from "./types.js";

const CATEGORY_COLORS: Record<Category, string> = {
  number: "#f2c14e",
  name: "#f78154",
  word: "#5fa8d3",
  context: "#9d8df1",
  not_checkable: "#8ea604",
  other: "#bf98a0",
};

interface AppState {
  doc: DocumentJson | null;
  taxonomy: Taxonomy | null;
  drafts: AnnotationDraft[];
  current: AnnotationDraft;
  version: number;
  anchor: number | null;
  qualificationMode: boolean;
  annotatorId: string;
}

const state: AppState = {
  doc: null,
  taxonomy: null,
  drafts: [],
  current: emptyDraft(),
  version: 0,
  anchor: null,
  qualificationMode: false,
  annotatorId: "anonymous",
};

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

function params(): URLSearchParams {
  return new URLSearchParams(window.location.search);
}

const api = new ApiClient(
  params().get("api") ?? "",
  params().get("token")
);

function showBanner(message: string, retry: (() => void) | null): void {
  const banner = el<HTMLDivElement>("banner");
  banner.textContent = message;
  banner.classList.remove("hidden");
  if (retry) {
    const button = document.createElement("button");
    button.textContent = "retry";
    button.onclick = () => {
      banner.classList.add("hidden");
      retry();
    };
    banner.appendChild(button);
  }
}

function hideBanner(): void {
  el<HTMLDivElement>("banner").classList.add("hidden");
}

function persist(): void {
  if (state.doc) {
    saveDrafts(window.localStorage, state.doc.doc_id, state.annotatorId, state.drafts);
  }
}

function renderTokens(): void {
  const host = el<HTMLDivElement>("document");
  host.textContent = "";
  if (!state.doc) {
    return;
  }
  state.doc.tokens.forEach((token, index) => {
    const span = document.createElement("span");
    span.className = "token";
    span.textContent = token.surface;
    span.dataset.index = String(index);
    if (containsToken(state.current.range, index)) {
      span.classList.add("selected");
    }
    for (const draft of state.drafts) {
      if (containsToken(draft.range, index)) {
        span.classList.add("annotated");
        const color = draft.category ? CATEGORY_COLORS[draft.category] : "#cccccc";
        span.style.borderBottom = `3px solid ${color}`;
      }
    }
    span.onmousedown = (event) => {
      event.preventDefault();
      state.anchor = index;
      updateSelection(index);
    };
    span.onmouseover = () => {
      if (state.anchor !== null) {
        updateSelection(index);
      }
    };
    host.appendChild(span);
    host.appendChild(document.createTextNode(" "));
  });
}

function updateSelection(focus: number): void {
  if (!state.doc || state.anchor === null) {
    return;
  }
  state.current.range = rangeFromDrag(state.anchor, focus, state.doc.tokens.length);
  state.current.dirty = true;
  renderTokens();
  renderDraftForm();
}

function renderLegend(): void {
  const host = el<HTMLDivElement>("legend");
  host.textContent = "";
  if (!state.taxonomy) {
    return;
  }
  for (const category of state.taxonomy.categories) {
    const button = document.createElement("button");
    button.className = "category";
    button.style.background = CATEGORY_COLORS[category.name];
    button.textContent = category.label;
    button.title = category.definition;
    if (state.current.category === category.name) {
      button.classList.add("active");
    }
    button.onclick = () => {
      state.current.category = category.name;
      state.current.noTypeConfirmed = false;
      state.current.dirty = true;
      renderLegend();
      renderDraftForm();
    };
    host.appendChild(button);
  }
  const help = el<HTMLUListElement>("guidance");
  help.textContent = "";
  for (const note of state.taxonomy.guidance) {
    const item = document.createElement("li");
    item.textContent = note.text;
    help.appendChild(item);
  }
}

function renderDraftForm(): void {
  const surface = el<HTMLSpanElement>("selection-surface");
  surface.textContent =
    state.doc && state.current.range
      ? `"${spanSurface(state.doc, state.current.range)}"`
      : "(nothing selected)";
  const problems = draftProblems(state.current);
  el<HTMLSpanElement>("draft-problems").textContent = problems.join("; ");
  el<HTMLButtonElement>("add-draft").disabled = !canSubmit(state.current);
}

function renderDraftList(): void {
  const host = el<HTMLUListElement>("drafts");
  host.textContent = "";
  state.drafts.forEach((draft, index) => {
    const item = document.createElement("li");
    const label = draft.category ?? "no type";
    const text =
      state.doc && draft.range
        ? spanSurface(state.doc, draft.range)
        : "(invalid)";
    item.textContent = `${text} — ${label}`;
    if (draft.correction) {
      item.textContent += ` → ${draft.correction}`;
    }
    const remove = document.createElement("button");
    remove.textContent = "×";
    remove.onclick = () => {
      state.drafts.splice(index, 1);
      persist();
      renderTokens();
      renderDraftList();
    };
    item.appendChild(remove);
    host.appendChild(item);
  });
  el<HTMLButtonElement>("submit").disabled = state.drafts.length === 0;
}

function addCurrentDraft(): void {
  if (!canSubmit(state.current)) {
    return;
  }
  state.drafts.push(state.current);
  state.current = emptyDraft();
  const correction = el<HTMLInputElement>("correction");
  const explanation = el<HTMLInputElement>("explanation");
  correction.value = "";
  explanation.value = "";
  persist();
  renderTokens();
  renderLegend();
  renderDraftForm();
  renderDraftList();
}

function showConflictDialog(currentVersion: number): void {
  const dialog = el<HTMLDivElement>("conflict");
  dialog.classList.remove("hidden");
  el<HTMLButtonElement>("conflict-reload").onclick = async () => {
    dialog.classList.add("hidden");
    if (!state.doc) {
      return;
    }
    const fetched = await api.getAnnotations(state.doc.doc_id, state.annotatorId);
    if (fetched) {
      // Merge strategy: keep the server's set, keep local drafts alongside.
      state.version = fetched.version;
      const server = fetched.set.annotations.map(annotationToDraft);
      state.drafts = server.concat(
        state.drafts.filter((d) => d.dirty)
      );
      persist();
      renderTokens();
      renderDraftList();
    }
  };
  el<HTMLButtonElement>("conflict-retry").onclick = () => {
    dialog.classList.add("hidden");
    state.version = currentVersion;
    void submit();
  };
}

async function submit(): Promise<void> {
  if (!state.doc) {
    return;
  }
  let outcome: PutOutcome;
  const status = state.qualificationMode ? "qualification" : "main";
  const payload = setToJson(state.drafts, state.doc, state.annotatorId, status);
  try {
    if (state.qualificationMode) {
      const result = await api.qualify(state.annotatorId, payload);
      const screen = el<HTMLDivElement>("qualification-result");
      screen.classList.remove("hidden");
      screen.textContent = result.passed
        ? `Passed: found ${result.found} of ${result.reference_total} ` +
          `(${(result.fraction * 100).toFixed(0)}%, threshold ${(result.threshold * 100).toFixed(0)}%)`
        : `Not passed: found ${result.found} of ${result.reference_total} ` +
          `(${(result.fraction * 100).toFixed(0)}%, threshold ${(result.threshold * 100).toFixed(0)}%)`;
      return;
    }
    outcome = await api.putAnnotations(payload, state.version);
  } catch (error) {
    showBanner(`network problem, nothing lost: ${String(error)}`, () => void submit());
    return;
  }
  if (outcome.ok) {
    state.version = outcome.version;
    state.drafts.forEach((d) => (d.dirty = false));
    clearDrafts(window.localStorage, state.doc.doc_id, state.annotatorId);
    el<HTMLDivElement>("toast").textContent = `saved (version ${outcome.version})`;
    el<HTMLDivElement>("toast").classList.remove("hidden");
    setTimeout(() => el<HTMLDivElement>("toast").classList.add("hidden"), 2500);
  } else if (outcome.kind === "conflict") {
    showConflictDialog(outcome.currentVersion);
  } else {
    const problems = outcome.reasons
      .map((r) => r.message ?? r.reason)
      .join("; ");
    showBanner(`submission rejected: ${problems}`, null);
  }
}

async function load(): Promise<void> {
  const query = params();
  state.annotatorId = query.get("annotator") ?? "anonymous";
  state.qualificationMode = query.get("mode") === "qualify";
  const docId = query.get("doc");
  try {
    state.taxonomy = await api.getTaxonomy();
    let target = docId;
    if (!target) {
      target = await api.nextAssignment(state.annotatorId);
    }
    if (!target) {
      showBanner("no documents left to annotate", null);
      return;
    }
    state.doc = await api.getDoc(target);
    const existing = await api.getAnnotations(target, state.annotatorId);
    if (existing) {
      state.version = existing.version;
      state.drafts = existing.set.annotations.map(annotationToDraft);
    } else {
      state.drafts = loadDrafts(window.localStorage, target, state.annotatorId);
    }
  } catch (error) {
    showBanner(`could not load: ${String(error)}`, () => void load());
    return;
  }
  hideBanner();
  el<HTMLHeadingElement>("title").textContent =
    (state.qualificationMode ? "Qualification: " : "") + state.doc.doc_id;
  renderTokens();
  renderLegend();
  renderDraftForm();
  renderDraftList();
}

export function start(): void {
  document.addEventListener("mouseup", () => {
    state.anchor = null;
  });
  el<HTMLInputElement>("correction").oninput = (event) => {
    state.current.correction = (event.target as HTMLInputElement).value;
    state.current.dirty = true;
  };
  el<HTMLInputElement>("explanation").oninput = (event) => {
    state.current.explanation = (event.target as HTMLInputElement).value;
    state.current.dirty = true;
  };
  el<HTMLInputElement>("no-type").onchange = (event) => {
    state.current.noTypeConfirmed = (event.target as HTMLInputElement).checked;
    if (state.current.noTypeConfirmed) {
      state.current.category = null;
      renderLegend();
    }
    renderDraftForm();
  };
  el<HTMLButtonElement>("add-draft").onclick = addCurrentDraft;
  el<HTMLButtonElement>("submit").onclick = () => void submit();
  void load();
}

if (typeof document !== "undefined" && document.getElementById("document")) {
  start();
}
