"""Load, lint and persist corpora, annotation sets and gold standards.

Native layout: one JSON file per document under ``documents/`` and one per
(document, annotator) pair under ``annotations/``.  Gold standards are a
single JSON array file.  Output bytes are canonical (sorted keys, two-space
indent, trailing newline) so repeated runs diff clean.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .adjudication import GoldStandard
from .model import (
    AnnotationSet,
    Document,
    ErrorAnnotation,
    ErrorCategory,
    Span,
    ValidationError,
    tokenize,
    validate_span,
)

DOCUMENTS_DIR = "documents"
ANNOTATIONS_DIR = "annotations"

FORMAT_NATIVE = "native"
FORMAT_RELEASED = "released-corpus"


class CorpusError(ValidationError):
    """A corpus directory failed to load."""


@dataclass(frozen=True)
class LintWarning:
    code: str
    message: str
    doc_id: Optional[str] = None
    annotator_id: Optional[str] = None

    def to_json(self) -> dict:
        return {
            "code": self.code,
            "message": self.message,
            "doc_id": self.doc_id,
            "annotator_id": self.annotator_id,
        }

    def __str__(self) -> str:
        where = self.doc_id or ""
        if self.annotator_id:
            where += f"/{self.annotator_id}"
        return f"{self.code}: {where}: {self.message}" if where else f"{self.code}: {self.message}"


def canonical_json(value) -> str:
    """Compact canonical JSON: sorted keys, no spaces, ASCII-independent."""
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def _dump(value) -> str:
    return json.dumps(value, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _read_json(path: Path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise CorpusError(f"{path}: invalid JSON: {exc}") from exc


def load_corpus(
    path: str | Path, fmt: str = FORMAT_NATIVE
) -> tuple[list[Document], list[AnnotationSet]]:
    """Load every document and annotation set under a corpus directory.

    Spans carry a redundant surface string which is checked against the
    document text; any mismatch, bounds violation or unknown category is a
    hard error.  Returns documents and sets sorted by id.
    """
    root = Path(path)
    if not root.is_dir():
        raise CorpusError(f"corpus directory {root} does not exist")
    if fmt == FORMAT_RELEASED:
        return load_released_corpus(root)
    if fmt != FORMAT_NATIVE:
        raise CorpusError(f"unknown corpus format {fmt!r}")

    docs: list[Document] = []
    seen_ids: set[str] = set()
    docs_dir = root / DOCUMENTS_DIR
    if docs_dir.is_dir():
        for file in sorted(docs_dir.glob("*.json")):
            data = _read_json(file)
            try:
                doc = Document.from_json(data)
            except ValidationError as exc:
                raise CorpusError(f"{file}: {exc}") from exc
            if doc.doc_id in seen_ids:
                raise CorpusError(f"{file}: duplicate doc_id {doc.doc_id!r}")
            seen_ids.add(doc.doc_id)
            docs.append(doc)
    doc_index = {d.doc_id: d for d in docs}

    sets: list[AnnotationSet] = []
    ann_dir = root / ANNOTATIONS_DIR
    if ann_dir.is_dir():
        for file in sorted(ann_dir.glob("*.json")):
            data = _read_json(file)
            doc = doc_index.get(data.get("doc_id", ""))
            if doc is None:
                raise CorpusError(
                    f"{file}: annotation set for unknown document {data.get('doc_id')!r}"
                )
            try:
                sets.append(AnnotationSet.from_json(data, doc))
            except ValidationError as exc:
                raise CorpusError(f"{file}: {exc}") from exc
    docs.sort(key=lambda d: d.doc_id)
    sets.sort(key=lambda s: (s.doc_id, s.annotator_id))
    return docs, sets


def save_corpus(
    docs: list[Document], sets: list[AnnotationSet], path: str | Path
) -> None:
    root = Path(path)
    (root / DOCUMENTS_DIR).mkdir(parents=True, exist_ok=True)
    (root / ANNOTATIONS_DIR).mkdir(parents=True, exist_ok=True)
    doc_index = {d.doc_id: d for d in docs}
    for doc in docs:
        (root / DOCUMENTS_DIR / f"{_safe(doc.doc_id)}.json").write_text(
            _dump(doc.to_json()), encoding="utf-8"
        )
    for aset in sets:
        doc = doc_index.get(aset.doc_id)
        name = f"{_safe(aset.doc_id)}.{_safe(aset.annotator_id)}.json"
        (root / ANNOTATIONS_DIR / name).write_text(
            _dump(aset.to_json(doc)), encoding="utf-8"
        )


def _safe(identifier: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in identifier)


def annotation_set_path(root: str | Path, doc_id: str, annotator_id: str) -> Path:
    return Path(root) / ANNOTATIONS_DIR / f"{_safe(doc_id)}.{_safe(annotator_id)}.json"


def save_annotation_set(
    aset: AnnotationSet, root: str | Path, doc: Optional[Document] = None
) -> Path:
    path = annotation_set_path(root, aset.doc_id, aset.annotator_id)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(_dump(aset.to_json(doc)), encoding="utf-8")
    return path


def save_gold(golds: list[GoldStandard], path: str | Path) -> None:
    """Write gold standards as one canonical JSON array file."""
    target = Path(path)
    if target.is_dir():
        target = target / "gold.json"
    target.parent.mkdir(parents=True, exist_ok=True)
    payload = [g.to_json() for g in sorted(golds, key=lambda g: g.doc_id)]
    target.write_text(_dump(payload), encoding="utf-8")


def load_gold(path: str | Path) -> list[GoldStandard]:
    target = Path(path)
    if target.is_dir():
        target = target / "gold.json"
    data = _read_json(target)
    if not isinstance(data, list):
        raise CorpusError(f"{target}: expected a JSON array of gold standards")
    return [GoldStandard.from_json(item) for item in data]


def lint_corpus(
    docs: list[Document], sets: list[AnnotationSet]
) -> list[LintWarning]:
    """Non-fatal quality checks; never mutates anything."""
    warnings: list[LintWarning] = []
    if not docs and not sets:
        warnings.append(LintWarning(code="empty_corpus", message="no documents found"))
        return warnings
    for doc in docs:
        if not doc.system_id:
            warnings.append(
                LintWarning(
                    code="missing_system_id",
                    message="document has no system_id; it will be skipped by profiles",
                    doc_id=doc.doc_id,
                )
            )
    for aset in sets:
        anns = sorted(aset.annotations, key=lambda a: (a.span.start, a.span.end))
        for i, ann in enumerate(anns):
            for other in anns[i + 1 :]:
                if other.span.start >= ann.span.end:
                    break
                warnings.append(
                    LintWarning(
                        code="overlapping_spans",
                        message=(
                            f"spans [{ann.span.start},{ann.span.end}) and "
                            f"[{other.span.start},{other.span.end}) overlap"
                        ),
                        doc_id=aset.doc_id,
                        annotator_id=aset.annotator_id,
                    )
                )
            if not ann.correction:
                warnings.append(
                    LintWarning(
                        code="missing_correction",
                        message=f"annotation {ann.annotation_id} has no correction",
                        doc_id=aset.doc_id,
                        annotator_id=aset.annotator_id,
                    )
                )
            if ann.category == ErrorCategory.OTHER and not ann.explanation:
                warnings.append(
                    LintWarning(
                        code="unexplained_other",
                        message=(
                            f"annotation {ann.annotation_id} uses the last-resort "
                            "category without an explanation"
                        ),
                        doc_id=aset.doc_id,
                        annotator_id=aset.annotator_id,
                    )
                )
    return warnings


# --- adapter for the released-corpus layout -------------------------------
#
# Assumed layout until the real archive is inspected (kept isolated here so
# only this adapter changes):
#
#   stories/<doc_id>.txt          one story per file, raw text
#   systems.csv                   doc_id,system_id          (optional)
#   annotations.csv               doc_id,annotator_id,start_token,end_token,
#                                 category,correction,explanation

def load_released_corpus(root: Path) -> tuple[list[Document], list[AnnotationSet]]:
    stories = root / "stories"
    if not stories.is_dir():
        raise CorpusError(f"{root}: released-corpus layout needs a stories/ directory")
    systems: dict[str, str] = {}
    systems_file = root / "systems.csv"
    if systems_file.exists():
        with open(systems_file, encoding="utf-8", newline="") as fh:
            for row in csv.DictReader(fh):
                systems[row["doc_id"]] = row["system_id"]

    docs = []
    for file in sorted(stories.glob("*.txt")):
        doc_id = file.stem
        text = file.read_text(encoding="utf-8")
        docs.append(
            Document(
                doc_id=doc_id,
                system_id=systems.get(doc_id, ""),
                text=text,
                tokens=tuple(tokenize(text)),
            )
        )
    doc_index = {d.doc_id: d for d in docs}

    rows_by_set: dict[tuple[str, str], list[dict]] = {}
    ann_file = root / "annotations.csv"
    if ann_file.exists():
        with open(ann_file, encoding="utf-8", newline="") as fh:
            for row in csv.DictReader(fh):
                rows_by_set.setdefault(
                    (row["doc_id"], row["annotator_id"]), []
                ).append(row)

    sets = []
    for (doc_id, annotator_id), rows in sorted(rows_by_set.items()):
        doc = doc_index.get(doc_id)
        if doc is None:
            raise CorpusError(f"annotations.csv: unknown document {doc_id!r}")
        annotations = []
        for row in rows:
            span = Span(
                doc_id=doc_id,
                start=int(row["start_token"]),
                end=int(row["end_token"]),
            )
            validate_span(span, doc)
            raw_cat = (row.get("category") or "").strip()
            annotations.append(
                ErrorAnnotation(
                    annotator_id=annotator_id,
                    span=span,
                    category=ErrorCategory.parse(raw_cat) if raw_cat else None,
                    correction=(row.get("correction") or "").strip() or None,
                    explanation=(row.get("explanation") or "").strip() or None,
                )
            )
        sets.append(
            AnnotationSet(
                doc_id=doc_id,
                annotator_id=annotator_id,
                annotations=tuple(annotations),
            )
        )
    return docs, sets
