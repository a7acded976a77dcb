"""HTTP service that hands documents to annotators and collects their markups.

File-backed: submitted sets are written straight into the corpus directory in
the native format, so the CLI pipeline picks them up without conversion and a
restart loses nothing.  Writes are serialized under one lock; the corpus is
tens of documents, auditability beats throughput.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from fastapi import Depends, FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.staticfiles import StaticFiles

from . import corpus_io
from .adjudication import adjudicate_document
from .model import (
    STATUS_MAIN,
    STATUS_QUALIFICATION,
    AnnotationSet,
    Document,
    SurfaceMismatchError,
    ValidationError,
)
from .qualification import DEFAULT_THRESHOLD, score_qualification

ENV_PORT = "SPANGOLD_PORT"
ENV_CORPUS = "SPANGOLD_CORPUS"

TAXONOMY = {
    "categories": [
        {
            "name": "number",
            "label": "Incorrect number",
            "definition": "A numeric value that is wrong, whether written in digits or spelled out.",
        },
        {
            "name": "name",
            "label": "Incorrect named entity",
            "definition": "A wrong person, team, place, organisation, or day of the week.",
        },
        {
            "name": "word",
            "label": "Incorrect word",
            "definition": "A word, other than a number or name, that contradicts what actually happened.",
        },
        {
            "name": "context",
            "label": "Context error",
            "definition": "A phrase that leads the reader to a wrong conclusion because of its surrounding context.",
        },
        {
            "name": "not_checkable",
            "label": "Not checkable",
            "definition": "A claim that cannot be verified with available sources, or would take unreasonable effort to verify.",
        },
        {
            "name": "other",
            "label": "Other",
            "definition": "An accuracy problem that fits no other category. Use only as a last resort.",
        },
    ],
    "guidance": [
        {
            "id": "fewest-corrections",
            "text": "When a sentence can be fixed in more than one way, mark the reading that needs the fewest corrections.",
        },
        {
            "id": "weekday-as-name",
            "text": "Mark a wrong day of the week as a name error.",
        },
        {
            "id": "score-pairs",
            "text": "A score pair like 102-91 is two number errors when both numbers are wrong.",
        },
    ],
}


@dataclass
class ServiceConfig:
    corpus_dir: str
    port: int = 8020
    submissions_per_doc: int = 3
    qualification_threshold: float = DEFAULT_THRESHOLD
    reference_doc_id: Optional[str] = None
    reference_gold: Optional[str] = None
    tokens: dict[str, str] = field(default_factory=dict)
    static_dir: Optional[str] = None

    @classmethod
    def from_file(cls, path: str | Path) -> "ServiceConfig":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        config = cls(
            corpus_dir=data["corpus_dir"],
            port=int(data.get("port", 8020)),
            submissions_per_doc=int(data.get("submissions_per_doc", 3)),
            qualification_threshold=float(
                data.get("qualification_threshold", DEFAULT_THRESHOLD)
            ),
            reference_doc_id=data.get("reference_doc_id"),
            reference_gold=data.get("reference_gold"),
            tokens=dict(data.get("tokens", {})),
            static_dir=data.get("static_dir"),
        )
        return config.with_env_overrides()

    def with_env_overrides(self) -> "ServiceConfig":
        if os.environ.get(ENV_PORT):
            self.port = int(os.environ[ENV_PORT])
        if os.environ.get(ENV_CORPUS):
            self.corpus_dir = os.environ[ENV_CORPUS]
        return self


class CorpusState:
    """In-memory snapshot of the corpus plus serialized file writes."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.lock = threading.Lock()
        root = Path(config.corpus_dir)
        self.root = root
        docs, sets = corpus_io.load_corpus(root)
        self.docs: dict[str, Document] = {d.doc_id: d for d in docs}
        self.sets: dict[tuple[str, str], AnnotationSet] = {
            (s.doc_id, s.annotator_id): s for s in sets
        }
        self.versions: dict[tuple[str, str], int] = {}
        versions_file = root / "versions.json"
        if versions_file.exists():
            raw = json.loads(versions_file.read_text(encoding="utf-8"))
            self.versions = {tuple(k.split("\t")): v for k, v in raw.items()}
        else:
            self.versions = {key: 1 for key in self.sets}
        self.qualified: dict[str, dict] = {}
        qual_file = root / "qualifications.json"
        if qual_file.exists():
            self.qualified = json.loads(qual_file.read_text(encoding="utf-8"))

    def current_version(self, doc_id: str, annotator_id: str) -> int:
        return self.versions.get((doc_id, annotator_id), 0)

    def store(self, aset: AnnotationSet, expected_version: int) -> int:
        with self.lock:
            key = (aset.doc_id, aset.annotator_id)
            current = self.versions.get(key, 0)
            if expected_version != current:
                raise VersionConflict(current)
            doc = self.docs[aset.doc_id]
            corpus_io.save_annotation_set(aset, self.root, doc)
            self.sets[key] = aset
            self.versions[key] = current + 1
            self._persist_versions()
            return self.versions[key]

    def record_qualification(self, annotator_id: str, result: dict) -> None:
        with self.lock:
            self.qualified[annotator_id] = result
            (self.root / "qualifications.json").write_text(
                json.dumps(self.qualified, indent=2, sort_keys=True) + "\n",
                encoding="utf-8",
            )

    def _persist_versions(self) -> None:
        raw = {"\t".join(k): v for k, v in self.versions.items()}
        (self.root / "versions.json").write_text(
            json.dumps(raw, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )

    def main_sets(self, doc_id: str) -> list[AnnotationSet]:
        return [
            s
            for (d, _), s in sorted(self.sets.items())
            if d == doc_id and s.status == STATUS_MAIN
        ]


class VersionConflict(Exception):
    def __init__(self, current: int):
        self.current = current


def assignment_policy(state: CorpusState, annotator_id: str) -> Optional[str]:
    """Next document for a qualified annotator, or None when all are covered.

    Deterministic: the first document in id order with fewer than K main
    submissions that this annotator has not already submitted.
    """
    k = state.config.submissions_per_doc
    for doc_id in sorted(state.docs):
        sets = state.main_sets(doc_id)
        if len(sets) >= k:
            continue
        if any(s.annotator_id == annotator_id for s in sets):
            continue
        return doc_id
    return None


def create_app(config: ServiceConfig) -> FastAPI:
    app = FastAPI(title="spangold annotation service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    state = CorpusState(config)
    app.state.corpus = state

    def require_annotator(request: Request, annotator_id: str) -> None:
        if not config.tokens:
            return
        header = request.headers.get("authorization", "")
        token = header.removeprefix("Bearer ").strip()
        mapped = config.tokens.get(token)
        if mapped is None:
            raise HTTPException(status_code=401, detail="unknown bearer token")
        if mapped != annotator_id:
            raise HTTPException(
                status_code=403, detail=f"token does not belong to {annotator_id!r}"
            )

    @app.get("/api/docs")
    def list_docs():
        out = []
        for doc_id in sorted(state.docs):
            sets = state.main_sets(doc_id)
            out.append(
                {
                    "doc_id": doc_id,
                    "system_id": state.docs[doc_id].system_id,
                    "n_tokens": len(state.docs[doc_id].tokens),
                    "submissions": {
                        s.annotator_id: state.current_version(doc_id, s.annotator_id)
                        for s in sets
                    },
                    "complete": len(sets) >= config.submissions_per_doc,
                }
            )
        return out

    @app.get("/api/docs/{doc_id}")
    def get_doc(doc_id: str):
        doc = state.docs.get(doc_id)
        if doc is None:
            raise HTTPException(status_code=404, detail=f"unknown document {doc_id!r}")
        return doc.to_json()

    @app.get("/api/docs/{doc_id}/annotations/{annotator_id}")
    def get_annotations(doc_id: str, annotator_id: str):
        aset = state.sets.get((doc_id, annotator_id))
        if aset is None:
            raise HTTPException(
                status_code=404,
                detail=f"no annotations by {annotator_id!r} for {doc_id!r}",
            )
        doc = state.docs[doc_id]
        payload = aset.to_json(doc)
        payload["version"] = state.current_version(doc_id, annotator_id)
        return payload

    @app.put("/api/docs/{doc_id}/annotations/{annotator_id}")
    def put_annotations(
        doc_id: str, annotator_id: str, body: dict, request: Request
    ):
        require_annotator(request, annotator_id)
        doc = state.docs.get(doc_id)
        if doc is None:
            raise HTTPException(status_code=404, detail=f"unknown document {doc_id!r}")
        expected_version = int(body.pop("version", 0))
        body.setdefault("doc_id", doc_id)
        body.setdefault("annotator_id", annotator_id)
        if body["doc_id"] != doc_id or body["annotator_id"] != annotator_id:
            raise HTTPException(
                status_code=422,
                detail=[{"reason": "payload ids do not match the URL"}],
            )
        try:
            aset = AnnotationSet.from_json(body, doc)
        except SurfaceMismatchError as exc:
            raise HTTPException(
                status_code=422, detail=[{"reason": "surface_mismatch", "message": str(exc)}]
            )
        except ValidationError as exc:
            raise HTTPException(
                status_code=422, detail=[{"reason": "invalid_annotation_set", "message": str(exc)}]
            )
        try:
            new_version = state.store(aset, expected_version)
        except VersionConflict as conflict:
            raise HTTPException(
                status_code=409,
                detail={
                    "reason": "version_conflict",
                    "current_version": conflict.current,
                },
            )
        return {"doc_id": doc_id, "annotator_id": annotator_id, "version": new_version}

    @app.get("/api/gold/{doc_id}")
    def get_gold(doc_id: str):
        doc = state.docs.get(doc_id)
        if doc is None:
            raise HTTPException(status_code=404, detail=f"unknown document {doc_id!r}")
        sets = state.main_sets(doc_id)
        if len(sets) < 2:
            raise HTTPException(
                status_code=404,
                detail=f"{doc_id!r} has {len(sets)} submissions; adjudication needs 2+",
            )
        gold, _ = adjudicate_document(doc, sets)
        return gold.to_json(doc)

    @app.post("/api/qualify/{annotator_id}")
    def qualify(annotator_id: str, body: dict, request: Request):
        require_annotator(request, annotator_id)
        if not config.reference_doc_id or not config.reference_gold:
            raise HTTPException(
                status_code=404, detail="no qualification reference configured"
            )
        doc = state.docs.get(config.reference_doc_id)
        if doc is None:
            raise HTTPException(
                status_code=404,
                detail=f"reference document {config.reference_doc_id!r} not in corpus",
            )
        golds = corpus_io.load_gold(Path(config.reference_gold))
        reference = next(
            (g for g in golds if g.doc_id == config.reference_doc_id), None
        )
        if reference is None:
            raise HTTPException(
                status_code=404,
                detail=f"reference gold for {config.reference_doc_id!r} not found",
            )
        body.setdefault("doc_id", config.reference_doc_id)
        body.setdefault("annotator_id", annotator_id)
        body.setdefault("status", STATUS_QUALIFICATION)
        body.pop("version", None)
        try:
            candidate = AnnotationSet.from_json(body, doc)
        except ValidationError as exc:
            raise HTTPException(
                status_code=422, detail=[{"reason": "invalid_annotation_set", "message": str(exc)}]
            )
        result = score_qualification(
            candidate, reference, doc, threshold=config.qualification_threshold
        )
        payload = result.to_json()
        state.record_qualification(annotator_id, payload)
        return payload

    @app.get("/api/assignment/{annotator_id}")
    def next_assignment(annotator_id: str, request: Request):
        require_annotator(request, annotator_id)
        record = state.qualified.get(annotator_id)
        if config.reference_doc_id and (record is None or not record.get("passed")):
            raise HTTPException(
                status_code=403, detail=f"{annotator_id!r} has not passed qualification"
            )
        return {"doc_id": assignment_policy(state, annotator_id)}

    @app.get("/api/taxonomy")
    def taxonomy():
        return TAXONOMY

    if config.static_dir and Path(config.static_dir).is_dir():
        app.mount("/", StaticFiles(directory=config.static_dir, html=True), name="ui")

    return app


def serve(config: ServiceConfig) -> None:
    import uvicorn

    uvicorn.run(create_app(config), host="0.0.0.0", port=config.port)
