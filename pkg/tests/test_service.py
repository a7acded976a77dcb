from __future__ import annotations

import json
import threading

import pytest
from fastapi.testclient import TestClient

from spangold.adjudication import adjudicate_corpus
from spangold.corpus_io import save_corpus, save_gold
from spangold.service import ServiceConfig, assignment_policy, create_app

from fixtures_corpus import rules_corpus


@pytest.fixture
def corpus_root(tmp_path):
    docs, sets = rules_corpus()
    root = tmp_path / "corpus"
    # Start the service with documents only; annotators submit over HTTP.
    save_corpus(docs, [], root)
    golds, _ = adjudicate_corpus(docs, sets)
    gold_path = tmp_path / "reference_gold.json"
    save_gold(golds, gold_path)
    return root, docs, sets, gold_path


def make_config(root, gold_path=None, tokens=None):
    return ServiceConfig(
        corpus_dir=str(root),
        submissions_per_doc=3,
        reference_doc_id="fix-1" if gold_path else None,
        reference_gold=str(gold_path) if gold_path else None,
        tokens=tokens or {},
    )


def client_for(root, gold_path=None, tokens=None):
    app = create_app(make_config(root, gold_path, tokens))
    return TestClient(app)


def set_payload(aset, doc, version=0):
    payload = aset.to_json(doc)
    payload["version"] = version
    return payload


class TestDocumentEndpoints:
    def test_list_documents_with_completion(self, corpus_root):
        root, docs, _, _ = corpus_root
        client = client_for(root)
        listing = client.get("/api/docs").json()
        assert [d["doc_id"] for d in listing] == sorted(d.doc_id for d in docs)
        assert all(not d["complete"] for d in listing)

    def test_get_document_with_tokens(self, corpus_root):
        root, docs, _, _ = corpus_root
        client = client_for(root)
        data = client.get("/api/docs/fix-1").json()
        assert data["doc_id"] == "fix-1"
        assert data["tokens"][0]["surface"] == "The"

    def test_unknown_document_404(self, corpus_root):
        root, _, _, _ = corpus_root
        client = client_for(root)
        assert client.get("/api/docs/ghost").status_code == 404

    def test_taxonomy_has_six_categories(self, corpus_root):
        root, _, _, _ = corpus_root
        client = client_for(root)
        taxonomy = client.get("/api/taxonomy").json()
        assert [c["name"] for c in taxonomy["categories"]] == [
            "number", "name", "word", "context", "not_checkable", "other",
        ]
        assert taxonomy["guidance"]


class TestSubmission:
    def test_put_then_get_round_trip(self, corpus_root):
        root, docs, sets, _ = corpus_root
        doc = next(d for d in docs if d.doc_id == "fix-1")
        aset = next(s for s in sets if s.doc_id == "fix-1" and s.annotator_id == "turk-1")
        client = client_for(root)
        response = client.put(
            "/api/docs/fix-1/annotations/turk-1", json=set_payload(aset, doc)
        )
        assert response.status_code == 200
        assert response.json()["version"] == 1
        fetched = client.get("/api/docs/fix-1/annotations/turk-1").json()
        assert fetched["version"] == 1
        del fetched["version"]
        assert fetched == aset.to_json(doc)

    def test_stale_version_409(self, corpus_root):
        root, docs, sets, _ = corpus_root
        doc = next(d for d in docs if d.doc_id == "fix-1")
        aset = next(s for s in sets if s.doc_id == "fix-1" and s.annotator_id == "turk-1")
        client = client_for(root)
        assert (
            client.put("/api/docs/fix-1/annotations/turk-1", json=set_payload(aset, doc))
            .status_code
            == 200
        )
        stale = client.put(
            "/api/docs/fix-1/annotations/turk-1", json=set_payload(aset, doc, version=0)
        )
        assert stale.status_code == 409
        assert stale.json()["detail"]["current_version"] == 1
        fresh = client.put(
            "/api/docs/fix-1/annotations/turk-1", json=set_payload(aset, doc, version=1)
        )
        assert fresh.status_code == 200

    def test_invalid_payload_422_with_reasons(self, corpus_root):
        root, docs, sets, _ = corpus_root
        doc = next(d for d in docs if d.doc_id == "fix-1")
        aset = next(s for s in sets if s.doc_id == "fix-1" and s.annotator_id == "turk-1")
        payload = set_payload(aset, doc)
        payload["annotations"][0]["span"]["surface"] = "wrong words"
        client = client_for(root)
        response = client.put("/api/docs/fix-1/annotations/turk-1", json=payload)
        assert response.status_code == 422
        assert response.json()["detail"][0]["reason"] == "surface_mismatch"

    def test_concurrent_conflicting_puts(self, corpus_root):
        root, docs, sets, _ = corpus_root
        doc = next(d for d in docs if d.doc_id == "fix-1")
        aset = next(s for s in sets if s.doc_id == "fix-1" and s.annotator_id == "turk-1")
        client = client_for(root)
        payload = set_payload(aset, doc)
        statuses = []
        barrier = threading.Barrier(2)

        def submit():
            barrier.wait()
            response = client.put(
                "/api/docs/fix-1/annotations/turk-1", json=json.loads(json.dumps(payload))
            )
            statuses.append(response.status_code)

        threads = [threading.Thread(target=submit) for _ in range(2)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert sorted(statuses) == [200, 409]

    def test_restart_durability(self, corpus_root):
        root, docs, sets, _ = corpus_root
        doc = next(d for d in docs if d.doc_id == "fix-1")
        aset = next(s for s in sets if s.doc_id == "fix-1" and s.annotator_id == "turk-1")
        client = client_for(root)
        assert (
            client.put("/api/docs/fix-1/annotations/turk-1", json=set_payload(aset, doc))
            .status_code
            == 200
        )
        # A brand-new app instance over the same directory still serves the set
        # and still enforces the version check.
        reborn = client_for(root)
        fetched = reborn.get("/api/docs/fix-1/annotations/turk-1")
        assert fetched.status_code == 200
        assert fetched.json()["version"] == 1
        stale = reborn.put(
            "/api/docs/fix-1/annotations/turk-1", json=set_payload(aset, doc, version=0)
        )
        assert stale.status_code == 409


class TestGoldEndpoint:
    def test_gold_after_enough_submissions(self, corpus_root):
        root, docs, sets, _ = corpus_root
        doc = next(d for d in docs if d.doc_id == "fix-2")
        client = client_for(root)
        for aset in (s for s in sets if s.doc_id == "fix-2"):
            assert (
                client.put(
                    f"/api/docs/fix-2/annotations/{aset.annotator_id}",
                    json=set_payload(aset, doc),
                ).status_code
                == 200
            )
        gold = client.get("/api/gold/fix-2").json()
        assert gold["doc_id"] == "fix-2"
        assert gold["errors"]

    def test_gold_requires_two_sets(self, corpus_root):
        root, _, _, _ = corpus_root
        client = client_for(root)
        assert client.get("/api/gold/fix-1").status_code == 404


class TestQualification:
    def test_qualify_pass(self, corpus_root):
        root, docs, sets, gold_path = corpus_root
        doc = next(d for d in docs if d.doc_id == "fix-1")
        aset = next(s for s in sets if s.doc_id == "fix-1" and s.annotator_id == "turk-1")
        client = client_for(root, gold_path)
        payload = aset.to_json(doc)
        payload["annotator_id"] = "newbie"
        for ann in payload["annotations"]:
            ann["annotator_id"] = "newbie"
        response = client.post("/api/qualify/newbie", json=payload)
        assert response.status_code == 200
        body = response.json()
        assert body["passed"] is True
        assert body["fraction"] >= 0.70

    def test_qualify_fail_blocks_assignment(self, corpus_root):
        root, docs, sets, gold_path = corpus_root
        client = client_for(root, gold_path)
        empty = {"doc_id": "fix-1", "annotator_id": "newbie", "annotations": []}
        response = client.post("/api/qualify/newbie", json=empty)
        assert response.status_code == 200
        assert response.json()["passed"] is False
        assignment = client.get("/api/assignment/newbie")
        assert assignment.status_code == 403


class TestAssignment:
    def test_first_doc_in_id_order(self, corpus_root):
        root, _, _, _ = corpus_root
        client = client_for(root)
        response = client.get("/api/assignment/turk-9")
        assert response.json() == {"doc_id": "fix-1"}

    def test_full_document_never_assigned_and_no_reassignment(self, corpus_root):
        root, docs, sets, _ = corpus_root
        doc = next(d for d in docs if d.doc_id == "fix-1")
        client = client_for(root)
        for aset in (s for s in sets if s.doc_id == "fix-1"):
            client.put(
                f"/api/docs/fix-1/annotations/{aset.annotator_id}",
                json=set_payload(aset, doc),
            )
        # fix-1 now has 3 submissions: full for anyone.
        fresh = client.get("/api/assignment/turk-9").json()
        assert fresh["doc_id"] == "fix-2"
        # turk-1 already submitted fix-1 and is never handed it again.
        own = client.get("/api/assignment/turk-1").json()
        assert own["doc_id"] == "fix-2"

    def test_all_done_returns_none(self, corpus_root):
        root, docs, sets, _ = corpus_root
        client = client_for(root)
        by_doc = {}
        for aset in sets:
            by_doc.setdefault(aset.doc_id, []).append(aset)
        for doc in docs:
            for aset in by_doc[doc.doc_id]:
                client.put(
                    f"/api/docs/{doc.doc_id}/annotations/{aset.annotator_id}",
                    json=set_payload(aset, doc),
                )
        assert client.get("/api/assignment/turk-9").json() == {"doc_id": None}

    def test_policy_is_deterministic(self, corpus_root):
        root, _, _, _ = corpus_root
        app = create_app(make_config(root))
        state = app.state.corpus
        assert assignment_policy(state, "anyone") == "fix-1"
        assert assignment_policy(state, "anyone") == "fix-1"


class TestAuth:
    def test_bearer_token_enforced(self, corpus_root):
        root, docs, sets, _ = corpus_root
        doc = next(d for d in docs if d.doc_id == "fix-1")
        aset = next(s for s in sets if s.doc_id == "fix-1" and s.annotator_id == "turk-1")
        client = client_for(root, tokens={"sekrit": "turk-1"})
        payload = set_payload(aset, doc)
        anonymous = client.put("/api/docs/fix-1/annotations/turk-1", json=payload)
        assert anonymous.status_code == 401
        wrong_owner = client.put(
            "/api/docs/fix-1/annotations/turk-2",
            json=payload,
            headers={"Authorization": "Bearer sekrit"},
        )
        assert wrong_owner.status_code == 403
        ok = client.put(
            "/api/docs/fix-1/annotations/turk-1",
            json=payload,
            headers={"Authorization": "Bearer sekrit"},
        )
        assert ok.status_code == 200


class TestConfig:
    def test_env_overrides(self, tmp_path, monkeypatch, corpus_root):
        root, _, _, _ = corpus_root
        config_file = tmp_path / "config.json"
        config_file.write_text(
            json.dumps({"corpus_dir": str(root), "port": 1234})
        )
        monkeypatch.setenv("SPANGOLD_PORT", "4321")
        config = ServiceConfig.from_file(config_file)
        assert config.port == 4321
        assert config.corpus_dir == str(root)
