from __future__ import annotations

import random

import pytest

from spangold.adjudication import (
    AGREEMENT_ALL,
    AGREEMENT_MAJORITY,
    AGREEMENT_SPLIT,
    NO_MAJORITY,
    ErrorCluster,
    adjudicate,
    adjudicate_document,
    apply_guideline_rules,
    cluster_annotations,
)
from spangold.model import (
    AnnotationSet,
    ErrorAnnotation,
    ErrorCategory,
    Span,
    ValidationError,
)

from fixtures_corpus import random_corpus, rules_corpus
from oracles import brute_force_clusters, brute_force_gold_errors
from test_model import make_doc, span_over


def simple_set(doc, annotator, *annotations):
    return AnnotationSet(
        doc_id=doc.doc_id, annotator_id=annotator, annotations=tuple(annotations)
    )


class TestGuidelineRules:
    def test_weekday_recategorised_to_name(self):
        doc = make_doc("The game was played Monday night")
        aset = simple_set(
            doc,
            "t1",
            ErrorAnnotation(
                "t1", span_over(doc, "Monday"), ErrorCategory.WORD, "Wednesday"
            ),
        )
        fixed, log = apply_guideline_rules(aset, doc)
        assert fixed.annotations[0].category is ErrorCategory.NAME
        assert fixed.annotations[0].correction == "Wednesday"
        assert [e.rule for e in log] == ["weekday_as_name"]

    def test_untyped_weekday_also_becomes_name(self):
        doc = make_doc("The game was played Monday night")
        aset = simple_set(
            doc, "t1", ErrorAnnotation("t1", span_over(doc, "Monday"), None, "Tuesday")
        )
        fixed, _ = apply_guideline_rules(aset, doc)
        assert fixed.annotations[0].category is ErrorCategory.NAME

    def test_score_pair_split_when_both_wrong(self):
        doc = make_doc("Boston won the rebounding battle 30-20 tonight")
        aset = simple_set(
            doc,
            "t1",
            ErrorAnnotation(
                "t1", span_over(doc, "30-20"), ErrorCategory.NUMBER, "22-18"
            ),
        )
        fixed, log = apply_guideline_rules(aset, doc)
        assert len(fixed.annotations) == 2
        halves = {a.half: a.correction for a in fixed.annotations}
        assert halves == {"first": "22", "second": "18"}
        assert [e.rule for e in log] == ["score_pair_split"]

    def test_score_pair_untouched_when_one_number_right(self):
        doc = make_doc("Boston won the rebounding battle 30-20 tonight")
        aset = simple_set(
            doc,
            "t1",
            ErrorAnnotation(
                "t1", span_over(doc, "30-20"), ErrorCategory.NUMBER, "30-18"
            ),
        )
        fixed, log = apply_guideline_rules(aset, doc)
        assert len(fixed.annotations) == 1
        assert fixed.annotations[0].half is None
        assert log == []

    def test_score_pair_without_correction_is_skipped_with_note(self):
        doc = make_doc("Boston won the rebounding battle 30-20 tonight")
        aset = simple_set(
            doc,
            "t1",
            ErrorAnnotation("t1", span_over(doc, "30-20"), ErrorCategory.NUMBER),
        )
        fixed, log = apply_guideline_rules(aset, doc)
        assert len(fixed.annotations) == 1
        assert [e.rule for e in log] == ["score_pair_skipped"]
        assert "correction" in log[0].note

    def test_unrelated_annotation_passes_through(self):
        doc = make_doc("Marc Gasol led all scorers")
        ann = ErrorAnnotation(
            "t1", span_over(doc, "Marc Gasol"), ErrorCategory.NAME, "Mike Conley"
        )
        fixed, log = apply_guideline_rules(simple_set(doc, "t1", ann), doc)
        assert fixed.annotations == (ann,)
        assert log == []

    def test_idempotent(self):
        doc = make_doc("Boston won 30-20 on Monday night")
        aset = simple_set(
            doc,
            "t1",
            ErrorAnnotation("t1", span_over(doc, "30-20"), ErrorCategory.NUMBER, "22-18"),
            ErrorAnnotation("t1", span_over(doc, "Monday"), ErrorCategory.WORD, "Friday"),
        )
        once, _ = apply_guideline_rules(aset, doc)
        twice, _ = apply_guideline_rules(once, doc)
        assert once == twice


class TestClustering:
    def test_determiner_variants_form_one_cluster(self):
        doc = make_doc("They face the Boston Celtics on Friday")
        sets = [
            simple_set(doc, "t1", ErrorAnnotation("t1", span_over(doc, "the Boston Celtics"), ErrorCategory.NAME, "Kings")),
            simple_set(doc, "t2", ErrorAnnotation("t2", span_over(doc, "Boston Celtics"), ErrorCategory.NAME, "Kings")),
            simple_set(doc, "t3", ErrorAnnotation("t3", span_over(doc, "Boston Celtics"), ErrorCategory.NAME, "Kings")),
        ]
        clusters = cluster_annotations(sets, doc)
        assert len(clusters) == 1
        assert len(clusters[0].members) == 3
        assert doc.span_surface(clusters[0].canonical_span) == "Boston Celtics"

    def test_disjoint_spans_make_singletons(self):
        doc = make_doc("Gasol Conley Thomas each scored")
        sets = [
            simple_set(doc, "t1", ErrorAnnotation("t1", Span("d1", 0, 1), ErrorCategory.NAME)),
            simple_set(doc, "t2", ErrorAnnotation("t2", Span("d1", 1, 2), ErrorCategory.NAME)),
            simple_set(doc, "t3", ErrorAnnotation("t3", Span("d1", 2, 3), ErrorCategory.NAME)),
        ]
        clusters = cluster_annotations(sets, doc)
        assert len(clusters) == 3
        assert all(len(c.members) == 1 for c in clusters)

    def test_split_halves_align_with_separate_marks(self):
        # One annotator marks the score token twice (both halves), the other
        # marks it once and the rule splits it: two clusters of two.
        doc = make_doc("they out-scored the Suns 59-42 early")
        score = span_over(doc, "59-42")
        a1 = simple_set(
            doc,
            "t1",
            ErrorAnnotation("t1", score, ErrorCategory.NUMBER, "46", half="first"),
            ErrorAnnotation("t1", score, ErrorCategory.NUMBER, "52", half="second"),
        )
        a2 = simple_set(
            doc,
            "t2",
            ErrorAnnotation("t2", score, ErrorCategory.NUMBER, "46-52"),
        )
        fixed2, _ = apply_guideline_rules(a2, doc)
        clusters = cluster_annotations([a1, fixed2], doc)
        assert len(clusters) == 2
        assert sorted(len(c.members) for c in clusters) == [2, 2]
        halves = [sorted({m.half for m in c.members}) for c in clusters]
        assert halves == [["first"], ["second"]]

    def test_same_annotator_spill(self):
        doc = make_doc("Isaiah Thomas added fifteen points")
        name = span_over(doc, "Isaiah Thomas")
        phrase = span_over(doc, "Thomas added")
        wide = span_over(doc, "Isaiah Thomas added")
        sets = [
            simple_set(
                doc,
                "t1",
                ErrorAnnotation("t1", name, ErrorCategory.NAME, "Booker"),
                ErrorAnnotation("t1", phrase, ErrorCategory.CONTEXT),
            ),
            simple_set(doc, "t2", ErrorAnnotation("t2", wide, ErrorCategory.NAME, "Booker")),
        ]
        clusters = cluster_annotations(sets, doc)
        assert len(clusters) == 2
        sizes = sorted(len(c.members) for c in clusters)
        assert sizes == [1, 2]
        big = next(c for c in clusters if len(c.members) == 2)
        assert {m.annotator_id for m in big.members} == {"t1", "t2"}

    def test_mixed_doc_ids_rejected(self):
        doc = make_doc("one two")
        other = AnnotationSet(doc_id="other", annotator_id="t1", annotations=())
        with pytest.raises(ValidationError):
            cluster_annotations([other], doc)

    def test_matches_brute_force_oracle_on_handwritten_corpus(self):
        docs, sets = rules_corpus()
        by_doc = {}
        for aset in sets:
            by_doc.setdefault(aset.doc_id, []).append(aset)
        for doc in docs:
            corrected = []
            for aset in sorted(by_doc[doc.doc_id], key=lambda s: s.annotator_id):
                fixed, _ = apply_guideline_rules(aset, doc)
                corrected.append(fixed)
            production = cluster_annotations(corrected, doc)
            annotations = [a for s in corrected for a in s.annotations]
            expected = brute_force_clusters(annotations, doc)
            got = {frozenset(m.annotation_id for m in c.members) for c in production}
            assert got == expected, doc.doc_id

    def test_matches_brute_force_oracle_on_random_small_documents(self):
        rng = random.Random(5150)
        checked = 0
        while checked < 60:
            doc, sets = random_corpus(rng)
            corrected = []
            for aset in sorted(sets, key=lambda s: s.annotator_id):
                fixed, _ = apply_guideline_rules(aset, doc)
                corrected.append(fixed)
            annotations = [a for s in corrected for a in s.annotations]
            if not annotations or len(annotations) > 12:
                continue
            checked += 1
            production = cluster_annotations(corrected, doc)
            expected = brute_force_clusters(annotations, doc)
            got = {frozenset(m.annotation_id for m in c.members) for c in production}
            assert got == expected

    def test_cluster_json_round_trip(self):
        docs, sets = rules_corpus()
        doc = docs[0]
        by_doc = [s for s in sets if s.doc_id == doc.doc_id]
        corrected = []
        for aset in sorted(by_doc, key=lambda s: s.annotator_id):
            fixed, _ = apply_guideline_rules(aset, doc)
            corrected.append(fixed)
        clusters = cluster_annotations(corrected, doc)
        from spangold.adjudication import ErrorCluster

        for cluster in clusters:
            assert ErrorCluster.from_json(cluster.to_json(doc), doc) == cluster


class TestAdjudicate:
    def make_cluster(self, doc, span, votes, cluster_id="c0", n=3):
        members = tuple(
            ErrorAnnotation(f"t{i+1}", span, cat, correction=f"fix-{i}")
            for i, cat in enumerate(votes)
        )
        return ErrorCluster(
            cluster_id=cluster_id,
            doc_id=doc.doc_id,
            members=members,
            canonical_span=span,
            n_annotators=n,
        )

    def test_majority_category_wins(self):
        doc = make_doc("Gasol scored midway through")
        cluster = self.make_cluster(
            doc, Span("d1", 0, 1), [ErrorCategory.NAME, ErrorCategory.NAME, ErrorCategory.WORD]
        )
        gold = adjudicate([cluster])
        assert len(gold.errors) == 1
        assert gold.errors[0].category == "name"
        assert gold.errors[0].agreement == AGREEMENT_MAJORITY

    def test_three_way_split_has_no_majority(self):
        doc = make_doc("Gasol scored midway through")
        cluster = self.make_cluster(
            doc,
            Span("d1", 0, 1),
            [ErrorCategory.NUMBER, ErrorCategory.NAME, ErrorCategory.WORD],
        )
        gold = adjudicate([cluster])
        assert gold.errors[0].category == NO_MAJORITY
        assert gold.errors[0].agreement == AGREEMENT_SPLIT

    def test_unanimous_full_participation_is_all_agree(self):
        doc = make_doc("Gasol scored midway through")
        cluster = self.make_cluster(
            doc, Span("d1", 0, 1), [ErrorCategory.NAME, ErrorCategory.NAME, ErrorCategory.NAME]
        )
        gold = adjudicate([cluster])
        assert gold.errors[0].agreement == AGREEMENT_ALL
        assert gold.errors[0].miss_count == 0

    def test_minority_cluster_excluded_but_logged(self):
        doc = make_doc("Gasol scored midway through")
        cluster = self.make_cluster(doc, Span("d1", 0, 1), [ErrorCategory.NAME])
        gold = adjudicate([cluster])
        assert gold.errors == ()
        assert any(e.rule == "minority_only_cluster" for e in gold.rule_log)

    def test_two_of_three_enters_gold_with_miss(self):
        doc = make_doc("Gasol scored midway through")
        cluster = self.make_cluster(
            doc, Span("d1", 0, 1), [ErrorCategory.NAME, ErrorCategory.NAME]
        )
        gold = adjudicate([cluster])
        assert gold.errors[0].agreement == AGREEMENT_MAJORITY
        assert gold.errors[0].miss_count == 1

    def test_empty_cluster_list_is_valid(self):
        gold = adjudicate([], doc_id="d9")
        assert gold.doc_id == "d9"
        assert gold.errors == ()

    def test_corrections_and_provenance_collected(self):
        doc = make_doc("Gasol scored midway through")
        cluster = self.make_cluster(
            doc, Span("d1", 0, 1), [ErrorCategory.NAME, ErrorCategory.NAME]
        )
        gold = adjudicate([cluster])
        assert gold.errors[0].corrections == ("fix-0", "fix-1")
        assert len(gold.errors[0].provenance) == 2


class TestDocumentPipeline:
    def test_gold_errors_match_oracle_on_handwritten_corpus(self):
        docs, sets = rules_corpus()
        by_doc = {}
        for aset in sets:
            by_doc.setdefault(aset.doc_id, []).append(aset)
        for doc in docs:
            gold, _ = adjudicate_document(doc, by_doc[doc.doc_id])
            got = [
                {
                    "start": e.canonical_span.start,
                    "end": e.canonical_span.end,
                    "category": e.category,
                    "agreement": e.agreement,
                    "miss_count": e.miss_count,
                    "provenance": list(e.provenance),
                }
                for e in gold.errors
            ]
            assert got == brute_force_gold_errors(by_doc[doc.doc_id], doc), doc.doc_id

    def test_annotator_order_invariance(self):
        rng = random.Random(20240811)
        for _ in range(50):
            doc, sets = random_corpus(rng)
            gold_a, _ = adjudicate_document(doc, sets)
            shuffled = sets[:]
            rng.shuffle(shuffled)
            gold_b, _ = adjudicate_document(doc, shuffled)
            assert gold_a == gold_b

    def test_count_conservation(self):
        rng = random.Random(7)
        for _ in range(50):
            doc, sets = random_corpus(rng)
            corrected = []
            for aset in sorted(sets, key=lambda s: s.annotator_id):
                fixed, _ = apply_guideline_rules(aset, doc)
                corrected.append(fixed)
            clusters = cluster_annotations(corrected, doc)
            total_in = sum(len(s.annotations) for s in corrected)
            total_out = sum(len(c.members) for c in clusters)
            assert total_in == total_out
            all_ids = sorted(
                m.annotation_id for c in clusters for m in c.members
            )
            assert len(set(all_ids)) == len(all_ids)

    def test_crowded_document_flagged(self):
        doc = make_doc(" ".join(f"tok{i}" for i in range(12)))
        sets = []
        for annotator in ("t1", "t2"):
            anns = tuple(
                ErrorAnnotation(annotator, Span("d1", i, i + 1), ErrorCategory.WORD)
                for i in range(7)
            )
            sets.append(AnnotationSet(doc_id="d1", annotator_id=annotator, annotations=anns))
        gold, _ = adjudicate_document(doc, sets)
        assert any(e.rule == "crowded_region_review" for e in gold.rule_log)
