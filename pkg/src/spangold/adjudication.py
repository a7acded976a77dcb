"""Combine several annotators' markups of one document into a gold standard.

Three mechanical steps, each pure and order-independent:

1. guideline rules rewrite annotations that ignored the written guidelines
   (wrong weekday is a name error; a score pair with both numbers wrong is
   two errors),
2. clustering groups annotations from different annotators that describe the
   same underlying error (connected components of the span-coreference
   graph),
3. majority vote turns each cluster into a gold error, or records it as a
   minority-only opinion.

Every automatic rewrite and every dropped cluster is logged so a human can
reconstruct what happened.
"""

from __future__ import annotations

import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional

from .model import (
    HALF_FIRST,
    HALF_SECOND,
    SCORE_PAIR_RE,
    DEFAULT_FUNCTION_WORDS,
    WEEKDAYS,
    AnnotationSet,
    Document,
    ErrorAnnotation,
    ErrorCategory,
    Span,
    ValidationError,
    normalize_span,
    spans_corefer,
    validate_span,
)

# Adjudicated category labels beyond the six annotator-facing categories.
NO_MAJORITY = "no_majority"
NO_LABEL = "no_label"

AGREEMENT_ALL = "all_agree"
AGREEMENT_MAJORITY = "majority"
AGREEMENT_SPLIT = "split"

# More than this many clusters starting inside one window of tokens marks a
# document for human review (a sign of a nonsense passage nobody could
# annotate cleanly).
CROWDED_CLUSTER_LIMIT = 5
CROWDED_WINDOW_TOKENS = 20


@dataclass(frozen=True)
class RuleLogEntry:
    rule: str
    doc_id: str
    annotator_id: Optional[str] = None
    before: Optional[str] = None
    after: Optional[str] = None
    note: Optional[str] = None

    def to_json(self) -> dict:
        return {
            "rule": self.rule,
            "doc_id": self.doc_id,
            "annotator_id": self.annotator_id,
            "before": self.before,
            "after": self.after,
            "note": self.note,
        }

    @classmethod
    def from_json(cls, data: dict) -> "RuleLogEntry":
        return cls(
            rule=data["rule"],
            doc_id=data["doc_id"],
            annotator_id=data.get("annotator_id"),
            before=data.get("before"),
            after=data.get("after"),
            note=data.get("note"),
        )


@dataclass(frozen=True)
class ErrorCluster:
    cluster_id: str
    doc_id: str
    members: tuple[ErrorAnnotation, ...]
    canonical_span: Span
    n_annotators: int

    def member_labels(self) -> list[str]:
        """Category label per member; untyped members vote "no_type"."""
        return [
            m.category.value if m.category else "no_type" for m in self.members
        ]

    def enters_gold(self) -> bool:
        return len(self.members) * 2 > self.n_annotators

    def to_json(self, doc: Optional[Document] = None) -> dict:
        return {
            "cluster_id": self.cluster_id,
            "doc_id": self.doc_id,
            "members": [m.to_json(doc) for m in self.members],
            "canonical_span": self.canonical_span.to_json(doc),
            "n_annotators": self.n_annotators,
        }

    @classmethod
    def from_json(cls, data: dict, doc: Optional[Document] = None) -> "ErrorCluster":
        return cls(
            cluster_id=data["cluster_id"],
            doc_id=data["doc_id"],
            members=tuple(
                ErrorAnnotation.from_json(m, doc) for m in data.get("members", [])
            ),
            canonical_span=Span.from_json(data["canonical_span"], doc),
            n_annotators=data["n_annotators"],
        )


@dataclass(frozen=True)
class GoldError:
    canonical_span: Span
    category: str  # one of ErrorCategory values, NO_MAJORITY or NO_LABEL
    agreement: str  # AGREEMENT_ALL / AGREEMENT_MAJORITY / AGREEMENT_SPLIT
    corrections: tuple[str, ...]
    miss_count: int
    provenance: tuple[str, ...]

    def to_json(self, doc: Optional[Document] = None) -> dict:
        return {
            "canonical_span": self.canonical_span.to_json(doc),
            "category": self.category,
            "agreement": self.agreement,
            "corrections": list(self.corrections),
            "miss_count": self.miss_count,
            "provenance": list(self.provenance),
        }

    @classmethod
    def from_json(cls, data: dict, doc: Optional[Document] = None) -> "GoldError":
        return cls(
            canonical_span=Span.from_json(data["canonical_span"], doc),
            category=data["category"],
            agreement=data["agreement"],
            corrections=tuple(data.get("corrections", [])),
            miss_count=data["miss_count"],
            provenance=tuple(data.get("provenance", [])),
        )


@dataclass(frozen=True)
class GoldStandard:
    doc_id: str
    errors: tuple[GoldError, ...]
    rule_log: tuple[RuleLogEntry, ...] = ()

    def category_counts(self) -> Counter:
        return Counter(err.category for err in self.errors)

    def to_json(self, doc: Optional[Document] = None) -> dict:
        return {
            "doc_id": self.doc_id,
            "errors": [e.to_json(doc) for e in self.errors],
            "rule_log": [entry.to_json() for entry in self.rule_log],
        }

    @classmethod
    def from_json(cls, data: dict, doc: Optional[Document] = None) -> "GoldStandard":
        return cls(
            doc_id=data["doc_id"],
            errors=tuple(GoldError.from_json(e, doc) for e in data.get("errors", [])),
            rule_log=tuple(
                RuleLogEntry.from_json(r) for r in data.get("rule_log", [])
            ),
        )


def _describe(ann: ErrorAnnotation, doc: Document) -> str:
    cat = ann.category.value if ann.category else "untyped"
    half = f" half={ann.half}" if ann.half else ""
    return (
        f"[{ann.span.start},{ann.span.end}) {doc.span_surface(ann.span)!r} "
        f"{cat}{half} correction={ann.correction!r}"
    )


_NUMBER_RE = re.compile(r"\d+")


def _score_pair_halves(correction: str) -> Optional[tuple[str, str]]:
    numbers = _NUMBER_RE.findall(correction)
    if len(numbers) < 2:
        return None
    return numbers[0], numbers[1]


def apply_guideline_rules(
    aset: AnnotationSet,
    doc: Document,
    weekdays: Iterable[str] = WEEKDAYS,
) -> tuple[AnnotationSet, list[RuleLogEntry]]:
    """Mechanically enforce the annotation guidelines on one annotator's set.

    Rule "weekday_as_name": a span covering exactly one weekday token is a
    name error whatever the annotator chose.  Rule "score_pair_split": a
    single score-pair token marked as one number error becomes two errors
    when the correction shows both numbers were wrong.  Annotations the rules
    cannot decide are passed through with a skipped-rule note.
    """
    weekday_set = frozenset(w.lower() for w in weekdays)
    log: list[RuleLogEntry] = []
    out: list[ErrorAnnotation] = []
    occupied = {a.key() for a in aset.annotations}
    for ann in aset.annotations:
        validate_span(ann.span, doc)
        current = ann
        if (
            current.span.end - current.span.start == 1
            and doc.tokens[current.span.start].surface.lower() in weekday_set
            and current.category != ErrorCategory.NAME
        ):
            fixed = replace(current, category=ErrorCategory.NAME)
            if fixed.key() in occupied:
                log.append(
                    RuleLogEntry(
                        rule="weekday_as_name_skipped",
                        doc_id=doc.doc_id,
                        annotator_id=aset.annotator_id,
                        before=_describe(current, doc),
                        note="recategorising would duplicate an existing name annotation",
                    )
                )
            else:
                occupied.discard(current.key())
                occupied.add(fixed.key())
                log.append(
                    RuleLogEntry(
                        rule="weekday_as_name",
                        doc_id=doc.doc_id,
                        annotator_id=aset.annotator_id,
                        before=_describe(current, doc),
                        after=_describe(fixed, doc),
                    )
                )
                current = fixed

        surface = (
            doc.tokens[current.span.start].surface
            if current.span.end - current.span.start == 1
            else None
        )
        if (
            surface is not None
            and SCORE_PAIR_RE.match(surface)
            and current.category == ErrorCategory.NUMBER
            and current.half is None
        ):
            if not current.correction:
                log.append(
                    RuleLogEntry(
                        rule="score_pair_skipped",
                        doc_id=doc.doc_id,
                        annotator_id=aset.annotator_id,
                        before=_describe(current, doc),
                        note="no correction given; cannot tell whether both numbers are wrong",
                    )
                )
                out.append(current)
                continue
            corrected = _score_pair_halves(current.correction)
            if corrected is None:
                log.append(
                    RuleLogEntry(
                        rule="score_pair_skipped",
                        doc_id=doc.doc_id,
                        annotator_id=aset.annotator_id,
                        before=_describe(current, doc),
                        note=f"correction {current.correction!r} does not contain two numbers",
                    )
                )
                out.append(current)
                continue
            original = surface.split("-")
            both_wrong = original[0] != corrected[0] and original[1] != corrected[1]
            if both_wrong:
                first = replace(current, half=HALF_FIRST, correction=corrected[0])
                second = replace(current, half=HALF_SECOND, correction=corrected[1])
                if first.key() in occupied or second.key() in occupied:
                    log.append(
                        RuleLogEntry(
                            rule="score_pair_skipped",
                            doc_id=doc.doc_id,
                            annotator_id=aset.annotator_id,
                            before=_describe(current, doc),
                            note="splitting would duplicate an existing half annotation",
                        )
                    )
                    out.append(current)
                    continue
                occupied.discard(current.key())
                occupied.add(first.key())
                occupied.add(second.key())
                log.append(
                    RuleLogEntry(
                        rule="score_pair_split",
                        doc_id=doc.doc_id,
                        annotator_id=aset.annotator_id,
                        before=_describe(current, doc),
                        after=f"{_describe(first, doc)} + {_describe(second, doc)}",
                    )
                )
                out.extend([first, second])
                continue
        out.append(current)
    return replace(aset, annotations=tuple(out)), log


def _halves_compatible(a: Optional[str], b: Optional[str]) -> bool:
    return a is None or b is None or a == b


def annotations_corefer(
    a: ErrorAnnotation,
    b: ErrorAnnotation,
    doc: Document,
    function_words: Iterable[str] = DEFAULT_FUNCTION_WORDS,
) -> bool:
    """Cluster edge predicate: span coreference plus half-marker agreement.

    Two halves of a split score pair never corefer with each other, so the
    two underlying errors stay separate even though they share a token.
    """
    if not _halves_compatible(a.half, b.half):
        return False
    return spans_corefer(a.span, b.span, doc, function_words)


def _ann_sort_key(ann: ErrorAnnotation) -> tuple:
    return (
        ann.span.start,
        ann.span.end,
        ann.annotator_id,
        ann.category.value if ann.category else "~",
        ann.half or "",
        ann.correction or "",
    )


def _normalized_token_set(
    ann: ErrorAnnotation, doc: Document, function_words: Iterable[str]
) -> frozenset[int]:
    norm = normalize_span(ann.span, doc, function_words)
    return frozenset(norm.token_indices())


def cluster_annotations(
    sets: list[AnnotationSet],
    doc: Document,
    function_words: Iterable[str] = DEFAULT_FUNCTION_WORDS,
) -> list[ErrorCluster]:
    """Group all annotators' annotations into coreference clusters.

    Clusters are connected components of the pairwise coreference graph.
    When one annotator lands twice in the same component, the annotation
    overlapping the other annotators most stays; the rest spill into their
    own singleton clusters.  Guideline rules must already have been applied.
    """
    for aset in sets:
        if aset.doc_id != doc.doc_id:
            raise ValidationError(
                f"annotation set for {aset.doc_id!r} mixed into document {doc.doc_id!r}"
            )
    n_annotators = len(sets)
    annotations = sorted(
        (ann for aset in sets for ann in aset.annotations), key=_ann_sort_key
    )
    for ann in annotations:
        validate_span(ann.span, doc)

    # Union-find over annotation indices.
    parent = list(range(len(annotations)))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(x: int, y: int) -> None:
        rx, ry = find(x), find(y)
        if rx != ry:
            parent[ry] = rx

    for i in range(len(annotations)):
        for j in range(i + 1, len(annotations)):
            if annotations_corefer(annotations[i], annotations[j], doc, function_words):
                union(i, j)

    components: dict[int, list[ErrorAnnotation]] = defaultdict(list)
    for i, ann in enumerate(annotations):
        components[find(i)].append(ann)

    member_groups: list[list[ErrorAnnotation]] = []
    for comp in components.values():
        member_groups.extend(_resolve_same_annotator(comp, doc, function_words))

    clusters = []
    for members in member_groups:
        members = sorted(members, key=_ann_sort_key)
        canonical = _canonical_span(members, doc, function_words)
        clusters.append((canonical, members))
    clusters.sort(
        key=lambda c: (
            c[0].start,
            c[0].end,
            tuple(m.annotation_id for m in c[1]),
        )
    )
    return [
        ErrorCluster(
            cluster_id=f"{doc.doc_id}:c{i:03d}",
            doc_id=doc.doc_id,
            members=tuple(members),
            canonical_span=canonical,
            n_annotators=n_annotators,
        )
        for i, (canonical, members) in enumerate(clusters)
    ]


def _resolve_same_annotator(
    component: list[ErrorAnnotation],
    doc: Document,
    function_words: Iterable[str],
) -> list[list[ErrorAnnotation]]:
    by_annotator: dict[str, list[ErrorAnnotation]] = defaultdict(list)
    for ann in component:
        by_annotator[ann.annotator_id].append(ann)
    if all(len(v) == 1 for v in by_annotator.values()):
        return [component]

    kept: list[ErrorAnnotation] = []
    spilled: list[ErrorAnnotation] = []
    for annotator_id in sorted(by_annotator):
        own = by_annotator[annotator_id]
        if len(own) == 1:
            kept.append(own[0])
            continue
        other_tokens: set[int] = set()
        for other in component:
            if other.annotator_id != annotator_id:
                other_tokens.update(_normalized_token_set(other, doc, function_words))

        def overlap(ann: ErrorAnnotation) -> int:
            return len(_normalized_token_set(ann, doc, function_words) & other_tokens)

        # Deterministic tie-break independent of input order.
        best = sorted(own, key=lambda a: (-overlap(a),) + _ann_sort_key(a))[0]
        kept.append(best)
        spilled.extend(a for a in own if a is not best)
    return [kept] + [[a] for a in spilled]


def _canonical_span(
    members: list[ErrorAnnotation],
    doc: Document,
    function_words: Iterable[str],
) -> Span:
    normalized = [normalize_span(m.span, doc, function_words) for m in members]
    union = Span(
        doc_id=doc.doc_id,
        start=min(s.start for s in normalized),
        end=max(s.end for s in normalized),
    )
    return normalize_span(union, doc, function_words)


def plurality(labels: list[str]) -> Optional[str]:
    counts = Counter(labels)
    ranked = counts.most_common()
    if len(ranked) > 1 and ranked[0][1] == ranked[1][1]:
        return None
    return ranked[0][0]


def adjudicate(
    clusters: list[ErrorCluster],
    doc: Optional[Document] = None,
    doc_id: Optional[str] = None,
    rule_log: Iterable[RuleLogEntry] = (),
) -> GoldStandard:
    """Majority-vote the clusters of one document into a gold standard.

    A cluster enters the gold standard when strictly more than half of the
    document's annotators marked it.  Its category is the strict plurality of
    the members' choices; a tie yields NO_MAJORITY, which still counts as a
    gold error.  Clusters below the threshold are excluded but logged.
    """
    if doc_id is None:
        doc_id = doc.doc_id if doc is not None else ""
    log = list(rule_log)
    if not clusters:
        return GoldStandard(doc_id=doc_id, errors=(), rule_log=tuple(log))

    doc_ids = {c.doc_id for c in clusters}
    if len(doc_ids) > 1:
        raise ValidationError(f"clusters from several documents: {sorted(doc_ids)}")
    doc_id = clusters[0].doc_id
    n_values = {c.n_annotators for c in clusters}
    if len(n_values) > 1:
        raise ValidationError(f"inconsistent annotator counts: {sorted(n_values)}")
    n = n_values.pop()
    if n < 2:
        raise ValidationError("adjudication needs at least 2 annotators")

    errors = []
    for cluster in sorted(
        clusters, key=lambda c: (c.canonical_span.start, c.canonical_span.end, c.cluster_id)
    ):
        members = cluster.members
        if not cluster.enters_gold():
            log.append(
                RuleLogEntry(
                    rule="minority_only_cluster",
                    doc_id=doc_id,
                    note=(
                        f"cluster {cluster.cluster_id} marked by "
                        f"{len(members)}/{n} annotators; excluded from gold: "
                        + "; ".join(m.annotation_id for m in members)
                    ),
                )
            )
            continue
        labels = cluster.member_labels()
        winner = plurality(labels)
        if winner is None:
            category = NO_MAJORITY
            agreement = AGREEMENT_SPLIT
        else:
            category = NO_LABEL if winner == "no_type" else winner
            unanimous = len(members) == n and len(set(labels)) == 1
            agreement = AGREEMENT_ALL if unanimous else AGREEMENT_MAJORITY
        corrections = tuple(
            m.correction
            for m in sorted(members, key=lambda m: m.annotator_id)
            if m.correction
        )
        errors.append(
            GoldError(
                canonical_span=cluster.canonical_span,
                category=category,
                agreement=agreement,
                corrections=corrections,
                miss_count=n - len(members),
                provenance=tuple(sorted(m.annotation_id for m in members)),
            )
        )
    errors.sort(key=lambda e: (e.canonical_span.start, e.canonical_span.end, e.category))
    log.extend(_crowding_notes(doc_id, clusters))
    return GoldStandard(doc_id=doc_id, errors=tuple(errors), rule_log=tuple(log))


def _crowding_notes(doc_id: str, clusters: list[ErrorCluster]) -> list[RuleLogEntry]:
    starts = sorted(c.canonical_span.start for c in clusters)
    for i in range(len(starts)):
        j = i
        while j < len(starts) and starts[j] < starts[i] + CROWDED_WINDOW_TOKENS:
            j += 1
        if j - i > CROWDED_CLUSTER_LIMIT:
            return [
                RuleLogEntry(
                    rule="crowded_region_review",
                    doc_id=doc_id,
                    note=(
                        f"{j - i} clusters start within tokens "
                        f"[{starts[i]},{starts[i] + CROWDED_WINDOW_TOKENS}); "
                        "possibly a nonsense passage, review by hand"
                    ),
                )
            ]
    return []


def adjudicate_document(
    doc: Document,
    sets: list[AnnotationSet],
    function_words: Iterable[str] = DEFAULT_FUNCTION_WORDS,
    weekdays: Iterable[str] = WEEKDAYS,
) -> tuple[GoldStandard, list[ErrorCluster]]:
    """Full per-document pipeline: rules, clustering, majority vote."""
    ordered = sorted(sets, key=lambda s: s.annotator_id)
    log: list[RuleLogEntry] = []
    corrected = []
    for aset in ordered:
        fixed, entries = apply_guideline_rules(aset, doc, weekdays)
        corrected.append(fixed)
        log.extend(entries)
    clusters = cluster_annotations(corrected, doc, function_words)
    gold = adjudicate(clusters, doc=doc, rule_log=log)
    return gold, clusters


def adjudicate_corpus(
    docs: list[Document],
    sets: list[AnnotationSet],
    function_words: Iterable[str] = DEFAULT_FUNCTION_WORDS,
    weekdays: Iterable[str] = WEEKDAYS,
) -> tuple[list[GoldStandard], list[ErrorCluster]]:
    """Adjudicate every document that has annotation sets, in doc-id order."""
    by_doc: dict[str, list[AnnotationSet]] = defaultdict(list)
    for aset in sets:
        by_doc[aset.doc_id].append(aset)
    doc_index = {d.doc_id: d for d in docs}
    unknown = sorted(set(by_doc) - set(doc_index))
    if unknown:
        raise ValidationError(f"annotation sets for unknown documents: {unknown}")
    golds: list[GoldStandard] = []
    clusters: list[ErrorCluster] = []
    for doc_id in sorted(by_doc):
        gold, doc_clusters = adjudicate_document(
            doc_index[doc_id], by_doc[doc_id], function_words, weekdays
        )
        golds.append(gold)
        clusters.extend(doc_clusters)
    return golds, clusters
