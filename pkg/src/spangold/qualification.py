"""Score a candidate annotator's markup against a known reference annotation."""

from __future__ import annotations

from dataclasses import dataclass, field

from .adjudication import NO_LABEL, NO_MAJORITY, GoldStandard, apply_guideline_rules
from .model import AnnotationSet, Document, ValidationError, spans_corefer

DEFAULT_THRESHOLD = 0.70


@dataclass(frozen=True)
class QualificationResult:
    candidate_id: str
    found: int
    reference_total: int
    fraction: float
    passed: bool
    threshold: float
    matches: tuple[dict, ...] = field(default_factory=tuple)

    def to_json(self) -> dict:
        return {
            "candidate_id": self.candidate_id,
            "found": self.found,
            "reference_total": self.reference_total,
            "fraction": self.fraction,
            "passed": self.passed,
            "threshold": self.threshold,
            "matches": list(self.matches),
        }


def score_qualification(
    candidate: AnnotationSet,
    reference: GoldStandard,
    doc: Document,
    threshold: float = DEFAULT_THRESHOLD,
    span_only: bool = False,
) -> QualificationResult:
    """Fraction of reference errors the candidate found; pass at >= threshold.

    A reference error counts as found when one candidate annotation corefers
    with it and, unless ``span_only``, agrees on the category after the
    guideline rules have corrected the candidate's set.  Matching is
    injective and maximal, so extra annotations never hurt the score.
    """
    if candidate.doc_id != reference.doc_id or candidate.doc_id != doc.doc_id:
        raise ValidationError(
            f"candidate ({candidate.doc_id!r}), reference ({reference.doc_id!r}) and "
            f"document ({doc.doc_id!r}) must agree"
        )
    if not reference.errors:
        raise ValidationError("reference annotation has no errors to find")

    corrected, _ = apply_guideline_rules(candidate, doc)
    anns = list(corrected.annotations)

    def compatible(err_index: int, ann_index: int) -> bool:
        err = reference.errors[err_index]
        ann = anns[ann_index]
        if not spans_corefer(err.canonical_span, ann.span, doc):
            return False
        if span_only:
            return True
        if err.category in (NO_MAJORITY, NO_LABEL):
            # The reference itself has no settled category here; span
            # agreement is the only thing a candidate can be held to.
            return True
        return ann.category is not None and ann.category.value == err.category

    # Maximum bipartite matching (Kuhn's augmenting paths): small inputs, and
    # maximality keeps the score monotone in the candidate's annotations.
    match_of_ann: dict[int, int] = {}

    def try_assign(err_index: int, seen: set[int]) -> bool:
        for ann_index in range(len(anns)):
            if ann_index in seen or not compatible(err_index, ann_index):
                continue
            seen.add(ann_index)
            if ann_index not in match_of_ann or try_assign(
                match_of_ann[ann_index], seen
            ):
                match_of_ann[ann_index] = err_index
                return True
        return False

    for err_index in range(len(reference.errors)):
        try_assign(err_index, set())

    found = len(match_of_ann)
    total = len(reference.errors)
    fraction = found / total
    matches = tuple(
        {
            "reference": f"{reference.doc_id}:{reference.errors[e].canonical_span.start}-"
            f"{reference.errors[e].canonical_span.end}:{reference.errors[e].category}",
            "candidate": anns[a].annotation_id,
        }
        for a, e in sorted(match_of_ann.items())
    )
    return QualificationResult(
        candidate_id=candidate.annotator_id,
        found=found,
        reference_total=total,
        fraction=fraction,
        passed=fraction >= threshold,
        threshold=threshold,
        matches=matches,
    )
