"""Independent reference implementations used only to check the real ones.

Deliberately naive: repeated pairwise merging instead of union-find, direct
formula transcriptions, exhaustive search.  Keep these stupid.
"""

from __future__ import annotations

from collections import Counter, defaultdict

from spangold.adjudication import annotations_corefer
from spangold.model import DEFAULT_FUNCTION_WORDS


def brute_force_components(annotations, doc, function_words=DEFAULT_FUNCTION_WORDS):
    """Connected components by merging any two groups with a corefer pair."""
    groups = [{i} for i in range(len(annotations))]
    changed = True
    while changed:
        changed = False
        for x in range(len(groups)):
            for y in range(x + 1, len(groups)):
                if any(
                    annotations_corefer(
                        annotations[i], annotations[j], doc, function_words
                    )
                    for i in groups[x]
                    for j in groups[y]
                ):
                    groups[x] |= groups[y]
                    del groups[y]
                    changed = True
                    break
            if changed:
                break
    return [sorted(g) for g in groups]


def brute_force_clusters(annotations, doc, function_words=DEFAULT_FUNCTION_WORDS):
    """Cluster member groups, including the same-annotator spill rule.

    Returns a set of frozensets of annotation ids, comparable with the
    production clustering output.
    """
    from spangold.model import normalize_span

    def norm_tokens(ann):
        s = normalize_span(ann.span, doc, function_words)
        return set(range(s.start, s.end))

    result = set()
    for comp in brute_force_components(annotations, doc, function_words):
        members = [annotations[i] for i in comp]
        per_annotator = defaultdict(list)
        for ann in members:
            per_annotator[ann.annotator_id].append(ann)
        kept, spilled = [], []
        for annotator_id in sorted(per_annotator):
            own = per_annotator[annotator_id]
            if len(own) == 1:
                kept.append(own[0])
                continue
            other_tokens = set()
            for ann in members:
                if ann.annotator_id != annotator_id:
                    other_tokens |= norm_tokens(ann)
            scored = sorted(
                own,
                key=lambda a: (
                    -len(norm_tokens(a) & other_tokens),
                    a.span.start,
                    a.span.end,
                    a.category.value if a.category else "~",
                    a.half or "",
                    a.correction or "",
                ),
            )
            kept.append(scored[0])
            spilled.extend(scored[1:])
        result.add(frozenset(a.annotation_id for a in kept))
        for ann in spilled:
            result.add(frozenset([ann.annotation_id]))
    return result


def brute_force_gold_errors(sets, doc, function_words=DEFAULT_FUNCTION_WORDS):
    """Gold errors (as plain dicts) straight from the definitions."""
    from spangold.adjudication import apply_guideline_rules
    from spangold.model import normalize_span

    n = len(sets)
    annotations = []
    for aset in sorted(sets, key=lambda s: s.annotator_id):
        fixed, _ = apply_guideline_rules(aset, doc)
        annotations.extend(fixed.annotations)
    by_id = {a.annotation_id: a for a in annotations}

    errors = []
    for member_ids in brute_force_clusters(annotations, doc, function_words):
        members = [by_id[i] for i in member_ids]
        if 2 * len(members) <= n:
            continue
        labels = [m.category.value if m.category else "no_type" for m in members]
        counts = Counter(labels).most_common()
        if len(counts) > 1 and counts[0][1] == counts[1][1]:
            category, agreement = "no_majority", "split"
        else:
            winner = counts[0][0]
            category = "no_label" if winner == "no_type" else winner
            if len(members) == n and len(set(labels)) == 1:
                agreement = "all_agree"
            else:
                agreement = "majority"
        normalized = [normalize_span(m.span, doc, function_words) for m in members]
        from spangold.model import Span

        union = Span(
            doc_id=doc.doc_id,
            start=min(s.start for s in normalized),
            end=max(s.end for s in normalized),
        )
        canonical = normalize_span(union, doc, function_words)
        errors.append(
            {
                "start": canonical.start,
                "end": canonical.end,
                "category": category,
                "agreement": agreement,
                "miss_count": n - len(members),
                "provenance": sorted(member_ids),
            }
        )
    errors.sort(key=lambda e: (e["start"], e["end"], e["category"]))
    return errors


def fleiss_kappa_reference(tables):
    """Fleiss' kappa via statsmodels, as a cross-implementation check."""
    import numpy as np
    from statsmodels.stats.inter_rater import fleiss_kappa as sm_fleiss

    return float(sm_fleiss(np.asarray(tables), method="fleiss"))
