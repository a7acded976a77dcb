"""Score an automated accuracy metric's claimed errors against the gold standard.

The metric is consumed purely as data: a report file listing claimed errors,
each located either by a token span or by an (entity, attribute, value)
tuple.  No information extraction runs here.
"""

from __future__ import annotations

import csv
import io
import json
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Optional

from .adjudication import GoldError, GoldStandard
from .model import (
    Document,
    ErrorCategory,
    Span,
    ValidationError,
    normalize_span,
    spans_corefer,
)
from .stats import CATEGORY_LABELS

DEFAULT_ENTITY_WINDOW = 10


@dataclass(frozen=True)
class MetricError:
    doc_id: str
    category: ErrorCategory
    span: Optional[Span] = None
    entity: Optional[str] = None
    attribute: Optional[str] = None
    claimed_value: Optional[str] = None
    expected_value: Optional[str] = None

    def __post_init__(self):
        has_span = self.span is not None
        has_tuple = self.entity is not None
        if has_span == has_tuple:
            raise ValidationError(
                "metric error needs exactly one locator: a span or an entity tuple"
            )

    def to_json(self, doc: Optional[Document] = None) -> dict:
        data: dict = {"doc_id": self.doc_id, "category": self.category.value}
        if self.span is not None:
            data["span"] = self.span.to_json(doc)
        else:
            data["entity"] = self.entity
            data["attribute"] = self.attribute
            data["claimed_value"] = self.claimed_value
        if self.expected_value is not None:
            data["expected_value"] = self.expected_value
        return data

    @classmethod
    def from_json(cls, data: dict, doc: Optional[Document] = None) -> "MetricError":
        span = Span.from_json(data["span"], doc) if data.get("span") else None
        return cls(
            doc_id=data["doc_id"],
            category=ErrorCategory.parse(data["category"]),
            span=span,
            entity=data.get("entity"),
            attribute=data.get("attribute"),
            claimed_value=data.get("claimed_value"),
            expected_value=data.get("expected_value"),
        )


@dataclass(frozen=True)
class MetricReport:
    metric_name: str
    errors: tuple[MetricError, ...]
    # Documents the metric actually processed; None means all of them.
    covered_docs: Optional[tuple[str, ...]] = None

    def to_json(self) -> dict:
        return {
            "metric_name": self.metric_name,
            "errors": [e.to_json() for e in self.errors],
            "covered_docs": list(self.covered_docs) if self.covered_docs else None,
        }

    @classmethod
    def from_json(cls, data: dict) -> tuple["MetricReport", list[str]]:
        """Parse a report, rejecting malformed records instead of failing."""
        rejected: list[str] = []
        errors = []
        for i, raw in enumerate(data.get("errors", [])):
            try:
                errors.append(MetricError.from_json(raw))
            except (ValidationError, KeyError, TypeError) as exc:
                rejected.append(f"record {i}: {exc}")
        covered = data.get("covered_docs")
        report = cls(
            metric_name=data.get("metric_name", "metric"),
            errors=tuple(errors),
            covered_docs=tuple(covered) if covered else None,
        )
        return report, rejected


@dataclass
class CategoryScore:
    gold_total: int = 0
    metric_total: int = 0
    matched_gold: int = 0
    matched_metric: int = 0

    @property
    def applicable(self) -> bool:
        return self.metric_total > 0

    @property
    def recall(self) -> Optional[float]:
        if self.gold_total == 0:
            return None
        return self.matched_gold / self.gold_total

    @property
    def precision(self) -> Optional[float]:
        if self.metric_total == 0:
            return None
        return self.matched_metric / self.metric_total

    def to_json(self) -> dict:
        return {
            "gold_total": self.gold_total,
            "metric_total": self.metric_total,
            "matched_gold": self.matched_gold,
            "matched_metric": self.matched_metric,
            "recall": self.recall,
            "precision": self.precision,
            "applicable": self.applicable,
        }


@dataclass
class ValidationResult:
    metric_name: str
    per_category: dict[str, CategoryScore]
    matched: list[dict] = field(default_factory=list)
    unmatched_gold: list[str] = field(default_factory=list)
    spurious_metric: list[str] = field(default_factory=list)
    log: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "metric_name": self.metric_name,
            "per_category": {k: v.to_json() for k, v in self.per_category.items()},
            "matched": self.matched,
            "unmatched_gold": self.unmatched_gold,
            "spurious_metric": self.spurious_metric,
            "log": self.log,
        }


def _gold_error_id(doc_id: str, err: GoldError) -> str:
    return f"{doc_id}:{err.canonical_span.start}-{err.canonical_span.end}:{err.category}"


def _metric_error_id(index: int, err: MetricError) -> str:
    if err.span is not None:
        locator = f"span[{err.span.start},{err.span.end})"
    else:
        locator = f"entity={err.entity!r}/{err.attribute or '?'}"
    return f"m{index}:{err.doc_id}:{err.category.value}:{locator}"


def _entity_occurrences(entity: str, doc: Document) -> list[tuple[int, int]]:
    """Token ranges whose surfaces spell out the entity, case-insensitively."""
    words = entity.split()
    if not words:
        return []
    lowered = [w.lower() for w in words]
    surfaces = [t.surface.lower() for t in doc.tokens]
    hits = []
    for start in range(len(surfaces) - len(words) + 1):
        if surfaces[start : start + len(words)] == lowered:
            hits.append((start, start + len(words)))
    return hits


def _range_distance(a: tuple[int, int], b: tuple[int, int]) -> int:
    if a[1] <= b[0]:
        return b[0] - a[1]
    if b[1] <= a[0]:
        return a[0] - b[1]
    return 0


def _match_distance(
    metric_err: MetricError,
    gold_err: GoldError,
    doc: Document,
    window: int,
) -> Optional[int]:
    """Token distance when the locators line up, else None."""
    gold_span = gold_err.canonical_span
    if metric_err.span is not None:
        if spans_corefer(metric_err.span, gold_span, doc):
            norm = normalize_span(metric_err.span, doc)
            return _range_distance(
                (norm.start, norm.end), (gold_span.start, gold_span.end)
            )
        return None
    best: Optional[int] = None
    for occ in _entity_occurrences(metric_err.entity, doc):
        dist = _range_distance(occ, (gold_span.start, gold_span.end))
        if dist <= window and (best is None or dist < best):
            best = dist
    return best


def _normalized_surface(text: str) -> str:
    return " ".join(text.lower().split())


def optimal_match_count(compat: list[list[int]], n_metric: int) -> int:
    """Exhaustive maximum matching size on the gold-by-metric candidate graph.

    Exponential search; only used as a bound check for small documents.
    """
    n_gold = len(compat)

    def best(i: int, used: int) -> int:
        if i == n_gold:
            return 0
        top = best(i + 1, used)
        for j in compat[i]:
            if not used & (1 << j):
                top = max(top, 1 + best(i + 1, used | (1 << j)))
        return top

    return best(0, 0)


BOUND_CHECK_LIMIT = 8


def align_metric_errors(
    report: MetricReport,
    golds: list[GoldStandard],
    docs: list[Document],
    window: int = DEFAULT_ENTITY_WINDOW,
) -> ValidationResult:
    """Greedily align metric errors to gold errors and score recall/precision.

    A claimed error matches a gold error when the categories agree and either
    the spans corefer or the claimed entity occurs within ``window`` tokens
    of the gold span.  Gold errors are processed in document order; ties go
    to the closest claim.  Afterwards, at least two unmatched number claims
    naming the same entity as an unmatched gold name error collectively match
    it: a metric that reports a wrong row of statistics is credited with
    finding the name error behind it.
    """
    doc_index = {d.doc_id: d for d in docs}
    gold_index = {g.doc_id: g for g in golds}
    for gold in golds:
        if gold.doc_id not in doc_index:
            raise ValidationError(f"gold standard for unknown document {gold.doc_id!r}")
    covered = (
        set(report.covered_docs) if report.covered_docs is not None else set(gold_index)
    )
    unknown = sorted({e.doc_id for e in report.errors} - set(doc_index))
    if unknown:
        raise ValidationError(f"metric errors reference unknown documents: {unknown}")

    result = ValidationResult(
        metric_name=report.metric_name,
        per_category={label: CategoryScore() for label in CATEGORY_LABELS},
    )

    metric_by_doc: dict[str, list[tuple[int, MetricError]]] = defaultdict(list)
    for i, err in enumerate(report.errors):
        metric_by_doc[err.doc_id].append((i, err))
        result.per_category[err.category.value].metric_total += 1

    matched_metric: set[int] = set()
    matched_gold: set[str] = set()

    for doc_id in sorted(gold_index):
        if doc_id not in covered:
            continue
        doc = doc_index[doc_id]
        gold = gold_index[doc_id]
        claims = metric_by_doc.get(doc_id, [])

        for err in gold.errors:
            if err.category in CATEGORY_LABELS:
                result.per_category[err.category].gold_total += 1

        # Greedy pass, gold errors in span order.
        compat_for_bound: list[list[int]] = []
        local_metric_ids = [i for i, _ in claims]
        for err in gold.errors:
            gid = _gold_error_id(doc_id, err)
            candidates = []
            compat_row = []
            for pos, (i, claim) in enumerate(claims):
                if claim.category.value != err.category:
                    dist = _match_distance(claim, err, doc, window)
                    if dist is not None:
                        result.log.append(
                            f"category conflict at {gid}: metric claimed "
                            f"{claim.category.value}; counted as unmatched"
                        )
                    continue
                dist = _match_distance(claim, err, doc, window)
                if dist is None:
                    continue
                compat_row.append(pos)
                if i not in matched_metric:
                    candidates.append((dist, pos, i))
            compat_for_bound.append(compat_row)
            if candidates:
                dist, _, winner = min(candidates)
                matched_metric.add(winner)
                matched_gold.add(gid)
                result.matched.append(
                    {
                        "gold": gid,
                        "metric": [_metric_error_id(winner, report.errors[winner])],
                        "kind": "direct",
                        "distance": dist,
                    }
                )
                if err.category in CATEGORY_LABELS:
                    result.per_category[err.category].matched_gold += 1
                cat = report.errors[winner].category.value
                result.per_category[cat].matched_metric += 1

        # Equivalence pass: several number claims about one mis-named entity.
        for err in gold.errors:
            gid = _gold_error_id(doc_id, err)
            if gid in matched_gold or err.category != ErrorCategory.NAME.value:
                continue
            surface = _normalized_surface(doc.span_surface(err.canonical_span))
            group = [
                i
                for i, claim in claims
                if i not in matched_metric
                and claim.category == ErrorCategory.NUMBER
                and claim.entity is not None
                and _normalized_surface(claim.entity) == surface
            ]
            if len(group) >= 2:
                matched_gold.add(gid)
                matched_metric.update(group)
                result.matched.append(
                    {
                        "gold": gid,
                        "metric": [
                            _metric_error_id(i, report.errors[i]) for i in group
                        ],
                        "kind": "equivalence",
                        "distance": 0,
                    }
                )
                result.per_category[ErrorCategory.NAME.value].matched_gold += 1
                result.per_category[ErrorCategory.NUMBER.value].matched_metric += len(
                    group
                )
                result.log.append(
                    f"equivalence adjustment: {len(group)} number claims about "
                    f"{surface!r} matched name error {gid}"
                )

        # Bound check: greedy direct matching should not lose to the optimum
        # on small documents.
        if (
            len(gold.errors) <= BOUND_CHECK_LIMIT
            and len(claims) <= BOUND_CHECK_LIMIT
            and gold.errors
        ):
            greedy_direct = sum(
                1
                for m in result.matched
                if m["kind"] == "direct" and m["gold"].startswith(f"{doc_id}:")
            )
            optimal = optimal_match_count(compat_for_bound, len(local_metric_ids))
            if optimal != greedy_direct:
                result.log.append(
                    f"greedy bound check: {doc_id} greedy matched "
                    f"{greedy_direct}, optimum is {optimal}; greedy count stands"
                )

        for err in gold.errors:
            gid = _gold_error_id(doc_id, err)
            if gid not in matched_gold:
                result.unmatched_gold.append(gid)

    for i, err in enumerate(report.errors):
        if err.doc_id in covered and i not in matched_metric:
            result.spurious_metric.append(_metric_error_id(i, err))

    return result


def summarize_validation(result: ValidationResult, fmt: str = "text") -> str:
    """Render per-category recall/precision; "---" marks categories the
    metric never reported."""
    if fmt == "json":
        return json.dumps(result.to_json(), indent=2, sort_keys=True) + "\n"

    def cell(value: Optional[float], applicable: bool) -> str:
        if not applicable or value is None:
            return "---"
        return f"{value:.3f}"

    rows = []
    for measure in ("recall", "precision"):
        row = [measure]
        for label in CATEGORY_LABELS:
            score = result.per_category[label]
            row.append(cell(getattr(score, measure), score.applicable))
        rows.append(row)

    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["measurement"] + CATEGORY_LABELS)
        for row in rows:
            writer.writerow(row)
        return buf.getvalue()

    headers = ["measurement"] + [c.replace("_", " ") for c in CATEGORY_LABELS]
    table = [headers] + rows
    widths = [max(len(r[i]) for r in table) for i in range(len(headers))]
    return "\n".join(
        "  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in table
    )


def report_from_tuple_rows(metric_name: str, rows: list[dict]) -> MetricReport:
    """Adapter from relation-extraction style tuple output.

    Each row needs doc_id, a type mapping onto number/name, the entity the
    tuple is about, its attribute, and the claimed (wrong) value, e.g.::

        {"doc_id": "g1", "type": "number", "entity": "Lou Williams",
         "attribute": "points", "claimed": "30", "expected": "14"}
    """
    errors = []
    for row in rows:
        errors.append(
            MetricError(
                doc_id=row["doc_id"],
                category=ErrorCategory.parse(row["type"]),
                entity=row["entity"],
                attribute=row.get("attribute"),
                claimed_value=str(row.get("claimed", "")) or None,
                expected_value=(
                    str(row["expected"]) if row.get("expected") is not None else None
                ),
            )
        )
    return MetricReport(metric_name=metric_name, errors=tuple(errors))
