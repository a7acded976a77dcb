"""Agreement and reporting statistics over clusters and gold standards."""

from __future__ import annotations

import csv
import io
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .adjudication import (
    AGREEMENT_ALL,
    NO_LABEL,
    NO_MAJORITY,
    ErrorCluster,
    GoldStandard,
    plurality,
)
from .model import Document, ErrorCategory, ValidationError

CATEGORY_LABELS = [c.value for c in ErrorCategory]
LABEL_NO_TYPE = "no_type"
LABEL_NO_ERROR = "no_error"

# Which clusters count as items and which labels are in play.
#   all:    every gold-entering cluster; misses vote "no_error",
#           untyped markings vote "no_type".
#   marked: only clusters every annotator marked; "no_type" still possible.
#   typed:  only clusters every annotator marked with a category;
#           labels are the six categories alone.
KAPPA_MODE_ALL = "all"
KAPPA_MODE_MARKED = "marked"
KAPPA_MODE_TYPED = "typed"
KAPPA_MODES = (KAPPA_MODE_ALL, KAPPA_MODE_MARKED, KAPPA_MODE_TYPED)


@dataclass(frozen=True)
class AgreementReport:
    kappa: float
    n_items: int
    n_raters: int
    category_marginals: dict[str, float]
    mode: str = KAPPA_MODE_ALL
    degenerate: bool = False

    def to_json(self) -> dict:
        return {
            "kappa": self.kappa,
            "n_items": self.n_items,
            "n_raters": self.n_raters,
            "category_marginals": dict(self.category_marginals),
            "mode": self.mode,
            "degenerate": self.degenerate,
        }


def fleiss_kappa_from_counts(
    items: list[Counter], n_raters: int, mode: str = KAPPA_MODE_ALL
) -> AgreementReport:
    """Fleiss' kappa over per-item label counts.

    Each Counter maps label -> number of raters choosing it; every item must
    carry exactly ``n_raters`` votes.  Per-item agreement is
    ``(sum_j n_ij^2 - n) / (n (n - 1))``; chance agreement is the sum of the
    squared label marginals.
    """
    if n_raters < 2:
        raise ValidationError("Fleiss' kappa needs at least 2 raters")
    if not items:
        raise ValidationError("Fleiss' kappa needs at least 1 item")
    n = n_raters
    votes: Counter = Counter()
    p_bar = 0.0
    for counts in items:
        total = sum(counts.values())
        if total != n:
            raise ValidationError(
                f"item has {total} votes, expected {n}: {dict(counts)}"
            )
        votes.update(counts)
        p_bar += (sum(v * v for v in counts.values()) - n) / (n * (n - 1))
    p_bar /= len(items)
    grand_total = sum(votes.values())
    marginals = {label: count / grand_total for label, count in sorted(votes.items())}
    p_e = sum(p * p for p in marginals.values())
    if p_e >= 1.0:
        # Single category used unanimously everywhere: agreement is perfect
        # but the chance-correction denominator vanishes.
        return AgreementReport(
            kappa=1.0,
            n_items=len(items),
            n_raters=n,
            category_marginals=marginals,
            mode=mode,
            degenerate=True,
        )
    kappa = (p_bar - p_e) / (1.0 - p_e)
    return AgreementReport(
        kappa=kappa,
        n_items=len(items),
        n_raters=n,
        category_marginals=marginals,
        mode=mode,
    )


def _cluster_vote_counts(cluster: ErrorCluster) -> Counter:
    counts = Counter(cluster.member_labels())
    misses = cluster.n_annotators - len(cluster.members)
    if misses:
        counts[LABEL_NO_ERROR] += misses
    return counts


def kappa_items(
    clusters: list[ErrorCluster], mode: str = KAPPA_MODE_ALL
) -> list[Counter]:
    """Select the item universe for one kappa mode (gold-entering clusters)."""
    if mode not in KAPPA_MODES:
        raise ValidationError(f"unknown kappa mode {mode!r}; pick one of {KAPPA_MODES}")
    items = []
    for cluster in clusters:
        if not cluster.enters_gold():
            continue
        counts = _cluster_vote_counts(cluster)
        if mode in (KAPPA_MODE_MARKED, KAPPA_MODE_TYPED) and counts[LABEL_NO_ERROR]:
            continue
        if mode == KAPPA_MODE_TYPED and counts[LABEL_NO_TYPE]:
            continue
        items.append(counts)
    return items


def fleiss_kappa(
    clusters: list[ErrorCluster], mode: str = KAPPA_MODE_ALL
) -> AgreementReport:
    """Inter-annotator agreement on error categories over adjudicated clusters."""
    n_values = {c.n_annotators for c in clusters}
    if len(n_values) > 1:
        raise ValidationError(f"inconsistent annotator counts: {sorted(n_values)}")
    n = n_values.pop() if n_values else 0
    return fleiss_kappa_from_counts(kappa_items(clusters, mode), n, mode)


# Confusion matrix rows: the majority outcome of a cluster.
ROW_ORDER = CATEGORY_LABELS + ["split", NO_LABEL, LABEL_NO_ERROR]
# Columns: one per minority choice, after the two count columns.
COLUMN_ORDER = ["total", "all_agree"] + CATEGORY_LABELS + [LABEL_NO_TYPE, LABEL_NO_ERROR]


@dataclass
class ConfusionMatrix:
    rows: dict[str, Counter] = field(
        default_factory=lambda: {row: Counter() for row in ROW_ORDER}
    )

    def cell(self, row: str, column: str) -> int:
        return self.rows[row][column]

    def total_clusters(self) -> int:
        return sum(r["total"] for r in self.rows.values())

    def to_json(self) -> dict:
        return {
            row: {col: counts[col] for col in COLUMN_ORDER if counts[col]}
            for row, counts in self.rows.items()
        }

    def render_text(self) -> str:
        headers = ["error type"] + COLUMN_ORDER
        table = [headers]
        for row in ROW_ORDER:
            counts = self.rows[row]
            cells = [row.replace("_", " ")]
            for col in COLUMN_ORDER:
                if col == row:
                    cells.append("-")
                else:
                    cells.append(str(counts[col]))
            table.append(cells)
        widths = [max(len(r[i]) for r in table) for i in range(len(headers))]
        lines = []
        for r in table:
            cells = [r[0].ljust(widths[0])] + [
                cell.rjust(w) for cell, w in zip(r[1:], widths[1:])
            ]
            lines.append("  ".join(cells).rstrip())
        return "\n".join(lines)

    def render_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["error_type"] + COLUMN_ORDER)
        for row in ROW_ORDER:
            counts = self.rows[row]
            writer.writerow([row] + [counts[col] for col in COLUMN_ORDER])
        return buf.getvalue()


def confusion_matrix(clusters: list[ErrorCluster]) -> ConfusionMatrix:
    """Majority category vs minority choices over gold-entering clusters.

    The row is the cluster's majority outcome ("split" when no category wins
    a plurality).  Each annotator whose choice differs from the majority
    increments the column of their choice; annotators who did not mark the
    cluster increment the no-error column.  Guideline rules must already
    have been applied upstream.
    """
    matrix = ConfusionMatrix()
    for cluster in clusters:
        if not cluster.enters_gold():
            continue
        labels = cluster.member_labels()
        misses = cluster.n_annotators - len(cluster.members)
        winner = plurality(labels)
        if winner is None:
            row = "split"
            minority = list(labels)
        else:
            row = NO_LABEL if winner == LABEL_NO_TYPE else winner
            minority = [label for label in labels if label != winner]
        counts = matrix.rows[row]
        counts["total"] += 1
        if winner is not None and not minority and misses == 0:
            counts["all_agree"] += 1
        for label in minority:
            counts[label] += 1
        if misses:
            counts[LABEL_NO_ERROR] += misses
    return matrix


@dataclass(frozen=True)
class ErrorProfile:
    system_id: str
    stories: int
    mean_total: float
    mean_by_category: dict[str, float]
    mean_no_majority: float

    def to_json(self) -> dict:
        return {
            "system_id": self.system_id,
            "stories": self.stories,
            "mean_total": self.mean_total,
            "mean_by_category": dict(self.mean_by_category),
            "mean_no_majority": self.mean_no_majority,
        }


def error_profile(
    golds: list[GoldStandard], docs: list[Document]
) -> list[ErrorProfile]:
    """Average per-story error counts grouped by the generating system.

    The per-category means cover the six categories; clusters with no
    majority category contribute to the total only.
    """
    doc_index = {d.doc_id: d for d in docs}
    groups: dict[str, list[GoldStandard]] = defaultdict(list)
    for gold in golds:
        doc = doc_index.get(gold.doc_id)
        if doc is None:
            raise ValidationError(f"gold standard for unknown document {gold.doc_id!r}")
        groups[doc.system_id].append(gold)
    profiles = []
    for system_id in sorted(groups):
        members = groups[system_id]
        stories = len(members)
        counts: Counter = Counter()
        for gold in members:
            counts.update(gold.category_counts())
        total = sum(counts.values())
        profiles.append(
            ErrorProfile(
                system_id=system_id,
                stories=stories,
                mean_total=total / stories,
                mean_by_category={
                    label: counts[label] / stories for label in CATEGORY_LABELS
                },
                mean_no_majority=(counts[NO_MAJORITY] + counts[NO_LABEL]) / stories,
            )
        )
    return profiles


def render_profiles_text(profiles: list[ErrorProfile]) -> str:
    headers = ["system", "total"] + [c.replace("_", " ") for c in CATEGORY_LABELS]
    table = [headers]
    for p in profiles:
        table.append(
            [p.system_id, f"{p.mean_total:.1f}"]
            + [f"{p.mean_by_category[c]:.1f}" for c in CATEGORY_LABELS]
        )
    widths = [max(len(r[i]) for r in table) for i in range(len(headers))]
    lines = []
    for r in table:
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip())
    return "\n".join(lines)


def render_profiles_csv(profiles: list[ErrorProfile]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["system", "stories", "total"] + CATEGORY_LABELS + [NO_MAJORITY])
    for p in profiles:
        writer.writerow(
            [p.system_id, p.stories, f"{p.mean_total:.4f}"]
            + [f"{p.mean_by_category[c]:.4f}" for c in CATEGORY_LABELS]
            + [f"{p.mean_no_majority:.4f}"]
        )
    return buf.getvalue()
