"""spangold: adjudicate span-level accuracy-error annotations into a gold standard.

Pipeline: load a corpus of generated texts plus several annotators' error
markups, enforce the annotation guidelines, cluster matching spans, majority-
vote a gold standard, then measure agreement, per-system error profiles, and
how well an automated metric recovers the gold errors.
"""

from .model import (
    AnnotationSet,
    Document,
    ErrorAnnotation,
    ErrorCategory,
    Span,
    Token,
    ValidationError,
    normalize_span,
    spans_corefer,
    tokenize,
)
from .adjudication import (
    ErrorCluster,
    GoldError,
    GoldStandard,
    adjudicate,
    adjudicate_corpus,
    adjudicate_document,
    apply_guideline_rules,
    cluster_annotations,
)
from .stats import (
    AgreementReport,
    ConfusionMatrix,
    ErrorProfile,
    confusion_matrix,
    error_profile,
    fleiss_kappa,
)
from .metric_validation import (
    MetricError,
    MetricReport,
    ValidationResult,
    align_metric_errors,
    summarize_validation,
)
from .qualification import QualificationResult, score_qualification

__version__ = "0.1.0"

__all__ = [
    "AnnotationSet",
    "AgreementReport",
    "ConfusionMatrix",
    "Document",
    "ErrorAnnotation",
    "ErrorCategory",
    "ErrorCluster",
    "ErrorProfile",
    "GoldError",
    "GoldStandard",
    "MetricError",
    "MetricReport",
    "QualificationResult",
    "Span",
    "Token",
    "ValidationError",
    "ValidationResult",
    "adjudicate",
    "adjudicate_corpus",
    "adjudicate_document",
    "align_metric_errors",
    "apply_guideline_rules",
    "cluster_annotations",
    "confusion_matrix",
    "error_profile",
    "fleiss_kappa",
    "normalize_span",
    "score_qualification",
    "spans_corefer",
    "summarize_validation",
    "tokenize",
]
