"""Documents, tokens, spans, error categories and raw annotations.

Everything in this module is immutable after construction and all
operations are pure functions, so instances can be shared freely across
worker processes or request handlers.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Optional


class ValidationError(ValueError):
    """A domain object violates one of its invariants."""


class SurfaceMismatchError(ValidationError):
    """A serialized span's redundant surface string disagrees with the document."""


# Determiners and prepositions stripped from the front of a span when
# normalizing.  Extendable through a lexicon config (see cli.load_lexicon).
DEFAULT_FUNCTION_WORDS = frozenset(
    {"the", "a", "an", "on", "at", "in", "against"}
)

WEEKDAYS = frozenset(
    {"monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"}
)

# A token like "102-91": two scores joined by a hyphen, kept as one token.
SCORE_PAIR_RE = re.compile(r"^\d+-\d+$")

# Punctuation split off the edges of whitespace-delimited chunks.  Interior
# hyphens are never split so score pairs and words like "out-scored" survive.
_LEADING_PUNCT = "([{\"'“‘"
_TRAILING_PUNCT = ".,!?;:)]}\"'”’"


class ErrorCategory(str, Enum):
    NUMBER = "number"
    NAME = "name"
    WORD = "word"
    CONTEXT = "context"
    NOT_CHECKABLE = "not_checkable"
    OTHER = "other"

    @classmethod
    def parse(cls, value: str) -> "ErrorCategory":
        key = value.strip().lower().replace(" ", "_").replace("-", "_")
        for cat in cls:
            if cat.value == key:
                return cat
        raise ValidationError(f"unknown error category: {value!r}")


@dataclass(frozen=True)
class Token:
    index: int
    char_start: int
    char_end: int
    surface: str

    def __post_init__(self):
        if self.char_start >= self.char_end:
            raise ValidationError(
                f"token {self.index}: char_start {self.char_start} >= char_end {self.char_end}"
            )

    def to_json(self) -> dict:
        return {
            "index": self.index,
            "char_start": self.char_start,
            "char_end": self.char_end,
            "surface": self.surface,
        }

    @classmethod
    def from_json(cls, data: dict) -> "Token":
        return cls(
            index=data["index"],
            char_start=data["char_start"],
            char_end=data["char_end"],
            surface=data["surface"],
        )


@dataclass(frozen=True)
class Document:
    doc_id: str
    system_id: str
    text: str
    tokens: tuple[Token, ...]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.doc_id:
            raise ValidationError("doc_id must be non-empty")
        object.__setattr__(self, "tokens", tuple(self.tokens))
        prev_end = 0
        for i, tok in enumerate(self.tokens):
            if tok.index != i:
                raise ValidationError(
                    f"{self.doc_id}: token at position {i} carries index {tok.index}"
                )
            if tok.char_start < prev_end:
                raise ValidationError(
                    f"{self.doc_id}: token {tok.index} overlaps or precedes previous token"
                )
            if self.text[tok.char_start : tok.char_end] != tok.surface:
                raise SurfaceMismatchError(
                    f"{self.doc_id}: token {tok.index} surface {tok.surface!r} does not "
                    f"match text[{tok.char_start}:{tok.char_end}]"
                )
            prev_end = tok.char_end
        # Tokens must tile exactly the non-whitespace content of the text.
        covered = bytearray(len(self.text))
        for tok in self.tokens:
            for i in range(tok.char_start, tok.char_end):
                covered[i] = 1
        for i, ch in enumerate(self.text):
            if not covered[i] and not ch.isspace():
                raise ValidationError(
                    f"{self.doc_id}: non-whitespace char {ch!r} at {i} not covered by any token"
                )
            if covered[i] and ch.isspace():
                # Tokens never contain whitespace; enforced here because the
                # reconstruction property depends on it.
                raise ValidationError(
                    f"{self.doc_id}: whitespace at {i} covered by a token"
                )

    def span_surface(self, span: "Span") -> str:
        validate_span(span, self)
        return self.text[
            self.tokens[span.start].char_start : self.tokens[span.end - 1].char_end
        ]

    def to_json(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "system_id": self.system_id,
            "text": self.text,
            "tokens": [t.to_json() for t in self.tokens],
            "metadata": dict(self.metadata),
        }

    @classmethod
    def from_json(cls, data: dict) -> "Document":
        text = data["text"]
        raw_tokens = data.get("tokens")
        if raw_tokens:
            tokens = tuple(Token.from_json(t) for t in raw_tokens)
        else:
            tokens = tuple(tokenize(text))
        return cls(
            doc_id=data["doc_id"],
            system_id=data.get("system_id", ""),
            text=text,
            tokens=tokens,
            metadata=dict(data.get("metadata", {})),
        )


@dataclass(frozen=True, order=True)
class Span:
    doc_id: str
    start: int
    end: int

    def __post_init__(self):
        if self.start < 0 or self.start >= self.end:
            raise ValidationError(
                f"span [{self.start},{self.end}) in {self.doc_id}: need 0 <= start < end"
            )

    def token_indices(self) -> range:
        return range(self.start, self.end)

    def to_json(self, doc: Optional[Document] = None) -> dict:
        data = {"doc_id": self.doc_id, "start": self.start, "end": self.end}
        if doc is not None:
            data["surface"] = doc.span_surface(self)
        return data

    @classmethod
    def from_json(cls, data: dict, doc: Optional[Document] = None) -> "Span":
        span = cls(doc_id=data["doc_id"], start=data["start"], end=data["end"])
        if doc is not None:
            validate_span(span, doc)
            surface = data.get("surface")
            if surface is not None and surface != doc.span_surface(span):
                raise SurfaceMismatchError(
                    f"{span.doc_id}: span [{span.start},{span.end}) surface {surface!r} "
                    f"does not match document text {doc.span_surface(span)!r}"
                )
        return span


# Half markers used when a single score-pair token carries two number errors.
HALF_FIRST = "first"
HALF_SECOND = "second"


@dataclass(frozen=True)
class ErrorAnnotation:
    annotator_id: str
    span: Span
    category: Optional[ErrorCategory] = None
    correction: Optional[str] = None
    explanation: Optional[str] = None
    # Set only by the score-pair guideline rule (or by a loader for spans that
    # mark one half of a score token); distinguishes the two halves.
    half: Optional[str] = None

    @property
    def annotation_id(self) -> str:
        cat = self.category.value if self.category else "untyped"
        suffix = f":{self.half}" if self.half else ""
        return f"{self.annotator_id}:{self.span.start}-{self.span.end}:{cat}{suffix}"

    def key(self) -> tuple:
        return (self.span.start, self.span.end, self.category, self.half)

    def to_json(self, doc: Optional[Document] = None) -> dict:
        data = {
            "annotator_id": self.annotator_id,
            "span": self.span.to_json(doc),
            "category": self.category.value if self.category else None,
            "correction": self.correction,
            "explanation": self.explanation,
        }
        if self.half is not None:
            data["half"] = self.half
        return data

    @classmethod
    def from_json(cls, data: dict, doc: Optional[Document] = None) -> "ErrorAnnotation":
        raw_cat = data.get("category")
        return cls(
            annotator_id=data["annotator_id"],
            span=Span.from_json(data["span"], doc),
            category=ErrorCategory.parse(raw_cat) if raw_cat else None,
            correction=data.get("correction"),
            explanation=data.get("explanation"),
            half=data.get("half"),
        )


STATUS_QUALIFICATION = "qualification"
STATUS_MAIN = "main"


@dataclass(frozen=True)
class AnnotationSet:
    doc_id: str
    annotator_id: str
    annotations: tuple[ErrorAnnotation, ...]
    status: str = STATUS_MAIN

    def __post_init__(self):
        object.__setattr__(self, "annotations", tuple(self.annotations))
        if self.status not in (STATUS_QUALIFICATION, STATUS_MAIN):
            raise ValidationError(f"unknown status {self.status!r}")
        seen = set()
        for ann in self.annotations:
            if ann.span.doc_id != self.doc_id:
                raise ValidationError(
                    f"annotation span references {ann.span.doc_id!r}, set is for {self.doc_id!r}"
                )
            if ann.annotator_id != self.annotator_id:
                raise ValidationError(
                    f"annotation by {ann.annotator_id!r} inside set of {self.annotator_id!r}"
                )
            key = ann.key()
            if key in seen:
                raise ValidationError(
                    f"{self.doc_id}/{self.annotator_id}: duplicate annotation "
                    f"span [{key[0]},{key[1]}) category {key[2]}"
                )
            seen.add(key)

    def to_json(self, doc: Optional[Document] = None) -> dict:
        return {
            "doc_id": self.doc_id,
            "annotator_id": self.annotator_id,
            "status": self.status,
            "annotations": [a.to_json(doc) for a in self.annotations],
        }

    @classmethod
    def from_json(cls, data: dict, doc: Optional[Document] = None) -> "AnnotationSet":
        return cls(
            doc_id=data["doc_id"],
            annotator_id=data["annotator_id"],
            status=data.get("status", STATUS_MAIN),
            annotations=tuple(
                ErrorAnnotation.from_json(a, doc) for a in data.get("annotations", [])
            ),
        )


def tokenize(text: str) -> list[Token]:
    """Split text into word tokens with character offsets.

    Whitespace separates chunks; terminal punctuation, commas and brackets
    are peeled off the edges of each chunk as their own tokens.  Interior
    hyphens are preserved, so "102-91" stays one token.  The original text is
    exactly the tokens plus the original whitespace between them.
    """
    pieces: list[tuple[int, str]] = []
    for m in re.finditer(r"\S+", text):
        start, chunk = m.start(), m.group()
        # Peel leading punctuation one character at a time.
        while len(chunk) > 1 and chunk[0] in _LEADING_PUNCT:
            pieces.append((start, chunk[0]))
            start += 1
            chunk = chunk[1:]
        trailing: list[tuple[int, str]] = []
        while len(chunk) > 1 and chunk[-1] in _TRAILING_PUNCT:
            trailing.append((start + len(chunk) - 1, chunk[-1]))
            chunk = chunk[:-1]
        pieces.append((start, chunk))
        pieces.extend(reversed(trailing))
    return [
        Token(index=i, char_start=s, char_end=s + len(t), surface=t)
        for i, (s, t) in enumerate(pieces)
    ]


def validate_span(span: Span, doc: Document) -> None:
    if span.doc_id != doc.doc_id:
        raise ValidationError(
            f"span references {span.doc_id!r} but document is {doc.doc_id!r}"
        )
    if span.end > len(doc.tokens):
        raise ValidationError(
            f"{doc.doc_id}: span [{span.start},{span.end}) out of range for "
            f"{len(doc.tokens)} tokens"
        )


def _is_pure_punctuation(surface: str) -> bool:
    return bool(surface) and not any(ch.isalnum() for ch in surface)


def normalize_span(
    span: Span,
    doc: Document,
    function_words: Iterable[str] = DEFAULT_FUNCTION_WORDS,
) -> Span:
    """Strip leading function words and trailing punctuation-only tokens.

    Annotators differ in how much they highlight for the same underlying
    error ("the Boston Celtics" vs "Boston Celtics"); stripping a fixed list
    of determiners and prepositions makes such spans comparable.  Never
    returns an empty span: if stripping would remove everything, the span is
    returned unchanged.
    """
    validate_span(span, doc)
    words = frozenset(w.lower() for w in function_words)
    start, end = span.start, span.end
    while start < end and doc.tokens[start].surface.lower() in words:
        start += 1
    while end > start and _is_pure_punctuation(doc.tokens[end - 1].surface):
        end -= 1
    if start >= end:
        return span
    if (start, end) == (span.start, span.end):
        return span
    return replace(span, start=start, end=end)


def spans_corefer(
    a: Span,
    b: Span,
    doc: Document,
    function_words: Iterable[str] = DEFAULT_FUNCTION_WORDS,
) -> bool:
    """True when the two spans describe the same location after normalization.

    Symmetric and reflexive; not transitive (clustering deals with chains).
    """
    if a.doc_id != b.doc_id:
        raise ValidationError(
            f"cannot compare spans from different documents: {a.doc_id!r} vs {b.doc_id!r}"
        )
    na = normalize_span(a, doc, function_words)
    nb = normalize_span(b, doc, function_words)
    return na.start < nb.end and nb.start < na.end
