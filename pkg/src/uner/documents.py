"""Shared document model: tokenized text plus flat labeled spans.

Character offsets are Unicode code points, end-exclusive. Spans address
tokens; their character range derives from the first and last covered token.
Span sets are flat: no two spans of a document may share a token.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable

from .errors import OverlappingSpans
from .taxonomy import TagPath, Taxonomy


@dataclass(frozen=True)
class Token:
    index: int
    start: int
    end: int


@dataclass(frozen=True)
class EntitySpan:
    token_start: int
    token_end: int  # exclusive
    label: str  # canonical dotted path
    source: str = ""
    confidence: float | None = None
    span_id: str = ""

    def key(self) -> tuple[int, int, str]:
        """Identity used for round-trips and scoring: boundaries plus label."""
        return (self.token_start, self.token_end, self.label)


@dataclass
class AnnotatedDocument:
    doc_id: str
    lang: str
    text: str
    tokens: list[Token]
    spans: list[EntitySpan] = field(default_factory=list)

    def char_range(self, span: EntitySpan) -> tuple[int, int]:
        return (self.tokens[span.token_start].start, self.tokens[span.token_end - 1].end)

    def surface(self, span: EntitySpan) -> str:
        start, end = self.char_range(span)
        return self.text[start:end]

    def token_surface(self, token: Token) -> str:
        return self.text[token.start:token.end]

    def span_keys(self) -> set[tuple[int, int, str]]:
        return {s.key() for s in self.spans}

    def with_spans(self, spans: Iterable[EntitySpan]) -> "AnnotatedDocument":
        return AnnotatedDocument(self.doc_id, self.lang, self.text, self.tokens, list(spans))


@dataclass(frozen=True)
class Violation:
    code: str
    where: str
    message: str

    def __str__(self) -> str:
        return f"{self.code} at {self.where}: {self.message}"


def assign_span_ids(doc: AnnotatedDocument, prefix: str = "s") -> AnnotatedDocument:
    """Give every span without an id a sequential one; existing ids survive."""
    spans = []
    for k, span in enumerate(doc.spans):
        spans.append(span if span.span_id else replace(span, span_id=f"{prefix}{k}"))
    return doc.with_spans(spans)


def validate(doc: AnnotatedDocument, taxonomy: Taxonomy | None = None) -> list[Violation]:
    """Collect every invariant violation of a document; empty list means valid.

    When a taxonomy is supplied, span labels must resolve in it.
    """
    out: list[Violation] = []
    n_chars = len(doc.text)

    for pos, tok in enumerate(doc.tokens):
        where = f"{doc.doc_id}/token[{pos}]"
        if tok.index != pos:
            out.append(Violation("TokenIndex", where, f"index {tok.index} != position {pos}"))
        if not (0 <= tok.start < tok.end <= n_chars):
            out.append(Violation("TokenOffsets", where, f"bad offsets [{tok.start},{tok.end}) for text of length {n_chars}"))
        if pos > 0 and tok.start < doc.tokens[pos - 1].end:
            out.append(Violation("TokenOverlap", where, "tokens overlap or are unsorted"))

    n_tokens = len(doc.tokens)
    seen_ids: set[str] = set()
    claimed = [False] * n_tokens
    prev_start = -1
    for pos, span in enumerate(doc.spans):
        where = f"{doc.doc_id}/span[{span.span_id or pos}]"
        if not (0 <= span.token_start < span.token_end <= n_tokens):
            out.append(Violation("SpanRange", where, f"token range [{span.token_start},{span.token_end}) outside 0..{n_tokens}"))
            continue
        if span.token_start < prev_start:
            out.append(Violation("SpanOrder", where, "spans not sorted by token_start"))
        prev_start = span.token_start
        for i in range(span.token_start, span.token_end):
            if claimed[i]:
                out.append(Violation("OverlappingSpans", where, f"token {i} already covered by another span"))
                break
            claimed[i] = True
        if span.confidence is not None and not (0.0 <= span.confidence <= 1.0):
            out.append(Violation("Confidence", where, f"confidence {span.confidence} outside [0,1]"))
        if span.span_id:
            if span.span_id in seen_ids:
                out.append(Violation("DuplicateSpanId", where, f"span id {span.span_id!r} reused"))
            seen_ids.add(span.span_id)
        if taxonomy is not None:
            try:
                taxonomy.resolve(span.label)
            except Exception:
                out.append(Violation("UnknownLabel", where, f"label {span.label!r} does not resolve"))
        else:
            try:
                TagPath.parse(span.label)
            except Exception:
                out.append(Violation("UnknownLabel", where, f"label {span.label!r} is not a well-formed path"))
    return out


def require_flat(doc: AnnotatedDocument) -> None:
    """Raise OverlappingSpans when any two spans of the document share a token."""
    claimed = [False] * len(doc.tokens)
    for span in doc.spans:
        for i in range(span.token_start, span.token_end):
            if claimed[i]:
                raise OverlappingSpans(
                    f"{doc.doc_id}: token {i} covered by more than one span"
                )
            claimed[i] = True
