"""Recall-priority merge of multiple tagger outputs.

Models are sorted by reported recall into a priority order; each model in turn
may only annotate tokens every higher-priority model left untagged. Admission
is span-atomic: a candidate span is admitted only when all of its tokens are
free, so partial overlaps suppress the whole lower-priority span instead of
fabricating truncated boundaries. This maximises the number of annotated
entities without ever overriding a higher-recall model.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from . import codecs
from .documents import AnnotatedDocument, EntitySpan, Violation, validate
from .errors import (
    DataError,
    MissingRecall,
    SchemaViolation,
    TokenizationMismatch,
    UnmappedLabel,
)
from .taxonomy import SchemeMapping, Taxonomy

#: scheme_id meaning "labels are already canonical dotted paths".
NATIVE_SCHEME = "uner"


@dataclass
class ModelRun:
    """One tagger's output over a corpus, plus its priority key."""

    model_id: str
    reported_recall: float | None
    scheme_id: str
    documents: dict[str, AnnotatedDocument]

    def validate(self, taxonomy: Taxonomy | None = None) -> list[Violation]:
        out: list[Violation] = []
        for doc in self.documents.values():
            check = taxonomy if self.scheme_id == NATIVE_SCHEME else None
            out.extend(validate(doc, check))
        return out


@dataclass
class ModelStats:
    produced: int = 0
    admitted: int = 0
    suppressed: int = 0


@dataclass
class MergeReport:
    per_model: dict[str, ModelStats] = field(default_factory=dict)
    occurrences: int = 0
    distinct_surfaces: int = 0
    documents: int = 0

    def stats(self, model_id: str) -> ModelStats:
        return self.per_model.setdefault(model_id, ModelStats())

    def to_dict(self) -> dict:
        return {
            "documents": self.documents,
            "occurrences": self.occurrences,
            "distinct_surfaces": self.distinct_surfaces,
            "per_model": {
                mid: {"produced": s.produced, "admitted": s.admitted, "suppressed": s.suppressed}
                for mid, s in sorted(self.per_model.items())
            },
        }


def rank_models(runs: Iterable[ModelRun]) -> list[ModelRun]:
    """Descending by reported recall; ties broken by ascending model_id."""
    runs = list(runs)
    for run in runs:
        r = run.reported_recall
        if r is None or isinstance(r, float) and math.isnan(r):
            raise MissingRecall(f"model {run.model_id!r} has no reported recall")
        if not 0.0 <= r <= 1.0:
            raise DataError(f"model {run.model_id!r}: reported recall {r} outside [0,1]")
    return sorted(runs, key=lambda run: (-run.reported_recall, run.model_id))


def _map_span_label(
    span: EntitySpan,
    scheme_id: str,
    taxonomy: Taxonomy | None,
    mappings: Mapping[str, SchemeMapping],
) -> str:
    if scheme_id == NATIVE_SCHEME:
        if taxonomy is not None:
            taxonomy.resolve(span.label)
        return span.label
    if scheme_id not in mappings:
        raise UnmappedLabel(f"no scheme mapping loaded for scheme {scheme_id!r}")
    return str(mappings[scheme_id].map_label(span.label))


def merge_document(
    doc_id: str,
    ranked_runs: list[ModelRun],
    taxonomy: Taxonomy | None = None,
    mappings: Mapping[str, SchemeMapping] | None = None,
    report: MergeReport | None = None,
) -> AnnotatedDocument:
    """Merge one document across runs already in priority order.

    All runs must tokenize the document identically. Each run's own span set
    must be flat (violations are rejected, not repaired).
    """
    mappings = mappings or {}
    holders = [run for run in ranked_runs if doc_id in run.documents]
    if not holders:
        raise KeyError(f"document {doc_id!r} appears in no run")
    base = holders[0].documents[doc_id]
    for run in holders[1:]:
        doc = run.documents[doc_id]
        if doc.text != base.text or doc.tokens != base.tokens:
            raise TokenizationMismatch(
                f"{doc_id}: run {run.model_id!r} tokenizes differently from "
                f"run {holders[0].model_id!r}"
            )

    taken = [False] * len(base.tokens)
    merged: list[EntitySpan] = []
    for run in holders:
        doc = run.documents[doc_id]
        bad = validate(doc)
        overlapping = [v for v in bad if v.code in ("OverlappingSpans", "SpanRange")]
        if overlapping:
            raise DataError(f"run {run.model_id!r}: {overlapping[0]}")
        stats = report.stats(run.model_id) if report is not None else ModelStats()
        for span in sorted(doc.spans, key=lambda s: (s.token_start, s.token_end)):
            stats.produced += 1
            label = _map_span_label(span, run.scheme_id, taxonomy, mappings)
            if any(taken[i] for i in range(span.token_start, span.token_end)):
                stats.suppressed += 1
                continue
            for i in range(span.token_start, span.token_end):
                taken[i] = True
            merged.append(
                EntitySpan(
                    span.token_start,
                    span.token_end,
                    label,
                    source=run.model_id,
                    confidence=span.confidence,
                )
            )
            stats.admitted += 1

    merged.sort(key=lambda s: s.token_start)
    spans = [
        EntitySpan(s.token_start, s.token_end, s.label, s.source, s.confidence, span_id=f"s{k}")
        for k, s in enumerate(merged)
    ]
    return AnnotatedDocument(base.doc_id, base.lang, base.text, base.tokens, spans)


def merge_corpus(
    runs: Iterable[ModelRun],
    taxonomy: Taxonomy | None = None,
    mappings: Mapping[str, SchemeMapping] | None = None,
) -> tuple[dict[str, AnnotatedDocument], MergeReport]:
    """Rank runs, merge every document in the union of doc_id sets."""
    ranked = rank_models(runs)
    report = MergeReport()
    doc_ids = sorted({doc_id for run in ranked for doc_id in run.documents})
    corpus: dict[str, AnnotatedDocument] = {}
    for doc_id in doc_ids:
        corpus[doc_id] = merge_document(doc_id, ranked, taxonomy, mappings, report)
    report.documents = len(corpus)
    occurrences, distinct, _ = entity_inventory(corpus.values())
    report.occurrences = occurrences
    report.distinct_surfaces = distinct
    return corpus, report


def entity_inventory(
    docs: Iterable[AnnotatedDocument],
) -> tuple[int, int, Counter]:
    """Total span count, distinct exact surface strings, per-surface counts."""
    surfaces: Counter = Counter()
    occurrences = 0
    for doc in docs:
        for span in doc.spans:
            occurrences += 1
            surfaces[doc.surface(span)] += 1
    return occurrences, len(surfaces), surfaces


def parse_run_manifest(text: str, base_dir: "str | Path" = ".") -> list[ModelRun]:
    """Run manifest TSV: ``model_id<TAB>reported_recall<TAB>scheme_id<TAB>corpus_path``.

    Corpus paths are resolved relative to the manifest location.
    """
    base = Path(base_dir)
    runs: list[ModelRun] = []
    seen: set[str] = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.rstrip("\n").split("\t")
        if len(parts) != 4:
            raise SchemaViolation(f"run manifest line {lineno}: expected 4 tab-separated fields")
        model_id, recall_text, scheme_id, corpus_path = (p.strip() for p in parts)
        if model_id in seen:
            raise SchemaViolation(f"run manifest line {lineno}: duplicate model_id {model_id!r}")
        seen.add(model_id)
        try:
            recall = float(recall_text)
        except ValueError:
            raise MissingRecall(
                f"run manifest line {lineno}: recall {recall_text!r} is not a number"
            ) from None
        documents = codecs.read_corpus(base / corpus_path)
        for doc in documents.values():
            for k, span in enumerate(doc.spans):
                if span.source != model_id:
                    doc.spans[k] = EntitySpan(
                        span.token_start, span.token_end, span.label,
                        source=model_id, confidence=span.confidence, span_id=span.span_id,
                    )
        runs.append(ModelRun(model_id, recall, scheme_id, documents))
    return runs


def load_run_manifest(path: "str | Path") -> list[ModelRun]:
    p = Path(path)
    return parse_run_manifest(p.read_text(encoding="utf-8"), p.parent)
