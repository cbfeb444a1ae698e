"""Cross-lingual annotation projection over word-aligned sentence pairs.

Source spans travel along Pharaoh-style word alignment links (``i-j`` pairs).
A span projects onto the contiguous hull of its linked target tokens; when the
linked tokens are discontiguous the hull is still used (flat span model) and
the outcome is flagged "gapped" for analysis. A span with no linked tokens is
dropped ("unaligned"), as is one whose fraction of linked source tokens falls
below the coverage threshold ("low-coverage").
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .documents import AnnotatedDocument, EntitySpan
from .errors import ConfigError, DataError, IndexOutOfRange, SchemaViolation, TargetAlreadyAnnotated

REASON_PROJECTED = "projected"
REASON_UNALIGNED = "unaligned"
REASON_LOW_COVERAGE = "low-coverage"
REASON_COLLISION = "collision"

#: Both collision modes keep the span placed first and drop the newcomer; the
#: names exist so configs can say which reading they intend.
COLLISION_MODES = ("drop", "keep-first")


@dataclass(frozen=True)
class ProjectionConfig:
    min_coverage: float = 0.5
    on_collision: str = "drop"

    def __post_init__(self):
        if not 0.0 <= self.min_coverage <= 1.0:
            raise ConfigError(f"min_coverage must be in [0,1], got {self.min_coverage}")
        if self.on_collision not in COLLISION_MODES:
            raise ConfigError(
                f"unknown collision mode {self.on_collision!r}; choose from {COLLISION_MODES}"
            )

    def to_dict(self) -> dict:
        return {"min_coverage": self.min_coverage, "on_collision": self.on_collision}


@dataclass
class AlignedSentencePair:
    pair_id: str
    source: AnnotatedDocument
    target: AnnotatedDocument
    links: frozenset[tuple[int, int]]

    def __post_init__(self):
        ns, nt = len(self.source.tokens), len(self.target.tokens)
        for i, j in self.links:
            if not (0 <= i < ns) or not (0 <= j < nt):
                raise IndexOutOfRange(
                    f"pair {self.pair_id!r}: link {i}-{j} outside source {ns} / target {nt} tokens"
                )


@dataclass(frozen=True)
class ProjectionOutcome:
    source_span: EntitySpan
    reason: str
    projected: EntitySpan | None = None
    coverage: float = 0.0
    gapped: bool = False


def project_span(
    span: EntitySpan, pair: AlignedSentencePair, config: ProjectionConfig = ProjectionConfig()
) -> ProjectionOutcome:
    """Project one source span; label is preserved exactly."""
    if not (0 <= span.token_start < span.token_end <= len(pair.source.tokens)):
        raise IndexOutOfRange(
            f"pair {pair.pair_id!r}: span [{span.token_start},{span.token_end}) "
            f"outside the {len(pair.source.tokens)}-token source"
        )
    targets: set[int] = set()
    linked_sources: set[int] = set()
    for i, j in pair.links:
        if span.token_start <= i < span.token_end:
            targets.add(j)
            linked_sources.add(i)
    if not targets:
        return ProjectionOutcome(span, REASON_UNALIGNED)
    coverage = len(linked_sources) / (span.token_end - span.token_start)
    if coverage < config.min_coverage:
        return ProjectionOutcome(span, REASON_LOW_COVERAGE, coverage=coverage)
    lo, hi = min(targets), max(targets) + 1
    projected = EntitySpan(
        lo, hi, span.label, source=f"proj:{span.source}", confidence=span.confidence
    )
    return ProjectionOutcome(
        span, REASON_PROJECTED, projected=projected, coverage=coverage,
        gapped=(hi - lo) != len(targets),
    )


def project_document(
    pair: AlignedSentencePair, config: ProjectionConfig = ProjectionConfig()
) -> tuple[AnnotatedDocument, list[ProjectionOutcome]]:
    """Project every source span in document order onto the pair's target."""
    if pair.target.spans:
        raise TargetAlreadyAnnotated(
            f"pair {pair.pair_id!r}: target {pair.target.doc_id!r} already carries spans"
        )
    taken = [False] * len(pair.target.tokens)
    outcomes: list[ProjectionOutcome] = []
    placed: list[EntitySpan] = []
    for span in sorted(pair.source.spans, key=lambda s: (s.token_start, s.token_end)):
        outcome = project_span(span, pair, config)
        if outcome.projected is not None:
            p = outcome.projected
            if any(taken[j] for j in range(p.token_start, p.token_end)):
                outcome = ProjectionOutcome(
                    span, REASON_COLLISION, coverage=outcome.coverage, gapped=outcome.gapped
                )
            else:
                for j in range(p.token_start, p.token_end):
                    taken[j] = True
                placed.append(p)
        outcomes.append(outcome)
    placed.sort(key=lambda s: s.token_start)
    spans = [
        EntitySpan(s.token_start, s.token_end, s.label, s.source, s.confidence, span_id=f"s{k}")
        for k, s in enumerate(placed)
    ]
    target = pair.target.with_spans(spans)
    return target, outcomes


@dataclass
class ProjectionReport:
    by_reason: Counter = field(default_factory=Counter)
    per_label: dict[str, dict[str, int]] = field(default_factory=dict)
    gapped: int = 0
    pairs: int = 0
    config: ProjectionConfig = field(default_factory=ProjectionConfig)

    @property
    def source_spans(self) -> int:
        return sum(self.by_reason.values())

    @property
    def projection_rate(self) -> float:
        total = self.source_spans
        return self.by_reason[REASON_PROJECTED] / total if total else 0.0

    def to_dict(self) -> dict:
        return {
            "pairs": self.pairs,
            "source_spans": self.source_spans,
            "projected": self.by_reason[REASON_PROJECTED],
            "projection_rate": self.projection_rate,
            "gapped": self.gapped,
            "by_reason": dict(sorted(self.by_reason.items())),
            "per_label": {
                label: dict(stats) for label, stats in sorted(self.per_label.items())
            },
            "config": self.config.to_dict(),
        }


def project_corpus(
    pairs: Iterable[AlignedSentencePair], config: ProjectionConfig = ProjectionConfig()
) -> tuple[dict[str, AnnotatedDocument], ProjectionReport]:
    report = ProjectionReport(config=config)
    corpus: dict[str, AnnotatedDocument] = {}
    seen: set[str] = set()
    for pair in pairs:
        if pair.pair_id in seen:
            raise DataError(f"duplicate pair_id {pair.pair_id!r}")
        seen.add(pair.pair_id)
        target, outcomes = project_document(pair, config)
        corpus[target.doc_id] = target
        report.pairs += 1
        for outcome in outcomes:
            report.by_reason[outcome.reason] += 1
            label_stats = report.per_label.setdefault(
                outcome.source_span.label, {"source_spans": 0, "projected": 0}
            )
            label_stats["source_spans"] += 1
            if outcome.reason == REASON_PROJECTED:
                label_stats["projected"] += 1
                if outcome.gapped:
                    report.gapped += 1
    return corpus, report


def parse_alignments(text: str) -> dict[str, frozenset[tuple[int, int]]]:
    """Alignment file: one line per pair, ``pair_id<TAB>i-j i-j ...`` (0-based)."""
    out: dict[str, frozenset[tuple[int, int]]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.rstrip("\n").split("\t")
        if len(parts) not in (1, 2):
            raise SchemaViolation(f"alignment line {lineno}: expected 'pair_id<TAB>links'")
        pair_id = parts[0].strip()
        if not pair_id:
            raise SchemaViolation(f"alignment line {lineno}: empty pair_id")
        if pair_id in out:
            raise SchemaViolation(f"alignment line {lineno}: duplicate pair_id {pair_id!r}")
        links: set[tuple[int, int]] = set()
        if len(parts) == 2 and parts[1].strip():
            for chunk in parts[1].split():
                i_text, sep, j_text = chunk.partition("-")
                if not sep or not i_text.isdigit() or not j_text.isdigit():
                    raise SchemaViolation(
                        f"alignment line {lineno}: bad link {chunk!r} (expected i-j)"
                    )
                links.add((int(i_text), int(j_text)))
        out[pair_id] = frozenset(links)
    return out


def load_alignments(path: "str | Path") -> dict[str, frozenset[tuple[int, int]]]:
    return parse_alignments(Path(path).read_text(encoding="utf-8"))


def build_pairs(
    source_corpus: Mapping[str, AnnotatedDocument],
    target_corpus: Mapping[str, AnnotatedDocument],
    alignments: Mapping[str, frozenset[tuple[int, int]]],
) -> list[AlignedSentencePair]:
    """Join corpora on pair_id = doc_id; every alignment line must match both sides."""
    pairs = []
    for pair_id in alignments:
        if pair_id not in source_corpus:
            raise DataError(f"alignment pair {pair_id!r} missing from the source corpus")
        if pair_id not in target_corpus:
            raise DataError(f"alignment pair {pair_id!r} missing from the target corpus")
        pairs.append(
            AlignedSentencePair(
                pair_id, source_corpus[pair_id], target_corpus[pair_id], alignments[pair_id]
            )
        )
    return pairs
