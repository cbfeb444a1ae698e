"""Span-level scoring and corpus distribution profiling.

Scoring uses exact boundary matching: a predicted span is a true positive iff
an unmatched gold span has the identical token range and the same label after
both are coarsened to the requested hierarchy level ("exact" keeps full
paths). Matching is one-to-one. Degenerate denominators follow the zero
convention: precision is 0 when nothing was predicted, recall is 0 when the
gold set is empty, F1 is 0 when P+R is 0.
"""
from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from . import codecs
from .documents import AnnotatedDocument, validate
from .errors import ConfigError, CorpusMismatch, DataError
from .taxonomy import TagPath, Taxonomy

def _coarse_label(label: str, match_level) -> str:
    if match_level == "exact":
        return label
    return str(TagPath.parse(label).coarsen(match_level))


def check_match_level(match_level) -> None:
    if match_level == "exact":
        return
    if not isinstance(match_level, int) or not 1 <= match_level <= 4:
        raise ConfigError(f"match level must be 1-4 or 'exact', got {match_level!r}")


@dataclass
class LabelScore:
    tp: int = 0
    predicted: int = 0
    gold: int = 0

    @property
    def precision(self) -> float:
        return self.tp / self.predicted if self.predicted else 0.0

    @property
    def recall(self) -> float:
        return self.tp / self.gold if self.gold else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0


@dataclass
class ScoreReport:
    match_level: "int | str"
    true_positives: int = 0
    predicted_count: int = 0
    gold_count: int = 0
    per_label: dict[str, LabelScore] = field(default_factory=dict)

    @property
    def precision(self) -> float:
        return self.true_positives / self.predicted_count if self.predicted_count else 0.0

    @property
    def recall(self) -> float:
        return self.true_positives / self.gold_count if self.gold_count else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0

    def to_dict(self) -> dict:
        return {
            "match_level": self.match_level,
            "true_positives": self.true_positives,
            "predicted": self.predicted_count,
            "gold": self.gold_count,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "per_label": {
                label: {
                    "tp": s.tp, "predicted": s.predicted, "gold": s.gold,
                    "precision": s.precision, "recall": s.recall, "f1": s.f1,
                }
                for label, s in sorted(self.per_label.items())
            },
        }

    def table(self) -> str:
        """Human-readable summary table."""
        rows = [("label", "P", "R", "F1", "TP", "pred", "gold")]
        rows.append((
            "ALL",
            f"{self.precision:.4f}", f"{self.recall:.4f}", f"{self.f1:.4f}",
            str(self.true_positives), str(self.predicted_count), str(self.gold_count),
        ))
        for label, s in sorted(self.per_label.items()):
            rows.append((
                label, f"{s.precision:.4f}", f"{s.recall:.4f}", f"{s.f1:.4f}",
                str(s.tp), str(s.predicted), str(s.gold),
            ))
        widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
        lines = ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip()
                 for row in rows]
        return "\n".join(lines)


def score(
    gold: Mapping[str, AnnotatedDocument],
    pred: Mapping[str, AnnotatedDocument],
    match_level: "int | str" = "exact",
) -> ScoreReport:
    """Score predictions against gold at the given hierarchy depth."""
    check_match_level(match_level)
    if set(gold) != set(pred):
        missing = sorted(set(gold) ^ set(pred))[:5]
        raise CorpusMismatch(f"doc_id sets differ (e.g. {missing})")
    report = ScoreReport(match_level=match_level)
    for doc_id in sorted(gold):
        g_doc, p_doc = gold[doc_id], pred[doc_id]
        if g_doc.tokens != p_doc.tokens or g_doc.text != p_doc.text:
            raise CorpusMismatch(f"{doc_id}: gold and predicted tokenizations differ")
        gold_keys: Counter = Counter()
        for span in g_doc.spans:
            label = _coarse_label(span.label, match_level)
            gold_keys[(span.token_start, span.token_end, label)] += 1
            report.gold_count += 1
            report.per_label.setdefault(label, LabelScore()).gold += 1
        for span in p_doc.spans:
            label = _coarse_label(span.label, match_level)
            stats = report.per_label.setdefault(label, LabelScore())
            stats.predicted += 1
            report.predicted_count += 1
            key = (span.token_start, span.token_end, label)
            if gold_keys[key] > 0:
                gold_keys[key] -= 1
                report.true_positives += 1
                stats.tp += 1
    return report


@dataclass
class DistributionReport:
    total_spans: int = 0
    path_counts: dict[str, int] = field(default_factory=dict)
    level_marginals: dict[int, dict[str, int]] = field(default_factory=dict)
    zero_example_nodes: list[str] = field(default_factory=list)
    surface_head: list[tuple[str, int]] = field(default_factory=list)
    documents: int = 0

    def to_dict(self) -> dict:
        return {
            "documents": self.documents,
            "total_spans": self.total_spans,
            "path_counts": dict(sorted(self.path_counts.items())),
            "level_marginals": {
                str(level): dict(sorted(marg.items()))
                for level, marg in sorted(self.level_marginals.items())
            },
            "zero_example_nodes": self.zero_example_nodes,
            "surface_head": [[s, c] for s, c in self.surface_head],
        }


def distribution_report(
    corpus: Mapping[str, AnnotatedDocument],
    taxonomy: Taxonomy,
    surface_head_size: int = 20,
) -> DistributionReport:
    """Entity distribution profile: per-path counts, per-level marginals,
    nodes with no examples anywhere below them, and the most frequent surfaces.

    A span counts as an example of every node on its label path, so a node is
    "zero-example" only when neither it nor any descendant is ever used.
    """
    report = DistributionReport(documents=len(corpus))
    path_counts: Counter = Counter()
    node_hits: Counter = Counter()
    marginals: dict[int, Counter] = {1: Counter(), 2: Counter(), 3: Counter(), 4: Counter()}
    surfaces: Counter = Counter()
    for doc_id in sorted(corpus):
        doc = corpus[doc_id]
        for span in doc.spans:
            path = taxonomy.resolve(span.label)
            path_counts[str(path)] += 1
            surfaces[doc.surface(span)] += 1
            report.total_spans += 1
            for k in range(1, path.depth + 1):
                node_hits[path.segments[:k]] += 1
            for level in marginals:
                marginals[level][str(path.coarsen(min(level, path.depth)))] += 1
    report.path_counts = dict(path_counts)
    report.level_marginals = {lvl: dict(marg) for lvl, marg in marginals.items()}
    report.zero_example_nodes = [
        str(node.path) for node in taxonomy.nodes() if node.path.segments not in node_hits
    ]
    report.surface_head = surfaces.most_common(surface_head_size)
    return report


SPLIT_NAMES = ("train", "dev", "test")


def split_of(doc_id: str) -> str:
    """Deterministic, seedless 80/10/10 split by doc_id hash."""
    bucket = hashlib.sha256(doc_id.encode("utf-8")).digest()[0] % 10
    if bucket < 8:
        return "train"
    return "dev" if bucket == 8 else "test"


def export_training(
    corpus: Mapping[str, AnnotatedDocument],
    fmt: str,
    out_dir: "str | Path",
    taxonomy: Taxonomy | None = None,
) -> dict[str, Path]:
    """Write train/dev/test files in the requested codec format.

    The whole corpus is validated first; nothing is written when any document
    is invalid.
    """
    if fmt not in ("iob2", "spans"):
        raise ConfigError(f"export format must be 'iob2' or 'spans', got {fmt!r}")
    violations = []
    for doc in corpus.values():
        violations.extend(validate(doc, taxonomy))
    if violations:
        raise DataError(f"corpus has {len(violations)} violations; first: {violations[0]}")

    splits: dict[str, list[AnnotatedDocument]] = {name: [] for name in SPLIT_NAMES}
    for doc_id in sorted(corpus):
        splits[split_of(doc_id)].append(corpus[doc_id])

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: dict[str, Path] = {}
    for name in SPLIT_NAMES:
        suffix = "iob2" if fmt == "iob2" else "jsonl"
        path = out / f"{name}.{suffix}"
        if fmt == "iob2":
            codecs.write_iob2(splits[name], path)
        else:
            codecs.write_corpus(splits[name], path)
        written[name] = path
    return written
