"""Human review: task generation, the append-only verdict log, adjudication.

A review task shows one span in its sentence with the proposed label and
candidate alternatives (siblings and ancestors in the hierarchy). Reviewers
answer accept / reject / relabel. Adjudication applies the majority action of
each task once a quorum of verdicts exists; ties keep the original annotation
and are flagged. Verdicts never mutate tasks or the log, so re-applying the
same log to the corrected corpus is a no-op.
"""
from __future__ import annotations

import datetime as _dt
import json
import random
import threading
from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping

from .documents import AnnotatedDocument
from .errors import ConfigError, DataError, DuplicateVerdict, SchemaViolation
from .taxonomy import Taxonomy

ACTIONS = ("accept", "reject", "relabel")


@dataclass
class ReviewTask:
    task_id: str
    doc_id: str
    span_id: str
    text: str
    char_start: int
    char_end: int
    proposed_label: str
    candidate_labels: list[str] = field(default_factory=list)
    status: str = "open"

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "doc_id": self.doc_id,
            "span_id": self.span_id,
            "text": self.text,
            "char_start": self.char_start,
            "char_end": self.char_end,
            "proposed_label": self.proposed_label,
            "candidate_labels": self.candidate_labels,
            "status": self.status,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "ReviewTask":
        try:
            return cls(
                task_id=obj["task_id"],
                doc_id=obj["doc_id"],
                span_id=obj["span_id"],
                text=obj["text"],
                char_start=obj["char_start"],
                char_end=obj["char_end"],
                proposed_label=obj["proposed_label"],
                candidate_labels=list(obj.get("candidate_labels", [])),
                status=obj.get("status", "open"),
            )
        except KeyError as exc:
            raise SchemaViolation(f"task record missing field {exc}") from None


@dataclass(frozen=True)
class Verdict:
    task_id: str
    annotator_id: str
    action: str
    label: str | None = None
    ts: str = ""

    def __post_init__(self):
        if self.action not in ACTIONS:
            raise DataError(f"unknown verdict action {self.action!r}")
        if self.action == "relabel" and not self.label:
            raise DataError("relabel verdict requires a label")
        if self.action != "relabel" and self.label:
            raise DataError(f"{self.action} verdict must not carry a label")

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "annotator_id": self.annotator_id,
            "action": self.action,
            "label": self.label,
            "ts": self.ts,
        }


def now_iso() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def generate_tasks(
    corpus: Mapping[str, AnnotatedDocument],
    taxonomy: Taxonomy | None = None,
    sampling: str = "all",
    quota: int = 0,
    fraction: float = 1.0,
    seed: int = 0,
) -> list[ReviewTask]:
    """One task per sampled span.

    sampling "all" takes every span; "quota" takes the first ``quota`` spans
    of each label in corpus order; "random" keeps each span with probability
    ``fraction`` using the given seed (deterministic).
    """
    if sampling not in ("all", "quota", "random"):
        raise ConfigError(f"unknown sampling mode {sampling!r}")
    if sampling == "quota" and quota < 1:
        raise ConfigError("quota sampling needs quota >= 1")
    if sampling == "random" and not 0.0 <= fraction <= 1.0:
        raise ConfigError("random sampling needs a fraction in [0,1]")

    rng = random.Random(seed)
    per_label: Counter = Counter()
    tasks: list[ReviewTask] = []
    for doc_id in sorted(corpus):
        doc = corpus[doc_id]
        for span in doc.spans:
            if not span.span_id:
                raise DataError(f"{doc_id}: spans must carry ids before task generation")
            if sampling == "quota":
                if per_label[span.label] >= quota:
                    continue
                per_label[span.label] += 1
            elif sampling == "random" and rng.random() >= fraction:
                continue
            candidates: list[str] = []
            if taxonomy is not None:
                path = taxonomy.resolve(span.label)
                candidates = sorted(
                    {str(p) for p in taxonomy.siblings(path)}
                    | {str(p) for p in taxonomy.ancestors(path)}
                )
            start, end = doc.char_range(span)
            tasks.append(
                ReviewTask(
                    task_id=f"t{len(tasks):05d}",
                    doc_id=doc_id,
                    span_id=span.span_id,
                    text=doc.text,
                    char_start=start,
                    char_end=end,
                    proposed_label=span.label,
                    candidate_labels=candidates,
                )
            )
    return tasks


def write_tasks(tasks: Iterable[ReviewTask], path: "str | Path") -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for task in tasks:
            fh.write(json.dumps(task.to_dict(), ensure_ascii=False, separators=(",", ":")) + "\n")
            count += 1
    return count


def read_tasks(path: "str | Path") -> list[ReviewTask]:
    tasks = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            tasks.append(ReviewTask.from_dict(json.loads(line)))
        except json.JSONDecodeError as exc:
            raise SchemaViolation(f"{path}:{lineno}: invalid JSON: {exc}") from exc
    return tasks


class VerdictLog:
    """Append-only verdict store: one JSON record per line on disk.

    A single writer appends under a lock; readers work from the in-memory
    list, which is only ever extended.
    """

    def __init__(self, path: "str | Path"):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._verdicts: list[Verdict] = []
        self._seen: set[tuple[str, str]] = set()
        if self.path.exists():
            for verdict in read_verdicts(self.path):
                self._remember(verdict)

    def _remember(self, verdict: Verdict) -> None:
        key = (verdict.task_id, verdict.annotator_id)
        if key in self._seen:
            raise DuplicateVerdict(
                f"annotator {verdict.annotator_id!r} already judged task {verdict.task_id!r}"
            )
        self._seen.add(key)
        self._verdicts.append(verdict)

    def __len__(self) -> int:
        return len(self._verdicts)

    def __iter__(self):
        return iter(list(self._verdicts))

    def has(self, task_id: str, annotator_id: str) -> bool:
        return (task_id, annotator_id) in self._seen

    def append(self, verdict: Verdict) -> Verdict:
        if not verdict.ts:
            verdict = replace(verdict, ts=now_iso())
        with self._lock:
            self._remember(verdict)
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(verdict.to_dict(), ensure_ascii=False, separators=(",", ":")) + "\n")
        return verdict


def read_verdicts(path: "str | Path") -> list[Verdict]:
    verdicts = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaViolation(f"{path}:{lineno}: invalid JSON: {exc}") from exc
        try:
            verdicts.append(
                Verdict(
                    task_id=obj["task_id"],
                    annotator_id=obj["annotator_id"],
                    action=obj["action"],
                    label=obj.get("label"),
                    ts=obj.get("ts", ""),
                )
            )
        except KeyError as exc:
            raise SchemaViolation(f"{path}:{lineno}: verdict missing field {exc}") from None
    return verdicts


@dataclass
class TaskResolution:
    task_id: str
    outcome: str  # accepted | removed | relabeled | tied | below-quorum | missing-span
    label: str | None = None
    unanimous: bool = False


@dataclass
class AgreementReport:
    tasks_total: int = 0
    tasks_resolved: int = 0
    tasks_below_quorum: int = 0
    tasks_tied: int = 0
    unanimous_fraction: float = 0.0
    accept_rate_per_label: dict[str, float] = field(default_factory=dict)
    outcomes: Counter = field(default_factory=Counter)
    below_quorum: list[str] = field(default_factory=list)
    tied: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "tasks_total": self.tasks_total,
            "tasks_resolved": self.tasks_resolved,
            "tasks_below_quorum": self.tasks_below_quorum,
            "tasks_tied": self.tasks_tied,
            "unanimous_fraction": self.unanimous_fraction,
            "accept_rate_per_label": dict(sorted(self.accept_rate_per_label.items())),
            "outcomes": dict(sorted(self.outcomes.items())),
            "below_quorum": self.below_quorum,
            "tied": self.tied,
        }


def resolve_task(verdicts: list[Verdict]) -> tuple[str, str | None, bool]:
    """Majority rule for one task's verdicts.

    Returns (outcome, label, unanimous) where outcome is the winning action,
    or "tied" when no strict action majority exists or relabel wins without a
    strict plurality label.
    """
    actions = Counter(v.action for v in verdicts)
    total = len(verdicts)
    winner, count = actions.most_common(1)[0]
    if count * 2 <= total:
        return "tied", None, False
    unanimous = len(actions) == 1
    if winner != "relabel":
        return winner, None, unanimous
    labels = Counter(v.label for v in verdicts if v.action == "relabel")
    ranked = labels.most_common()
    if len(ranked) > 1 and ranked[0][1] == ranked[1][1]:
        return "tied", None, False
    label = ranked[0][0]
    return "relabel", label, unanimous and len(labels) == 1


def apply_verdicts(
    corpus: Mapping[str, AnnotatedDocument],
    tasks: Iterable[ReviewTask],
    verdicts: Iterable[Verdict],
    quorum: int = 3,
    taxonomy: Taxonomy | None = None,
) -> tuple[dict[str, AnnotatedDocument], AgreementReport, list[TaskResolution]]:
    """Apply adjudicated verdicts back onto the corpus snapshot.

    Tasks with fewer than ``quorum`` verdicts stay unapplied and are listed.
    accept keeps the span, reject removes it, relabel sets the majority label
    with source "human". A task whose span no longer exists is a no-op, which
    makes re-application idempotent.
    """
    if quorum < 1:
        raise ConfigError("quorum must be >= 1")
    task_index = {t.task_id: t for t in tasks}
    by_task: dict[str, list[Verdict]] = defaultdict(list)
    judged: set[tuple[str, str]] = set()
    for v in verdicts:
        if v.task_id not in task_index:
            raise DataError(f"verdict references unknown task {v.task_id!r}")
        key = (v.task_id, v.annotator_id)
        if key in judged:
            continue  # keep the first of any duplicated log entry
        judged.add(key)
        if v.action == "relabel" and taxonomy is not None:
            taxonomy.resolve(v.label)
        by_task[v.task_id].append(v)

    relabels: dict[tuple[str, str], str] = {}
    removals: set[tuple[str, str]] = set()
    report = AgreementReport(tasks_total=len(task_index))
    resolutions: list[TaskResolution] = []
    unanimous = 0
    accept_votes: Counter = Counter()
    votes_per_label: Counter = Counter()

    for task_id in sorted(task_index):
        task = task_index[task_id]
        task_verdicts = by_task.get(task_id, [])
        for v in task_verdicts:
            votes_per_label[task.proposed_label] += 1
            if v.action == "accept":
                accept_votes[task.proposed_label] += 1
        if len(task_verdicts) < quorum:
            report.tasks_below_quorum += 1
            report.below_quorum.append(task_id)
            resolutions.append(TaskResolution(task_id, "below-quorum"))
            continue
        outcome, label, is_unanimous = resolve_task(task_verdicts)
        key = (task.doc_id, task.span_id)
        if outcome == "tied":
            report.tasks_tied += 1
            report.tied.append(task_id)
            resolutions.append(TaskResolution(task_id, "tied"))
            continue
        report.tasks_resolved += 1
        unanimous += 1 if is_unanimous else 0
        if outcome == "accept":
            resolutions.append(TaskResolution(task_id, "accepted", unanimous=is_unanimous))
        elif outcome == "reject":
            removals.add(key)
            resolutions.append(TaskResolution(task_id, "removed", unanimous=is_unanimous))
        else:
            relabels[key] = label or ""
            resolutions.append(TaskResolution(task_id, "relabeled", label, unanimous=is_unanimous))

    out: dict[str, AnnotatedDocument] = {}
    missing = 0
    for doc_id, doc in corpus.items():
        new_spans = []
        for span in doc.spans:
            key = (doc_id, span.span_id)
            if key in removals:
                removals.discard(key)
                continue
            new_label = relabels.pop(key, None)
            if new_label is not None and new_label != span.label:
                span = replace(span, label=new_label, source="human")
            new_spans.append(span)
        out[doc_id] = doc.with_spans(new_spans)
    missing = len(removals) + len(relabels)

    report.outcomes = Counter(r.outcome for r in resolutions)
    if missing:
        report.outcomes["missing-span"] = missing
    if report.tasks_resolved:
        report.unanimous_fraction = unanimous / report.tasks_resolved
    report.accept_rate_per_label = {
        label: accept_votes[label] / votes_per_label[label]
        for label in sorted(votes_per_label)
    }
    return out, report, resolutions
