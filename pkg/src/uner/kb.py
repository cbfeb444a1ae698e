"""Label correction against knowledge-base class memberships.

Each knowledge base contributes a one-to-one table from its class IRIs to
hierarchy paths (injective in both directions, checked at load). Lookups go
through a client contract with a mandatory offline fixture mode, so tests and
pipelines are reproducible; the live SPARQL client honors the same contract.

Correction never touches span boundaries, only label/source, and surface
strings are looked up verbatim (no entity disambiguation).
"""
from __future__ import annotations

import json
import threading
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Protocol

import httpx

from .documents import AnnotatedDocument, EntitySpan
from .errors import ConfigError, EndpointUnavailable, SchemaViolation
from .taxonomy import TagPath, Taxonomy

REASON_REFINED = "refined"
REASON_REPLACED = "replaced"
REASON_ANNOTATED = "annotated"
REASON_CONFLICT = "conflict-suppressed"
REASON_IDENTITY = "identity"
REASON_NO_EVIDENCE = "no-evidence"

ACTIONS = ("refine-only", "replace", "annotate-only")


@dataclass(frozen=True)
class KBRecord:
    surface: str
    classes: Mapping[str, tuple[str, ...]] = field(default_factory=dict)

    def is_empty(self) -> bool:
        return not any(self.classes.values())


class KBClient(Protocol):
    calls: int

    def fetch(self, surface: str) -> KBRecord: ...


class FixtureKBClient:
    """Offline client backed by a committed fixture store; never touches the network."""

    def __init__(self, records: Mapping[str, Mapping[str, Iterable[str]]]):
        self._records = {
            surface: {kb: tuple(classes) for kb, classes in by_kb.items()}
            for surface, by_kb in records.items()
        }
        self.calls = 0

    @classmethod
    def from_jsonl(cls, path: "str | Path") -> "FixtureKBClient":
        records: dict[str, dict[str, tuple[str, ...]]] = {}
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaViolation(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            for key in ("surface", "kb_id", "classes"):
                if key not in obj:
                    raise SchemaViolation(f"{path}:{lineno}: missing field {key!r}")
            by_kb = records.setdefault(obj["surface"], {})
            by_kb[obj["kb_id"]] = tuple(obj["classes"])
        return cls(records)

    def fetch(self, surface: str) -> KBRecord:
        self.calls += 1
        return KBRecord(surface, self._records.get(surface, {}))


class SparqlKBClient:
    """Thin live client querying class memberships by exact label match.

    One endpoint per kb_id; transport failures raise EndpointUnavailable.
    """

    QUERY = (
        "SELECT DISTINCT ?cls WHERE {{ ?s rdfs:label {literal}@en . ?s a ?cls . }} LIMIT 50"
    )

    def __init__(self, endpoints: Mapping[str, str], timeout: float = 10.0,
                 transport: httpx.BaseTransport | None = None):
        self.endpoints = dict(endpoints)
        self.calls = 0
        self._http = httpx.Client(
            timeout=timeout,
            headers={"Accept": "application/sparql-results+json"},
            transport=transport,
        )

    def fetch(self, surface: str) -> KBRecord:
        self.calls += 1
        literal = json.dumps(surface)
        classes: dict[str, tuple[str, ...]] = {}
        for kb_id, url in self.endpoints.items():
            try:
                resp = self._http.get(url, params={"query": self.QUERY.format(literal=literal)})
                resp.raise_for_status()
                payload = resp.json()
            except (httpx.HTTPError, json.JSONDecodeError) as exc:
                raise EndpointUnavailable(f"{kb_id} endpoint {url}: {exc}") from exc
            iris = []
            for binding in payload.get("results", {}).get("bindings", []):
                value = binding.get("cls", {}).get("value")
                if value:
                    iris.append(value)
            classes[kb_id] = tuple(iris)
        return KBRecord(surface, classes)


class LookupCache:
    """Surface -> record cache; concurrent readers, serialized writes."""

    def __init__(self):
        self._store: dict[str, KBRecord] = {}
        self._lock = threading.Lock()
        self.hits = 0

    def __len__(self) -> int:
        return len(self._store)

    def get(self, surface: str) -> KBRecord | None:
        return self._store.get(surface)

    def put(self, surface: str, record: KBRecord) -> None:
        with self._lock:
            self._store[surface] = record


def lookup(surface: str, client: KBClient, cache: LookupCache | None = None) -> KBRecord:
    """Cache-through lookup; a repeated surface never reaches the client again."""
    if cache is not None:
        cached = cache.get(surface)
        if cached is not None:
            cache.hits += 1
            return cached
    record = client.fetch(surface)
    if cache is not None:
        cache.put(surface, record)
    return record


@dataclass(frozen=True)
class KBClassMapping:
    """One-to-one table kb class IRI <-> hierarchy path for a single kb."""

    kb_id: str
    entries: Mapping[str, TagPath]

    def __post_init__(self):
        inverse: dict[str, str] = {}
        for iri, path in self.entries.items():
            key = str(path)
            if key in inverse:
                raise SchemaViolation(
                    f"kb {self.kb_id!r}: classes {inverse[key]!r} and {iri!r} both map to {key!r}; "
                    "the correspondence must be one-to-one"
                )
            inverse[key] = iri


def parse_kb_mappings(text: str, taxonomy: Taxonomy | None = None) -> dict[str, KBClassMapping]:
    """Mapping TSV: ``kb_id<TAB>class_iri<TAB>uner_path``; "#" comments allowed."""
    tables: dict[str, dict[str, TagPath]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.rstrip("\n").split("\t")
        if len(parts) != 3:
            raise SchemaViolation(f"kb mapping line {lineno}: expected 3 tab-separated fields")
        kb_id, iri, target = (p.strip() for p in parts)
        path = taxonomy.resolve(target) if taxonomy is not None else TagPath.parse(target)
        table = tables.setdefault(kb_id, {})
        if iri in table:
            raise SchemaViolation(f"kb mapping line {lineno}: duplicate class {iri!r} for {kb_id!r}")
        table[iri] = path
    return {kb: KBClassMapping(kb, entries) for kb, entries in tables.items()}


def load_kb_mappings(path: "str | Path", taxonomy: Taxonomy | None = None) -> dict[str, KBClassMapping]:
    return parse_kb_mappings(Path(path).read_text(encoding="utf-8"), taxonomy)


@dataclass(frozen=True)
class CorrectionPolicy:
    kb_precedence: tuple[str, ...] = ("wikidata", "dbpedia", "yago")
    action: str = "refine-only"

    def __post_init__(self):
        if self.action not in ACTIONS:
            raise ConfigError(f"unknown correction action {self.action!r}; choose from {ACTIONS}")
        if len(set(self.kb_precedence)) != len(self.kb_precedence):
            raise ConfigError("kb precedence lists a knowledge base twice")


@dataclass(frozen=True)
class CorrectionTrace:
    doc_id: str
    span_id: str
    old_label: str
    new_label: str
    reason: str
    kb_id: str = ""
    class_iri: str = ""

    def to_dict(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "span_id": self.span_id,
            "old_label": self.old_label,
            "new_label": self.new_label,
            "reason": self.reason,
            "kb_id": self.kb_id,
            "class_iri": self.class_iri,
        }


def _pick_evidence(
    record: KBRecord,
    mappings: Mapping[str, KBClassMapping],
    policy: CorrectionPolicy,
) -> tuple[str, str, TagPath] | None:
    """First kb in precedence with a mapped class wins; then deepest path,
    ties broken lexicographically."""
    for kb_id in policy.kb_precedence:
        mapping = mappings.get(kb_id)
        if mapping is None:
            continue
        candidates = [
            (mapping.entries[iri], iri)
            for iri in record.classes.get(kb_id, ())
            if iri in mapping.entries
        ]
        if candidates:
            candidates.sort(key=lambda pair: (-pair[0].depth, str(pair[0])))
            path, iri = candidates[0]
            return kb_id, iri, path
    return None


def correct_span(
    span: EntitySpan,
    record: KBRecord,
    mappings: Mapping[str, KBClassMapping],
    policy: CorrectionPolicy,
    doc_id: str = "",
) -> tuple[EntitySpan, CorrectionTrace]:
    """Apply kb evidence to one span; boundaries are never changed."""
    evidence = _pick_evidence(record, mappings, policy)
    if evidence is None:
        return span, CorrectionTrace(doc_id, span.span_id, span.label, span.label, REASON_NO_EVIDENCE)
    kb_id, iri, candidate = evidence
    current = TagPath.parse(span.label)

    def unchanged(reason: str) -> tuple[EntitySpan, CorrectionTrace]:
        return span, CorrectionTrace(doc_id, span.span_id, span.label, span.label, reason, kb_id, iri)

    if candidate.segments == current.segments:
        return unchanged(REASON_IDENTITY)
    if policy.action == "annotate-only":
        return unchanged(REASON_ANNOTATED)
    if policy.action == "refine-only" and not candidate.is_descendant_of(current):
        return unchanged(REASON_CONFLICT)
    reason = REASON_REFINED if policy.action == "refine-only" else REASON_REPLACED
    corrected = replace(span, label=str(candidate), source=f"kb:{kb_id}")
    return corrected, CorrectionTrace(doc_id, span.span_id, span.label, str(candidate), reason, kb_id, iri)


@dataclass
class CorrectionReport:
    by_reason: Counter = field(default_factory=Counter)
    spans: int = 0
    lookups: int = 0
    client_calls: int = 0

    def to_dict(self) -> dict:
        return {
            "spans": self.spans,
            "lookups": self.lookups,
            "client_calls": self.client_calls,
            "by_reason": dict(sorted(self.by_reason.items())),
        }


def correct_corpus(
    corpus: Mapping[str, AnnotatedDocument],
    client: KBClient,
    mappings: Mapping[str, KBClassMapping],
    policy: CorrectionPolicy,
    cache: LookupCache | None = None,
) -> tuple[dict[str, AnnotatedDocument], CorrectionReport, list[CorrectionTrace]]:
    """Per-span correction over a whole corpus, deterministic given the store."""
    cache = cache if cache is not None else LookupCache()
    report = CorrectionReport()
    traces: list[CorrectionTrace] = []
    out: dict[str, AnnotatedDocument] = {}
    before = getattr(client, "calls", 0)
    for doc_id in sorted(corpus):
        doc = corpus[doc_id]
        new_spans = []
        for span in doc.spans:
            record = lookup(doc.surface(span), client, cache)
            report.lookups += 1
            corrected, trace = correct_span(span, record, mappings, policy, doc_id=doc_id)
            new_spans.append(corrected)
            traces.append(trace)
            report.by_reason[trace.reason] += 1
            report.spans += 1
        out[doc_id] = doc.with_spans(new_spans)
    report.client_calls = getattr(client, "calls", 0) - before
    return out, report, traces
