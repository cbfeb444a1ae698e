"""End-to-end pipeline: merge -> correct -> (tasks/adjudication) -> project -> score/stats.

Stages communicate exclusively through interchange files on disk so each one
is independently inspectable and resumable. Every stage output is paired with
a provenance record (stage name, input digests, config digest, timestamp)
sufficient to re-run it; output corpora themselves are byte-deterministic, so
re-running a pipeline changes nothing but provenance timestamps.
"""
from __future__ import annotations

import hashlib
import json
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from . import __version__
from . import codecs, ensemble, evaluation, kb, projection, review
from .documents import validate
from .errors import ConfigError, DataError, UnerError
from .review import now_iso
from .taxonomy import Taxonomy, load_scheme_mappings, load_taxonomy_file


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"), sort_keys=False)


def sha256_file(path: "str | Path") -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass
class PipelineConfig:
    taxonomy: Path
    scheme_mappings: list[Path]
    run_manifest: Path
    out_dir: Path
    kb_mappings: Path | None = None
    kb_fixtures: Path | None = None
    kb_endpoints: dict[str, str] = field(default_factory=dict)
    kb_policy: str = "refine-only"
    kb_precedence: tuple[str, ...] = ("wikidata", "dbpedia", "yago")
    projection_alignments: Path | None = None
    projection_target: Path | None = None
    min_coverage: float = 0.5
    on_collision: str = "drop"
    gold: Path | None = None
    match_level: "int | str" = "exact"
    tasks_sampling: str | None = None
    tasks_quota: int = 0
    tasks_fraction: float = 1.0
    tasks_seed: int = 0
    verdict_log: Path | None = None
    quorum: int = 3
    offline: bool = True
    raw: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_file(cls, path: "str | Path", overrides: dict | None = None) -> "PipelineConfig":
        p = Path(path)
        try:
            obj = json.loads(p.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file {p} does not exist") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {p} is not valid JSON: {exc}") from exc
        if overrides:
            obj = _deep_merge(obj, overrides)
        return cls.from_dict(obj, base_dir=p.parent)

    @classmethod
    def from_dict(cls, obj: dict, base_dir: "str | Path" = ".") -> "PipelineConfig":
        base = Path(base_dir)

        def path_of(value) -> Path:
            q = Path(value)
            return q if q.is_absolute() else base / q

        def need(key: str):
            if key not in obj:
                raise ConfigError(f"config is missing required key {key!r}")
            return obj[key]

        kb_cfg = obj.get("kb") or {}
        proj_cfg = obj.get("projection") or {}
        score_cfg = obj.get("score") or {}
        review_cfg = obj.get("review") or {}
        config = cls(
            taxonomy=path_of(need("taxonomy")),
            scheme_mappings=[path_of(p) for p in need("scheme_mappings")],
            run_manifest=path_of(need("run_manifest")),
            out_dir=path_of(need("out_dir")),
            kb_mappings=path_of(kb_cfg["mappings"]) if "mappings" in kb_cfg else None,
            kb_fixtures=path_of(kb_cfg["fixtures"]) if "fixtures" in kb_cfg else None,
            kb_endpoints=dict(kb_cfg.get("endpoints", {})),
            kb_policy=kb_cfg.get("policy", "refine-only"),
            kb_precedence=tuple(kb_cfg.get("precedence", ("wikidata", "dbpedia", "yago"))),
            projection_alignments=path_of(proj_cfg["alignments"]) if "alignments" in proj_cfg else None,
            projection_target=path_of(proj_cfg["target_corpus"]) if "target_corpus" in proj_cfg else None,
            min_coverage=float(proj_cfg.get("min_coverage", 0.5)),
            on_collision=proj_cfg.get("on_collision", "drop"),
            gold=path_of(score_cfg["gold"]) if "gold" in score_cfg else None,
            match_level=score_cfg.get("match_level", "exact"),
            tasks_sampling=review_cfg.get("sampling"),
            tasks_quota=int(review_cfg.get("quota", 0)),
            tasks_fraction=float(review_cfg.get("fraction", 1.0)),
            tasks_seed=int(review_cfg.get("seed", 0)),
            verdict_log=path_of(review_cfg["verdict_log"]) if "verdict_log" in review_cfg else None,
            quorum=int(review_cfg.get("quorum", 3)),
            offline=bool(obj.get("offline", True)),
            raw=obj,
        )
        config.check()
        return config

    def check(self) -> None:
        """Fail fast: every referenced input must exist before any stage runs."""
        required = [("taxonomy", self.taxonomy), ("run_manifest", self.run_manifest)]
        required += [("scheme_mappings", p) for p in self.scheme_mappings]
        for key, maybe in (
            ("kb.mappings", self.kb_mappings),
            ("kb.fixtures", self.kb_fixtures),
            ("projection.alignments", self.projection_alignments),
            ("projection.target_corpus", self.projection_target),
            ("score.gold", self.gold),
            ("review.verdict_log", self.verdict_log),
        ):
            if maybe is not None:
                required.append((key, maybe))
        for key, path in required:
            if not Path(path).is_file():
                raise ConfigError(f"config key {key!r}: file {path} does not exist")
        if (self.projection_alignments is None) != (self.projection_target is None):
            raise ConfigError("projection needs both 'alignments' and 'target_corpus'")
        if self.kb_mappings is not None and self.kb_fixtures is None and not self.kb_endpoints:
            raise ConfigError("kb correction needs 'fixtures' (offline) or 'endpoints'")
        if self.offline and self.kb_endpoints:
            raise ConfigError("offline mode forbids kb endpoints; provide fixtures instead")
        if self.match_level != "exact":
            evaluation.check_match_level(self.match_level)
        projection.ProjectionConfig(self.min_coverage, self.on_collision)
        kb.CorrectionPolicy(self.kb_precedence, self.kb_policy)
        if self.tasks_sampling is not None and self.tasks_sampling not in ("all", "quota", "random"):
            raise ConfigError(f"unknown review sampling {self.tasks_sampling!r}")

    def digest(self) -> str:
        return hashlib.sha256(canonical_json(self.raw).encode("utf-8")).hexdigest()


def _deep_merge(base: dict, extra: dict) -> dict:
    out = dict(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = value
    return out


@dataclass
class StageResult:
    stage: str
    outputs: list[Path]


class _Provenance:
    def __init__(self, config: PipelineConfig):
        self.path = config.out_dir / "provenance.jsonl"
        self.config_digest = config.digest()
        self.records: list[dict] = []

    def record(self, stage: str, inputs: list[Path], outputs: list[Path]) -> None:
        self.records.append(
            {
                "stage": stage,
                "tool": f"uner {__version__}",
                "inputs": [
                    {"path": str(p), "sha256": sha256_file(p)} for p in inputs
                ],
                "outputs": [str(p) for p in outputs],
                "config_digest": self.config_digest,
                "ts": now_iso(),
            }
        )

    def flush(self) -> None:
        with open(self.path, "w", encoding="utf-8") as fh:
            for rec in self.records:
                fh.write(canonical_json(rec) + "\n")


def _write_report(path: Path, obj: dict) -> None:
    path.write_text(canonical_json(obj) + "\n", encoding="utf-8")


def _validated(corpus: dict, taxonomy: Taxonomy, stage: str) -> dict:
    for doc in corpus.values():
        problems = validate(doc, taxonomy)
        if problems:
            raise DataError(f"stage {stage!r} produced an invalid document: {problems[0]}")
    return corpus


@contextmanager
def _stage_errors(stage: str):
    """Prefix any stage failure with the stage name; earlier outputs stay on disk."""
    try:
        yield
    except ConfigError:
        raise
    except UnerError as exc:
        if f"stage {stage!r}" in str(exc):
            raise
        raise DataError(f"stage {stage!r} failed: {exc}") from exc


def run_pipeline(
    config: PipelineConfig,
    progress: Callable[[str], None] = lambda message: None,
) -> list[StageResult]:
    """Execute the configured stages in order; abort on the first stage error.

    Stages hand corpora to each other only through the interchange files they
    write, so each one is independently inspectable and re-runnable; earlier
    outputs are left on disk when a stage fails.
    """
    config.check()
    out_dir = config.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    taxonomy = load_taxonomy_file(config.taxonomy)
    mappings = {}
    for path in config.scheme_mappings:
        mappings.update(load_scheme_mappings(path, taxonomy))
    prov = _Provenance(config)
    results: list[StageResult] = []

    def finish_stage(stage: str, inputs: list[Path], outputs: list[Path]) -> None:
        prov.record(stage, inputs, outputs)
        prov.flush()
        results.append(StageResult(stage, outputs))
        progress(f"{stage}: " + ", ".join(str(p) for p in outputs))

    # merge
    merged_path = out_dir / "merged.jsonl"
    with _stage_errors("merge"):
        runs = ensemble.load_run_manifest(config.run_manifest)
        corpus, merge_report = ensemble.merge_corpus(runs, taxonomy, mappings)
        _validated(corpus, taxonomy, "merge")
        codecs.write_corpus(corpus.values(), merged_path)
        merge_report_path = out_dir / "merge_report.json"
        _write_report(merge_report_path, merge_report.to_dict())
    finish_stage("merge", [config.run_manifest, config.taxonomy], [merged_path, merge_report_path])
    current_path = merged_path

    # correct
    if config.kb_mappings is not None:
        corrected_path = out_dir / "corrected.jsonl"
        with _stage_errors("correct"):
            corpus = codecs.read_corpus(current_path)
            kb_maps = kb.load_kb_mappings(config.kb_mappings, taxonomy)
            policy = kb.CorrectionPolicy(config.kb_precedence, config.kb_policy)
            if config.kb_fixtures is not None:
                client: kb.KBClient = kb.FixtureKBClient.from_jsonl(config.kb_fixtures)
            else:
                client = kb.SparqlKBClient(config.kb_endpoints)
            corpus, correction_report, traces = kb.correct_corpus(corpus, client, kb_maps, policy)
            _validated(corpus, taxonomy, "correct")
            codecs.write_corpus(corpus.values(), corrected_path)
            correction_report_path = out_dir / "correction_report.json"
            _write_report(
                correction_report_path,
                {"report": correction_report.to_dict(), "traces": [t.to_dict() for t in traces]},
            )
        inputs = [current_path, config.kb_mappings]
        if config.kb_fixtures is not None:
            inputs.append(config.kb_fixtures)
        finish_stage("correct", inputs, [corrected_path, correction_report_path])
        current_path = corrected_path

    # review tasks / adjudication
    if config.tasks_sampling is not None:
        tasks_path = out_dir / "tasks.jsonl"
        with _stage_errors("tasks"):
            corpus = codecs.read_corpus(current_path)
            tasks = review.generate_tasks(
                corpus,
                taxonomy,
                sampling=config.tasks_sampling,
                quota=config.tasks_quota,
                fraction=config.tasks_fraction,
                seed=config.tasks_seed,
            )
            review.write_tasks(tasks, tasks_path)
        finish_stage("tasks", [current_path], [tasks_path])
        if config.verdict_log is not None:
            adjudicated_path = out_dir / "adjudicated.jsonl"
            with _stage_errors("adjudication"):
                verdicts = review.read_verdicts(config.verdict_log)
                corpus, agreement, _ = review.apply_verdicts(
                    corpus, tasks, verdicts, quorum=config.quorum, taxonomy=taxonomy
                )
                _validated(corpus, taxonomy, "adjudication")
                codecs.write_corpus(corpus.values(), adjudicated_path)
                agreement_path = out_dir / "agreement_report.json"
                _write_report(agreement_path, agreement.to_dict())
            finish_stage(
                "adjudication", [config.verdict_log], [adjudicated_path, agreement_path]
            )
            current_path = adjudicated_path

    # project
    if config.projection_alignments is not None and config.projection_target is not None:
        projected_path = out_dir / "projected.jsonl"
        with _stage_errors("project"):
            corpus = codecs.read_corpus(current_path)
            target_corpus = codecs.read_corpus(config.projection_target)
            alignments = projection.load_alignments(config.projection_alignments)
            pairs = projection.build_pairs(corpus, target_corpus, alignments)
            proj_config = projection.ProjectionConfig(config.min_coverage, config.on_collision)
            projected, proj_report = projection.project_corpus(pairs, proj_config)
            _validated(projected, taxonomy, "project")
            codecs.write_corpus(projected.values(), projected_path)
            proj_report_path = out_dir / "projection_report.json"
            _write_report(proj_report_path, proj_report.to_dict())
        finish_stage(
            "project",
            [config.projection_alignments, config.projection_target, current_path],
            [projected_path, proj_report_path],
        )

    # score
    if config.gold is not None:
        score_path = out_dir / "score.json"
        with _stage_errors("score"):
            corpus = codecs.read_corpus(current_path)
            gold = codecs.read_corpus(config.gold)
            score_report = evaluation.score(gold, corpus, config.match_level)
            _write_report(score_path, score_report.to_dict())
        finish_stage("score", [config.gold, current_path], [score_path])

    # stats over the final source-side corpus
    stats_path = out_dir / "stats.json"
    with _stage_errors("stats"):
        corpus = codecs.read_corpus(current_path)
        stats = evaluation.distribution_report(corpus, taxonomy)
        _write_report(stats_path, stats.to_dict())
    finish_stage("stats", [current_path], [stats_path])

    return results
