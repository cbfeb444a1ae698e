"""Command-line entry point.

Exit codes: 0 success, 1 data error, 2 configuration/usage error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__, codecs, ensemble, evaluation, kb, projection, review
from .documents import Violation, validate
from .errors import ConfigError, DataError, UnerError
from .pipeline import PipelineConfig, canonical_json, run_pipeline
from .taxonomy import (
    SEKINE_LEVEL_COUNTS,
    UNER_LEVEL_COUNTS,
    Taxonomy,
    load_bundled_scheme_mappings,
    load_bundled_taxonomy,
    load_scheme_mappings,
    load_taxonomy_file,
)

FORMATS = ("spans", "iob2", "xml")


def _taxonomy_arg(value: str | None) -> Taxonomy:
    if value in (None, "uner", "sekine"):
        return load_bundled_taxonomy(value or "uner")
    return load_taxonomy_file(value)


def _iter_docs(path: str, fmt: str, taxonomy: Taxonomy | None):
    if fmt == "spans":
        return codecs.iter_corpus(path)  # lazy: one document in memory at a time
    if fmt == "iob2":
        return codecs.read_iob2(path, taxonomy)
    return codecs.read_inline_xml(path, taxonomy=taxonomy)


def _emit_report(report: dict, path: str | None) -> None:
    text = canonical_json(report) + "\n"
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_validate_taxonomy(args) -> int:
    taxonomy = _taxonomy_arg(args.taxonomy)
    counts = taxonomy.level_counts()
    expected = None
    if args.expect_counts:
        expected = tuple(int(x) for x in args.expect_counts.split(","))
    elif args.taxonomy in (None, "uner"):
        expected = UNER_LEVEL_COUNTS
    elif args.taxonomy == "sekine":
        expected = SEKINE_LEVEL_COUNTS
    print(f"levels 0-4: {counts}")
    if expected is not None and counts != expected:
        print(f"expected {expected}", file=sys.stderr)
        return 1
    print("taxonomy ok")
    return 0


def cmd_convert(args) -> int:
    taxonomy = _taxonomy_arg(args.taxonomy) if args.taxonomy else None
    docs = _iter_docs(args.input, args.from_format, taxonomy)
    with open(args.output, "w", encoding="utf-8") as fh:
        first = True
        for doc in docs:
            if args.to_format == "spans":
                fh.write(codecs.dumps_record(codecs.encode_spans(doc)) + "\n")
            elif args.to_format == "iob2":
                if not first:
                    fh.write("\n")
                for line in codecs.iter_iob2_lines(doc):
                    fh.write(line + "\n")
            else:
                fh.write(codecs.encode_inline_xml(doc, for_line=True) + "\n")
            first = False
    return 0


def cmd_validate_corpus(args) -> int:
    taxonomy = _taxonomy_arg(args.taxonomy)
    mapping = None
    if args.scheme:
        mappings = (
            load_scheme_mappings(args.mappings, taxonomy)
            if args.mappings
            else load_bundled_scheme_mappings(taxonomy)
        )
        if args.scheme not in mappings:
            raise ConfigError(f"no mapping table for scheme {args.scheme!r}")
        mapping = mappings[args.scheme]
    violations = []
    count = 0
    for doc in codecs.iter_corpus(args.input):
        count += 1
        if mapping is None:
            violations.extend(validate(doc, taxonomy))
        else:
            # external-scheme corpus: structural checks plus inventory closure
            violations.extend(validate(doc, None))
            for span in doc.spans:
                if span.label not in mapping.entries:
                    violations.append(
                        Violation(
                            "UnmappedLabel",
                            f"{doc.doc_id}/span[{span.span_id}]",
                            f"label {span.label!r} not in scheme {args.scheme!r}",
                        )
                    )
    for v in violations:
        print(v, file=sys.stderr)
    print(f"{count} documents, {len(violations)} violations")
    return 1 if violations else 0


def cmd_merge(args) -> int:
    taxonomy = _taxonomy_arg(args.taxonomy)
    mappings = (
        load_scheme_mappings(args.mappings, taxonomy)
        if args.mappings
        else load_bundled_scheme_mappings(taxonomy)
    )
    runs = ensemble.load_run_manifest(args.manifest)
    corpus, report = ensemble.merge_corpus(runs, taxonomy, mappings)
    codecs.write_corpus(corpus.values(), args.output)
    _emit_report(report.to_dict(), args.report)
    return 0


def cmd_correct(args) -> int:
    taxonomy = _taxonomy_arg(args.taxonomy)
    if args.offline and args.endpoint:
        raise ConfigError("--offline forbids --endpoint; use --fixtures")
    if not args.fixtures and not args.endpoint:
        raise ConfigError("correction needs --fixtures (offline) or --endpoint kb_id=url")
    mappings = kb.load_kb_mappings(args.kb_mappings, taxonomy)
    if args.fixtures:
        client: kb.KBClient = kb.FixtureKBClient.from_jsonl(args.fixtures)
    else:
        endpoints = {}
        for spec in args.endpoint:
            kb_id, sep, url = spec.partition("=")
            if not sep:
                raise ConfigError(f"--endpoint expects kb_id=url, got {spec!r}")
            endpoints[kb_id] = url
        client = kb.SparqlKBClient(endpoints)
    precedence = tuple(args.precedence.split(",")) if args.precedence else ("wikidata", "dbpedia", "yago")
    policy = kb.CorrectionPolicy(precedence, args.policy)
    corpus = codecs.read_corpus(args.input)
    corrected, report, traces = kb.correct_corpus(corpus, client, mappings, policy)
    codecs.write_corpus(corrected.values(), args.output)
    _emit_report({"report": report.to_dict(), "traces": [t.to_dict() for t in traces]}, args.report)
    return 0


def cmd_project(args) -> int:
    source = codecs.read_corpus(args.source)
    target = codecs.read_corpus(args.target)
    alignments = projection.load_alignments(args.alignments)
    pairs = projection.build_pairs(source, target, alignments)
    config = projection.ProjectionConfig(args.min_coverage, args.on_collision)
    projected, report = projection.project_corpus(pairs, config)
    codecs.write_corpus(projected.values(), args.output)
    _emit_report(report.to_dict(), args.report)
    return 0


def cmd_score(args) -> int:
    level: "int | str" = "exact" if args.level == "exact" else int(args.level)
    gold = codecs.read_corpus(args.gold)
    pred = codecs.read_corpus(args.pred)
    report = evaluation.score(gold, pred, level)
    print(report.table())
    if args.report:
        _emit_report(report.to_dict(), args.report)
    return 0


def cmd_stats(args) -> int:
    taxonomy = _taxonomy_arg(args.taxonomy)
    corpus = codecs.read_corpus(args.input)
    report = evaluation.distribution_report(corpus, taxonomy, args.surface_head)
    _emit_report(report.to_dict(), args.report)
    return 0


def cmd_export(args) -> int:
    taxonomy = _taxonomy_arg(args.taxonomy)
    corpus = codecs.read_corpus(args.input)
    written = evaluation.export_training(corpus, args.format, args.out_dir, taxonomy)
    for name, path in written.items():
        print(f"{name}: {path}")
    return 0


def cmd_tasks(args) -> int:
    taxonomy = _taxonomy_arg(args.taxonomy)
    corpus = codecs.read_corpus(args.input)
    mode, quota, fraction, seed = "all", 0, 1.0, 0
    if args.sample != "all":
        kind, _, rest = args.sample.partition(":")
        if kind == "quota":
            mode, quota = "quota", int(rest)
        elif kind == "random":
            frac_text, _, seed_text = rest.partition(":")
            mode, fraction, seed = "random", float(frac_text), int(seed_text or "0")
        else:
            raise ConfigError(f"unknown --sample {args.sample!r}")
    tasks = review.generate_tasks(
        corpus, taxonomy, sampling=mode, quota=quota, fraction=fraction, seed=seed
    )
    count = review.write_tasks(tasks, args.output)
    print(f"{count} tasks -> {args.output}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    taxonomy = _taxonomy_arg(args.taxonomy)
    app = create_app(args.tasks, args.log, taxonomy, static_dir=args.static)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def cmd_apply_verdicts(args) -> int:
    taxonomy = _taxonomy_arg(args.taxonomy)
    corpus = codecs.read_corpus(args.corpus)
    tasks = review.read_tasks(args.tasks)
    verdicts = review.read_verdicts(args.log)
    corrected, agreement, _ = review.apply_verdicts(
        corpus, tasks, verdicts, quorum=args.quorum, taxonomy=taxonomy
    )
    codecs.write_corpus(corrected.values(), args.output)
    _emit_report(agreement.to_dict(), args.report)
    return 0


def cmd_run(args) -> int:
    overrides: dict = {}
    for item in args.set or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        cursor = overrides
        parts = key.split(".")
        for part in parts[:-1]:
            cursor = cursor.setdefault(part, {})
        try:
            cursor[parts[-1]] = json.loads(value)
        except json.JSONDecodeError:
            cursor[parts[-1]] = value
    if args.out_dir:
        overrides["out_dir"] = args.out_dir
    if args.offline:
        overrides["offline"] = True
    config = PipelineConfig.from_file(args.config, overrides)
    run_pipeline(config, progress=print)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uner",
        description="UNER corpus toolkit: validate, convert, merge, correct, project, score, review.",
    )
    parser.add_argument("--version", action="version", version=f"uner {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_taxonomy(p, required=False):
        p.add_argument(
            "--taxonomy",
            default=None if not required else "uner",
            help="taxonomy file path, or the bundled 'uner' (default) / 'sekine'",
        )

    p = sub.add_parser("validate-taxonomy", help="load a taxonomy and check its level counts")
    add_taxonomy(p)
    p.add_argument("--expect-counts", help="comma-separated expected counts for levels 0-4")
    p.set_defaults(func=cmd_validate_taxonomy)

    p = sub.add_parser("convert", help="convert a corpus between spans/iob2/xml")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--from", dest="from_format", choices=FORMATS, required=True)
    p.add_argument("--to", dest="to_format", choices=FORMATS, required=True)
    add_taxonomy(p)
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("validate-corpus", help="check every document against the taxonomy")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--scheme", help="treat labels as this external scheme and check inventory closure")
    p.add_argument("--mappings", help="scheme mapping TSV (default: bundled tables)")
    add_taxonomy(p)
    p.set_defaults(func=cmd_validate_corpus)

    p = sub.add_parser("merge", help="recall-priority merge of tagger runs")
    p.add_argument("--manifest", required=True, help="run manifest TSV")
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--mappings", help="scheme mapping TSV (default: bundled tables)")
    p.add_argument("--report", help="write the merge report JSON here")
    add_taxonomy(p)
    p.set_defaults(func=cmd_merge)

    p = sub.add_parser("correct", help="knowledge-base label correction")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--kb-mappings", required=True, help="kb class mapping TSV")
    p.add_argument("--fixtures", help="offline fixture store JSONL")
    p.add_argument("--endpoint", action="append", help="kb_id=url (repeatable, live mode)")
    p.add_argument("--policy", choices=kb.ACTIONS, default="refine-only")
    p.add_argument("--precedence", help="comma-separated kb ids, highest first")
    p.add_argument("--offline", action="store_true", help="forbid all network use")
    p.add_argument("--report")
    add_taxonomy(p)
    p.set_defaults(func=cmd_correct)

    p = sub.add_parser("project", help="project annotations across word alignments")
    p.add_argument("--source", required=True, help="annotated source corpus")
    p.add_argument("--target", required=True, help="unannotated target corpus")
    p.add_argument("--alignments", required=True, help="pair_id<TAB>i-j i-j ... file")
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--min-coverage", type=float, default=0.5)
    p.add_argument("--on-collision", choices=projection.COLLISION_MODES, default="drop")
    p.add_argument("--report")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("score", help="span-level precision/recall/F1")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--level", default="exact", choices=("exact", "1", "2", "3", "4"))
    p.add_argument("--report")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("stats", help="entity distribution profile of a corpus")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--report")
    p.add_argument("--surface-head", type=int, default=20)
    add_taxonomy(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("export", help="deterministic train/dev/test export")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--format", choices=("iob2", "spans"), default="iob2")
    add_taxonomy(p)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("tasks", help="generate review tasks from a corpus")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--sample", default="all", help="all | quota:N | random:FRACTION[:SEED]")
    add_taxonomy(p)
    p.set_defaults(func=cmd_tasks)

    p = sub.add_parser("serve", help="serve review tasks over HTTP")
    p.add_argument("--tasks", required=True, help="tasks JSONL")
    p.add_argument("--log", required=True, help="append-only verdict log path")
    p.add_argument("--port", type=int, default=8400)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--static", help="directory with the browser UI bundle")
    add_taxonomy(p)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("apply-verdicts", help="apply adjudicated verdicts to a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--tasks", required=True)
    p.add_argument("--log", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--quorum", type=int, default=3)
    p.add_argument("--report")
    add_taxonomy(p)
    p.set_defaults(func=cmd_apply_verdicts)

    p = sub.add_parser("run", help="run the configured pipeline end to end")
    p.add_argument("--config", required=True, help="pipeline config JSON")
    p.add_argument("--out-dir", help="override the configured output directory")
    p.add_argument("--offline", action="store_true", help="forbid all network use")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override any config key (dotted paths, JSON values)")
    p.set_defaults(func=cmd_run)

    return parser


def main(argv: "list[str] | None" = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except UnerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
