import json
from pathlib import Path

import pytest

from uner import codecs, errors
from uner.cli import main
from uner.documents import validate
from uner.pipeline import PipelineConfig, run_pipeline
from uner.taxonomy import load_bundled_taxonomy

from conftest import make_doc
from synthgen import build_workspace


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("synth")
    config_path = build_workspace(root, n_sentences=60, seed=7)
    return root, config_path


class TestPipeline:
    def test_all_stages_produce_valid_output(self, workspace, taxonomy):
        root, config_path = workspace
        config = PipelineConfig.from_file(config_path)
        results = run_pipeline(config)
        stages = [r.stage for r in results]
        assert stages == ["merge", "correct", "project", "score", "stats"]
        for name in ("merged", "corrected", "projected"):
            docs = list(codecs.iter_corpus(root / "out" / f"{name}.jsonl"))
            assert docs
            for doc in docs:
                assert validate(doc, taxonomy) == []
        score = json.loads((root / "out" / "score.json").read_text())
        assert 0.0 < score["f1"] <= 1.0
        provenance = [
            json.loads(line)
            for line in (root / "out" / "provenance.jsonl").read_text().splitlines()
        ]
        assert [p["stage"] for p in provenance] == stages
        assert all(p["config_digest"] == config.digest() for p in provenance)

    def test_rerun_byte_identical_except_timestamps(self, workspace):
        root, config_path = workspace
        out = root / "out"
        run_pipeline(PipelineConfig.from_file(config_path))
        first = {p.name: p.read_bytes() for p in out.iterdir()}
        run_pipeline(PipelineConfig.from_file(config_path))
        second = {p.name: p.read_bytes() for p in out.iterdir()}
        assert set(first) == set(second)
        for name in first:
            if name == "provenance.jsonl":
                strip = lambda raw: [
                    {k: v for k, v in json.loads(line).items() if k != "ts"}
                    for line in raw.decode().splitlines()
                ]
                assert strip(first[name]) == strip(second[name])
            else:
                assert first[name] == second[name], name

    def test_missing_taxonomy_fails_fast(self, workspace):
        root, config_path = workspace
        obj = json.loads(config_path.read_text())
        obj["taxonomy"] = "nope.json"
        bad = root / "broken.json"
        bad.write_text(json.dumps(obj))
        with pytest.raises(errors.ConfigError):
            PipelineConfig.from_file(bad)
        assert not (root / "out-broken").exists()

    def test_projection_disabled_skips_to_scoring(self, workspace):
        root, config_path = workspace
        obj = json.loads(config_path.read_text())
        del obj["projection"]
        obj["out_dir"] = "out-noproj"
        cfg_path = root / "pipeline-noproj.json"
        cfg_path.write_text(json.dumps(obj))
        results = run_pipeline(PipelineConfig.from_file(cfg_path))
        assert [r.stage for r in results] == ["merge", "correct", "score", "stats"]

    def test_stage_failure_names_stage_and_keeps_artifacts(self, tmp_path):
        config_path = build_workspace(tmp_path, n_sentences=15, seed=12)
        (tmp_path / "alignments.tsv").write_text("s000000\t0:0\n", encoding="utf-8")
        obj = json.loads(config_path.read_text())
        obj["out_dir"] = "out-fail"
        cfg = tmp_path / "fail.json"
        cfg.write_text(json.dumps(obj))
        with pytest.raises(errors.DataError) as exc:
            run_pipeline(PipelineConfig.from_file(cfg))
        assert "stage 'project'" in str(exc.value)
        # earlier stage outputs survive the abort
        assert (tmp_path / "out-fail" / "merged.jsonl").exists()
        assert (tmp_path / "out-fail" / "corrected.jsonl").exists()
        assert not (tmp_path / "out-fail" / "projected.jsonl").exists()

    def test_offline_with_endpoints_rejected(self, workspace):
        root, config_path = workspace
        obj = json.loads(config_path.read_text())
        obj["kb"] = {"mappings": "kb_class_mappings.tsv",
                     "endpoints": {"dbpedia": "https://example.org"}}
        bad = root / "online.json"
        bad.write_text(json.dumps(obj))
        with pytest.raises(errors.ConfigError):
            PipelineConfig.from_file(bad)


class TestCli:
    def test_validate_taxonomy_bundled(self, capsys):
        assert main(["validate-taxonomy"]) == 0
        out = capsys.readouterr().out
        assert "(1, 3, 29, 95, 129)" in out

    def test_validate_taxonomy_sekine(self, capsys):
        assert main(["validate-taxonomy", "--taxonomy", "sekine"]) == 0
        assert "(1, 3, 28, 87, 125)" in capsys.readouterr().out

    def test_validate_taxonomy_wrong_expectation(self, capsys):
        assert main(["validate-taxonomy", "--expect-counts", "1,1,1,1,1"]) == 1

    def test_convert_round_trip(self, tmp_path, capsys):
        docs = [make_doc("d0", ["Ana", "met", "Ivo"], [(0, 1, "Name.Person.Name")])]
        spans_path = tmp_path / "c.jsonl"
        codecs.write_corpus(docs, spans_path)
        iob_path = tmp_path / "c.iob2"
        assert main(["convert", "--in", str(spans_path), "--out", str(iob_path),
                     "--from", "spans", "--to", "iob2"]) == 0
        assert "B-Name.Person.Name" in iob_path.read_text()
        back_path = tmp_path / "back.jsonl"
        assert main(["convert", "--in", str(iob_path), "--out", str(back_path),
                     "--from", "iob2", "--to", "spans"]) == 0
        back = list(codecs.iter_corpus(back_path))
        assert back[0].span_keys() == docs[0].span_keys()

    def test_convert_xml(self, tmp_path):
        docs = [make_doc("d0", ["Zagreb", "danas"], [(0, 1, "Name.Location.City")])]
        spans_path = tmp_path / "c.jsonl"
        codecs.write_corpus(docs, spans_path)
        xml_path = tmp_path / "c.xml"
        assert main(["convert", "--in", str(spans_path), "--out", str(xml_path),
                     "--from", "spans", "--to", "xml"]) == 0
        assert xml_path.read_text().startswith("<Name.Location.City>Zagreb</Name.Location.City>")

    def test_run_and_validate_corpus(self, tmp_path, capsys):
        config_path = build_workspace(tmp_path, n_sentences=25, seed=3)
        assert main(["run", "--config", str(config_path)]) == 0
        for stage in ("merged", "corrected", "projected"):
            code = main(["validate-corpus", "--in", str(tmp_path / "out" / f"{stage}.jsonl")])
            assert code == 0

    def test_run_with_override(self, tmp_path, capsys):
        config_path = build_workspace(tmp_path, n_sentences=10, seed=4)
        assert main(["run", "--config", str(config_path), "--out-dir",
                     str(tmp_path / "elsewhere")]) == 0
        assert (tmp_path / "elsewhere" / "merged.jsonl").exists()

    def test_run_set_override(self, tmp_path):
        config_path = build_workspace(tmp_path, n_sentences=10, seed=5)
        assert main(["run", "--config", str(config_path),
                     "--set", "projection.min_coverage=0.9",
                     "--set", "out_dir=strict"]) == 0
        report = json.loads((tmp_path / "strict" / "projection_report.json").read_text())
        assert report["config"]["min_coverage"] == 0.9

    def test_exit_code_config_error(self, tmp_path, capsys):
        assert main(["run", "--config", str(tmp_path / "missing.json")]) == 2

    def test_exit_code_data_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.jsonl"
        bad.write_text('{"doc_id": "d"}\n')
        assert main(["validate-corpus", "--in", str(bad)]) == 1

    def test_merge_correct_project_score_stats_subcommands(self, tmp_path, capsys):
        root = tmp_path
        build_workspace(root, n_sentences=20, seed=6)
        out = root / "cliout"
        out.mkdir()
        assert main(["merge", "--manifest", str(root / "runs.tsv"),
                     "--taxonomy", str(root / "uner_hierarchy.json"),
                     "--mappings", str(root / "scheme_mappings.tsv"),
                     "--out", str(out / "merged.jsonl"),
                     "--report", str(out / "merge.json")]) == 0
        assert main(["correct", "--in", str(out / "merged.jsonl"),
                     "--out", str(out / "corrected.jsonl"),
                     "--kb-mappings", str(root / "kb_class_mappings.tsv"),
                     "--fixtures", str(root / "kb_fixtures.jsonl"),
                     "--offline",
                     "--taxonomy", str(root / "uner_hierarchy.json"),
                     "--report", str(out / "correct.json")]) == 0
        assert main(["project", "--source", str(out / "corrected.jsonl"),
                     "--target", str(root / "target.jsonl"),
                     "--alignments", str(root / "alignments.tsv"),
                     "--out", str(out / "projected.jsonl"),
                     "--report", str(out / "project.json")]) == 0
        assert main(["score", "--gold", str(root / "gold.jsonl"),
                     "--pred", str(out / "corrected.jsonl"),
                     "--level", "2",
                     "--report", str(out / "score.json")]) == 0
        assert "ALL" in capsys.readouterr().out
        assert main(["stats", "--in", str(out / "corrected.jsonl"),
                     "--taxonomy", str(root / "uner_hierarchy.json"),
                     "--report", str(out / "stats.json")]) == 0
        stats = json.loads((out / "stats.json").read_text())
        assert stats["total_spans"] > 0

    def test_tasks_serve_apply_verdicts_flow(self, tmp_path):
        root = tmp_path
        build_workspace(root, n_sentences=8, seed=8)
        out = root / "flow"
        out.mkdir()
        assert main(["merge", "--manifest", str(root / "runs.tsv"),
                     "--taxonomy", str(root / "uner_hierarchy.json"),
                     "--mappings", str(root / "scheme_mappings.tsv"),
                     "--out", str(out / "merged.jsonl")]) == 0
        assert main(["tasks", "--in", str(out / "merged.jsonl"),
                     "--taxonomy", str(root / "uner_hierarchy.json"),
                     "--out", str(out / "tasks.jsonl"),
                     "--sample", "quota:1"]) == 0
        from uner.review import Verdict, read_tasks, VerdictLog

        tasks = read_tasks(out / "tasks.jsonl")
        log = VerdictLog(out / "verdicts.jsonl")
        for task in tasks:
            log.append(Verdict(task.task_id, "annotator1", "accept"))
        assert main(["apply-verdicts", "--corpus", str(out / "merged.jsonl"),
                     "--tasks", str(out / "tasks.jsonl"),
                     "--log", str(out / "verdicts.jsonl"),
                     "--quorum", "1",
                     "--out", str(out / "adjudicated.jsonl"),
                     "--report", str(out / "agreement.json")]) == 0
        agreement = json.loads((out / "agreement.json").read_text())
        assert agreement["tasks_resolved"] == len(tasks)

    def test_export_subcommand(self, tmp_path):
        root = tmp_path
        build_workspace(root, n_sentences=30, seed=9)
        assert main(["merge", "--manifest", str(root / "runs.tsv"),
                     "--taxonomy", str(root / "uner_hierarchy.json"),
                     "--mappings", str(root / "scheme_mappings.tsv"),
                     "--out", str(root / "merged.jsonl")]) == 0
        assert main(["export", "--in", str(root / "merged.jsonl"),
                     "--out-dir", str(root / "splits"),
                     "--format", "iob2",
                     "--taxonomy", str(root / "uner_hierarchy.json")]) == 0
        assert (root / "splits" / "train.iob2").exists()
