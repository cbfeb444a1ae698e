import itertools
import json

import pytest
from fastapi.testclient import TestClient

from uner import errors
from uner.documents import validate
from uner.review import (
    Verdict,
    VerdictLog,
    apply_verdicts,
    generate_tasks,
    read_tasks,
    read_verdicts,
    resolve_task,
    write_tasks,
)
from uner.service import create_app

from conftest import make_doc
from oracles import majority_oracle


def corpus_of(*docs):
    return {d.doc_id: d for d in docs}


def small_corpus():
    return corpus_of(
        make_doc("d1", ["Zagreb", "is", "nice"], [(0, 1, "Name.Location.City")]),
        make_doc("d2", ["Ana", "met", "Ivo"], [(0, 1, "Name.Person.Name"), (2, 3, "Name.Person.Name")]),
        make_doc("d3", ["EU", "acted"], [(0, 1, "Name.Organization")]),
    )


class TestGenerateTasks:
    def test_all_spans(self, taxonomy):
        tasks = generate_tasks(small_corpus(), taxonomy, sampling="all")
        assert len(tasks) == 4
        assert len({t.task_id for t in tasks}) == 4

    def test_quota(self, taxonomy):
        tasks = generate_tasks(small_corpus(), taxonomy, sampling="quota", quota=1)
        labels = [t.proposed_label for t in tasks]
        assert sorted(labels) == ["Name.Location.City", "Name.Organization", "Name.Person.Name"]

    def test_quota_two_per_label(self, taxonomy, label_pool):
        docs = []
        for k in range(5):
            label = label_pool[k]
            for n in range(3):
                docs.append(make_doc(f"d{k}-{n}", ["x"], [(0, 1, label)]))
        tasks = generate_tasks(corpus_of(*docs), taxonomy, sampling="quota", quota=2)
        assert len(tasks) == 10

    def test_random_deterministic(self, taxonomy):
        a = generate_tasks(small_corpus(), taxonomy, sampling="random", fraction=0.5, seed=7)
        b = generate_tasks(small_corpus(), taxonomy, sampling="random", fraction=0.5, seed=7)
        assert [t.to_dict() for t in a] == [t.to_dict() for t in b]

    def test_candidates_are_siblings_and_ancestors(self, taxonomy):
        tasks = generate_tasks(
            corpus_of(make_doc("d", ["x"], [(0, 1, "Name.Person.Name")])), taxonomy
        )
        candidates = set(tasks[0].candidate_labels)
        assert "Name.Person" in candidates and "Name" in candidates
        assert "Name.Person.Fictional" in candidates
        assert "Name.Person.Name" not in candidates

    def test_context_carries_char_range(self, taxonomy):
        tasks = generate_tasks(small_corpus(), taxonomy)
        t = tasks[0]
        assert t.text[t.char_start:t.char_end] == "Zagreb"

    def test_round_trip_file(self, tmp_path, taxonomy):
        tasks = generate_tasks(small_corpus(), taxonomy)
        path = tmp_path / "tasks.jsonl"
        write_tasks(tasks, path)
        assert [t.to_dict() for t in read_tasks(path)] == [t.to_dict() for t in tasks]


class TestVerdictLog:
    def test_append_and_reload(self, tmp_path):
        path = tmp_path / "log.jsonl"
        log = VerdictLog(path)
        log.append(Verdict("t1", "alice", "accept"))
        log.append(Verdict("t1", "bob", "reject"))
        assert len(log) == 2
        reloaded = VerdictLog(path)
        assert len(reloaded) == 2
        assert reloaded.has("t1", "alice")

    def test_duplicate_rejected(self, tmp_path):
        log = VerdictLog(tmp_path / "log.jsonl")
        log.append(Verdict("t1", "alice", "accept"))
        with pytest.raises(errors.DuplicateVerdict):
            log.append(Verdict("t1", "alice", "reject"))
        assert len(log) == 1

    def test_verdict_shape_enforced(self):
        with pytest.raises(errors.DataError):
            Verdict("t1", "alice", "relabel")  # label required
        with pytest.raises(errors.DataError):
            Verdict("t1", "alice", "accept", label="Name")
        with pytest.raises(errors.DataError):
            Verdict("t1", "alice", "maybe")

    def test_concurrent_appends_serialize(self, tmp_path):
        import threading

        log = VerdictLog(tmp_path / "log.jsonl")
        errors_seen = []

        def worker(k):
            try:
                for n in range(10):
                    log.append(Verdict(f"t{k}-{n}", f"annotator{k}", "accept"))
            except Exception as exc:  # pragma: no cover - failure path
                errors_seen.append(exc)

        threads = [threading.Thread(target=worker, args=(k,)) for k in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert not errors_seen
        assert len(log) == 80
        assert len(read_verdicts(tmp_path / "log.jsonl")) == 80


ACTION_SPACE = ["accept", "reject", ("relabel", "Name.Person.Name"), ("relabel", "Name.Person.Fictional")]


class TestMajorityRule:
    def test_all_multisets_up_to_three_match_oracle(self):
        for size in (1, 2, 3):
            for combo in itertools.combinations_with_replacement(ACTION_SPACE, size):
                verdicts = [
                    Verdict("t", f"a{i}", v, None) if isinstance(v, str)
                    else Verdict("t", f"a{i}", "relabel", v[1])
                    for i, v in enumerate(combo)
                ]
                outcome, label, _ = resolve_task(verdicts)
                expected = majority_oracle(list(combo))
                if expected == "tie":
                    assert outcome == "tied", combo
                elif isinstance(expected, tuple):
                    assert (outcome, label) == ("relabel", expected[1]), combo
                else:
                    assert outcome == expected, combo

    def test_spec_examples(self):
        # accept/accept/reject with quorum 3: kept, not unanimous
        outcome, _, unanimous = resolve_task(
            [Verdict("t", "a", "accept"), Verdict("t", "b", "accept"), Verdict("t", "c", "reject")]
        )
        assert outcome == "accept" and not unanimous
        # single reject with quorum 1: removed
        assert resolve_task([Verdict("t", "a", "reject")])[0] == "reject"
        # relabel vs reject tie: keep original
        outcome, _, _ = resolve_task(
            [Verdict("t", "a", "relabel", "Name"), Verdict("t", "b", "reject")]
        )
        assert outcome == "tied"


class TestApplyVerdicts:
    def setup_case(self, taxonomy):
        corpus = small_corpus()
        tasks = generate_tasks(corpus, taxonomy)
        index = {(t.doc_id, t.span_id): t.task_id for t in tasks}
        return corpus, tasks, index

    def test_accept_reject_relabel(self, taxonomy):
        corpus, tasks, index = self.setup_case(taxonomy)
        verdicts = [
            Verdict(index[("d1", "s0")], "a", "accept"),
            Verdict(index[("d2", "s0")], "a", "reject"),
            Verdict(index[("d2", "s1")], "a", "relabel", "Name.Person.Fictional"),
        ]
        corrected, report, resolutions = apply_verdicts(corpus, tasks, verdicts, quorum=1)
        assert corrected["d1"].spans[0].label == "Name.Location.City"
        assert len(corrected["d2"].spans) == 1
        assert corrected["d2"].spans[0].label == "Name.Person.Fictional"
        assert corrected["d2"].spans[0].source == "human"
        assert report.tasks_below_quorum == 1  # d3 task got no verdicts
        for doc in corrected.values():
            assert validate(doc, taxonomy) == []

    def test_quorum_unmet_leaves_unapplied(self, taxonomy):
        corpus, tasks, index = self.setup_case(taxonomy)
        verdicts = [Verdict(index[("d2", "s0")], "a", "reject")]
        corrected, report, _ = apply_verdicts(corpus, tasks, verdicts, quorum=2)
        assert len(corrected["d2"].spans) == 2  # nothing applied
        assert report.tasks_below_quorum == len(tasks)
        assert index[("d2", "s0")] in report.below_quorum

    def test_tie_keeps_original_and_flags(self, taxonomy):
        corpus, tasks, index = self.setup_case(taxonomy)
        task_id = index[("d1", "s0")]
        verdicts = [
            Verdict(task_id, "a", "relabel", "Name.Location"),
            Verdict(task_id, "b", "reject"),
        ]
        corrected, report, _ = apply_verdicts(corpus, tasks, verdicts, quorum=2)
        assert corrected["d1"].spans[0].label == "Name.Location.City"
        assert report.tasks_tied == 1 and task_id in report.tied

    def test_idempotent_reapplication(self, taxonomy):
        corpus, tasks, index = self.setup_case(taxonomy)
        verdicts = [
            Verdict(index[("d1", "s0")], "a", "relabel", "Name.Location"),
            Verdict(index[("d2", "s0")], "a", "reject"),
            Verdict(index[("d2", "s1")], "a", "accept"),
            Verdict(index[("d3", "s0")], "a", "accept"),
        ]
        once, _, _ = apply_verdicts(corpus, tasks, verdicts, quorum=1)
        twice, _, _ = apply_verdicts(once, tasks, verdicts, quorum=1)
        assert {d: doc.spans for d, doc in twice.items()} == {
            d: doc.spans for d, doc in once.items()
        }

    def test_unknown_task_rejected(self, taxonomy):
        corpus, tasks, _ = self.setup_case(taxonomy)
        with pytest.raises(errors.DataError):
            apply_verdicts(corpus, tasks, [Verdict("tZZ", "a", "accept")], quorum=1)

    def test_agreement_report(self, taxonomy):
        corpus, tasks, index = self.setup_case(taxonomy)
        verdicts = [
            Verdict(index[("d1", "s0")], "a", "accept"),
            Verdict(index[("d1", "s0")], "b", "accept"),
            Verdict(index[("d2", "s0")], "a", "accept"),
            Verdict(index[("d2", "s0")], "b", "reject"),
            Verdict(index[("d2", "s0")], "c", "reject"),
        ]
        _, report, _ = apply_verdicts(corpus, tasks, verdicts, quorum=2)
        assert report.tasks_resolved == 2
        assert report.unanimous_fraction == 0.5
        assert report.accept_rate_per_label["Name.Location.City"] == 1.0
        assert report.accept_rate_per_label["Name.Person.Name"] == pytest.approx(1 / 3)


@pytest.fixture()
def service(tmp_path, taxonomy):
    corpus = small_corpus()
    tasks = generate_tasks(corpus, taxonomy)
    app = create_app(tasks, tmp_path / "verdicts.jsonl", taxonomy)
    return TestClient(app), tasks, tmp_path / "verdicts.jsonl"


class TestService:
    def test_next_task_and_progress_counter(self, service):
        client, tasks, _ = service
        first = client.get("/tasks/next", params={"annotator": "alice"})
        assert first.status_code == 200
        task = first.json()
        response = client.post(
            "/verdicts",
            json={"task_id": task["task_id"], "annotator_id": "alice", "action": "accept"},
        )
        assert response.status_code == 201
        progress = client.get("/progress").json()
        assert progress["done"] == 1
        assert progress["verdicts"] == 1
        assert progress["per_annotator"] == {"alice": 1}

    def test_next_skips_judged(self, service):
        client, tasks, _ = service
        seen = []
        for _ in tasks:
            task = client.get("/tasks/next", params={"annotator": "alice"}).json()
            seen.append(task["task_id"])
            client.post(
                "/verdicts",
                json={"task_id": task["task_id"], "annotator_id": "alice", "action": "accept"},
            )
        assert len(set(seen)) == len(tasks)
        done = client.get("/tasks/next", params={"annotator": "alice"})
        assert done.status_code == 204
        # another annotator still gets tasks
        other = client.get("/tasks/next", params={"annotator": "bob"})
        assert other.status_code == 200

    def test_duplicate_verdict_409(self, service):
        client, tasks, log_path = service
        body = {"task_id": tasks[0].task_id, "annotator_id": "alice", "action": "accept"}
        assert client.post("/verdicts", json=body).status_code == 201
        assert client.post("/verdicts", json=body).status_code == 409
        assert len(read_verdicts(log_path)) == 1

    def test_unknown_task_404(self, service):
        client, _, _ = service
        response = client.post(
            "/verdicts", json={"task_id": "nope", "annotator_id": "a", "action": "accept"}
        )
        assert response.status_code == 404

    def test_malformed_verdict_400(self, service):
        client, tasks, _ = service
        bad_action = client.post(
            "/verdicts", json={"task_id": tasks[0].task_id, "annotator_id": "a", "action": "explode"}
        )
        assert bad_action.status_code == 400
        missing_label = client.post(
            "/verdicts", json={"task_id": tasks[0].task_id, "annotator_id": "a", "action": "relabel"}
        )
        assert missing_label.status_code == 400
        bad_label = client.post(
            "/verdicts",
            json={
                "task_id": tasks[0].task_id,
                "annotator_id": "a",
                "action": "relabel",
                "label": "Name.Banana",
            },
        )
        assert bad_label.status_code == 400
        stray_label = client.post(
            "/verdicts",
            json={
                "task_id": tasks[0].task_id,
                "annotator_id": "a",
                "action": "accept",
                "label": "Name",
            },
        )
        assert stray_label.status_code == 400

    def test_relabel_persisted_and_applied(self, service, taxonomy):
        client, tasks, log_path = service
        target = tasks[0]
        response = client.post(
            "/verdicts",
            json={
                "task_id": target.task_id,
                "annotator_id": "carol",
                "action": "relabel",
                "label": "Name.Location",
            },
        )
        assert response.status_code == 201
        verdicts = read_verdicts(log_path)
        corrected, _, _ = apply_verdicts(small_corpus(), tasks, verdicts, quorum=1)
        changed = [
            s for s in corrected[target.doc_id].spans if s.span_id == target.span_id
        ]
        assert changed[0].label == "Name.Location" and changed[0].source == "human"

    def test_taxonomy_endpoints(self, service):
        client, _, _ = service
        levels = client.get("/taxonomy/levels").json()
        assert levels["counts"] == [1, 3, 29, 95, 129]
        hit = client.get("/taxonomy/resolve", params={"path": "Name.Person.Name"}).json()
        assert hit["exists"] and hit["level"] == 3
        miss = client.get("/taxonomy/resolve", params={"path": "Name.Banana"}).json()
        assert not miss["exists"] and miss["deepest_valid_prefix"] == "Name"
        tree = client.get("/taxonomy").json()
        assert tree["name"] == "TOP" and len(tree["children"]) == 3

    def test_log_survives_restart(self, service, taxonomy, tmp_path):
        client, tasks, log_path = service
        client.post(
            "/verdicts",
            json={"task_id": tasks[0].task_id, "annotator_id": "a", "action": "accept"},
        )
        fresh = TestClient(create_app(tasks, log_path, taxonomy))
        assert fresh.get("/progress").json()["verdicts"] == 1
        dup = fresh.post(
            "/verdicts",
            json={"task_id": tasks[0].task_id, "annotator_id": "a", "action": "accept"},
        )
        assert dup.status_code == 409
