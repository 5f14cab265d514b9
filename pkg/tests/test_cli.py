import io
import json

import pytest

from imrec.cli import main
from imrec.corpus import load_corpus

DRAFT = {
    "summary": "problem involving traceback behavior",
    "description": "the traceback traceback appears with a full error printout",
}


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """A generated corpus plus a model trained from it, built through the CLI."""
    root = tmp_path_factory.mktemp("cli")
    corpus = root / "corpus.jsonl"
    model = root / "model.json"
    assert main(["gen-corpus", "--n", "60", "--seed", "3", "--out", str(corpus)]) == 0
    assert main(["train", "--corpus", str(corpus), "--out", str(model), "--seed", "3"]) == 0
    return root, corpus, model


class TestExitCodes:
    def test_no_command_is_usage(self, capsys):
        assert main([]) == 1
        capsys.readouterr()

    def test_unknown_flag_is_usage(self, capsys):
        assert main(["train", "--bogus"]) == 1
        capsys.readouterr()

    def test_help_exits_clean(self, capsys):
        assert main(["--help"]) == 0
        assert "gen-corpus" in capsys.readouterr().out

    def test_missing_corpus_file_is_io(self, tmp_path, capsys):
        rc = main(["train", "--corpus", str(tmp_path / "absent.jsonl"), "--out", str(tmp_path / "m.json")])
        assert rc == 3
        capsys.readouterr()

    def test_unlabeled_corpus_is_data_error(self, tmp_path, capsys):
        corpus = tmp_path / "c.jsonl"
        corpus.write_text('{"id": "r1", "summary": "s", "description": "d"}\n', encoding="utf-8")
        assert main(["train", "--corpus", str(corpus), "--out", str(tmp_path / "m.json")]) == 2
        assert "has_image" in capsys.readouterr().err


class TestGenCorpus:
    def test_writes_loadable_jsonl(self, tmp_path, capsys):
        out = tmp_path / "c.jsonl"
        assert main(["gen-corpus", "--n", "40", "--seed", "1", "--out", str(out)]) == 0
        assert "wrote 40 synthetic reports" in capsys.readouterr().out
        assert len(load_corpus(out)) == 40

    def test_too_small_n_is_data_error(self, tmp_path, capsys):
        assert main(["gen-corpus", "--n", "10", "--seed", "1", "--out", str(tmp_path / "c.jsonl")]) == 2
        capsys.readouterr()


class TestTrainEvaluate:
    def test_train_reports_summary(self, workspace, capsys, tmp_path):
        _, corpus, _ = workspace
        out = tmp_path / "m.json"
        assert main(["train", "--corpus", str(corpus), "--out", str(out), "--seed", "3"]) == 0
        stdout = capsys.readouterr().out
        assert "trained model " in stdout
        assert "members=forest,gnb" in stdout
        assert json.loads(out.read_text(encoding="utf-8"))["format_version"] == 1

    def test_evaluate_human_output(self, workspace, capsys):
        _, corpus, model = workspace
        rc = main(["evaluate", "--corpus", str(corpus), "--model", str(model), "--seed", "3"])
        assert rc == 0
        stdout = capsys.readouterr().out
        assert "binary: tp=" in stdout
        assert "multilabel:" in stdout

    def test_evaluate_json_output(self, workspace, capsys):
        _, corpus, model = workspace
        rc = main(["evaluate", "--corpus", str(corpus), "--model", str(model), "--seed", "3", "--json"])
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        assert set(payload) == {"n_train", "n_test", "binary", "multilabel"}
        assert payload["n_train"] + payload["n_test"] == 60
        assert set(payload["binary"]) == {"tp", "fp", "fn", "tn", "precision", "recall", "f1"}


class TestAnalyze:
    def test_reads_draft_from_stdin(self, workspace, capsys, monkeypatch):
        _, _, model = workspace
        monkeypatch.setattr("sys.stdin", io.StringIO(json.dumps(DRAFT)))
        assert main(["analyze", "--model", str(model)]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert set(payload) == {"needs_image", "probability", "threshold", "categories", "model_version"}

    def test_malformed_stdin_is_data_error(self, workspace, capsys, monkeypatch):
        _, _, model = workspace
        monkeypatch.setattr("sys.stdin", io.StringIO("{not json"))
        assert main(["analyze", "--model", str(model)]) == 2
        assert "malformed JSON on stdin" in capsys.readouterr().err

    def test_invalid_draft_is_data_error(self, workspace, capsys, monkeypatch):
        _, _, model = workspace
        monkeypatch.setattr("sys.stdin", io.StringIO('{"summary": "s"}'))
        assert main(["analyze", "--model", str(model)]) == 2
        assert "description" in capsys.readouterr().err


class TestLabel:
    def test_requires_annotations_or_overrides(self, workspace, tmp_path, capsys):
        _, corpus, _ = workspace
        rc = main(["label", "--corpus", str(corpus), "--out", str(tmp_path / "out.jsonl")])
        assert rc == 1
        capsys.readouterr()

    def test_annotations_flow(self, workspace, tmp_path, capsys):
        _, corpus, _ = workspace
        annotations = tmp_path / "ann.jsonl"
        lines = [
            {"image_id": "synth-0001", "annotator_id": "a1", "categories": ["Code"]},
            {"image_id": "synth-0001", "annotator_id": "a2", "categories": ["Code"]},
            {"image_id": "synth-0001", "annotator_id": "a3", "categories": ["Runtime Error"]},
        ]
        annotations.write_text("".join(json.dumps(x) + "\n" for x in lines), encoding="utf-8")
        out = tmp_path / "out.jsonl"
        rc = main(["label", "--corpus", str(corpus), "--annotations", str(annotations), "--out", str(out)])
        assert rc == 0
        assert "labeled" in capsys.readouterr().out
        labeled = load_corpus(out).by_id("synth-0001")
        assert labeled.label_vector.counts[0] == 2
        assert labeled.label_vector.counts[1] == 1

    def test_overrides_flow(self, workspace, tmp_path, capsys):
        _, corpus, _ = workspace
        overrides = tmp_path / "ovr.jsonl"
        record = {"image_id": "synth-0002", "label_vector": [3, 0, 0, 0, 0, 0, 0, 0, 0, 0]}
        overrides.write_text(json.dumps(record) + "\n", encoding="utf-8")
        out = tmp_path / "out.jsonl"
        rc = main(["label", "--corpus", str(corpus), "--overrides", str(overrides), "--out", str(out)])
        assert rc == 0
        capsys.readouterr()
        assert load_corpus(out).by_id("synth-0002").label_vector.counts[0] == 3

    def test_unknown_image_id_is_data_error(self, workspace, tmp_path, capsys):
        _, corpus, _ = workspace
        annotations = tmp_path / "ann.jsonl"
        record = {"image_id": "ghost", "annotator_id": "a1", "categories": ["Code"]}
        annotations.write_text(json.dumps(record) + "\n", encoding="utf-8")
        out = tmp_path / "out.jsonl"
        rc = main(["label", "--corpus", str(corpus), "--annotations", str(annotations), "--out", str(out)])
        assert rc == 2
        assert "ghost" in capsys.readouterr().err


class TestIngest:
    def test_from_jsonl_round_trip(self, workspace, tmp_path, capsys):
        _, corpus, _ = workspace
        out = tmp_path / "copy.jsonl"
        assert main(["ingest", "--from-jsonl", str(corpus), "--out", str(out)]) == 0
        capsys.readouterr()
        assert [r.id for r in load_corpus(out)] == [r.id for r in load_corpus(corpus)]

    def test_bugzilla_requires_window_args(self, tmp_path, capsys):
        rc = main(["ingest", "--from-bugzilla", "http://x", "--out", str(tmp_path / "o.jsonl")])
        assert rc == 1
        assert "--product" in capsys.readouterr().err

    def test_bugzilla_bad_since_is_data_error(self, tmp_path, capsys):
        rc = main(
            [
                "ingest",
                "--from-bugzilla",
                "http://x",
                "--product",
                "editor",
                "--since",
                "not-a-date",
                "--until",
                "2021-03-31T00:00:00Z",
                "--out",
                str(tmp_path / "o.jsonl"),
            ]
        )
        assert rc == 2
        assert "--since" in capsys.readouterr().err


class TestBenchmark:
    def test_table_and_csv(self, workspace, tmp_path, capsys):
        _, corpus, _ = workspace
        csv_path = tmp_path / "table.csv"
        rc = main(["benchmark", "--corpus", str(corpus), "--seed", "3", "--csv", str(csv_path)])
        assert rc == 0
        stdout = capsys.readouterr().out
        assert "model" in stdout and "ensemble" in stdout
        lines = csv_path.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "model,tp,fp,fn,tn,precision,recall,f1"
        assert len(lines) == 5
