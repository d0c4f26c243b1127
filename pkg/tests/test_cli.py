import json

import pandas as pd
import pytest

from fairclass.cli import main


@pytest.fixture(scope="module")
def generated(tmp_path_factory):
    out = tmp_path_factory.mktemp("gen")
    assert main(["generate", "--family", "lr", "--n", "10000", "--seed", "42", "--out", str(out)]) == 0
    return out


def fit(generated, out, *extra):
    args = ["fit-predict", "--train", str(generated / "train.csv"), "--test", str(generated / "test.csv"), "--out", str(out)]
    assert main(args + list(extra)) == 0
    return json.loads((out / "result.json").read_text())


class TestGenerate:
    def test_files(self, generated):
        manifest = json.loads((generated / "manifest.json").read_text())
        assert manifest["spec"]["seed"] == 42
        assert manifest["rows"] == {"train": 100, "test": 9900}

    def test_byte_identical(self, generated, tmp_path):
        main(["generate", "--family", "lr", "--n", "10000", "--seed", "42", "--out", str(tmp_path)])
        for name in ("train.csv", "test.csv", "manifest.json"):
            assert (tmp_path / name).read_bytes() == (generated / name).read_bytes()

    def test_mixed(self, tmp_path):
        assert main(["generate", "--family", "svm", "--n", "2000", "--K", "10", "--split", "0.05", "--out", str(tmp_path)]) == 0
        assert "group" in pd.read_csv(tmp_path / "train.csv").columns

    @pytest.mark.parametrize("bad", [["--n", "0"], ["--split", "1.5"], ["--family", "tree"]])
    def test_usage_errors(self, bad):
        with pytest.raises(SystemExit) as exc:
            main(["generate"] + bad)
        assert exc.value.code == 1


class TestFitPredict:
    def test_plain(self, generated, tmp_path):
        res = fit(generated, tmp_path)
        keys = {"Accuracy", "FPR", "FNR", "TPR", "TNR", "Recall", "TP", "FP", "TN", "FN"}
        assert keys <= set(res["test_metrics"]) and res["status"] == "optimal"
        assert len(pd.read_csv(tmp_path / "classifications.csv")) == 9900

    def test_constraint_lowers_training_di(self, generated, tmp_path):
        free = fit(generated, tmp_path / "a", "--sf", "s")
        fair = fit(generated, tmp_path / "b", "--constraint", "di", "--c", "0.1", "--sf", "s")
        assert fair["train_metrics"]["DI[s]"] <= free["train_metrics"]["DI[s]"]

    def test_post_reports_cutoff(self, generated, tmp_path):
        res = fit(generated, tmp_path, "--post", "di", "--sfpost", "s")
        assert 0.01 <= res["B"] <= 0.99
        assert (tmp_path / res["cutoff_trace"]).exists()

    def test_config_file_and_override(self, generated, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"family": "SVM", "constraint": "DM", "sf": ["s"], "pre": "di", "R": 2}))
        res = fit(generated, tmp_path / "o", "--config", str(cfg), "--R", "3")
        assert res["config"]["R"] == 3 and res["config"]["family"] == "SVM"
        assert len(res["resampling"]["per_run"]) == 3

    def test_missing_file_is_io_error(self, tmp_path):
        code = main(["fit-predict", "--train", str(tmp_path / "none.csv"), "--test", str(tmp_path / "none.csv"), "--out", str(tmp_path)])
        assert code == 2

    def test_bad_sf_is_usage_error(self, generated, tmp_path):
        code = main(["fit-predict", "--train", str(generated / "train.csv"), "--test", str(generated / "test.csv"),
                     "--constraint", "di", "--sf", "nope", "--out", str(tmp_path)])
        assert code == 1


class TestEvaluate:
    def test_matches_fit_predict(self, generated, tmp_path):
        res = fit(generated, tmp_path, "--sf", "s")
        out = tmp_path / "eval.json"
        assert main(["evaluate", "--data", str(generated / "test.csv"), "--pred", str(tmp_path / "classifications.csv"),
                     "--sf", "s", "--out", str(out)]) == 0
        assert json.loads(out.read_text()) == res["test_metrics"]


class TestSimulate:
    def test_simulate_and_replay(self, tmp_path):
        assert main(["simulate", "--runs", "1", "--n", "2000", "--split", "0.05", "--mixed", "--out", str(tmp_path)]) == 0
        table = pd.read_csv(tmp_path / "results.csv")
        assert table["scenario_id"].nunique() == 30
        assert main(["replay", "--dir", str(tmp_path)]) == 0
