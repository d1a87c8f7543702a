import json

import pytest
from click.testing import CliRunner

from gridstart.bench import AccuracyRow, ComparisonRow, WarmStartRow, read_rows
from gridstart.cli import main
from gridstart.ml.data import load_dataset
from gridstart.ml.models import load_model


@pytest.fixture(scope="module")
def files(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    runner = CliRunner()
    for name, count, seed in [("train", 12, 1), ("test", 6, 2), ("tiny", 3, 3)]:
        res = runner.invoke(main, ["generate", "--variant", "congested", "--count", str(count),
                                   "--seed", str(seed), "--out", str(d / f"{name}.csv")])
        assert res.exit_code == 0, res.output
    res = runner.invoke(main, ["train", str(d / "train.csv"), "--family", "knn", "--folds", "3",
                               "--variant", "congested", "--out", str(d / "knn.json")])
    assert res.exit_code == 0, res.output
    return d


def run(*args):
    return CliRunner().invoke(main, [str(a) for a in args])


def test_generate_output(files):
    data = load_dataset(files / "train.csv")
    assert data.n <= 12 and data.X.shape[1] == 2 and data.Y.shape[1] == 4


def test_generate_deterministic(files, tmp_path):
    res = run("generate", "--variant", "congested", "--count", 3, "--seed", 3, "--out", tmp_path / "again.csv")
    assert res.exit_code == 0
    assert "3 feasible, 0 infeasible" in res.output
    assert (tmp_path / "again.csv").read_bytes() == (files / "tiny.csv").read_bytes()


@pytest.mark.parametrize("args", [["generate", "--count", "0", "--out", "x.csv"],
                                  ["generate", "--variant", "five_bus", "--out", "x.csv"],
                                  ["generate", "--count", "2"],
                                  ["nonsense"]])
def test_usage_errors(args, tmp_path):
    assert run(*args).exit_code == 2


def test_train_report_and_tag(files):
    model = load_model(files / "knn.json")
    assert model.family == "knn" and model.meta == {"variant": "congested"}


def test_train_deterministic(files, tmp_path):
    res = run("train", files / "train.csv", "--family", "knn", "--folds", 3, "--variant", "congested",
              "--out", tmp_path / "m.json")
    assert res.exit_code == 0
    assert "best" in res.output and "cv_r2" in res.output
    assert (tmp_path / "m.json").read_bytes() == (files / "knn.json").read_bytes()


def test_train_folds_exceed_samples(files, tmp_path):
    res = run("train", files / "tiny.csv", "--family", "lr", "--out", tmp_path / "m.json")
    assert res.exit_code == 2
    assert "folds exceed samples" in res.output


def test_train_unknown_family(files, tmp_path):
    assert run("train", files / "train.csv", "--family", "rf", "--out", tmp_path / "m.json").exit_code == 2


def test_accuracy_table_and_csv(files, tmp_path):
    res = run("accuracy", files / "train.csv", files / "test.csv", "--family", "lr", "--family", "knn",
              "--folds", 3, "--out", tmp_path / "acc.csv")
    assert res.exit_code == 0
    rows = read_rows(tmp_path / "acc.csv", AccuracyRow)
    assert [(r.family, r.target) for r in rows][:2] == [("lr", "v1_pu"), ("lr", "v2_pu")]
    assert len(rows) == 8
    assert all(r.score <= 100.0 for r in rows if r.score == r.score)
    assert "warning" not in res.output


def test_accuracy_warns_on_overlap(files):
    res = run("accuracy", files / "train.csv", files / "train.csv", "--family", "lr", "--folds", 3)
    assert res.exit_code == 0
    assert "also appear in the training set" in res.output


def test_compare(files, tmp_path):
    res = run("compare", "--variant", "congested", "--model", files / "knn.json", "--n-test", 2, "--seed", 4,
              "--out", tmp_path / "c.csv")
    assert res.exit_code == 0, res.output
    rows = read_rows(tmp_path / "c.csv", ComparisonRow)
    assert [r.scenario_id for r in rows] == [1, 2]
    assert "mean" in res.output and "warning" not in res.output


def test_compare_warns_on_variant_mismatch(files):
    res = run("compare", "--variant", "non_congested", "--model", files / "knn.json", "--n-test", 1)
    assert res.exit_code == 0
    assert "trained on congested" in res.output


def test_warmstart(files, tmp_path):
    res = run("warmstart", "--variant", "congested", "--model", files / "knn.json", "--n-test", 1,
              "--out", tmp_path / "w.csv")
    assert res.exit_code == 0, res.output
    (row,) = read_rows(tmp_path / "w.csv", WarmStartRow)
    assert row.oracle_converged and 1 <= row.oracle_iterations <= 2
    assert "median iterations" in res.output


def test_runtime_failure_exit_one(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"format": "something else"}))
    res = run("compare", "--model", bad, "--n-test", 1)
    assert res.exit_code == 1
    assert res.output.startswith("error:")


def test_missing_model_is_usage_error(tmp_path):
    assert run("warmstart", "--model", tmp_path / "absent.json").exit_code == 2


def test_n_test_zero_is_usage_error(files):
    assert run("compare", "--model", files / "knn.json", "--n-test", 0).exit_code == 2
