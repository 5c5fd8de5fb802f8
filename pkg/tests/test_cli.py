import json
import os
import stat
import subprocess
import sys

import numpy as np
import pytest

from bsr.cli import load_csv, main
from bsr.exceptions import EmptyFile, MissingColumn, NonNumericCell
from bsr.mixture import MixedModel


def write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(repr(float(v)) for v in r) + "\n")


@pytest.fixture
def f1_csv(tmp_path):
    rng = np.random.default_rng(0)
    X = rng.uniform(-3, 3, size=(60, 2))
    y = 2.5 * X[:, 0] ** 4 - 1.3 * X[:, 0] ** 3 + 0.5 * X[:, 1] ** 2 - 1.7 * X[:, 1]
    p = tmp_path / "f1.csv"
    write_csv(p, ["a", "b", "y"], np.column_stack([X, y]))
    return p


def test_load_csv(tmp_path, f1_csv):
    X, y, names = load_csv(str(f1_csv), "y")
    assert X.shape == (60, 2) and names == ["a", "b"]
    with pytest.raises(MissingColumn):
        load_csv(str(f1_csv), "z")
    bad = tmp_path / "bad.csv"
    bad.write_text("a,y\n1,2\nabc,3\n")
    with pytest.raises(NonNumericCell) as e:
        load_csv(str(bad), "y")
    assert e.value.row == 2 and e.value.col == "a"
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(EmptyFile):
        load_csv(str(empty), "y")


def _fit(f1_csv, out, *extra):
    return main(["fit", "--data", str(f1_csv), "--target", "y", "--out", str(out),
                 "--proposals", "600", "--seed", "7", *extra])


def test_fit_writes_outputs(tmp_path, f1_csv, capsys):
    assert _fit(f1_csv, tmp_path / "o") == 0
    files = sorted(p.name for p in (tmp_path / "o").iterdir())
    assert files == ["checkpoint.json", "model.json", "report.json", "report.md", "trace.csv"]
    model = json.loads((tmp_path / "o" / "model.json").read_text())
    assert len(model["beta"]) == model["K"] + 1 == 3
    assert model["seed"] == 7
    # the model file round-trips through the package's own parser
    assert MixedModel.from_dict(model).to_dict()["expressions"] == model["expressions"]
    for name in ("report.json", "checkpoint.json"):
        json.loads((tmp_path / "o" / name).read_text())


def test_fit_is_deterministic(tmp_path, f1_csv):
    _fit(f1_csv, tmp_path / "a")
    _fit(f1_csv, tmp_path / "b")
    for name in ("model.json", "trace.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_eval_reproduces_train_rmse(tmp_path, f1_csv, capsys):
    _fit(f1_csv, tmp_path / "o")
    capsys.readouterr()
    assert main(["eval", "--model", str(tmp_path / "o" / "model.json"), "--data", str(f1_csv)]) == 0
    got = json.loads(capsys.readouterr().out)
    want = json.loads((tmp_path / "o" / "model.json").read_text())["train_rmse"]
    assert abs(got["rmse"] - want) <= 1e-9


def test_bad_config_key(tmp_path, f1_csv, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"run": {"n_proposals": 10, "bogus_key": 1}}))
    assert _fit(f1_csv, tmp_path / "o", "--config", str(cfg)) == 2
    assert "bogus_key" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_config_values_are_used(tmp_path, f1_csv):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"prior": {"K": 3, "operators": "benchmark"}, "run": {"seed": 1}}))
    assert _fit(f1_csv, tmp_path / "o", "--config", str(cfg)) == 0
    model = json.loads((tmp_path / "o" / "model.json").read_text())
    assert model["K"] == 3 and model["seed"] == 7  # flag beats file


def test_usage_errors_exit_2(tmp_path, f1_csv):
    assert main(["fit", "--data", str(f1_csv)]) == 2
    assert main(["nonsense"]) == 2
    assert main(["fit", "--data", str(tmp_path / "missing.csv"), "--target", "y", "--out", str(tmp_path)]) == 2
    assert main(["bench", "--tasks", "f9", "--out", str(tmp_path / "b")]) == 2


@pytest.mark.skipif(os.geteuid() == 0, reason="root ignores directory permissions")
def test_read_only_output_dir(tmp_path, f1_csv):
    out = tmp_path / "ro"
    out.mkdir()
    out.chmod(stat.S_IRUSR | stat.S_IXUSR)
    try:
        assert _fit(f1_csv, out) != 0
        assert list(out.iterdir()) == []
    finally:
        out.chmod(stat.S_IRWXU)


def test_unwritable_output_path(tmp_path, f1_csv):
    # a regular file where the directory should be fails even for root
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    assert _fit(f1_csv, blocker / "sub") == 1
    assert blocker.read_text() == ""


def test_env_var_sets_default_output(tmp_path, f1_csv, monkeypatch):
    monkeypatch.setenv("BSR_OUTPUT_DIR", str(tmp_path / "envout"))
    assert main(["fit", "--data", str(f1_csv), "--target", "y", "--proposals", "200"]) == 0
    assert (tmp_path / "envout" / "model.json").exists()


def test_bench_and_ksens(tmp_path, capsys):
    out = tmp_path / "b"
    assert main(["bench", "--tasks", "f4..f5", "--reps", "2", "--proposals", "300", "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert [r["task"] for r in rep["results"]] == ["f4", "f5"]
    assert (out / "report.md").read_text().startswith("# Benchmark report")
    out = tmp_path / "k"
    assert main(["ksens", "--task", "f3", "--k", "2,4,8", "--reps", "1", "--proposals", "200",
                 "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert [r["K"] for r in rep["results"]] == [2, 4, 8]


def test_demo_finance(tmp_path):
    rng = np.random.default_rng(0)
    close = 100 * np.exp(np.cumsum(rng.normal(0, 0.01, 120)))
    opn = close * (1 + rng.normal(0, 0.002, 120))
    high = np.maximum(opn, close) * 1.01
    low = np.minimum(opn, close) * 0.99
    p = tmp_path / "ohlc.csv"
    write_csv(p, ["Open", "High", "Low", "Close"], np.column_stack([opn, high, low, close]))
    out = tmp_path / "fin"
    assert main(["demo-finance", "--data", str(p), "--runs", "2", "--proposals", "200", "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert len(rep["runs"]) == 2
    assert all(0 <= r["train_accuracy"] <= 1 for r in rep["runs"])


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "bsr", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "demo-finance" in r.stdout
