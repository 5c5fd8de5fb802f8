import itertools
import json
import math

import numpy as np
import pytest

from bsr.bench import (
    SPLIT_RANGES,
    SPLITS,
    TASKS,
    ExperimentReport,
    benchmark_run_config,
    gen_dataset,
    get_task,
    k_sensitivity,
    parse_task_list,
    returns_transform,
    run_replicates,
)
from bsr.exceptions import NonPositivePrice

# written out independently of the package, term by term
_ORACLE = {
    "f1": lambda a, b: 2.5 * a * a * a * a - 1.3 * a * a * a + 0.5 * b * b - 1.7 * b,
    "f2": lambda a, b: 8 * a * a + 8 * b * b * b - 15,
    "f3": lambda a, b: 0.2 * a * a * a + 0.5 * b * b * b - 1.2 * b - 0.5 * a,
    "f4": lambda a, b: 1.5 * math.exp(a) + 5 * math.cos(b),
    "f5": lambda a, b: 6.0 * math.sin(a) * math.cos(b),
    "f6": lambda a, b: 1.35 * a * b + 5.5 * math.sin((a - 1) * (b - 1)),
}


@pytest.mark.parametrize("name", sorted(TASKS))
def test_truth_matches_oracle_on_grid(name):
    grid = np.array(list(itertools.product(np.linspace(-3, 3, 21), repeat=2)))
    got = TASKS[name].evaluate(grid)
    want = np.array([_ORACLE[name](a, b) for a, b in grid])
    np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-12)


def test_truth_examples():
    assert TASKS["f4"].evaluate([[0.0, 0.0]])[0] == pytest.approx(6.5)
    assert TASKS["f5"].evaluate([[0.0, 1.7]])[0] == 0.0


def test_splits_respect_ranges_and_sizes():
    rng = np.random.default_rng(0)
    for task in TASKS.values():
        for split in SPLITS:
            X, y = gen_dataset(task, split, rng)
            lo, hi = SPLIT_RANGES[split]
            assert X.shape == ((100 if split == "train" else 30), 2)
            assert np.all((X >= lo) & (X <= hi))
            np.testing.assert_array_equal(y, task.evaluate(X))


def test_dataset_is_seed_deterministic():
    a = gen_dataset(TASKS["f1"], "train", np.random.default_rng(3))
    b = gen_dataset(TASKS["f1"], "train", np.random.default_rng(3))
    np.testing.assert_array_equal(a[0], b[0])


def test_task_list_parsing():
    assert parse_task_list("f1..f3,f5") == ["f1", "f2", "f3", "f5"]
    with pytest.raises(ValueError):
        parse_task_list("f9")
    with pytest.raises(ValueError):
        get_task("g1")


def test_single_replicate_has_zero_std():
    rep = run_replicates("f5", benchmark_run_config(n_proposals=200), n_reps=1, seed=1)
    s = rep.summary()
    assert s["train"]["std"] == 0.0 and s["nodes"]["std"] == 0.0


def test_report_aggregation_reproducible():
    rep = run_replicates("f3", benchmark_run_config(n_proposals=300), n_reps=3, seed=2)
    d = json.loads(ExperimentReport("bench", [rep], {}, 2).to_json())
    res = d["results"][0]
    for split in SPLITS:
        vals = [r["rmse"][split] for r in res["replicates"]]
        assert res["summary"][split]["mean"] == pytest.approx(np.mean(vals), rel=1e-15)
        assert res["summary"][split]["std"] == pytest.approx(np.std(vals), rel=1e-15, abs=1e-300)
    assert res["seeds"] == rep.seeds and len(set(rep.seeds)) == 3


def test_k_sensitivity_beta_lengths():
    reps = k_sensitivity("f5", [1, 2, 4], benchmark_run_config(n_proposals=200), n_reps=1, seed=0)
    for K, rep in zip([1, 2, 4], reps):
        assert rep.K == K
        assert all(len(r.beta) == K + 1 for r in rep.replicates)
        assert math.isfinite(rep.summary()["test_inner"]["median"])
    md = ExperimentReport("ksens", reps, {}, 0).to_markdown()
    assert md.count("| f5 |") == 3


def test_returns_transform():
    ret, lab, X = returns_transform([100.0, 110.0], [[1, 2], [3, 4]])
    assert ret[0] == pytest.approx(0.10) and lab[0] == 1
    np.testing.assert_array_equal(X, [[1, 2]])
    ret, lab, _ = returns_transform([5.0, 5.0, 5.0])
    assert np.all(ret == 0) and np.all(lab == 1)
    with pytest.raises(NonPositivePrice):
        returns_transform([1.0, 0.0])
