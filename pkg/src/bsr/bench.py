"""Synthetic benchmark tasks, replicated runs and report aggregation."""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from .exceptions import NonPositivePrice
from .mixture import rmse
from .operators import benchmark_operators
from .prior import PriorConfig
from .sampler import Data, RunConfig, run

SPLITS = ("train", "test_inner", "test_wide", "test_outer")

SPLIT_RANGES = {
    "train": (-3.0, 3.0),
    "test_inner": (-3.0, 3.0),
    "test_wide": (-6.0, 6.0),
    "test_outer": (3.0, 6.0),
}


def _f1(a, b):
    return 2.5 * a**4 - 1.3 * a**3 + 0.5 * b**2 - 1.7 * b


def _f2(a, b):
    return 8.0 * a**2 + 8.0 * b**3 - 15.0


def _f3(a, b):
    return 0.2 * a**3 + 0.5 * b**3 - 1.2 * b - 0.5 * a


def _f4(a, b):
    return 1.5 * np.exp(a) + 5.0 * np.cos(b)


def _f5(a, b):
    return 6.0 * np.sin(a) * np.cos(b)


def _f6(a, b):
    return 1.35 * a * b + 5.5 * np.sin((a - 1.0) * (b - 1.0))


@dataclass(frozen=True)
class TaskSpec:
    id: str
    truth: Callable
    ranges: dict = field(default_factory=lambda: dict(SPLIT_RANGES))
    n_train: int = 100
    n_test: int = 30

    def __post_init__(self):
        for lo, hi in self.ranges.values():
            if not lo < hi:
                raise ValueError(f"invalid interval ({lo}, {hi})")

    def evaluate(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return np.asarray(self.truth(X[:, 0], X[:, 1]), dtype=float)


TASKS = {name: TaskSpec(name, fn) for name, fn in
         [("f1", _f1), ("f2", _f2), ("f3", _f3), ("f4", _f4), ("f5", _f5), ("f6", _f6)]}


def get_task(name: str) -> TaskSpec:
    try:
        return TASKS[name]
    except KeyError:
        raise ValueError(f"unknown task {name!r}; choose from {', '.join(TASKS)}") from None


def parse_task_list(text: str) -> list[str]:
    """Accept ``f1,f3`` as well as ranges like ``f1..f6``."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..")
            a, b = int(lo.lstrip("f")), int(hi.lstrip("f"))
            out.extend(f"f{i}" for i in range(a, b + 1))
        elif part:
            out.append(part)
    for name in out:
        get_task(name)
    return out


def gen_dataset(task: TaskSpec, split: str, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Uniform predictors on the split's interval and noiseless targets."""
    lo, hi = task.ranges[split]
    n = task.n_train if split == "train" else task.n_test
    X = rng.uniform(lo, hi, size=(n, 2))
    return X, task.evaluate(X)


def benchmark_run_config(K: int = 2, n_proposals: int = 20_000, **kw) -> RunConfig:
    prior = PriorConfig(operators=benchmark_operators(), K=K)
    return RunConfig(prior=prior, n_proposals=n_proposals, **kw)


def replicate_seeds(seed: int, n_reps: int) -> list[int]:
    children = np.random.SeedSequence(seed).spawn(n_reps)
    return [int(c.generate_state(1, dtype=np.uint32)[0]) for c in children]


@dataclass
class ReplicateResult:
    seed: int
    rmse: dict
    nodes: int
    beta: list
    expressions: list
    formula: str
    acceptance_rate: float
    seconds: float
    trace_csv: str | None = None


def run_one(task_id: str, cfg: RunConfig, seed: int, keep_trace: bool = False) -> ReplicateResult:
    task = get_task(task_id)
    data_rng = np.random.default_rng(seed)
    splits = {s: gen_dataset(task, s, data_rng) for s in SPLITS}
    run_cfg = replace(cfg, seed=seed, record_trace=keep_trace)
    t0 = time.perf_counter()
    res = run(run_cfg, Data(*splits["train"]))
    elapsed = time.perf_counter() - t0
    model = res.best_model
    errs = {}
    for s, (X, y) in splits.items():
        with np.errstate(all="ignore"):
            pred = model.predict(X) if s != "train" else None
        if s == "train":
            errs[s] = math.sqrt(res.best_rss / len(y))
        else:
            errs[s] = rmse(pred, y) if np.all(np.isfinite(pred)) else math.inf
    return ReplicateResult(
        seed=seed,
        rmse=errs,
        nodes=model.total_nodes(),
        beta=[float(b) for b in model.beta],
        expressions=model.expressions(),
        formula=model.formula(),
        acceptance_rate=res.acceptance_rate,
        seconds=elapsed,
        trace_csv=res.trace_csv() if keep_trace else None,
    )


def _summary(values) -> dict:
    v = np.asarray(values, dtype=float)
    finite = v[np.isfinite(v)]
    return {
        "mean": float(np.mean(v)) if len(finite) == len(v) else math.inf,
        "std": float(np.std(v)) if len(finite) == len(v) else math.inf,
        "median": float(np.median(v)),
        "n_nonfinite": int(len(v) - len(finite)),
    }


@dataclass
class TaskReport:
    task: str
    K: int
    n_proposals: int
    replicates: list

    @property
    def seeds(self) -> list[int]:
        return [r.seed for r in self.replicates]

    def rmse_values(self, split: str) -> list[float]:
        return [r.rmse[split] for r in self.replicates]

    def node_values(self) -> list[int]:
        return [r.nodes for r in self.replicates]

    def summary(self) -> dict:
        out = {s: _summary(self.rmse_values(s)) for s in SPLITS}
        out["nodes"] = _summary(self.node_values())
        return out

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "K": self.K,
            "n_proposals": self.n_proposals,
            "n_reps": len(self.replicates),
            "seeds": self.seeds,
            "summary": self.summary(),
            "replicates": [
                {k: v for k, v in r.__dict__.items() if k != "trace_csv"} for r in self.replicates
            ],
        }


def run_replicates(task_id: str, cfg: RunConfig, n_reps: int = 10, seed: int = 0,
                   n_jobs: int = 1, keep_traces: bool = False) -> TaskReport:
    """Run ``n_reps`` independent chains on fresh datasets of one task."""
    if n_reps < 1:
        raise ValueError("n_reps must be >= 1")
    get_task(task_id)
    seeds = replicate_seeds(seed, n_reps)
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as ex:
            reps = list(ex.map(run_one, [task_id] * n_reps, [cfg] * n_reps, seeds, [keep_traces] * n_reps))
    else:
        reps = [run_one(task_id, cfg, s, keep_traces) for s in seeds]
    return TaskReport(task_id, cfg.prior.K, cfg.n_proposals, reps)


def k_sensitivity(task_id: str, K_values=(2, 4, 8), cfg: RunConfig | None = None,
                  n_reps: int = 10, seed: int = 0, n_jobs: int = 1) -> list[TaskReport]:
    """One replicate set per K; the same seeds are reused across K."""
    cfg = cfg or benchmark_run_config()
    return [
        run_replicates(task_id, replace(cfg, prior=replace(cfg.prior, K=int(k))), n_reps, seed, n_jobs)
        for k in K_values
    ]


@dataclass
class ExperimentReport:
    kind: str
    tasks: list
    config: dict
    seed: int

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "seed": self.seed,
            "config": self.config,
            "results": [t.to_dict() for t in self.tasks],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=True)

    def to_markdown(self) -> str:
        lines = [f"# Benchmark report ({self.kind})", "", f"Seed: {self.seed}", ""]
        if self.kind == "ksens":
            lines += ["| task | K | test[-3,3] RMSE mean ± std | median | nodes mean ± std |",
                      "|---|---|---|---|---|"]
            for t in self.tasks:
                s = t.summary()
                lines.append(
                    f"| {t.task} | {t.K} | {_pm(s['test_inner'])} | {s['test_inner']['median']:.4g} "
                    f"| {_pm(s['nodes'])} |"
                )
        else:
            lines += ["| task | split | RMSE mean ± std | median |", "|---|---|---|---|"]
            for t in self.tasks:
                s = t.summary()
                for split in SPLITS:
                    lines.append(f"| {t.task} | {split} | {_pm(s[split])} | {s[split]['median']:.4g} |")
            lines += ["", "| task | nodes mean ± std |", "|---|---|"]
            for t in self.tasks:
                lines.append(f"| {t.task} | {_pm(t.summary()['nodes'])} |")
        lines += ["", "## Best expressions", ""]
        for t in self.tasks:
            best = min(t.replicates, key=lambda r: r.rmse["train"])
            lines.append(f"- {t.task} (K={t.K}, seed {best.seed}): `{best.formula}`")
        return "\n".join(lines) + "\n"


def _pm(s: dict) -> str:
    return f"{s['mean']:.4g} ± {s['std']:.4g}"


# -- financial returns -------------------------------------------------------


def returns_transform(close, predictors=None) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    """Next-day simple returns and their signs.

    Returns ``(returns, labels, predictors[:-1])``: row ``t`` of the
    predictors is paired with the return from ``t`` to ``t+1``. Labels are
    +1 for non-negative returns and -1 otherwise.
    """
    close = np.asarray(close, dtype=float).ravel()
    if close.size < 2:
        raise ValueError("need at least two prices")
    if np.any(close <= 0) or not np.all(np.isfinite(close)):
        raise NonPositivePrice("prices must be finite and strictly positive")
    ret = (close[1:] - close[:-1]) / close[:-1]
    labels = np.where(ret >= 0, 1, -1)
    aligned = None
    if predictors is not None:
        aligned = np.asarray(predictors, dtype=float)[:-1]
    return ret, labels, aligned


def write_traces(report: TaskReport, out_dir: Path) -> None:
    for i, r in enumerate(report.replicates):
        if r.trace_csv is not None:
            (out_dir / f"trace_{report.task}_K{report.K}_rep{i}.csv").write_text(r.trace_csv)
