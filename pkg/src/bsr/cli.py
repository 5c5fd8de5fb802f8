"""Command-line interface.

Subcommands::

    bsr fit   --data train.csv --target y [--config cfg.json] [--out DIR] [--seed N]
    bsr eval  --model DIR/model.json --data test.csv [--target y]
    bsr bench --tasks f1..f6 [--reps N] [--proposals N] [--K K]
    bsr ksens --task f3 --k 2,4,8
    bsr demo-finance --data ohlc.csv

The output directory defaults to ``$BSR_OUTPUT_DIR`` and then ``./bsr-output``.

Configuration is a JSON object with optional sections::

    {
      "prior": {"alpha": 0.4, "beta": 1.2, "operators": "default", "K": 2, ...},
      "run":   {"n_proposals": 20000, "burn_in": null, "thinning": 1, "seed": 0,
                "gibbs_noise": true, "target_acceptances": null, "patience": null},
      "bench": {"n_reps": 10, "n_jobs": 1}
    }

Command-line flags override the file, which overrides built-in defaults.
Exit codes: 0 success, 1 runtime failure, 2 usage, configuration or input error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import tempfile
from dataclasses import fields, replace
from pathlib import Path

import numpy as np

from . import bench
from .exceptions import BSRError, ConfigError, EmptyFile, MissingColumn, NonNumericCell
from .mixture import MixedModel, rmse, sign_accuracy
from .operators import operator_set
from .prior import PriorConfig
from .sampler import Data, RunConfig, run, save_checkpoint

ENV_OUTPUT_DIR = "BSR_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "bsr-output"

_PRIOR_KEYS = {f.name for f in fields(PriorConfig)}
_RUN_KEYS = {"n_proposals", "target_acceptances", "max_proposals", "burn_in", "thinning",
             "seed", "record_trace", "gibbs_noise", "patience"}
_BENCH_KEYS = {"n_reps", "n_jobs"}
_SECTIONS = {"prior": _PRIOR_KEYS, "run": _RUN_KEYS, "bench": _BENCH_KEYS}


class UsageError(BSRError):
    pass


# -- config ------------------------------------------------------------------


def load_config(path: str | None) -> dict:
    if path is None:
        return {s: {} for s in _SECTIONS}
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    out = {s: {} for s in _SECTIONS}
    for section, body in raw.items():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown config key {section!r}")
        if not isinstance(body, dict):
            raise ConfigError(f"config section {section!r} must be an object")
        for key in body:
            if key not in _SECTIONS[section]:
                raise ConfigError(f"unknown config key {section}.{key!r}")
        out[section] = dict(body)
    return out


def build_run_config(conf: dict, seed: int | None = None, **prior_overrides) -> RunConfig:
    prior_kw = dict(conf["prior"])
    prior_kw.update({k: v for k, v in prior_overrides.items() if v is not None})
    try:
        if "operators" in prior_kw:
            prior_kw["operators"] = operator_set(prior_kw["operators"])
        prior = PriorConfig.from_dict(prior_kw) if prior_kw else PriorConfig()
        run_kw = dict(conf["run"])
        if seed is not None:
            run_kw["seed"] = seed
        return RunConfig(prior=prior, **run_kw)
    except (TypeError, ValueError, BSRError) as e:
        raise ConfigError(f"invalid configuration: {e}") from None


# -- data --------------------------------------------------------------------


def read_table(path: str) -> tuple[list[str], np.ndarray]:
    """Headered numeric CSV -> (column names, n x m array)."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except FileNotFoundError:
        raise UsageError(f"data file not found: {path}") from None
    rows = [r for r in rows if any(c.strip() for c in r)]
    if not rows:
        raise EmptyFile(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    if not body:
        raise EmptyFile(f"{path} has a header but no data rows")
    values = np.empty((len(body), len(header)))
    for i, row in enumerate(body, start=1):
        if len(row) != len(header):
            raise UsageError(f"row {i} of {path} has {len(row)} cells, header has {len(header)}")
        for j, cell in enumerate(row):
            try:
                values[i - 1, j] = float(cell)
            except ValueError:
                raise NonNumericCell(i, header[j], cell) from None
    return header, values


def load_csv(path: str, target_column: str) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Predictors are every non-target column in header order."""
    header, values = read_table(path)
    if target_column not in header:
        raise MissingColumn(f"target column {target_column!r} not in header {header}")
    t = header.index(target_column)
    keep = [j for j in range(len(header)) if j != t]
    if not keep:
        raise UsageError("no predictor columns besides the target")
    return values[:, keep], values[:, t], [header[j] for j in keep]


# -- output ------------------------------------------------------------------


def resolve_out_dir(arg: str | None) -> Path:
    return Path(arg or os.environ.get(ENV_OUTPUT_DIR) or DEFAULT_OUTPUT_DIR)


def prepare_out_dir(path: Path) -> Path:
    """Create ``path`` and make sure files can be written there before any work starts."""
    try:
        path.mkdir(parents=True, exist_ok=True)
        fd, probe = tempfile.mkstemp(dir=path, prefix=".probe-")
        os.close(fd)
        os.unlink(probe)
    except OSError as e:
        raise OSError(f"output directory {path} is not writable: {e}") from None
    return path


def write_outputs(out_dir: Path, files: dict) -> None:
    for name, text in files.items():
        (out_dir / name).write_text(text)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# -- commands ----------------------------------------------------------------


def cmd_fit(args) -> int:
    conf = load_config(args.config)
    cfg = build_run_config(conf, args.seed, K=args.K)
    if args.proposals is not None:
        cfg = replace(cfg, n_proposals=args.proposals)
    X, y, names = load_csv(args.data, args.target)
    out_dir = prepare_out_dir(resolve_out_dir(args.out))
    rng = np.random.default_rng(cfg.seed)
    res = run(cfg, Data(X, y), rng=rng)
    model = res.best_model
    train_rmse = rmse(model.predict(X), y)
    payload = model.to_dict()
    payload.update(
        seed=cfg.seed,
        target=args.target,
        features=names,
        train_rmse=train_rmse,
        n_train=int(len(y)),
        n_proposals=res.n_proposals,
        n_accepted=res.n_accepted,
        prior=cfg.prior.with_features(X.shape[1]).to_dict(),
    )
    legend = ", ".join(f"x{i + 1}={n}" for i, n in enumerate(names))
    summary = {
        "command": "fit",
        "seed": cfg.seed,
        "train_rmse": train_rmse,
        "acceptance_rate": res.acceptance_rate,
        "formula": model.formula(),
        "total_nodes": model.total_nodes(),
    }
    report_md = (
        "# Fit summary\n\n"
        f"- data: {args.data} (n={len(y)}, target {args.target})\n"
        f"- variables: {legend}\n"
        f"- seed: {cfg.seed}\n"
        f"- proposals: {res.n_proposals}, accepted: {res.n_accepted}\n"
        f"- train RMSE: {train_rmse:.6g}\n"
        f"- total nodes: {model.total_nodes()}\n\n"
        f"```\n{model.formula()}\n```\n"
    )
    write_outputs(out_dir, {
        "model.json": _dumps(payload),
        "trace.csv": res.trace_csv(),
        "checkpoint.json": save_checkpoint(res.final_state, rng, replace(cfg, prior=cfg.prior.with_features(X.shape[1]))) + "\n",
        "report.md": report_md,
        "report.json": _dumps(summary),
    })
    print(model.formula())
    print(f"train RMSE {train_rmse:.6g}; outputs in {out_dir}")
    return 0


def cmd_eval(args) -> int:
    try:
        payload = json.loads(Path(args.model).read_text())
    except FileNotFoundError:
        raise UsageError(f"model file not found: {args.model}") from None
    except json.JSONDecodeError as e:
        raise UsageError(f"model file is not valid JSON: {e}") from None
    model = MixedModel.from_dict(payload)
    target = args.target or payload.get("target")
    if target is None:
        raise UsageError("no --target given and the model file does not name one")
    X, y, _ = load_csv(args.data, target)
    pred = model.predict(X)
    result = {"rmse": rmse(pred, y), "sign_accuracy": sign_accuracy(pred, y), "n": int(len(y))}
    print(json.dumps(result, sort_keys=True))
    return 0


def _bench_common(args, conf):
    cfg = build_run_config(conf, args.seed)
    ops = conf["prior"].get("operators", "benchmark")
    cfg = replace(cfg, prior=replace(cfg.prior, operators=operator_set(ops)))
    if args.proposals is not None:
        cfg = replace(cfg, n_proposals=args.proposals)
    elif "n_proposals" not in conf["run"]:
        cfg = replace(cfg, n_proposals=20_000)
    n_reps = args.reps if args.reps is not None else conf["bench"].get("n_reps", 10)
    n_jobs = args.jobs if args.jobs is not None else conf["bench"].get("n_jobs", 1)
    if n_reps < 1:
        raise ConfigError("n_reps must be >= 1")
    return cfg, int(n_reps), int(n_jobs)


def _emit_report(report: bench.ExperimentReport, out_dir: Path, traces: bool) -> None:
    files = {"report.md": report.to_markdown(), "report.json": report.to_json() + "\n"}
    write_outputs(out_dir, files)
    if traces:
        for t in report.tasks:
            bench.write_traces(t, out_dir)
    print(report.to_markdown())


def cmd_bench(args) -> int:
    conf = load_config(args.config)
    try:
        tasks = bench.parse_task_list(args.tasks)
    except ValueError as e:
        raise UsageError(str(e)) from None
    cfg, n_reps, n_jobs = _bench_common(args, conf)
    if args.K is not None:
        cfg = replace(cfg, prior=replace(cfg.prior, K=args.K))
    out_dir = prepare_out_dir(resolve_out_dir(args.out))
    reports = [bench.run_replicates(t, cfg, n_reps, cfg.seed, n_jobs, keep_traces=args.traces) for t in tasks]
    rep = bench.ExperimentReport("bench", reports, _config_summary(cfg, n_reps), cfg.seed)
    _emit_report(rep, out_dir, args.traces)
    return 0


def cmd_ksens(args) -> int:
    conf = load_config(args.config)
    try:
        bench.get_task(args.task)
        ks = [int(k) for k in args.k.split(",") if k.strip()]
    except ValueError as e:
        raise UsageError(str(e)) from None
    if not ks or min(ks) < 1:
        raise UsageError("--k needs positive integers, e.g. 2,4,8")
    cfg, n_reps, n_jobs = _bench_common(args, conf)
    out_dir = prepare_out_dir(resolve_out_dir(args.out))
    reports = bench.k_sensitivity(args.task, ks, cfg, n_reps, cfg.seed, n_jobs)
    rep = bench.ExperimentReport("ksens", reports, _config_summary(cfg, n_reps), cfg.seed)
    _emit_report(rep, out_dir, False)
    return 0


def _config_summary(cfg: RunConfig, n_reps: int) -> dict:
    return {"prior": cfg.prior.to_dict(), "n_proposals": cfg.n_proposals, "n_reps": n_reps,
            "gibbs_noise": cfg.gibbs_noise}


_OHLC = ("open", "high", "low", "close")


def cmd_demo_finance(args) -> int:
    conf = load_config(args.config)
    header, values = read_table(args.data)
    lower = [h.lower() for h in header]
    missing = [c for c in _OHLC if c not in lower]
    if missing:
        raise MissingColumn(f"missing price columns: {', '.join(missing)}")
    cols = [lower.index(c) for c in _OHLC]
    prices = values[:, cols]
    ret, _, X = bench.returns_transform(prices[:, 3], prices)
    n_train = int(round(args.train_frac * len(ret)))
    if not 1 <= n_train < len(ret):
        raise UsageError("train fraction leaves an empty train or test set")
    cfg = build_run_config(conf, args.seed)
    if args.proposals is not None:
        cfg = replace(cfg, n_proposals=args.proposals)
    elif "n_proposals" not in conf["run"]:
        cfg = replace(cfg, n_proposals=5_000)
    out_dir = prepare_out_dir(resolve_out_dir(args.out))
    Xtr, ytr, Xte, yte = X[:n_train], ret[:n_train], X[n_train:], ret[n_train:]
    rows = []
    for seed in bench.replicate_seeds(cfg.seed, args.runs):
        res = run(replace(cfg, seed=seed, record_trace=False), Data(Xtr, ytr))
        m = res.best_model
        with np.errstate(all="ignore"):
            ptr, pte = m.predict(Xtr), m.predict(Xte) if _finite_on(m, Xte) else None
        acc_tr = sign_accuracy(ptr, ytr)
        acc_te = sign_accuracy(pte, yte) if pte is not None else math.nan
        rows.append({"seed": seed, "train_accuracy": acc_tr, "test_accuracy": acc_te,
                     "useful": bool(acc_tr > 0.5 and acc_te > 0.5), "formula": m.formula()})
    legend = "x1=open, x2=high, x3=low, x4=close"
    md = ["# Sign-of-return demo", "", f"- records: {len(ret)} (train {n_train}, test {len(ret) - n_train})",
          f"- variables: {legend}", "", "| seed | train acc | test acc | useful | formula |", "|---|---|---|---|---|"]
    for r in rows:
        md.append(f"| {r['seed']} | {r['train_accuracy']:.3f} | {r['test_accuracy']:.3f} | "
                  f"{'yes' if r['useful'] else 'no'} | `{r['formula']}` |")
    write_outputs(out_dir, {
        "report.md": "\n".join(md) + "\n",
        "report.json": _dumps({"seed": cfg.seed, "n_train": n_train, "n_test": len(ret) - n_train,
                               "runs": rows}),
    })
    print("\n".join(md))
    return 0


def _finite_on(model: MixedModel, X) -> bool:
    try:
        model.predict(X)
    except BSRError:
        return False
    return True


# -- entry point -------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(2)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bsr", description="Bayesian symbolic regression")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    f = sub.add_parser("fit", help="fit a model to a CSV file")
    f.add_argument("--data", required=True)
    f.add_argument("--target", required=True)
    f.add_argument("--config")
    f.add_argument("--out")
    f.add_argument("--seed", type=int)
    f.add_argument("--K", type=int)
    f.add_argument("--proposals", type=int)
    f.set_defaults(func=cmd_fit)

    e = sub.add_parser("eval", help="score a saved model on a CSV file")
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--target")
    e.set_defaults(func=cmd_eval)

    for name, func, helptext in [("bench", cmd_bench, "run the synthetic benchmark tasks"),
                                 ("ksens", cmd_ksens, "compare numbers of trees K on one task")]:
        b = sub.add_parser(name, help=helptext)
        if name == "bench":
            b.add_argument("--tasks", default="f1..f6")
            b.add_argument("--K", type=int)
            b.add_argument("--traces", action="store_true", help="write per-replicate trace CSVs")
        else:
            b.add_argument("--task", required=True)
            b.add_argument("--k", default="2,4,8")
        b.add_argument("--reps", type=int)
        b.add_argument("--proposals", type=int)
        b.add_argument("--jobs", type=int)
        b.add_argument("--config")
        b.add_argument("--out")
        b.add_argument("--seed", type=int)
        b.set_defaults(func=func)

    d = sub.add_parser("demo-finance", help="sign-of-return demo on open/high/low/close data")
    d.add_argument("--data", required=True)
    d.add_argument("--runs", type=int, default=5)
    d.add_argument("--train-frac", type=float, default=0.8)
    d.add_argument("--proposals", type=int)
    d.add_argument("--config")
    d.add_argument("--out")
    d.add_argument("--seed", type=int)
    d.set_defaults(func=cmd_demo_finance)
    return p


_USAGE_ERRORS = (UsageError, ConfigError, MissingColumn, NonNumericCell, EmptyFile)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except _USAGE_ERRORS as e:
        print(f"bsr: error: {e}", file=sys.stderr)
        return 2
    except (BSRError, OSError, ValueError) as e:
        print(f"bsr: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
