"""Metropolis-Hastings / reversible-jump chain over K-tree mixtures.

One proposal updates one tree. The log acceptance ratio is

    log R = [loglik* - loglik] + [log p(S*) - log p(S)] + [log q_rev - log q_fwd]
            + [parameter terms]

where the parameter terms are zero-sum for fixed-dimension resampling (the
new lt parameters are drawn from their prior) and for a dimension jump are

    [sum_i log p(theta_i* | sigma*) - sum_i log p(theta_i | sigma)]
    + [log p(sigma*) - log p(sigma)] + [log h_rev - log h_fwd] + log|J|

summed over all K trees because the lt scales are shared.

By default the noise variance is held fixed during a move and refreshed
from its conjugate inverse-gamma conditional after each sweep over the
trees. With ``gibbs_noise=False`` it is instead drawn from its own prior
with every move; prior and proposal densities then cancel and only the
likelihood sees it.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .exceptions import InitFailure
from .infix import parse_infix, to_infix
from .jumps import as_pairs, expand, no_change_resample, shrink
from .mixture import MixedModel, log_likelihood, ols_fit, profile_log_likelihood
from .moves import DEFAULT_CONSTANTS, MoveConstants, correspondence, propose
from .prior import (
    PriorConfig,
    ScaleState,
    invgamma_logpdf,
    invgamma_rvs,
    log_hyperprior,
    log_prior_pairs,
    log_prior_structure,
    sample_scales,
    sample_tree,
)
from .tree import Terminal, count_lt_nodes, eval_unchecked, get_params, node_count, set_params

TRACE_FIELDS = ("iteration", "tree_index", "move", "accepted", "log_lik", "sigma2", "total_nodes", "train_rmse")


@dataclass(frozen=True)
class RunConfig:
    """Chain settings.

    ``n_proposals`` is the budget in proposals summed over all trees; set
    ``target_acceptances`` to stop after that many accepted moves instead.
    ``burn_in=None`` discards the first 20% of the budget from the trace.
    ``prior_only`` replaces the likelihood by a constant, so the chain
    targets the prior (used to validate the kernel).
    """

    prior: PriorConfig = field(default_factory=PriorConfig)
    n_proposals: int = 20_000
    target_acceptances: int | None = None
    max_proposals: int = 10_000_000
    burn_in: int | None = None
    thinning: int = 1
    seed: int = 0
    record_trace: bool = True
    keep_states: bool = False
    gibbs_noise: bool = True
    prior_only: bool = False
    patience: int | None = None
    move_constants: MoveConstants = DEFAULT_CONSTANTS

    def __post_init__(self):
        if self.target_acceptances is None and self.n_proposals < 0:
            raise ValueError("n_proposals must be >= 0")
        if self.target_acceptances is not None and self.target_acceptances < 0:
            raise ValueError("target_acceptances must be >= 0")
        if self.thinning < 1:
            raise ValueError("thinning must be >= 1")

    @property
    def budget(self) -> int:
        return self.target_acceptances if self.target_acceptances is not None else self.n_proposals

    @property
    def effective_burn_in(self) -> int:
        if self.burn_in is not None:
            return self.burn_in
        return int(0.2 * self.budget)


@dataclass
class ChainState:
    trees: tuple
    beta: np.ndarray
    scales: ScaleState
    design: np.ndarray | None
    rss: float
    log_lik: float
    log_struct: tuple
    iteration: int = 0
    accept_count: int = 0

    @property
    def K(self) -> int:
        return len(self.trees)

    def model(self) -> MixedModel:
        return MixedModel(list(self.trees), self.beta.copy(), self.scales)

    def log_prior(self, prior: PriorConfig) -> float:
        params = [p for t in self.trees for p in get_params(t)]
        return (
            sum(self.log_struct)
            + log_prior_pairs(params, self.scales.sigma_a2, self.scales.sigma_b2)
            + log_hyperprior(self.scales, prior)
        )

    def total_nodes(self) -> int:
        return sum(node_count(t) for t in self.trees)

    def to_dict(self) -> dict:
        return {
            "trees": [to_infix(t) for t in self.trees],
            "beta": [float(b) for b in self.beta],
            "scales": asdict(self.scales),
            "rss": self.rss,
            "log_lik": self.log_lik,
            "iteration": self.iteration,
            "accept_count": self.accept_count,
        }


@dataclass
class ChainRecord:
    iteration: int
    tree_index: int
    move: str
    accepted: bool
    log_lik: float
    sigma2: float
    total_nodes: int
    train_rmse: float
    trees: tuple | None = None
    beta: np.ndarray | None = None

    def row(self) -> list:
        return [self.iteration, self.tree_index, self.move, int(self.accepted),
                repr(self.log_lik), repr(self.sigma2), self.total_nodes, repr(self.train_rmse)]


@dataclass
class RunResult:
    records: list
    best_model: MixedModel
    best_rss: float
    final_state: ChainState
    n_proposals: int
    n_accepted: int
    seed: int

    @property
    def acceptance_rate(self) -> float:
        return self.n_accepted / self.n_proposals if self.n_proposals else 0.0

    def trace_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_FIELDS)
        for r in self.records:
            w.writerow(r.row())
        return buf.getvalue()


class Data:
    """Training data bound to the sampler (``y`` is None in prior-only mode)."""

    def __init__(self, X, y=None):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.shape[0] < 1 or X.shape[1] < 1:
            raise ValueError("data must have at least one row and one column")
        if not np.all(np.isfinite(X)):
            raise ValueError("predictors contain missing or non-finite values")
        self.X = X
        self.y = None if y is None else np.asarray(y, dtype=float).ravel()
        if self.y is not None and self.y.shape[0] != X.shape[0]:
            raise ValueError("X and y have different numbers of rows")
        if self.y is not None and not np.all(np.isfinite(self.y)):
            raise ValueError("response contains missing or non-finite values")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


def _fit(design, y, sigma2):
    beta, rss = ols_fit(design, y)
    if not (np.all(np.isfinite(beta)) and math.isfinite(rss)):
        return beta, math.inf, -math.inf
    return beta, rss, log_likelihood(rss, len(y), sigma2)


def _column(tree, X):
    col = eval_unchecked(tree, X)
    if not np.all(np.isfinite(col)):
        return None
    return col


def _make_state(trees, scales, data: Data, prior: PriorConfig, prior_only: bool) -> ChainState | None:
    log_struct = tuple(log_prior_structure(t, prior) for t in trees)
    if prior_only:
        return ChainState(tuple(trees), np.zeros(len(trees) + 1), scales, None, math.nan, 0.0, log_struct)
    D = np.empty((data.n, len(trees) + 1))
    D[:, 0] = 1.0
    for i, t in enumerate(trees):
        col = _column(t, data.X)
        if col is None:
            return None
        D[:, i + 1] = col
    beta, rss, ll = _fit(D, data.y, scales.sigma2)
    if not math.isfinite(ll):
        return None
    return ChainState(tuple(trees), beta, scales, D, rss, ll, log_struct)


def init_chain(cfg: RunConfig, data: Data, rng: np.random.Generator) -> ChainState:
    """K trees and scales drawn from the prior, with OLS weights on the data."""
    prior = cfg.prior.with_features(data.d)
    for _ in range(100):
        scales = sample_scales(prior, rng)
        trees = [sample_tree(prior, rng, scales) for _ in range(prior.K)]
        state = _make_state(trees, scales, data, prior, cfg.prior_only)
        if state is not None:
            return state
    trees = [Terminal(i % data.d) for i in range(prior.K)]
    state = _make_state(trees, scales, data, prior, cfg.prior_only)
    if state is None:
        raise InitFailure("single-feature trees are not finite on the data")
    return state


@dataclass
class StepInfo:
    move: str
    accepted: bool
    log_r: float
    dim_change: int
    path: str


def step_tree(state: ChainState, j: int, cfg: RunConfig, data: Data, rng: np.random.Generator):
    """Propose a new tree ``j`` and accept or reject it. Returns ``(state, StepInfo)``."""
    prior = cfg.prior if cfg.prior.w_ft is not None else cfg.prior.with_features(data.d)
    old_tree = state.trees[j]
    out = propose(old_tree, prior, rng, cfg.move_constants)
    skeleton = out.new_tree
    old_params = as_pairs(get_params(old_tree))
    m_old = len(old_params)
    m_new = count_lt_nodes(skeleton)
    scales = state.scales

    if m_new == m_old:
        path = "none"
        new_params, lq_new, lq_old = no_change_resample(old_params, scales, rng)
        new_scales = scales
        jump = 0.0
        # prior of the fresh draw cancels its proposal density (and likewise for the old draw)
        jump += log_prior_pairs(new_params, scales.sigma_a2, scales.sigma_b2) - lq_new
        jump -= log_prior_pairs(old_params, scales.sigma_a2, scales.sigma_b2) - lq_old
    else:
        pairs, extra_old, extra_new = correspondence(old_tree, skeleton, out.move)
        new_params = np.empty((m_new, 2))
        if m_new > m_old:
            path = "expand"
            res = expand(old_params[[i for i, _ in pairs]], m_new, prior, rng, scales)
            new_params[[jj for _, jj in pairs]] = res.new_params[:m_old]
            new_params[extra_new] = res.new_params[m_old:]
        else:
            path = "shrink"
            res = shrink(old_params, [i for i, _ in pairs], prior, rng, scales)
            new_params[[jj for _, jj in pairs]] = res.new_params
        new_scales = res.new_scales
        others = [p for i, t in enumerate(state.trees) if i != j for p in get_params(t)]
        jump = (
            log_prior_pairs(np.vstack([as_pairs(others), new_params]), new_scales.sigma_a2, new_scales.sigma_b2)
            - log_prior_pairs(np.vstack([as_pairs(others), old_params]), scales.sigma_a2, scales.sigma_b2)
            + log_hyperprior_pair(new_scales, prior)
            - log_hyperprior_pair(scales, prior)
            + res.log_ratio
        )

    new_tree = set_params(skeleton, new_params) if m_new else skeleton
    if cfg.gibbs_noise:
        sigma2 = scales.sigma2
    else:
        sigma2 = float(invgamma_rvs(*prior.shape_rate("noise"), rng))
    new_scales = ScaleState(new_scales.sigma_a2, new_scales.sigma_b2, sigma2)
    new_struct = log_prior_structure(new_tree, prior)
    u = rng.random()

    if cfg.prior_only:
        beta, rss, ll, design = state.beta, state.rss, 0.0, None
    else:
        col = _column(new_tree, data.X)
        if col is None:
            return state, StepInfo(out.move.tag, False, -math.inf, out.dim_change, path)
        design = state.design.copy()
        design[:, j + 1] = col
        beta, rss, ll = _fit(design, data.y, sigma2)

    log_r = (
        (ll - state.log_lik)
        + (new_struct - state.log_struct[j])
        + (out.log_q_reverse - out.log_q_forward)
        + jump
    )
    if math.isnan(log_r):
        log_r = -math.inf
    if not (math.log(u) < log_r if u > 0 else True):
        return state, StepInfo(out.move.tag, False, log_r, out.dim_change, path)

    trees = state.trees[:j] + (new_tree,) + state.trees[j + 1:]
    log_struct = state.log_struct[:j] + (new_struct,) + state.log_struct[j + 1:]
    new_state = ChainState(trees, beta, new_scales, design, rss, ll, log_struct,
                           state.iteration, state.accept_count + 1)
    return new_state, StepInfo(out.move.tag, True, log_r, out.dim_change, path)


def log_hyperprior_pair(scales: ScaleState, prior: PriorConfig) -> float:
    return invgamma_logpdf(scales.sigma_a2, *prior.shape_rate("a")) + invgamma_logpdf(
        scales.sigma_b2, *prior.shape_rate("b")
    )


def gibbs_noise_refresh(state: ChainState, cfg: RunConfig, data: Data, rng) -> ChainState:
    """Draw sigma^2 from its conditional posterior given the current RSS."""
    shape, rate = cfg.prior.shape_rate("noise")
    sigma2 = float(invgamma_rvs(shape + data.n / 2.0, rate + state.rss / 2.0, rng))
    return replace(state, scales=replace(state.scales, sigma2=sigma2),
                   log_lik=log_likelihood(state.rss, data.n, sigma2))


def run(cfg: RunConfig, data: Data, rng: np.random.Generator | None = None,
        state: ChainState | None = None, callback=None) -> RunResult:
    """Run the chain until the budget is spent.

    The best model is the visited state with the smallest training RSS,
    i.e. the largest log-likelihood at the noise variance that maximises it.
    ``callback(state, info)`` is invoked after every proposal.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    prior = cfg.prior.with_features(data.d)
    cfg = replace(cfg, prior=prior)
    if state is None:
        state = init_chain(cfg, data, rng)
    K = state.K
    burn_in = cfg.effective_burn_in
    records = []
    best = (state.rss, state.model())
    n_prop = n_acc = 0
    since_best = 0
    budget_acc = cfg.target_acceptances

    def done():
        if budget_acc is not None:
            return n_acc >= budget_acc or n_prop >= cfg.max_proposals
        return n_prop >= cfg.n_proposals

    while not done():
        for j in range(K):
            if done():
                break
            state, info = step_tree(state, j, cfg, data, rng)
            n_prop += 1
            n_acc += info.accepted
            if info.accepted:
                state.iteration = n_prop
            if callback is not None:
                callback(state, info)
            if info.accepted and not cfg.prior_only and state.rss < best[0]:
                best = (state.rss, state.model())
                since_best = 0
            else:
                since_best += 1
            counter = n_acc if budget_acc is not None else n_prop
            if cfg.record_trace and counter > burn_in and (counter - burn_in - 1) % cfg.thinning == 0:
                if budget_acc is None or info.accepted:
                    records.append(_record(state, n_prop, j, info, data, cfg.keep_states))
            if cfg.patience is not None and since_best >= cfg.patience:
                budget_acc = n_acc  # stop after this sweep
                break
        if not cfg.prior_only and cfg.gibbs_noise:
            state = gibbs_noise_refresh(state, cfg, data, rng)
    return RunResult(records, best[1], best[0], state, n_prop, n_acc, cfg.seed)


def _record(state: ChainState, iteration: int, j: int, info: StepInfo, data: Data, keep: bool) -> ChainRecord:
    rmse = math.sqrt(state.rss / data.n) if math.isfinite(state.rss) else math.nan
    return ChainRecord(
        iteration, j, info.move, info.accepted, state.log_lik, state.scales.sigma2,
        state.total_nodes(), rmse,
        trees=state.trees if keep else None,
        beta=state.beta.copy() if keep else None,
    )


# -- checkpoints -------------------------------------------------------------


def save_checkpoint(state: ChainState, rng: np.random.Generator, cfg: RunConfig) -> str:
    payload = {
        "state": state.to_dict(),
        "rng": rng.bit_generator.state,
        "prior": cfg.prior.to_dict(),
        "seed": cfg.seed,
    }
    return json.dumps(payload, indent=2, sort_keys=True)


def load_checkpoint(text: str, data: Data):
    """Rebuild ``(state, rng, prior)`` from :func:`save_checkpoint` output."""
    payload = json.loads(text)
    prior = PriorConfig.from_dict(payload["prior"])
    st = payload["state"]
    trees = [parse_infix(s) for s in st["trees"]]
    scales = ScaleState(**st["scales"])
    state = _make_state(trees, scales, data, prior, data.y is None)
    if state is None:
        raise InitFailure("checkpointed model is not finite on the data")
    state.iteration = st["iteration"]
    state.accept_count = st["accept_count"]
    rng = np.random.default_rng()
    rng.bit_generator.state = payload["rng"]
    return state, rng, prior


def profile_loglik_of(result: RunResult, n: int) -> float:
    return profile_log_likelihood(result.best_rss, n)
