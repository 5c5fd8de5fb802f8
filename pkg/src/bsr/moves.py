"""Structure proposals: the seven reversible tree transitions.

Every move is described by a :class:`MoveKind` carrying enough payload to
replay it deterministically. Proposal densities are path densities: the
probability of picking the move type, times the uniform site choice, times
the probability of every random payload (operators from ``w_op``, features
from ``w_ft``, subtrees from the tree prior at their absolute depth). Each
move has a unique inverse (:func:`inverse`), so forward and reverse
densities are computed by the same function, :func:`log_q`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .exceptions import InvalidSite
from .prior import PriorConfig, _sample_feature, log_prior_subtree, sample_subtree
from .tree import Node, NonTerminal, Path, Terminal, get_node, is_terminal, replace_at, walk

STAY = "Stay"
GROW = "Grow"
PRUNE = "Prune"
DELETE = "Delete"
INSERT = "Insert"
REASSIGN_OP = "ReassignOperator"
REASSIGN_FT = "ReassignFeature"
MOVES = (STAY, GROW, PRUNE, DELETE, INSERT, REASSIGN_OP, REASSIGN_FT)

_LOG_HALF = math.log(0.5)


@dataclass(frozen=True)
class MoveConstants:
    """Tunable constants of the move-selection probabilities.

    ``p_stay = n_l / (stay * (n_l + stay_offset))``,
    ``p_grow = r * min(1, grow / (N_nt + 2))``,
    ``p_delete = r * N_c / (N_c + delete)`` with ``r = (1 - p_stay) / 3``.
    """

    stay: float = 4.0
    stay_offset: float = 3.0
    grow: float = 8.0
    delete: float = 3.0


DEFAULT_CONSTANTS = MoveConstants()


@dataclass(frozen=True)
class MoveKind:
    """A fully specified move.

    ``detail`` keys by tag: Grow ``node``; Prune ``feature``; Delete
    ``keep``; Insert ``op``, ``side``, ``sibling``; ReassignOperator ``op``,
    ``right``; ReassignFeature ``feature``.
    """

    tag: str
    site: Path = ()
    detail: dict = field(default_factory=dict, compare=False)

    def get(self, key, default=None) -> Any:
        return self.detail.get(key, default)


@dataclass
class ProposalOutcome:
    new_tree: Node
    log_q_forward: float
    log_q_reverse: float
    dim_change: int
    move: MoveKind


@dataclass
class TreeStats:
    """Eligible sites for each move type, collected in one traversal."""

    terminals: list
    growable: list
    nonterminals: list
    delete_candidates: list
    all_paths: list
    n_lt: int

    @property
    def n_nodes(self):
        return len(self.all_paths)

    @property
    def insert_sites(self):
        return self.all_paths if self.nonterminals else []


def tree_stats(tree: Node, max_depth: int = 15) -> TreeStats:
    terminals, growable, nonterminals, cands, all_paths = [], [], [], [], []
    n_lt = 0
    for p, n, d in walk(tree):
        all_paths.append(p)
        if is_terminal(n):
            terminals.append(p)
            if d < max_depth:
                growable.append(p)
            continue
        nonterminals.append(p)
        if n.op.has_params:
            n_lt += 1
        if p or any(not is_terminal(c) for c in n.children):
            cands.append(p)
    return TreeStats(terminals, growable, nonterminals, cands, all_paths, n_lt)


def count_delete_candidates(tree: Node) -> int:
    """Non-terminal nodes that Delete may remove (the root only with a non-terminal child)."""
    return len(tree_stats(tree).delete_candidates)


def _sites(stats: TreeStats, tag: str) -> list:
    return {
        STAY: [()],
        GROW: stats.growable,
        PRUNE: stats.nonterminals,
        DELETE: stats.delete_candidates,
        INSERT: stats.insert_sites,
        REASSIGN_OP: stats.nonterminals,
        REASSIGN_FT: stats.terminals,
    }[tag]


def raw_move_probabilities(n_l: int, n_nt: int, n_c: int, consts: MoveConstants = DEFAULT_CONSTANTS):
    """The seven selection probabilities before feasibility adjustment."""
    p0 = n_l / (consts.stay * (n_l + consts.stay_offset))
    r = (1.0 - p0) / 3.0
    pg = r * min(1.0, consts.grow / (n_nt + 2))
    pp = r - pg
    pd = r * n_c / (n_c + consts.delete)
    pi = r - pd
    pro = prf = (1.0 - p0) / 6.0
    return np.array([p0, pg, pp, pd, pi, pro, prf])


def move_probabilities(
    tree: Node, max_depth: int = 15, consts: MoveConstants = DEFAULT_CONSTANTS, stats: TreeStats | None = None
) -> np.ndarray:
    """Selection probabilities of (Stay, Grow, Prune, Delete, Insert, ReassignOperator,
    ReassignFeature); moves without an eligible site get 0 and the rest is renormalised."""
    if stats is None:
        stats = tree_stats(tree, max_depth)
    p = raw_move_probabilities(stats.n_lt, len(stats.nonterminals), len(stats.delete_candidates), consts)
    for i, tag in enumerate(MOVES):
        if i and not _sites(stats, tag):
            p[i] = 0.0
    return p / p.sum()


# -- replay ------------------------------------------------------------------


def replay(tree: Node, move: MoveKind) -> Node:
    """Apply ``move`` to ``tree``; pure and deterministic."""
    tag, site = move.tag, move.site
    if tag == STAY:
        return tree
    node = get_node(tree, site)
    if tag == GROW:
        if not is_terminal(node):
            raise InvalidSite(f"Grow needs a terminal at {site}")
        return replace_at(tree, site, move.get("node"))
    if tag == PRUNE:
        if is_terminal(node):
            raise InvalidSite(f"Prune needs a non-terminal at {site}")
        return replace_at(tree, site, Terminal(move.get("feature")))
    if tag == DELETE:
        if is_terminal(node):
            raise InvalidSite(f"Delete needs a non-terminal at {site}")
        keep = move.get("keep", 0)
        if keep >= len(node.children):
            raise InvalidSite(f"node at {site} has no child {keep}")
        if not site and is_terminal(node.children[keep]):
            raise InvalidSite("Delete may not leave a terminal root")
        return replace_at(tree, site, node.children[keep])
    if tag == INSERT:
        op = move.get("op")
        side = move.get("side", 0)
        if op.arity == 1:
            children = (node,)
        else:
            sib = move.get("sibling")
            children = (node, sib) if side == 0 else (sib, node)
        return replace_at(tree, site, NonTerminal(op, children, move.get("params")))
    if tag == REASSIGN_OP:
        if is_terminal(node):
            raise InvalidSite(f"ReassignOperator needs a non-terminal at {site}")
        op = move.get("op")
        if op.arity == node.op.arity:
            children = node.children
        elif op.arity == 1:
            children = node.children[:1]
        else:
            children = (node.children[0], move.get("right"))
        params = node.params if op.name == node.op.name else move.get("params")
        return replace_at(tree, site, NonTerminal(op, children, params))
    if tag == REASSIGN_FT:
        if not is_terminal(node):
            raise InvalidSite(f"ReassignFeature needs a terminal at {site}")
        return replace_at(tree, site, Terminal(move.get("feature")))
    raise ValueError(f"unknown move {tag!r}")


def inverse(tree: Node, move: MoveKind) -> MoveKind:
    """The move that takes ``replay(tree, move)`` back to ``tree``."""
    tag, site = move.tag, move.site
    if tag == STAY:
        return move
    node = get_node(tree, site)
    if tag == GROW:
        return MoveKind(PRUNE, site, {"feature": node.feature})
    if tag == PRUNE:
        return MoveKind(GROW, site, {"node": node})
    if tag == DELETE:
        keep = move.get("keep", 0)
        detail = {"op": node.op, "side": keep, "params": node.params}
        if node.op.arity == 2:
            detail["sibling"] = node.children[1 - keep]
        return MoveKind(INSERT, site, detail)
    if tag == INSERT:
        return MoveKind(DELETE, site, {"keep": move.get("side", 0) if move.get("op").arity == 2 else 0})
    if tag == REASSIGN_OP:
        detail = {"op": node.op, "params": node.params}
        if node.op.arity == 2 and move.get("op").arity == 1:
            detail["right"] = node.children[1]
        return MoveKind(REASSIGN_OP, site, detail)
    if tag == REASSIGN_FT:
        return MoveKind(REASSIGN_FT, site, {"feature": node.feature})
    raise ValueError(f"unknown move {tag!r}")


# -- densities ---------------------------------------------------------------


def _log(p):
    return math.log(p) if p > 0 else -math.inf


def _log_w_ft(cfg: PriorConfig, f: int) -> float:
    return _log(cfg.w_ft[f]) if 0 <= f < len(cfg.w_ft) else -math.inf


def log_q(tree: Node, move: MoveKind, cfg: PriorConfig, consts: MoveConstants = DEFAULT_CONSTANTS,
          stats: TreeStats | None = None) -> float:
    """Log density of choosing and executing ``move`` on ``tree``."""
    if stats is None:
        stats = tree_stats(tree, cfg.max_depth)
    probs = move_probabilities(tree, cfg.max_depth, consts, stats)
    tag, site = move.tag, move.site
    lp = _log(probs[MOVES.index(tag)])
    if tag == STAY or lp == -math.inf:
        return lp
    sites = _sites(stats, tag)
    if site not in sites:
        return -math.inf
    lp -= math.log(len(sites))
    depth = len(site)
    node = get_node(tree, site)
    if tag == GROW:
        new = move.get("node")
        if new.op.name not in cfg.operators:
            return -math.inf
        lp += cfg.operators.log_weight(new.op)
        for c in new.children:
            lp += log_prior_subtree(c, depth + 1, cfg)
    elif tag in (PRUNE, REASSIGN_FT):
        lp += _log_w_ft(cfg, move.get("feature"))
    elif tag == DELETE:
        if node.op.arity == 2:
            if site:
                lp += _LOG_HALF
            else:
                n_ok = sum(1 for c in node.children if not is_terminal(c))
                if is_terminal(node.children[move.get("keep", 0)]):
                    return -math.inf
                lp -= math.log(n_ok)
    elif tag == INSERT:
        op = move.get("op")
        if op.name not in cfg.operators:
            return -math.inf
        lp += cfg.operators.log_weight(op)
        if op.arity == 2:
            lp += _LOG_HALF + log_prior_subtree(move.get("sibling"), depth + 1, cfg)
    elif tag == REASSIGN_OP:
        op = move.get("op")
        if op.name not in cfg.operators:
            return -math.inf
        lp += cfg.operators.log_weight(op)
        if node.op.arity == 1 and op.arity == 2:
            lp += log_prior_subtree(move.get("right"), depth + 1, cfg)
    return lp


# -- sampling ----------------------------------------------------------------


def _choice(rng, items):
    return items[int(rng.integers(len(items)))]


def sample_move(tree: Node, cfg: PriorConfig, rng: np.random.Generator,
                consts: MoveConstants = DEFAULT_CONSTANTS, stats: TreeStats | None = None) -> MoveKind:
    """Draw a move and its payload. New lt nodes are created without parameters."""
    if stats is None:
        stats = tree_stats(tree, cfg.max_depth)
    probs = move_probabilities(tree, cfg.max_depth, consts, stats)
    cum = np.cumsum(probs)
    k = min(int(np.searchsorted(cum, rng.random() * cum[-1], side="right")), len(MOVES) - 1)
    while probs[k] == 0.0:  # guards against round-off at the upper edge
        k -= 1
    tag = MOVES[k]
    if tag == STAY:
        return MoveKind(STAY)
    site = _choice(rng, _sites(stats, tag))
    depth = len(site)
    node = get_node(tree, site)
    if tag == GROW:
        op = cfg.operators.sample(rng)
        children = tuple(sample_subtree(depth + 1, cfg, rng) for _ in range(op.arity))
        return MoveKind(GROW, site, {"node": NonTerminal(op, children)})
    if tag in (PRUNE, REASSIGN_FT):
        return MoveKind(tag, site, {"feature": _sample_feature(cfg.w_ft, rng)})
    if tag == DELETE:
        if node.op.arity == 1:
            keep = 0
        elif site:
            keep = int(rng.integers(2))
        else:
            keep = _choice(rng, [i for i, c in enumerate(node.children) if not is_terminal(c)])
        return MoveKind(DELETE, site, {"keep": keep})
    if tag == INSERT:
        op = cfg.operators.sample(rng)
        detail = {"op": op, "side": 0}
        if op.arity == 2:
            detail["side"] = int(rng.integers(2))
            detail["sibling"] = sample_subtree(depth + 1, cfg, rng)
        return MoveKind(INSERT, site, detail)
    if tag == REASSIGN_OP:
        op = cfg.operators.sample(rng)
        detail = {"op": op}
        if node.op.arity == 1 and op.arity == 2:
            detail["right"] = sample_subtree(depth + 1, cfg, rng)
        return MoveKind(REASSIGN_OP, site, detail)
    raise AssertionError(tag)


def propose(tree: Node, cfg: PriorConfig, rng: np.random.Generator,
            consts: MoveConstants = DEFAULT_CONSTANTS) -> ProposalOutcome:
    """Draw a structure move and return the new tree with both proposal densities."""
    stats = tree_stats(tree, cfg.max_depth)
    move = sample_move(tree, cfg, rng, consts, stats)
    new_tree = replay(tree, move)
    fwd = log_q(tree, move, cfg, consts, stats)
    rev = log_q(new_tree, inverse(tree, move), cfg, consts)
    new_stats = tree_stats(new_tree, cfg.max_depth)
    return ProposalOutcome(new_tree, fwd, rev, new_stats.n_lt - stats.n_lt, move)


# -- parameter bookkeeping ---------------------------------------------------


def _map_path(move: MoveKind, old_node_at_site: Node, path: Path):
    """Where the node at ``path`` ends up after ``move`` (None if discarded)."""
    tag, site = move.tag, move.site
    k = len(site)
    inside = path[:k] == site
    if tag in (STAY, GROW, REASSIGN_FT) or not inside:
        return path
    rest = path[k:]
    if tag == PRUNE:
        return None
    if tag == DELETE:
        if not rest:
            return None
        if rest[0] == move.get("keep", 0):
            return site + rest[1:]
        return None
    if tag == INSERT:
        side = move.get("side", 0) if move.get("op").arity == 2 else 0
        return site + (side,) + rest
    if tag == REASSIGN_OP:
        new_op = move.get("op")
        if not rest:
            return path if new_op.name == old_node_at_site.op.name else None
        if new_op.arity == 1 and rest[0] == 1:
            return None
        return path
    raise ValueError(tag)


def pair_lt_nodes(old_tree: Node, new_tree: Node, move: MoveKind):
    """Match lt nodes of ``old_tree`` with those of ``new_tree``.

    Returns ``(kept, dropped, created)``: ``kept`` maps pre-order lt index in
    the old tree to pre-order lt index in the new tree for nodes the move did
    not touch; ``dropped`` and ``created`` list the remaining old and new
    indices, in pre-order.
    """
    old_paths = [p for p, n, _ in walk(old_tree) if not is_terminal(n) and n.op.has_params]
    new_paths = [p for p, n, _ in walk(new_tree) if not is_terminal(n) and n.op.has_params]
    new_index = {p: i for i, p in enumerate(new_paths)}
    at_site = get_node(old_tree, move.site) if move.tag != STAY else None
    kept, dropped = {}, []
    for i, p in enumerate(old_paths):
        q = _map_path(move, at_site, p)
        j = new_index.get(q) if q is not None else None
        if j is None:
            dropped.append(i)
        else:
            kept[i] = j
    taken = set(kept.values())
    created = [j for j in range(len(new_paths)) if j not in taken]
    return kept, dropped, created


def correspondence(old_tree: Node, new_tree: Node, move: MoveKind):
    """Deterministic matching of old to new lt slots used by the dimension jumps.

    Survivors keep their identity; the remaining dropped and created slots are
    zipped in pre-order. The matching is symmetric: running it on the inverse
    move yields the same pairs with roles swapped.
    """
    kept, dropped, created = pair_lt_nodes(old_tree, new_tree, move)
    pairs = sorted(kept.items())
    pairs += list(zip(dropped, created))
    pairs.sort()
    matched_old = {i for i, _ in pairs}
    matched_new = {j for _, j in pairs}
    n_old = len(kept) + len(dropped)
    n_new = len(kept) + len(created)
    extra_old = [i for i in range(n_old) if i not in matched_old]
    extra_new = [j for j in range(n_new) if j not in matched_new]
    return pairs, extra_old, extra_new
