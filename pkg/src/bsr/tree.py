"""Immutable expression trees and their evaluation.

A tree is a nest of :class:`Terminal` and :class:`NonTerminal` nodes. Nodes
are frozen; every modification goes through :func:`replace_at`, which
rebuilds the path from the root and shares untouched subtrees.

Nodes are located by *paths*: tuples of child indices from the root, so the
root is ``()`` and its right child is ``(1,)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Union

import numpy as np

from .exceptions import FeatureOutOfRange, InvalidSite, InvalidTree
from .operators import OperatorSpec

Path = tuple


@dataclass(frozen=True, slots=True)
class Terminal:
    feature: int

    @property
    def children(self):
        return ()


@dataclass(frozen=True, slots=True)
class NonTerminal:
    op: OperatorSpec
    children: tuple
    params: tuple | None = None

    def __post_init__(self):
        if len(self.children) != self.op.arity:
            raise InvalidTree(
                f"operator {self.op.name!r} has arity {self.op.arity} "
                f"but got {len(self.children)} children"
            )
        if self.op.has_params:
            if self.params is not None and len(self.params) != 2:
                raise InvalidTree(f"{self.op.name!r} needs exactly two parameters")
        elif self.params is not None:
            raise InvalidTree(f"operator {self.op.name!r} takes no parameters")


Node = Union[Terminal, NonTerminal]
ExprTree = Node


def is_terminal(node: Node) -> bool:
    return isinstance(node, Terminal)


def walk(node: Node, path: Path = (), depth: int = 0) -> Iterator[tuple[Path, Node, int]]:
    """Pre-order traversal yielding ``(path, node, depth)``."""
    stack = [(path, node, depth)]
    while stack:
        p, n, d = stack.pop()
        yield p, n, d
        ch = n.children
        for i in range(len(ch) - 1, -1, -1):
            stack.append((p + (i,), ch[i], d + 1))


def get_node(tree: Node, path: Path) -> Node:
    node = tree
    for i in path:
        ch = node.children
        if i >= len(ch):
            raise InvalidSite(f"no node at path {path}")
        node = ch[i]
    return node


def depth_of(path: Path) -> int:
    return len(path)


def replace_at(tree: Node, path: Path, new: Node) -> Node:
    """Return a copy of ``tree`` with the subtree at ``path`` swapped for ``new``."""
    if not path:
        return new
    head, rest = path[0], path[1:]
    ch = tree.children
    if head >= len(ch):
        raise InvalidSite(f"no node at path {path}")
    children = ch[:head] + (replace_at(ch[head], rest, new),) + ch[head + 1:]
    return NonTerminal(tree.op, children, tree.params)


# -- structural metrics ------------------------------------------------------


def node_count(tree: Node) -> int:
    return sum(1 for _ in walk(tree))


def depth(tree: Node) -> int:
    return max(d for _, _, d in walk(tree))


def count_nonterminal(tree: Node) -> int:
    return sum(1 for _, n, _ in walk(tree) if not is_terminal(n))


def count_terminal(tree: Node) -> int:
    return sum(1 for _, n, _ in walk(tree) if is_terminal(n))


def count_lt_nodes(tree: Node) -> int:
    return sum(1 for _, n, _ in walk(tree) if not is_terminal(n) and n.op.has_params)


def lt_paths(tree: Node) -> list[Path]:
    """Paths of parameterised nodes in pre-order."""
    return [p for p, n, _ in walk(tree) if not is_terminal(n) and n.op.has_params]


def get_params(tree: Node) -> list[tuple[float, float]]:
    """Parameter pairs of the lt nodes in pre-order."""
    return [n.params for _, n, _ in walk(tree) if not is_terminal(n) and n.op.has_params]


def set_params(tree: Node, pairs) -> Node:
    """Return ``tree`` with lt parameters replaced, in pre-order."""
    pairs = list(pairs)
    if len(pairs) != count_lt_nodes(tree):
        raise InvalidTree(f"got {len(pairs)} parameter pairs for {count_lt_nodes(tree)} lt nodes")
    it = iter(pairs)

    def rebuild(node):
        if is_terminal(node):
            return node
        params = node.params
        if node.op.has_params:
            a, b = next(it)
            params = (float(a), float(b))
        return NonTerminal(node.op, tuple(rebuild(c) for c in node.children), params)

    return rebuild(tree)


def features(tree: Node) -> list[int]:
    return [n.feature for _, n, _ in walk(tree) if is_terminal(n)]


def validate(tree: Node, n_features: int | None = None) -> None:
    for _, n, _ in walk(tree):
        if is_terminal(n):
            if n.feature < 0 or (n_features is not None and n.feature >= n_features):
                raise FeatureOutOfRange(f"feature index {n.feature} out of range for d={n_features}")
        else:
            if len(n.children) != n.op.arity:
                raise InvalidTree(f"arity mismatch at operator {n.op.name!r}")
            if n.op.has_params and n.params is None:
                raise InvalidTree(f"{n.op.name!r} node has no parameters")


# -- evaluation --------------------------------------------------------------


def _eval(node: Node, X: np.ndarray) -> np.ndarray:
    if isinstance(node, Terminal):
        return X[:, node.feature]
    vals = [_eval(c, X) for c in node.children]
    if node.params is not None:
        return node.op.func(vals[0], *node.params)
    return node.op.func(*vals)


def eval_tree(tree: Node, X) -> np.ndarray:
    """Evaluate ``tree`` on every row of ``X`` (n x d).

    Division by zero and exp overflow yield inf/nan entries rather than
    errors; use :func:`np.isfinite` on the result to detect them.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    validate(tree, X.shape[1])
    with np.errstate(all="ignore"):
        out = _eval(tree, X)
    return np.array(out, dtype=float, copy=True).reshape(X.shape[0])


def eval_unchecked(tree: Node, X: np.ndarray) -> np.ndarray:
    """Fast path used inside the sampler, where trees are valid by construction."""
    with np.errstate(all="ignore"):
        return _eval(tree, X)


def structure_key(tree: Node):
    """Hashable description of (T, M), ignoring lt parameter values."""
    if isinstance(tree, Terminal):
        return tree.feature
    return (tree.op.name,) + tuple(structure_key(c) for c in tree.children)
