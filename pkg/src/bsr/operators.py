"""Operator registry and the two built-in operator pools."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .exceptions import UnknownOperator

EXP_GUARD = 700.0


@dataclass(frozen=True)
class OperatorSpec:
    """A symbolic operator.

    ``fmt`` is the infix template used for rendering, with ``{0}``/``{1}``
    standing for the rendered children. Operators without a template render
    as ``name(arg, ...)``.
    """

    name: str
    arity: int
    func: Callable = field(compare=False, repr=False)
    has_params: bool = False
    fmt: str | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.arity not in (1, 2):
            raise ValueError(f"arity must be 1 or 2, got {self.arity}")

    def __call__(self, *args):
        return self.func(*args)


def _exp(x):
    out = np.exp(np.minimum(x, EXP_GUARD))
    return np.where(x > EXP_GUARD, np.inf, out)


def _lt(x, a, b):
    return a * x + b


def _safe_div(x, y):
    with np.errstate(divide="ignore", invalid="ignore"):
        return x / y


def _inv(x):
    with np.errstate(divide="ignore", invalid="ignore"):
        return 1.0 / x


ADD = OperatorSpec("add", 2, np.add, fmt="({0}+{1})")
SUB = OperatorSpec("sub", 2, np.subtract, fmt="({0}-{1})")
MUL = OperatorSpec("mul", 2, np.multiply, fmt="({0}*{1})")
DIV = OperatorSpec("div", 2, _safe_div, fmt="({0}/{1})")
EXP = OperatorSpec("exp", 1, _exp, fmt="exp({0})")
SIN = OperatorSpec("sin", 1, np.sin, fmt="sin({0})")
COS = OperatorSpec("cos", 1, np.cos, fmt="cos({0})")
INV = OperatorSpec("inv", 1, _inv, fmt="(1/{0})")
NEG = OperatorSpec("neg", 1, np.negative, fmt="(-{0})")
SQUARE = OperatorSpec("square", 1, np.square, fmt="({0}^2)")
CUBE = OperatorSpec("cube", 1, lambda x: x * x * x, fmt="({0}^3)")
LT = OperatorSpec("lt", 1, _lt, has_params=True)

BUILTIN_OPERATORS: dict[str, OperatorSpec] = {
    op.name: op for op in (ADD, SUB, MUL, DIV, EXP, SIN, COS, INV, NEG, SQUARE, CUBE, LT)
}

# user-registered operators live alongside the built-ins
_REGISTRY: dict[str, OperatorSpec] = dict(BUILTIN_OPERATORS)


def register_operator(op: OperatorSpec) -> OperatorSpec:
    """Make ``op`` available to the parser and to :func:`get_operator`."""
    existing = _REGISTRY.get(op.name)
    if existing is not None and existing is not op:
        raise ValueError(f"operator {op.name!r} already registered")
    _REGISTRY[op.name] = op
    return op


def get_operator(name: str) -> OperatorSpec:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise UnknownOperator(name) from None


class OperatorSet:
    """An ordered pool of operators with sampling weights ``w_op``."""

    def __init__(self, ops: Sequence[OperatorSpec | str], weights: Sequence[float] | None = None):
        ops = [get_operator(o) if isinstance(o, str) else o for o in ops]
        if not ops:
            raise ValueError("operator set is empty")
        names = [o.name for o in ops]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate operator names in {names}")
        if weights is None:
            weights = np.full(len(ops), 1.0 / len(ops))
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (len(ops),):
            raise ValueError("weights must have one entry per operator")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError("operator weights must be non-negative and sum to 1")
        self.ops = tuple(ops)
        self.weights = weights
        self._cum = np.cumsum(weights)
        self._index = {o.name: i for i, o in enumerate(ops)}
        with np.errstate(divide="ignore"):
            self._logw = np.log(weights)

    def __len__(self):
        return len(self.ops)

    def __iter__(self):
        return iter(self.ops)

    def __contains__(self, op):
        name = op if isinstance(op, str) else op.name
        return name in self._index

    @property
    def names(self):
        return [o.name for o in self.ops]

    def log_weight(self, op: OperatorSpec | str) -> float:
        name = op if isinstance(op, str) else op.name
        try:
            return float(self._logw[self._index[name]])
        except KeyError:
            raise UnknownOperator(name) from None

    def sample(self, rng: np.random.Generator) -> OperatorSpec:
        i = int(np.searchsorted(self._cum, rng.random() * self._cum[-1], side="right"))
        return self.ops[min(i, len(self.ops) - 1)]

    def to_dict(self):
        return {"ops": self.names, "weights": self.weights.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(d["ops"], d.get("weights"))

    def __eq__(self, other):
        if not isinstance(other, OperatorSet):
            return NotImplemented
        return self.names == other.names and np.array_equal(self.weights, other.weights)

    def __repr__(self):
        return f"OperatorSet({self.names})"


def default_operators() -> OperatorSet:
    """Uniform pool {exp, lt, inv, neg, +, *}."""
    return OperatorSet(["exp", "lt", "inv", "neg", "add", "mul"])


def benchmark_operators() -> OperatorSet:
    """Uniform pool {+, -, *, /, sin, cos, exp, x^2, x^3} plus lt."""
    return OperatorSet(["add", "sub", "mul", "div", "sin", "cos", "exp", "square", "cube", "lt"])


PRESETS = {"default": default_operators, "benchmark": benchmark_operators}


def operator_set(spec) -> OperatorSet:
    """Resolve a preset name, a list of operator names, or a dict to an OperatorSet."""
    if isinstance(spec, OperatorSet):
        return spec
    if isinstance(spec, str):
        try:
            return PRESETS[spec]()
        except KeyError:
            raise ValueError(f"unknown operator preset {spec!r}; choose from {sorted(PRESETS)}") from None
    if isinstance(spec, dict):
        return OperatorSet.from_dict(spec)
    return OperatorSet(list(spec))
