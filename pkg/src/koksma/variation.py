"""Vitali and Hardy-Krause variation on dyadic partitions, derivative bounds,
and the closed-form variation bounds for squared losses of linear models.

Functions are restricted to coordinate subsets by pinning the remaining
coordinates to 1 (variation anchored at the upper corner).
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import BudgetExceeded, EmptySubset, ShapeMismatch, ValidationError
from .function import FunctionHandle

__all__ = [
    "FunctionHandle",
    "VariationReport",
    "restrict",
    "vitali_variation",
    "hardy_krause_variation",
    "derivative_variation_bound",
    "thm2_variation_bound",
    "thm3_variation_bound",
    "builtin",
    "BUILTINS",
]

CELL_BUDGET = 1 << 26
MAX_HK_DIM = 8


def restrict(f: FunctionHandle, subset) -> FunctionHandle:
    """Function of the coordinates in ``subset`` (0-based), others fixed to 1."""
    J = tuple(sorted(set(int(j) for j in subset)))
    if not J:
        raise EmptySubset("subset must be non-empty")
    if J[0] < 0 or J[-1] >= f.arity:
        raise ValidationError(f"subset {J} out of range for arity {f.arity}")
    if len(J) == f.arity:
        return f
    d = f.arity

    def evaluate(S: np.ndarray) -> np.ndarray:
        T = np.ones((len(S), d))
        T[:, J] = S
        return f(T)

    return FunctionHandle(len(J), evaluate, f.smoothness, True, f"{f.name}|{J}")


def _node_grid(nodes: np.ndarray, k: int) -> np.ndarray:
    """All points of ``nodes^k`` in C order, shape ``(len(nodes)**k, k)``."""
    if k == 0:
        return np.empty((1, 0))
    mesh = np.meshgrid(*([nodes] * k), indexing="ij")
    return np.stack([g.reshape(-1) for g in mesh], axis=1)


def _slab_values(f: FunctionHandle, x0: float, rest: np.ndarray, shape: tuple) -> np.ndarray:
    T = np.empty((len(rest), f.arity))
    T[:, 0] = x0
    T[:, 1:] = rest
    return f(T).reshape(shape)


def vitali_variation(f: FunctionHandle, level: int, budget: int = CELL_BUDGET) -> float:
    """Sum of ``|alternating corner difference|`` over the dyadic partition of depth ``level``.

    This is a lower bound of the Vitali variation, nondecreasing in ``level``.
    """
    if level < 0:
        raise ValidationError("level must be >= 0")
    k = f.arity
    n = 1 << level
    if n**k > budget:
        raise BudgetExceeded(n**k, budget)
    nodes = np.arange(n + 1, dtype=np.float64) / n
    rest = _node_grid(nodes, k - 1)
    shape = (n + 1,) * (k - 1)
    partial = []
    prev = _slab_values(f, nodes[0], rest, shape)
    for i in range(1, n + 1):
        cur = _slab_values(f, nodes[i], rest, shape)
        D = cur - prev
        for ax in range(k - 1):
            D = np.diff(D, axis=ax)
        partial.append(float(np.abs(D).sum()))
        prev = cur
    return math.fsum(partial)


@dataclass(frozen=True)
class VariationReport:
    per_subset: dict
    total: float
    level: int
    converged: bool
    previous_total: float = math.nan

    def to_json(self) -> dict:
        return {
            "per_subset": {",".join(str(j) for j in J): v for J, v in self.per_subset.items()},
            "total": self.total,
            "level": self.level,
            "converged": self.converged,
            "previous_total": self.previous_total,
        }


def subsets(d: int):
    for k in range(1, d + 1):
        yield from itertools.combinations(range(d), k)


def hardy_krause_variation(f: FunctionHandle, level: int, budget: int = CELL_BUDGET) -> VariationReport:
    """Hardy-Krause variation estimate: Vitali estimates summed over all subsets.

    ``converged`` compares totals at ``level`` and ``level - 1`` (relative change
    below 1e-3).
    """
    d = f.arity
    if d > MAX_HK_DIM:
        raise BudgetExceeded(2**d - 1, 2**MAX_HK_DIM - 1, "subsets")
    per = {}
    coarse = []
    for J in subsets(d):
        g = restrict(f, J)
        per[J] = vitali_variation(g, level, budget)
        if level >= 1:
            coarse.append(vitali_variation(g, level - 1, budget))
    total = math.fsum(per.values())
    prev = math.fsum(coarse) if coarse else math.nan
    if level >= 1:
        scale = max(abs(total), 1e-300)
        converged = abs(total - prev) / scale < 1e-3 if total != 0 else prev == 0
    else:
        converged = False
    return VariationReport(per, total, level, bool(converged), prev)


def derivative_variation_bound(f: FunctionHandle, grid_n: int, budget: int = CELL_BUDGET) -> tuple[float, float]:
    """Finite-difference estimates of ``sup |d^k f|`` and ``int |d^k f|``.

    The mixed partial is approximated at interior nodes ``i / grid_n`` by a
    tensor central difference with step ``1 / grid_n``. The integral uses a
    midpoint rule in which each interior node stands for its cell; the two
    outermost nodes per axis also absorb the boundary half-cells.
    """
    if f.smoothness == "none":
        raise ValidationError("derivative bound needs a function with smoothness hint >= continuous")
    if grid_n < 4:
        raise ValidationError("grid_n must be >= 4")
    k = f.arity
    n = grid_n
    if (n + 1) ** k > budget:
        raise BudgetExceeded((n + 1) ** k, budget)
    h = 1.0 / n
    nodes = np.arange(n + 1, dtype=np.float64) / n
    w = np.full(n - 1, h)
    w[0] += h / 2
    w[-1] += h / 2
    rest = _node_grid(nodes, k - 1)
    shape = (n + 1,) * (k - 1)
    W_rest = np.ones(())
    for _ in range(k - 1):
        W_rest = W_rest[..., None] * w
    scale = (2 * h) ** k
    slabs = [_slab_values(f, nodes[0], rest, shape), _slab_values(f, nodes[1], rest, shape)]
    sup = 0.0
    parts = []
    for i in range(1, n):
        nxt = _slab_values(f, nodes[i + 1], rest, shape)
        D = nxt - slabs[0]
        for ax in range(k - 1):
            D = np.take(D, range(2, n + 1), axis=ax) - np.take(D, range(0, n - 1), axis=ax)
        est = np.abs(D) / scale
        sup = max(sup, float(est.max()))
        parts.append(float((W_rest * est).sum()) * w[i - 1])
        slabs = [slabs[1], nxt]
    return sup, math.fsum(parts)


# ---------------------------------------------------------------------------
# closed-form bounds


def _as_matrix(W) -> np.ndarray:
    W = np.asarray(W, dtype=np.float64)
    if W.ndim == 1:
        W = W[None, :]
    if W.ndim != 2:
        raise ShapeMismatch(f"expected a matrix, got shape {W.shape}")
    return W


def thm2_variation_bound(W_hat, W_star) -> float:
    """Variation bound for ``f(t) = 0.5 ||(W_hat - W_star) t||^2`` on ``[0,1]^d_phi``.

    ``sum_l ||dW_l^T dW||_1 + sum_{l<l'} |dW_l^T dW_l'|`` with ``dW_l`` the
    ``l``-th column of ``W_hat - W_star``.
    """
    A, B = _as_matrix(W_hat), _as_matrix(W_star)
    if A.shape != B.shape:
        raise ShapeMismatch(f"W_hat {A.shape} and W_star {B.shape} differ")
    dW = A - B
    G = dW.T @ dW
    iu = np.triu_indices(G.shape[0], 1)
    return math.fsum(np.abs(G).ravel().tolist()) + math.fsum(np.abs(G[iu]).tolist())


def thm3_variation_bound(W_hat, M: float, d_y: int) -> float:
    """Variation bound for ``f(t, y) = 0.5 ||W_hat t - y||^2`` on ``[0,1]^(d_phi + d_y)``."""
    W = _as_matrix(W_hat)
    if W.shape[0] != d_y:
        raise ShapeMismatch(f"W_hat has {W.shape[0]} rows, expected d_y={d_y}")
    if M < 0:
        raise ValidationError("M must be >= 0")
    if M == 0:
        warnings.warn("M = 0: the label range is degenerate", UserWarning, stacklevel=2)
    G = W.T @ W
    iu = np.triu_indices(G.shape[0], 1)
    col_l1 = np.abs(W).sum(axis=0)
    return (M + 1) * math.fsum(col_l1.tolist()) + math.fsum(np.abs(G[iu]).tolist()) + d_y * M


# ---------------------------------------------------------------------------
# builtin test functions


def _constant(d, c=1.0):
    return FunctionHandle(d, lambda T: np.full(len(T), float(c)), "mixed-partials-continuous", name="constant")


def _linear(d, a=None, b=0.0):
    a = np.ones(d) if a is None else np.asarray(a, dtype=np.float64)
    if a.shape != (d,):
        raise ShapeMismatch(f"linear coefficients need length {d}")
    return FunctionHandle(d, lambda T: T @ a + b, "mixed-partials-continuous", name="linear")


def _product(d):
    return FunctionHandle(d, lambda T: np.prod(T, axis=1), "mixed-partials-continuous", name="product")


def _square(d):
    return FunctionHandle(d, lambda T: (T**2).sum(axis=1), "mixed-partials-continuous", name="square")


def _quadratic(d, D=None):
    D = _as_matrix(np.eye(d) if D is None else D)
    if D.shape[1] != d:
        raise ShapeMismatch(f"matrix needs {d} columns")
    return FunctionHandle(
        d, lambda T: 0.5 * ((T @ D.T) ** 2).sum(axis=1), "mixed-partials-continuous", name="quadratic"
    )


def _quadratic_loss(d, W=None, d_y=None):
    if W is None:
        raise ValidationError("quadratic-loss needs a weight matrix W")
    W = _as_matrix(W)
    d_y, d_phi = W.shape
    if d_phi + d_y != d:
        raise ShapeMismatch(f"W of shape {W.shape} needs arity {d_phi + d_y}, got {d}")

    def evaluate(T):
        r = T[:, :d_phi] @ W.T - T[:, d_phi:]
        return 0.5 * (r**2).sum(axis=1)

    return FunctionHandle(d, evaluate, "mixed-partials-continuous", name="quadratic-loss")


BUILTINS = {
    "constant": _constant,
    "linear": _linear,
    "product": _product,
    "square": _square,
    "quadratic": _quadratic,
    "quadratic-loss": _quadratic_loss,
}


def builtin(name: str, d: int, **params) -> FunctionHandle:
    """Registry of smooth test functions.

    ``quadratic`` is ``0.5 ||D t||^2`` and ``quadratic-loss`` is
    ``0.5 ||W t - y||^2`` over ``(t, y)``.
    """
    try:
        make = BUILTINS[name]
    except KeyError:
        raise ValidationError(f"unknown builtin {name!r}; choose from {sorted(BUILTINS)}") from None
    return make(d, **params)
