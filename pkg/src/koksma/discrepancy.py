"""Local and star discrepancy of a point set with respect to a measure.

The exact algorithm enumerates the grid spanned by the point coordinates (plus
atom coordinates of the measure and 1). On every grid cell the empirical count
is constant, so the supremum of ``|D|`` is reached either at a grid point with
closed boxes, or as a limit from below towards a grid point (open box, strict
count). Both are evaluated everywhere with cumulative sums, one slab of the
first axis at a time.
"""

from __future__ import annotations

import math
import os
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetExceeded, DimensionMismatch, ValidationError
from .measure import AtomicMeasure, BoxMeasure, BoxMixture, uniform
from .parallel import pmap
from .point_set import PointSet

DEFAULT_BUDGET = 50_000_000
_SLAB_CELLS = 1 << 21


def default_budget() -> int:
    return int(os.environ.get("KOKSMA_BUDGET", DEFAULT_BUDGET))


@dataclass(frozen=True)
class DiscrepancyResult:
    """Outcome of a star-discrepancy computation.

    ``side`` is ``"over"`` when the empirical fraction exceeds the measure at
    the witness box. ``limit`` marks an ``"under"`` value that is only
    approached as ``t`` increases towards ``witness_t`` (open box, strict count).
    """

    value: float
    witness_t: tuple
    side: str
    exact: bool
    cells_evaluated: int
    limit: bool = False

    def to_json(self) -> dict:
        return {
            "value": self.value,
            "witness": list(self.witness_t),
            "side": self.side,
            "limit": self.limit,
            "exact": self.exact,
            "cells": self.cells_evaluated,
        }


def _check_dims(ps: PointSet, nu: BoxMeasure) -> None:
    if ps.d != nu.d:
        raise DimensionMismatch(f"point set has d={ps.d}, measure has d={nu.d}")


def _closed_counts(P: np.ndarray, T: np.ndarray, strict: bool = False, chunk: int = 2048) -> np.ndarray:
    out = np.empty(len(T), dtype=np.int64)
    for s in range(0, len(T), chunk):
        blk = T[s : s + chunk]
        if strict:
            inside = (P[None, :, :] < blk[:, None, :]).all(axis=2)
        else:
            inside = (P[None, :, :] <= blk[:, None, :]).all(axis=2)
        out[s : s + chunk] = inside.sum(axis=1)
    return out


def local_discrepancy(ps: PointSet, nu: BoxMeasure, t):
    """Empirical fraction of points in ``[0, t]`` minus ``nu([0, t])``.

    ``t`` may be one point or an ``(n, d)`` array of box corners.
    """
    _check_dims(ps, nu)
    T = np.asarray(t, dtype=np.float64)
    single = T.ndim == 1
    T = np.atleast_2d(T)
    if T.shape[1] != ps.d:
        raise DimensionMismatch(f"box corner has dimension {T.shape[1]}, expected {ps.d}")
    val = _closed_counts(ps.points, T) / ps.m - nu.closed_mass(T)
    return float(val[0]) if single else val


def evaluate_witness(ps: PointSet, nu: BoxMeasure, result: DiscrepancyResult) -> float:
    """Recompute ``|D|`` at a result's witness using its side convention."""
    t = np.asarray(result.witness_t, dtype=np.float64)
    if result.limit:
        strict = _closed_counts(ps.points, t[None, :], strict=True)[0]
        return float(nu.open_mass(t) - strict / ps.m)
    return abs(local_discrepancy(ps, nu, t))


# ---------------------------------------------------------------------------
# exact enumeration


def candidate_grid(ps: PointSet, nu: BoxMeasure) -> list[np.ndarray]:
    return [
        np.unique(np.concatenate([ps.points[:, j], nu.grid_coords(j), [1.0]]))
        for j in range(ps.d)
    ]


def _shift_rest(prev: np.ndarray) -> np.ndarray:
    """``out[:, k1, ..] = prev[:, k1-1, ..]`` along every trailing axis, zero padded."""
    nd = prev.ndim - 1
    if nd == 0:
        return prev
    out = np.zeros_like(prev)
    out[(slice(None),) + (slice(1, None),) * nd] = prev[(slice(None),) + (slice(None, -1),) * nd]
    return out


class _Cumulator:
    """Closed and strict cumulative sums of a weighted histogram on the grid, by slab."""

    def __init__(self, idx: list[np.ndarray], weights, sizes: list[int]):
        self.idx = idx
        self.weights = weights
        self.rest = tuple(sizes[1:])
        dtype = np.int64 if weights is None else np.float64
        self.carry = np.zeros(self.rest, dtype=dtype)

    def slab(self, a: int, b: int) -> tuple[np.ndarray, np.ndarray]:
        sel = (self.idx[0] >= a) & (self.idx[0] < b)
        shape = (b - a,) + self.rest
        flat = np.ravel_multi_index(
            tuple([self.idx[0][sel] - a] + [ix[sel] for ix in self.idx[1:]]), shape
        )
        size = int(np.prod(shape))
        if self.weights is None:
            H = np.bincount(flat, minlength=size).astype(np.int64)
        else:
            H = np.bincount(flat, weights=self.weights[sel], minlength=size)
        C = H.reshape(shape)
        for ax in range(1, C.ndim):
            C = np.cumsum(C, axis=ax)
        C = np.cumsum(C, axis=0) + self.carry
        prev = np.concatenate([self.carry[None], C[:-1]], axis=0)
        self.carry = C[-1].copy()
        return C, _shift_rest(prev)


def star_discrepancy_exact(ps: PointSet, nu: BoxMeasure, cell_budget: int | None = None) -> DiscrepancyResult:
    """Exact ``sup_t |D[B_t; ps, nu]|`` by enumeration of the candidate grid.

    Raises :class:`BudgetExceeded` when the grid has more than ``cell_budget``
    cells; use :func:`star_discrepancy_lower_bound` in that case.
    """
    _check_dims(ps, nu)
    budget = default_budget() if cell_budget is None else int(cell_budget)
    grids = candidate_grid(ps, nu)
    sizes = [len(g) for g in grids]
    cells = math.prod(sizes)
    if cells > budget:
        raise BudgetExceeded(cells, budget)

    m = ps.m
    P = ps.points
    counts = _Cumulator([np.searchsorted(grids[j], P[:, j]) for j in range(ps.d)], None, sizes)
    if isinstance(nu, AtomicMeasure):
        A = nu.atoms
        masses = _Cumulator([np.searchsorted(grids[j], A[:, j]) for j in range(ps.d)], nu.weights, sizes)
    else:
        masses = None
    has_open = isinstance(nu, BoxMixture) and bool((nu.lo == nu.hi).any())

    rest_cells = math.prod(sizes[1:])
    rows = max(1, _SLAB_CELLS // rest_cells)
    best = -1.0
    best_pos = None
    best_kind = None
    for a in range(0, sizes[0], rows):
        b = min(sizes[0], a + rows)
        C, S = counts.slab(a, b)
        if masses is not None:
            Mc, Mo = masses.slab(a, b)
        else:
            sub = [grids[0][a:b]] + grids[1:]
            Mc = nu.mass_grid(sub, closed=True)
            Mo = nu.mass_grid(sub, closed=False) if has_open else Mc
        over = C / m - Mc
        under_open = Mo - S / m
        val = np.maximum(np.abs(over), under_open)
        k = int(np.argmax(val))
        v = float(val.flat[k])
        if v > best:
            best = v
            pos = np.unravel_index(k, val.shape)
            best_pos = (pos[0] + a,) + tuple(pos[1:])
            o = float(over.flat[k])
            if o == v:
                best_kind = ("over", False)
            elif -o == v:
                best_kind = ("under", False)
            else:
                best_kind = ("under", True)
    witness = tuple(float(grids[j][best_pos[j]]) for j in range(ps.d))
    return DiscrepancyResult(min(best, 1.0), witness, best_kind[0], True, cells, best_kind[1])


def star_discrepancy_1d(ps: PointSet, nu: BoxMeasure) -> DiscrepancyResult:
    """Sorted-sweep star discrepancy for ``d = 1`` in ``O(m log m)``."""
    _check_dims(ps, nu)
    if ps.d != 1:
        raise DimensionMismatch("star_discrepancy_1d needs d = 1")
    m = ps.m
    x = np.sort(ps.points[:, 0])
    i = np.arange(1, m + 1)
    F = nu.closed_mass(x[:, None])
    Fm = nu.open_mass(x[:, None])
    over = i / m - F
    under = Fm - (i - 1) / m
    below_one = int(np.searchsorted(x, 1.0, side="left"))
    tail_open = float(nu.open_mass(np.array([1.0]))) - below_one / m
    tail_closed = float(nu.closed_mass(np.array([1.0]))) - 1.0

    # candidates in ascending t, closed before open at the same t
    best, best_t, kind = -1.0, 1.0, ("over", False)
    for k in range(m):
        if over[k] > best:
            best, best_t, kind = float(over[k]), float(x[k]), ("over", False)
        if under[k] > best:
            best, best_t, kind = float(under[k]), float(x[k]), ("under", True)
    if tail_closed > best:
        best, best_t, kind = tail_closed, 1.0, ("under", False)
    if tail_open > best:
        best, best_t, kind = tail_open, 1.0, ("under", True)
    return DiscrepancyResult(min(best, 1.0), (best_t,), kind[0], True, m + 1, kind[1])


def star_discrepancy(ps: PointSet, nu: BoxMeasure, cell_budget: int | None = None) -> DiscrepancyResult:
    """Exact value, using the sorted sweep in one dimension."""
    if ps.d == 1:
        return star_discrepancy_1d(ps, nu)
    return star_discrepancy_exact(ps, nu, cell_budget)


# ---------------------------------------------------------------------------
# randomized lower bound


def _coordinate_candidates(grid: np.ndarray) -> np.ndarray:
    below = np.nextafter(grid[grid > 0], 0.0)
    return np.unique(np.concatenate([grid, below, [0.0]]))


def star_discrepancy_lower_bound(
    ps: PointSet, nu: BoxMeasure, iterations: int, seed, sweeps: int = 3
) -> DiscrepancyResult:
    """Certified lower bound on the star discrepancy.

    Every reported value is ``|D|`` evaluated at an actual box. Each start draws
    a random corner and then improves one coordinate at a time, choosing among
    grid coordinates and their immediate float predecessors. Start ``i`` uses
    its own stream derived from ``(seed, i)``, so the result is a running max
    and never decreases as ``iterations`` grows.
    """
    _check_dims(ps, nu)
    if iterations < 1:
        raise ValidationError("iterations must be >= 1")
    cands = [_coordinate_candidates(g) for g in candidate_grid(ps, nu)]
    best, best_t, evals = -1.0, None, 0
    for it in range(iterations):
        rng = np.random.default_rng([int(seed), it])
        t = rng.random(ps.d)
        cur = abs(local_discrepancy(ps, nu, t))
        evals += 1
        for _ in range(sweeps):
            for j in range(ps.d):
                T = np.repeat(t[None, :], len(cands[j]), axis=0)
                T[:, j] = cands[j]
                vals = np.abs(local_discrepancy(ps, nu, T))
                evals += len(T)
                k = int(np.argmax(vals))
                if vals[k] > cur:
                    cur = float(vals[k])
                    t = T[k].copy()
        if cur > best:
            best, best_t = cur, t.copy()
    side = "over" if local_discrepancy(ps, nu, best_t) >= 0 else "under"
    return DiscrepancyResult(min(float(best), 1.0), tuple(float(v) for v in best_t), side, False, evals)


# ---------------------------------------------------------------------------
# reference bounds


class VacuousBoundWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ReferenceBoundParams:
    c1: float
    c2: float
    d: int
    m: int

    def __post_init__(self):
        if not self.c1 > 0:
            raise ValidationError("c1 must be positive")
        if self.c2 < self.c1:
            raise ValidationError("c2 must be >= c1")
        if self.d < 1 or self.m < 1:
            raise ValidationError("d and m must be >= 1")


def prop2_bound(params: ReferenceBoundParams) -> float:
    """High-probability i.i.d. bound ``c2 * sqrt(d / m)``."""
    return params.c2 * math.sqrt(params.d / params.m)


def prop2_base(params: ReferenceBoundParams) -> float:
    return params.c1 * params.c2**2 * math.exp(-2 * params.c2**2)


def prop2_delta(params: ReferenceBoundParams) -> float:
    """Failure probability ``(c1 c2^2 e^{-2 c2^2})^d / (c2 sqrt(d))``.

    Warns with :class:`VacuousBoundWarning` when the base is not below 1.
    """
    base = prop2_base(params)
    if not base < 1:
        warnings.warn(
            f"c1*c2^2*exp(-2*c2^2) = {base:.6g} >= 1; increase c2", VacuousBoundWarning, stacklevel=2
        )
    return base**params.d / (params.c2 * math.sqrt(params.d))


def prop3_bound(d: int, m: int) -> float:
    if d < 1 or m < 1:
        raise ValidationError("d and m must be >= 1")
    return 63 * math.sqrt(d) * (2 + math.log2(m)) ** ((3 * d + 1) / 2) / m


def uniform_iid_bound(d: int, m: int) -> float:
    if d < 1 or m < 1:
        raise ValidationError("d and m must be >= 1")
    return 10 * math.sqrt(d / m)


# ---------------------------------------------------------------------------
# scaling study


@dataclass(frozen=True)
class ScalingTable:
    d: int
    trials: int
    seed: int
    rows: list = field(default_factory=list)
    c2_min: float = math.nan

    def to_json(self) -> dict:
        return {"d": self.d, "trials": self.trials, "seed": self.seed, "rows": self.rows, "c2_min": self.c2_min}


def _scaling_trial(args) -> float:
    nu, m, seed, trial, budget = args
    pts = nu.sample(m, [seed, m, trial])
    return star_discrepancy(pts, nu, budget).value


def scaling_study(
    d: int,
    m_list,
    trials: int,
    seed: int,
    measure: BoxMeasure | None = None,
    cell_budget: int | None = None,
    workers: int = 1,
) -> ScalingTable:
    """Distribution of the exact star discrepancy of i.i.d. samples, per ``m``.

    Each row holds the median and 90th percentile of ``D*`` over ``trials``
    samples and the same quantities scaled by ``sqrt(m / d)``. ``c2_min`` is the
    smallest constant with ``q90(D*) <= c2 * sqrt(d / m)`` for every ``m``.
    """
    nu = uniform(d) if measure is None else measure
    if nu.d != d:
        raise DimensionMismatch(f"measure has d={nu.d}, study asked for d={d}")
    budget = default_budget() if cell_budget is None else cell_budget
    rows = []
    for m in m_list:
        if (m + 1) ** d > budget and d > 1:
            raise BudgetExceeded((m + 1) ** d, budget)
        vals = np.array(pmap(_scaling_trial, [(nu, m, seed, k, budget) for k in range(trials)], workers))
        med = float(np.median(vals))
        q90 = float(np.percentile(vals, 90))
        s = math.sqrt(m / d)
        rows.append(
            {
                "m": m,
                "median": med,
                "q90": q90,
                "scaled_median": med * s,
                "scaled_q90": q90 * s,
                "max": float(vals.max()),
            }
        )
    c2 = max((r["scaled_q90"] for r in rows), default=math.nan)
    return ScalingTable(d, trials, seed, rows, c2)
