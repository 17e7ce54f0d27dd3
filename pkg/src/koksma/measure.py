"""Normalized measures on ``[0,1]^d`` exposed through exact box-mass oracles.

Three variants are supported: :class:`ProductMeasure` (independent axes with
piecewise-linear CDFs), :class:`BoxMixture` (mixture of uniform boxes, where a
box may be degenerate along some axes), and :class:`AtomicMeasure` (finite
support). :class:`SignedAtomicMeasure` represents the finitely supported signed
measure behind ``f(t) = nu([t, 1]) + c``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidMeasure, ValidationError
from .function import FunctionHandle
from .point_set import MapSpec, PointSet, _frozen

WEIGHT_TOL = 1e-12


def _as_points(t, d: int) -> tuple[np.ndarray, bool]:
    T = np.asarray(t, dtype=np.float64)
    single = T.ndim == 1
    T = np.atleast_2d(T)
    if T.shape[1] != d:
        raise DimensionMismatch(f"measure has d={d}, got points of dimension {T.shape[1]}")
    return T, single


def _ret(v: np.ndarray, single: bool):
    return float(v[0]) if single else v


def _check_weights(w: np.ndarray, allow_zero: bool = False) -> None:
    if w.ndim != 1 or len(w) == 0:
        raise InvalidMeasure("weights must be a non-empty vector")
    if (w < 0).any() or (not allow_zero and (w == 0).any()) or not np.isfinite(w).all():
        raise InvalidMeasure("weights must be positive and finite")
    if abs(math.fsum(w.tolist()) - 1.0) > WEIGHT_TOL:
        raise InvalidMeasure(f"weights sum to {math.fsum(w.tolist())!r}, expected 1")


class BoxMeasure:
    """Common interface. Subclasses are immutable."""

    d: int
    variant: str

    def closed_mass(self, t):
        raise NotImplementedError

    def open_mass(self, t):
        raise NotImplementedError

    def sample(self, n: int, seed) -> PointSet:
        raise NotImplementedError

    def grid_coords(self, j: int) -> np.ndarray:
        """Coordinates along axis ``j`` where the measure has mass concentrated."""
        return np.empty(0)

    def to_json(self) -> dict:
        raise NotImplementedError


# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ProductMeasure(BoxMeasure):
    """Product of per-axis distributions with piecewise-linear CDFs.

    ``knots[j]`` starts at 0 and ends at 1, strictly increasing; ``cdf[j]`` is
    nondecreasing from 0 to 1.
    """

    knots: tuple
    cdf: tuple
    variant = "product"

    def __post_init__(self):
        if len(self.knots) != len(self.cdf) or len(self.knots) == 0:
            raise InvalidMeasure("need one knot vector and one CDF vector per axis")
        ks, cs = [], []
        for x, F in zip(self.knots, self.cdf):
            x = np.asarray(x, dtype=np.float64)
            F = np.asarray(F, dtype=np.float64)
            if x.shape != F.shape or x.ndim != 1 or len(x) < 2:
                raise InvalidMeasure("knots and CDF values must be equal-length vectors of length >= 2")
            if x[0] != 0.0 or x[-1] != 1.0 or (np.diff(x) <= 0).any():
                raise InvalidMeasure("knots must increase strictly from 0 to 1")
            if F[0] != 0.0 or F[-1] != 1.0 or (np.diff(F) < 0).any():
                raise InvalidMeasure("CDF must be nondecreasing from 0 to 1")
            ks.append(_frozen(x))
            cs.append(_frozen(F))
        object.__setattr__(self, "knots", tuple(ks))
        object.__setattr__(self, "cdf", tuple(cs))

    @property
    def d(self) -> int:
        return len(self.knots)

    def axis_cdf(self, j: int, v: np.ndarray) -> np.ndarray:
        return np.interp(v, self.knots[j], self.cdf[j])

    def closed_mass(self, t):
        T, single = _as_points(t, self.d)
        mass = self.axis_cdf(0, T[:, 0])
        for j in range(1, self.d):
            mass = mass * self.axis_cdf(j, T[:, j])
        return _ret(mass, single)

    def open_mass(self, t):
        return self.closed_mass(t)

    def mass_grid(self, grids, closed: bool = True) -> np.ndarray:
        out = self.axis_cdf(0, grids[0])
        for j in range(1, self.d):
            out = out[..., None] * self.axis_cdf(j, grids[j])
        return out

    def _inverse_cdf(self, j: int, u: np.ndarray) -> np.ndarray:
        x, F = self.knots[j], self.cdf[j]
        # first k with F[k] >= u, so F[k-1] < u <= F[k] whenever u > 0
        k = np.clip(np.searchsorted(F, u, side="left"), 1, len(F) - 1)
        lo, hi = F[k - 1], F[k]
        frac = np.where(hi > lo, (u - lo) / np.where(hi > lo, hi - lo, 1.0), 0.0)
        return np.clip(x[k - 1] + frac * (x[k] - x[k - 1]), 0.0, 1.0)

    def sample(self, n: int, seed) -> PointSet:
        if n < 1:
            raise ValidationError("n must be >= 1")
        rng = np.random.default_rng(seed)
        u = rng.random((n, self.d))
        cols = [self._inverse_cdf(j, u[:, j]) for j in range(self.d)]
        return PointSet(np.column_stack(cols))

    def is_uniform(self) -> bool:
        return all(np.array_equal(x, F) for x, F in zip(self.knots, self.cdf))

    def to_json(self) -> dict:
        return {
            "d": self.d,
            "variant": "product",
            "knots": [k.tolist() for k in self.knots],
            "cdf": [c.tolist() for c in self.cdf],
        }


def uniform(d: int) -> ProductMeasure:
    return ProductMeasure(tuple([0.0, 1.0] for _ in range(d)), tuple([0.0, 1.0] for _ in range(d)))


# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BoxMixture(BoxMeasure):
    """Mixture of uniform distributions on axis-aligned boxes ``[lo, hi]``.

    A box with ``lo[j] == hi[j]`` is a point mass along axis ``j``; the box
    mass fraction along that axis is then an indicator.
    """

    lo: np.ndarray
    hi: np.ndarray
    weights: np.ndarray
    variant = "boxmix"

    def __post_init__(self):
        lo = np.atleast_2d(np.asarray(self.lo, dtype=np.float64))
        hi = np.atleast_2d(np.asarray(self.hi, dtype=np.float64))
        w = np.atleast_1d(np.asarray(self.weights, dtype=np.float64))
        if lo.shape != hi.shape or lo.shape[0] != len(w):
            raise InvalidMeasure("lo, hi and weights must describe the same boxes")
        if (lo < 0).any() or (hi > 1).any() or (hi < lo).any():
            raise InvalidMeasure("boxes must satisfy 0 <= lo <= hi <= 1")
        _check_weights(w)
        object.__setattr__(self, "lo", _frozen(lo))
        object.__setattr__(self, "hi", _frozen(hi))
        object.__setattr__(self, "weights", _frozen(w))

    @property
    def d(self) -> int:
        return self.lo.shape[1]

    def _axis_fraction(self, b: int, j: int, v: np.ndarray, closed: bool) -> np.ndarray:
        lo, hi = self.lo[b, j], self.hi[b, j]
        if hi > lo:
            return np.clip((v - lo) / (hi - lo), 0.0, 1.0)
        return (v >= lo if closed else v > lo).astype(np.float64)

    def _mass(self, T: np.ndarray, closed: bool) -> np.ndarray:
        total = np.zeros(len(T))
        for b in range(len(self.weights)):
            term = self.weights[b] * self._axis_fraction(b, 0, T[:, 0], closed)
            for j in range(1, self.d):
                term = term * self._axis_fraction(b, j, T[:, j], closed)
            total = total + term
        return total

    def closed_mass(self, t):
        T, single = _as_points(t, self.d)
        return _ret(self._mass(T, True), single)

    def open_mass(self, t):
        T, single = _as_points(t, self.d)
        return _ret(self._mass(T, False), single)

    def mass_grid(self, grids, closed: bool = True) -> np.ndarray:
        total = None
        for b in range(len(self.weights)):
            term = self.weights[b] * self._axis_fraction(b, 0, grids[0], closed)
            for j in range(1, self.d):
                term = term[..., None] * self._axis_fraction(b, j, grids[j], closed)
            total = term if total is None else total + term
        return total

    def grid_coords(self, j: int) -> np.ndarray:
        degenerate = self.lo[:, j] == self.hi[:, j]
        return np.unique(self.lo[degenerate, j])

    def sample(self, n: int, seed) -> PointSet:
        if n < 1:
            raise ValidationError("n must be >= 1")
        rng = np.random.default_rng(seed)
        which = rng.choice(len(self.weights), size=n, p=self.weights / self.weights.sum())
        u = rng.random((n, self.d))
        lo, hi = self.lo[which], self.hi[which]
        return PointSet(np.clip(lo + u * (hi - lo), 0.0, 1.0))

    def to_json(self) -> dict:
        return {
            "d": self.d,
            "variant": "boxmix",
            "boxes": [
                {"lo": l, "hi": h, "weight": w}
                for l, h, w in zip(self.lo.tolist(), self.hi.tolist(), self.weights.tolist())
            ],
        }


# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class AtomicMeasure(BoxMeasure):
    atoms: np.ndarray
    weights: np.ndarray
    variant = "atomic"

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.atoms, dtype=np.float64))
        w = np.atleast_1d(np.asarray(self.weights, dtype=np.float64))
        if A.shape[0] != len(w):
            raise InvalidMeasure("need one weight per atom")
        if not ((A >= 0) & (A <= 1)).all():
            raise InvalidMeasure("atoms must lie in the unit cube")
        _check_weights(w)
        object.__setattr__(self, "atoms", _frozen(A))
        object.__setattr__(self, "weights", _frozen(w))

    @property
    def d(self) -> int:
        return self.atoms.shape[1]

    def _mass(self, T: np.ndarray, closed: bool, chunk: int = 4096) -> np.ndarray:
        out = np.empty(len(T))
        for s in range(0, len(T), chunk):
            blk = T[s : s + chunk]
            if closed:
                inside = (self.atoms[None, :, :] <= blk[:, None, :]).all(axis=2)
            else:
                inside = (self.atoms[None, :, :] < blk[:, None, :]).all(axis=2)
            out[s : s + chunk] = inside @ self.weights
        return out

    def closed_mass(self, t):
        T, single = _as_points(t, self.d)
        return _ret(self._mass(T, True), single)

    def open_mass(self, t):
        T, single = _as_points(t, self.d)
        return _ret(self._mass(T, False), single)

    def grid_coords(self, j: int) -> np.ndarray:
        return np.unique(self.atoms[:, j])

    def sample(self, n: int, seed) -> PointSet:
        if n < 1:
            raise ValidationError("n must be >= 1")
        rng = np.random.default_rng(seed)
        which = rng.choice(len(self.weights), size=n, p=self.weights / self.weights.sum())
        return PointSet(self.atoms[which])

    def expectation(self, f) -> float:
        """Exact ``E[f]`` as the weighted sum of ``f`` over the atoms."""
        vals = np.asarray(f(self.atoms), dtype=np.float64).reshape(len(self.weights))
        return math.fsum((self.weights * vals).tolist())

    def to_json(self) -> dict:
        return {"d": self.d, "variant": "atomic", "atoms": self.atoms.tolist(), "weights": self.weights.tolist()}


def empirical(ps: PointSet) -> AtomicMeasure:
    """Atomic measure with weight 1/m on each point (duplicates merged)."""
    return pushforward_atomic(
        AtomicMeasure(ps.points, np.full(ps.m, 1.0 / ps.m) if ps.m > 1 else np.ones(1)),
        MapSpec.identity(ps.d),
    )


def product_with_uniform(nu: AtomicMeasure, d_extra: int) -> BoxMixture:
    """``nu x Uniform([0,1]^d_extra)`` as a box mixture degenerate on the atomic axes."""
    K = len(nu.weights)
    lo = np.hstack([nu.atoms, np.zeros((K, d_extra))])
    hi = np.hstack([nu.atoms, np.ones((K, d_extra))])
    return BoxMixture(lo, hi, nu.weights)


# ---------------------------------------------------------------------------
# operations


def closed_mass(nu: BoxMeasure, t):
    """``nu([0, t])``; ``t`` may be a single point or an ``(n, d)`` array."""
    return nu.closed_mass(t)


def open_mass(nu: BoxMeasure, t):
    """``nu({s : s_j < t_j for all j})``."""
    return nu.open_mass(t)


def sample(nu: BoxMeasure, n: int, seed) -> PointSet:
    return nu.sample(n, seed)


def pushforward_atomic(nu: AtomicMeasure, map: MapSpec) -> AtomicMeasure:
    """Image measure; weights of colliding images are summed, first-seen order kept."""
    if not isinstance(nu, AtomicMeasure):
        raise InvalidMeasure("pushforward is only implemented for atomic measures")
    if map.d_in != nu.d:
        raise DimensionMismatch(f"map expects d_in={map.d_in}, measure has d={nu.d}")
    images = map(nu.atoms)
    order: dict[tuple, int] = {}
    pts: list[np.ndarray] = []
    ws: list[list[float]] = []
    for img, w in zip(images, nu.weights.tolist()):
        key = tuple(img.tolist())
        if key in order:
            ws[order[key]].append(w)
        else:
            order[key] = len(pts)
            pts.append(img)
            ws.append([w])
    weights = [wl[0] if len(wl) == 1 else math.fsum(wl) for wl in ws]
    return AtomicMeasure(np.array(pts), np.array(weights))


@dataclass(frozen=True, eq=False)
class SignedAtomicMeasure:
    """Finitely supported signed measure plus the constant ``offset = f(1)``."""

    d: int
    atoms: np.ndarray
    weights: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        A = np.asarray(self.atoms, dtype=np.float64).reshape(-1, self.d)
        w = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if A.shape[0] != len(w):
            raise InvalidMeasure("need one weight per atom")
        if not ((A >= 0) & (A <= 1)).all():
            raise InvalidMeasure("atoms must lie in the unit cube")
        if not np.isfinite(w).all():
            raise InvalidMeasure("weights must be finite")
        object.__setattr__(self, "atoms", _frozen(A))
        object.__setattr__(self, "weights", _frozen(w))
        object.__setattr__(self, "offset", float(self.offset))

    def to_json(self) -> dict:
        return {"d": self.d, "atoms": self.atoms.tolist(), "weights": self.weights.tolist(), "offset": self.offset}

    @classmethod
    def from_json(cls, doc: dict) -> "SignedAtomicMeasure":
        d = int(doc["d"])
        atoms = doc.get("atoms", [])
        return cls(d, np.asarray(atoms, dtype=np.float64).reshape(-1, d), doc.get("weights", []), doc.get("offset", 0.0))


def total_variation(nu_f: SignedAtomicMeasure) -> float:
    return math.fsum(np.abs(nu_f.weights).tolist())


def f_from_signed(nu_f: SignedAtomicMeasure) -> FunctionHandle:
    """``f(t) = sum of weights of atoms a with t <= a, plus the offset``."""
    atoms, weights, c = nu_f.atoms, nu_f.weights, nu_f.offset

    def evaluate(T: np.ndarray) -> np.ndarray:
        if len(weights) == 0:
            return np.full(len(T), c)
        out = np.empty(len(T))
        for s in range(0, len(T), 4096):
            blk = T[s : s + 4096]
            above = (blk[:, None, :] <= atoms[None, :, :]).all(axis=2)
            out[s : s + 4096] = above @ weights + c
        return out

    return FunctionHandle(nu_f.d, evaluate, "none", True, "signed", {"signed": nu_f})


# ---------------------------------------------------------------------------
# JSON


def measure_from_json(doc: dict) -> BoxMeasure:
    try:
        d = int(doc["d"])
        variant = doc["variant"]
    except (KeyError, TypeError, ValueError):
        raise InvalidMeasure("measure JSON needs integer 'd' and 'variant'") from None
    if variant == "product":
        if "knots" not in doc:
            return uniform(d)
        m = ProductMeasure(tuple(doc["knots"]), tuple(doc["cdf"]))
    elif variant == "boxmix":
        boxes = doc["boxes"]
        m = BoxMixture([b["lo"] for b in boxes], [b["hi"] for b in boxes], [b["weight"] for b in boxes])
    elif variant == "atomic":
        m = AtomicMeasure(doc["atoms"], doc["weights"])
    else:
        raise InvalidMeasure(f"unknown variant {variant!r}")
    if m.d != d:
        raise InvalidMeasure(f"declared d={d} but payload has dimension {m.d}")
    return m
