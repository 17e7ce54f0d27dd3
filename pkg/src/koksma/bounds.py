"""Generalization-gap bounds: variation times discrepancy, the exact
signed-measure identity, 0-1 loss tightness and class-conditional bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .discrepancy import star_discrepancy, star_discrepancy_exact
from .errors import InvalidClassPriors, InvalidDelta, InvalidMeasure, ValidationError
from .function import FunctionHandle
from .measure import AtomicMeasure, BoxMeasure, SignedAtomicMeasure, f_from_signed
from .point_set import MapSpec, PointSet
from .variation import hardy_krause_variation

TOL = 1e-10

__all__ = [
    "GapBoundReport",
    "Numeric",
    "ClosedForm",
    "ClassTerm",
    "gap_exact",
    "koksma_hlawka_bound",
    "verify_thm1_identity",
    "zero_one_tightness",
    "hoeffding_term",
    "classwise_bound",
    "classwise_terms",
]


@dataclass(frozen=True)
class GapBoundReport:
    """``|gap| <= variation * discrepancy`` plus any auxiliary terms.

    ``gap`` is NaN when the expectation could not be computed exactly.
    """

    gap: float
    variation: float
    discrepancy: float
    bound: float
    satisfied: bool
    equality: bool = False
    auxiliary: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        gap = None if math.isnan(self.gap) else self.gap
        return {
            "gap": gap,
            "variation": self.variation,
            "discrepancy": self.discrepancy,
            "bound": self.bound,
            "satisfied": self.satisfied,
            "equality": self.equality,
            "auxiliary": self.auxiliary,
        }


@dataclass(frozen=True)
class Numeric:
    """Estimate the variation by dyadic refinement at ``level``."""

    level: int = 6


@dataclass(frozen=True)
class ClosedForm:
    """Use a known variation (or an upper bound on it)."""

    value: float


def _mean(vals: np.ndarray) -> float:
    return math.fsum(vals.tolist()) / len(vals)


def gap_exact(f: FunctionHandle, map: MapSpec, mu: AtomicMeasure, dataset: PointSet) -> float:
    """``E_mu[f o map] - mean over dataset of f o map``, summed exactly."""
    if not isinstance(mu, AtomicMeasure):
        raise InvalidMeasure("exact gaps need an atomic measure")
    expected = math.fsum((mu.weights * f(map(mu.atoms))).tolist())
    return expected - _mean(f(map(dataset.points)))


def _expectation(f: FunctionHandle, nu: BoxMeasure) -> float | None:
    if isinstance(nu, AtomicMeasure):
        return nu.expectation(f)
    signed = f.meta.get("signed")
    if isinstance(signed, SignedAtomicMeasure):
        if len(signed.weights) == 0:
            return signed.offset
        mass = np.asarray(nu.closed_mass(signed.atoms)).reshape(-1)
        return math.fsum((signed.weights * mass).tolist()) + signed.offset
    return None


def koksma_hlawka_bound(f: FunctionHandle, mapped_points: PointSet, measure_T: BoxMeasure, variation_mode) -> GapBoundReport:
    """Bound ``|E[f] - mean f(points)|`` by ``V[f] * D*``.

    The gap is filled in when ``measure_T`` is atomic or ``f`` was built from a
    signed atomic measure; otherwise it is NaN and ``satisfied`` is vacuously true.
    """
    if isinstance(variation_mode, ClosedForm):
        V = float(variation_mode.value)
    elif isinstance(variation_mode, Numeric):
        V = hardy_krause_variation(f, variation_mode.level).total
    else:
        raise ValidationError(f"unknown variation mode {variation_mode!r}")
    D = star_discrepancy_exact(mapped_points, measure_T).value
    bound = V * D
    expected = _expectation(f, measure_T)
    if expected is None:
        return GapBoundReport(math.nan, V, D, bound, True)
    gap = expected - _mean(f(mapped_points.points))
    return GapBoundReport(gap, V, D, bound, abs(gap) <= bound + TOL, abs(abs(gap) - bound) <= TOL)


def verify_thm1_identity(nu_f: SignedAtomicMeasure, measure_T: BoxMeasure, dataset_T: PointSet) -> tuple[float, float, float]:
    """Check ``E[f] - mean f = sum_a w_a (nu([0,a]) - #{t_i <= a}/m)``.

    The left side evaluates ``f`` pointwise (directly on the atoms when
    ``measure_T`` is atomic); the right side works from masses and counts.
    """
    f = f_from_signed(nu_f)
    if isinstance(measure_T, AtomicMeasure):
        expected = measure_T.expectation(f)
    elif len(nu_f.weights) == 0:
        expected = nu_f.offset
    else:
        mass = np.asarray(measure_T.closed_mass(nu_f.atoms)).reshape(-1)
        expected = math.fsum((nu_f.weights * mass).tolist()) + nu_f.offset
    lhs = expected - _mean(f(dataset_T.points))
    if len(nu_f.weights) == 0:
        return lhs, 0.0, abs(lhs)
    A = nu_f.atoms
    mass = np.asarray(measure_T.closed_mass(A)).reshape(-1)
    P = dataset_T.points
    counts = (P[None, :, :] <= A[:, None, :]).all(axis=2).sum(axis=1)
    rhs = math.fsum((nu_f.weights * (mass - counts / dataset_T.m)).tolist())
    return lhs, rhs, abs(lhs - rhs)


def zero_one_tightness(losses: Sequence[int], true_mass_one: float) -> GapBoundReport:
    """0-1 loss with the identity test function: the bound is attained."""
    L = np.asarray(losses, dtype=np.float64).reshape(-1)
    if L.size == 0:
        raise ValidationError("losses must be non-empty")
    if not np.isin(L, (0.0, 1.0)).all():
        raise ValidationError("losses must be 0 or 1")
    p = float(true_mass_one)
    if not 0.0 <= p <= 1.0:
        raise ValidationError("true_mass_one must lie in [0, 1]")
    atoms, weights = [], []
    if p < 1.0:
        atoms.append([0.0])
        weights.append(1.0 - p)
    if p > 0.0:
        atoms.append([1.0])
        weights.append(p)
    nu = AtomicMeasure(np.array(atoms), np.array(weights))
    D = star_discrepancy(PointSet(L[:, None]), nu).value
    gap = p - float(L.sum()) / L.size
    return GapBoundReport(gap, 1.0, D, D, abs(gap) <= D + TOL, abs(abs(gap) - D) <= 1e-15)


def hoeffding_term(M: float, m: int, delta: float) -> float:
    """``M * sqrt(ln(1/delta) / (2 m))``."""
    if not 0.0 < delta < 1.0:
        raise InvalidDelta(f"delta must lie in (0, 1), got {delta!r}")
    if M < 0:
        raise ValidationError("M must be >= 0")
    if m < 1:
        raise ValidationError("m must be >= 1")
    return M * math.sqrt(math.log(1.0 / delta) / (2 * m))


@dataclass(frozen=True)
class ClassTerm:
    p: float
    n: int
    empirical_loss: float
    V: float

    @classmethod
    def coerce(cls, c) -> "ClassTerm":
        if isinstance(c, ClassTerm):
            return c
        return cls(float(c["p_y"]), int(c["n_y"]), float(c["empirical_loss_y"]), float(c["V_y"]))


def classwise_terms(classes, d_z: int, c2: float, delta: float) -> list[tuple[float, float]]:
    """Per-class ``(discrepancy term, Hoeffding term)`` pairs."""
    if not 0.0 < delta < 1.0:
        raise InvalidDelta(f"delta must lie in (0, 1), got {delta!r}")
    cs = [ClassTerm.coerce(c) for c in classes]
    if not cs:
        raise InvalidClassPriors("need at least one class")
    if any(c.p < 0 for c in cs) or abs(math.fsum(c.p for c in cs) - 1.0) > 1e-9:
        raise InvalidClassPriors("class priors must be nonnegative and sum to 1")
    if any(c.n < 1 for c in cs):
        raise InvalidClassPriors("every class needs n_y >= 1")
    if d_z < 1:
        raise ValidationError("d_z must be >= 1")
    log_term = math.log(2.0 / delta)
    return [
        (c2 * c.p * c.V * math.sqrt(d_z / c.n), c.empirical_loss * math.sqrt(log_term / (2 * c.n)))
        for c in cs
    ]


def classwise_bound(classes, d_z: int, c2: float, delta: float) -> float:
    """Sum over classes of ``c2 p V sqrt(d_z/n) + loss sqrt(ln(2/delta)/(2n))``."""
    return math.fsum(a + b for a, b in classwise_terms(classes, d_z, c2, delta))
