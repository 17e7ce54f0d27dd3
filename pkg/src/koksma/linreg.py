"""Synthetic linear regression with exactly computable expected errors.

Inputs follow an atomic distribution pushed through a tabulated feature map,
so expectations, pushforwards and star discrepancies are all exact. Labels
are either structured (``y = W* phi(x) + xi``) or uniform on ``[0,1]^d_y``
independent of ``x``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .bounds import hoeffding_term
from .discrepancy import star_discrepancy_exact
from .errors import BudgetExceeded, MissingNoiseRecord, ShapeMismatch, SingularSystem, ValidationError
from .measure import AtomicMeasure, product_with_uniform, pushforward_atomic
from .parallel import pmap
from .point_set import MapSpec, PointSet
from .variation import thm2_variation_bound, thm3_variation_bound

__all__ = [
    "NoiseSpec",
    "LinRegInstance",
    "TrainingSample",
    "LinRegReport",
    "MonteCarlo",
    "make_instance",
    "sample_training",
    "fit_least_squares",
    "verify_thm2",
    "compute_M",
    "verify_thm3",
    "remark5_rates",
    "Remark5Table",
]

SLACK = 1e-9
MAX_VERTEX_DIM = 24
FEATURE_GRID = 16


@dataclass(frozen=True, eq=False)
class NoiseSpec:
    """Finitely supported zero-mean noise on ``R^d_y``.

    Each component independently takes one of ``+-levels`` with equal
    probability, so the mean is exactly zero.
    """

    d_y: int
    levels: tuple = (0.0,)

    def __post_init__(self):
        lv = tuple(float(abs(v)) for v in self.levels)
        if not lv:
            raise ValidationError("noise needs at least one level")
        object.__setattr__(self, "levels", lv)

    @classmethod
    def two_point(cls, d_y: int, scale: float) -> "NoiseSpec":
        return cls(d_y, (scale,))

    @property
    def support(self) -> np.ndarray:
        per_axis = sorted({s * v for v in self.levels for s in (-1.0, 1.0)})
        return np.array(list(itertools.product(per_axis, repeat=self.d_y)))

    @property
    def second_moment(self) -> float:
        """``E ||xi||^2``."""
        return self.d_y * math.fsum(v * v for v in self.levels) / len(self.levels)

    def draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        lv = np.array(self.levels)
        mags = lv[rng.integers(0, len(lv), size=(n, self.d_y))]
        signs = np.where(rng.integers(0, 2, size=(n, self.d_y)) == 1, 1.0, -1.0)
        return signs * mags

    def to_json(self) -> dict:
        return {"d_y": self.d_y, "levels": list(self.levels), "second_moment": self.second_moment}


@dataclass(frozen=True, eq=False)
class LinRegInstance:
    W_star: np.ndarray
    feature_map: MapSpec
    mu_x: AtomicMeasure
    noise: NoiseSpec
    seed: int | None = None

    @property
    def d_phi(self) -> int:
        return self.W_star.shape[1]

    @property
    def d_y(self) -> int:
        return self.W_star.shape[0]

    @property
    def K(self) -> int:
        return len(self.mu_x.weights)

    @property
    def feature_measure(self) -> AtomicMeasure:
        """Pushforward of ``mu_x`` under the feature map."""
        return pushforward_atomic(self.mu_x, self.feature_map)

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "W_star": self.W_star.tolist(),
            "feature_map": self.feature_map.to_json(),
            "mu_x": self.mu_x.to_json(),
            "noise": self.noise.to_json(),
        }


@dataclass(frozen=True, eq=False)
class TrainingSample:
    X: np.ndarray
    Phi: PointSet
    Y: np.ndarray
    Xi: np.ndarray | None
    seed: object
    mode: str

    @property
    def m(self) -> int:
        return len(self.Y)


@dataclass(frozen=True)
class LinRegReport:
    """Both sides of a regression generalization bound.

    ``A2`` follows the literal statement (no factor one half); the exact
    decomposition of the gap uses ``A2 / 2``. ``decomposition_residual`` is
    ``lhs_gap - (gap_f + A1 + A2 / 2)`` and should be at rounding level.
    """

    mode: str
    lhs_gap: float
    discrepancy: float
    variation_bound: float
    A1: float
    A2: float
    M: float
    rhs_bound: float
    satisfied: bool
    gap_f: float = math.nan
    decomposition_residual: float = math.nan
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        def clean(v):
            return None if isinstance(v, float) and math.isnan(v) else v

        return {
            "mode": self.mode,
            "lhs_gap": self.lhs_gap,
            "discrepancy": self.discrepancy,
            "variation_bound": self.variation_bound,
            "A1": clean(self.A1),
            "A2": clean(self.A2),
            "M": clean(self.M),
            "rhs_bound": self.rhs_bound,
            "satisfied": self.satisfied,
            "gap_f": clean(self.gap_f),
            "decomposition_residual": clean(self.decomposition_residual),
            **self.extra,
        }


def make_instance(
    seed: int, d_phi: int, d_y: int, K: int, noise_scale: float, noise_levels: tuple | None = None
) -> LinRegInstance:
    """Random instance: ``K`` input atoms with random weights, features on a
    1/16 grid (so distinct inputs may share a feature vector), ``W*`` entries
    uniform on ``[-1, 1]`` and symmetric noise.

    ``noise_levels`` overrides the default two-point noise ``+-noise_scale``.
    """
    if K < 2 or d_phi < 1 or d_y < 1:
        raise ValidationError("need K >= 2 and positive dimensions")
    if noise_scale < 0:
        raise ValidationError("noise_scale must be >= 0")
    rng = np.random.default_rng(seed)
    inputs = rng.random((K, d_phi))
    outputs = np.round(rng.random((K, d_phi)) * FEATURE_GRID) / FEATURE_GRID
    g = rng.random(K) + 0.05
    weights = g / math.fsum(g.tolist())
    W_star = rng.uniform(-1.0, 1.0, size=(d_y, d_phi))
    levels = (noise_scale,) if noise_levels is None else tuple(noise_levels)
    return LinRegInstance(
        W_star,
        MapSpec.tabulated(inputs, outputs),
        AtomicMeasure(inputs, weights),
        NoiseSpec(d_y, levels),
        seed,
    )


def sample_training(inst: LinRegInstance, m: int, seed, mode: str = "structured") -> TrainingSample:
    if m < 1:
        raise ValidationError("m must be >= 1")
    if mode not in ("structured", "unstructured"):
        raise ValidationError(f"unknown mode {mode!r}")
    rng = np.random.default_rng(seed)
    w = inst.mu_x.weights
    idx = rng.choice(len(w), size=m, p=w / w.sum())
    X = inst.mu_x.atoms[idx]
    Phi = inst.feature_map(X)
    if mode == "structured":
        Xi = inst.noise.draw(m, rng)
        Y = Phi @ inst.W_star.T + Xi
    else:
        Xi = None
        Y = rng.random((m, inst.d_y))
    return TrainingSample(X, PointSet(Phi), Y, Xi, seed, mode)


def fit_least_squares(sample: TrainingSample, ridge: float = 1e-10) -> np.ndarray:
    """``W = Y Phi^T (Phi Phi^T + ridge I)^-1`` with ``Phi`` the ``d_phi x m`` feature matrix."""
    if ridge < 0:
        raise ValidationError("ridge must be >= 0")
    P = sample.Phi.points
    A = P.T @ P + ridge * np.eye(P.shape[1])
    B = P.T @ sample.Y
    if ridge == 0 and np.linalg.matrix_rank(A) < A.shape[0]:
        raise SingularSystem("feature Gram matrix is singular; use ridge > 0")
    try:
        return np.linalg.solve(A, B).T
    except np.linalg.LinAlgError as e:
        raise SingularSystem(str(e)) from None


def _check_W(W_hat, inst: LinRegInstance) -> np.ndarray:
    W = np.atleast_2d(np.asarray(W_hat, dtype=np.float64))
    if W.shape != inst.W_star.shape:
        raise ShapeMismatch(f"W_hat has shape {W.shape}, expected {inst.W_star.shape}")
    return W


def _fsum_mean(v: np.ndarray) -> float:
    return math.fsum(v.tolist()) / len(v)


def verify_thm2(inst: LinRegInstance, sample: TrainingSample, W_hat) -> LinRegReport:
    """Structured labels: ``gap <= V D* + A1 + A2``."""
    if sample.Xi is None:
        raise MissingNoiseRecord("structured verification needs the recorded noise draws")
    W = _check_W(W_hat, inst)
    dW = W - inst.W_star
    nu = inst.feature_measure
    Phi = sample.Phi.points
    Xi = sample.Xi

    # expected 1/2||W phi - y||^2 = E_f + E||xi||^2 / 2, the cross term has mean zero
    E_f = math.fsum((nu.weights * 0.5 * ((nu.atoms @ dW.T) ** 2).sum(axis=1)).tolist())
    expected = E_f + 0.5 * inst.noise.second_moment
    empirical = _fsum_mean(0.5 * ((Phi @ W.T - sample.Y) ** 2).sum(axis=1))
    lhs = expected - empirical

    emp_f = _fsum_mean(0.5 * ((Phi @ dW.T) ** 2).sum(axis=1))
    A1 = _fsum_mean((Xi * (Phi @ dW.T)).sum(axis=1))
    A2 = inst.noise.second_moment - _fsum_mean((Xi**2).sum(axis=1))
    D = star_discrepancy_exact(sample.Phi, nu).value
    V = thm2_variation_bound(W, inst.W_star)
    rhs = V * D + A1 + A2
    gap_f = E_f - emp_f
    residual = lhs - (gap_f + A1 + 0.5 * A2)
    return LinRegReport(
        "thm2",
        lhs,
        D,
        V,
        A1,
        A2,
        math.nan,
        rhs,
        lhs <= rhs + SLACK,
        gap_f,
        residual,
        {"rhs_half_A2": V * D + A1 + 0.5 * A2},
    )


def compute_M(W_hat, d_y: int) -> float:
    """``max ||W t - y||_inf`` over ``(t, y)`` in ``[0,1]^(d_phi + d_y)``, by vertex enumeration.

    The objective is convex in ``(t, y)`` so the maximum sits at a vertex; the
    ``y`` vertices separate per output row.
    """
    W = np.atleast_2d(np.asarray(W_hat, dtype=np.float64))
    if W.shape[0] != d_y:
        raise ShapeMismatch(f"W_hat has {W.shape[0]} rows, expected d_y={d_y}")
    d_phi = W.shape[1]
    if d_phi + d_y > MAX_VERTEX_DIM:
        raise BudgetExceeded(2 ** (d_phi + d_y), 2**MAX_VERTEX_DIM, "vertices")
    T = np.array(list(itertools.product((0.0, 1.0), repeat=d_phi)))
    v = T @ W.T
    return float(max(np.abs(v).max(), np.abs(v - 1.0).max()))


@dataclass(frozen=True)
class MonteCarlo:
    """Estimate the expected loss from ``n`` draws; the check widens by 4 standard errors."""

    n: int
    seed: int


def verify_thm3(inst: LinRegInstance, sample: TrainingSample, W_hat, estimator="exact_product") -> LinRegReport:
    """Unstructured labels: ``gap <= V D*`` over the pairs ``(phi(x), y)``."""
    if sample.mode != "unstructured":
        raise ValidationError("verify_thm3 needs an unstructured sample")
    W = _check_W(W_hat, inst)
    d_y = inst.d_y
    nu = inst.feature_measure
    Phi = sample.Phi.points
    pairs = PointSet(np.hstack([Phi, sample.Y]))
    measure = product_with_uniform(nu, d_y)

    slack = SLACK
    extra: dict = {"estimator": "exact_product"}
    if estimator == "exact_product":
        # E[1/2||W phi - y||^2] with y uniform: 1/2||W phi||^2 - 1/2 sum(W phi) + d_y/6
        P = nu.atoms @ W.T
        per_atom = 0.5 * (P**2).sum(axis=1) - 0.5 * P.sum(axis=1) + d_y / 6.0
        expected = math.fsum((nu.weights * per_atom).tolist())
    elif isinstance(estimator, MonteCarlo):
        draws = measure.sample(estimator.n, estimator.seed).points
        losses = 0.5 * ((draws[:, : inst.d_phi] @ W.T - draws[:, inst.d_phi :]) ** 2).sum(axis=1)
        expected = _fsum_mean(losses)
        stderr = float(losses.std(ddof=1) / math.sqrt(len(losses))) if len(losses) > 1 else math.inf
        slack += 4 * stderr
        extra = {"estimator": "monte_carlo", "n": estimator.n, "mc_seed": estimator.seed, "stderr": stderr}
    else:
        raise ValidationError(f"unknown estimator {estimator!r}")
    empirical = _fsum_mean(0.5 * ((Phi @ W.T - sample.Y) ** 2).sum(axis=1))
    lhs = expected - empirical
    M = compute_M(W, d_y)
    V = thm3_variation_bound(W, M, d_y)
    D = star_discrepancy_exact(pairs, measure).value
    rhs = V * D
    extra["M_domain"] = "vertices of [0,1]^(d_phi+d_y)"
    return LinRegReport("thm3", lhs, D, V, math.nan, math.nan, M, rhs, lhs <= rhs + slack, extra=extra)


# ---------------------------------------------------------------------------
# rates


@dataclass(frozen=True)
class Remark5Table:
    d_phi: int
    trials: int
    seed: int
    c2: float
    delta: float
    rows: list

    COLUMNS = (
        "m",
        "median_D",
        "scaled_median_D",
        "reference_D",
        "median_abs_A2",
        "max_abs_A2",
        "hoeffding_A2",
    )

    def to_csv(self) -> str:
        lines = [",".join(self.COLUMNS)]
        for r in self.rows:
            lines.append(",".join(repr(r[c]) if isinstance(r[c], float) else str(r[c]) for c in self.COLUMNS))
        return "\n".join(lines) + "\n"

    def to_json(self) -> dict:
        return {
            "d_phi": self.d_phi,
            "trials": self.trials,
            "seed": self.seed,
            "c2": self.c2,
            "delta": self.delta,
            "rows": self.rows,
        }


def _remark5_trial(args) -> tuple[float, float]:
    inst, m, seed, trial = args
    s = sample_training(inst, m, [seed, m, trial], "structured")
    D = star_discrepancy_exact(s.Phi, inst.feature_measure).value
    A2 = inst.noise.second_moment - _fsum_mean((s.Xi**2).sum(axis=1))
    return D, A2


def remark5_rates(
    inst: LinRegInstance, m_list, trials: int, seed: int, c2: float = 1.0, delta: float = 0.05, workers: int = 1
) -> Remark5Table:
    """Empirical ``D*`` and ``A2`` against ``c2 sqrt(d_phi/m)`` and the Hoeffding term."""
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    jobs = [(inst, int(m), seed, t) for m in m_list for t in range(trials)]
    out = pmap(_remark5_trial, jobs, workers)
    M_noise = max(float((inst.noise.support**2).sum(axis=1).max()), 0.0)
    rows = []
    for i, m in enumerate(m_list):
        chunk = out[i * trials : (i + 1) * trials]
        D = np.array([c[0] for c in chunk])
        A2 = np.abs(np.array([c[1] for c in chunk]))
        med = float(np.median(D))
        rows.append(
            {
                "m": int(m),
                "median_D": med,
                "scaled_median_D": med * math.sqrt(m / inst.d_phi),
                "reference_D": c2 * math.sqrt(inst.d_phi / m),
                "median_abs_A2": float(np.median(A2)),
                "max_abs_A2": float(A2.max()),
                "hoeffding_A2": hoeffding_term(M_noise, int(m), delta),
            }
        )
    return Remark5Table(inst.d_phi, trials, seed, c2, delta, rows)
