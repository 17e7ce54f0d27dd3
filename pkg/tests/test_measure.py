import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from koksma.errors import InvalidMeasure, MapRangeViolation
from koksma.measure import (
    AtomicMeasure,
    BoxMixture,
    ProductMeasure,
    SignedAtomicMeasure,
    closed_mass,
    empirical,
    f_from_signed,
    measure_from_json,
    open_mass,
    product_with_uniform,
    pushforward_atomic,
    sample,
    total_variation,
    uniform,
)
from koksma.point_set import MapSpec, PointSet
from koksma.suite import random_measure
from oracles import atomic_mass


class TestClosedMass:
    def test_uniform_square(self):
        assert closed_mass(uniform(2), [0.5, 0.5]) == 0.25

    def test_atom_on_boundary_included(self):
        nu = AtomicMeasure([[0.3], [0.7]], [0.5, 0.5])
        assert closed_mass(nu, [0.3]) == 0.5

    def test_box_volume_ratio(self):
        nu = BoxMixture([[0.0, 0.0]], [[0.5, 0.5]], [1.0])
        assert closed_mass(nu, [0.25, 1.0]) == 0.5

    def test_product_piecewise_linear(self):
        nu = ProductMeasure(([0.0, 0.5, 1.0],), ([0.0, 0.8, 1.0],))
        assert closed_mass(nu, [0.25]) == pytest.approx(0.4)
        assert closed_mass(nu, [0.75]) == pytest.approx(0.9)

    def test_vectorized(self):
        got = closed_mass(uniform(1), np.array([[0.1], [0.9]]))
        assert got.tolist() == [0.1, 0.9]


class TestOpenMass:
    def test_strict_excludes_atom(self):
        assert open_mass(AtomicMeasure([[0.3], [0.7]], [0.5, 0.5]), [0.3]) == 0.0

    def test_atomless(self):
        assert open_mass(uniform(1), [0.5]) == 0.5

    def test_strict_on_any_axis(self):
        assert open_mass(AtomicMeasure([[0.3, 0.3]], [1.0]), [0.3, 0.5]) == 0.0

    def test_degenerate_box_axis(self):
        nu = BoxMixture([[0.4, 0.0]], [[0.4, 1.0]], [1.0])
        assert open_mass(nu, [0.4, 0.5]) == 0.0
        assert closed_mass(nu, [0.4, 0.5]) == 0.5


class TestValidation:
    def test_weights_must_sum_to_one(self):
        with pytest.raises(InvalidMeasure):
            AtomicMeasure([[0.1], [0.2]], [0.5, 0.4])

    def test_weights_positive(self):
        with pytest.raises(InvalidMeasure):
            AtomicMeasure([[0.1], [0.2]], [1.0, 0.0])

    def test_cdf_monotone(self):
        with pytest.raises(InvalidMeasure):
            ProductMeasure(([0.0, 0.5, 1.0],), ([0.0, 0.6, 0.5],))

    def test_box_order(self):
        with pytest.raises(InvalidMeasure):
            BoxMixture([[0.5]], [[0.4]], [1.0])

    def test_unknown_variant(self):
        with pytest.raises(InvalidMeasure):
            measure_from_json({"d": 1, "variant": "gaussian"})


VARIANTS = ("product", "boxmix", "atomic")


@st.composite
def measures(draw, max_d=3):
    d = draw(st.integers(1, max_d))
    variant = draw(st.sampled_from(VARIANTS))
    seed = draw(st.integers(0, 2**32 - 1))
    return random_measure(np.random.default_rng(seed), d, variant)


@given(measures(), st.integers(0, 2**32 - 1))
def test_mass_bounds_and_monotonicity(nu, seed):
    rng = np.random.default_rng(seed)
    T = rng.random((40, nu.d))
    S = np.minimum(T, rng.random((40, nu.d)))
    c, o = closed_mass(nu, T), open_mass(nu, T)
    assert np.all(o >= -1e-15) and np.all(o <= c + 1e-15) and np.all(c <= 1 + 1e-12)
    assert np.all(closed_mass(nu, S) <= c + 1e-15)
    assert np.all(open_mass(nu, S) <= o + 1e-15)


@given(measures())
def test_full_cube_has_unit_mass(nu):
    assert closed_mass(nu, np.ones(nu.d)) == pytest.approx(1.0, abs=1e-12)


@given(measures(), st.integers(0, 2**32 - 1))
def test_atomic_mass_matches_loop_oracle(nu, seed):
    if not isinstance(nu, AtomicMeasure):
        return
    T = np.random.default_rng(seed).random((20, nu.d))
    T[:5] = nu.atoms[np.arange(5) % len(nu.weights)]
    for t in T:
        assert closed_mass(nu, t) == pytest.approx(atomic_mass(nu.atoms, nu.weights, t), abs=1e-15)
        assert open_mass(nu, t) == pytest.approx(atomic_mass(nu.atoms, nu.weights, t, strict=True), abs=1e-15)


@given(measures(max_d=2), st.integers(0, 2**32 - 1))
def test_json_round_trip(nu, seed):
    back = measure_from_json(nu.to_json())
    T = np.random.default_rng(seed).random((10, nu.d))
    assert np.array_equal(closed_mass(back, T), closed_mass(nu, T))


class TestSampling:
    def test_single_atom(self):
        ps = sample(AtomicMeasure([[0.4]], [1.0]), 7, 0)
        assert ps.points.tolist() == [[0.4]] * 7

    def test_seeded(self):
        assert sample(uniform(2), 10, 3) == sample(uniform(2), 10, 3)

    def test_uniform_mean(self):
        n = 20000
        x = sample(uniform(1), n, 11).column(0)
        assert abs(x.mean() - 0.5) <= 3 / math.sqrt(12 * n)

    @pytest.mark.parametrize("variant", VARIANTS)
    def test_box_fraction_converges(self, variant):
        nu = random_measure(np.random.default_rng(5), 2, variant)
        n = 20000
        P = sample(nu, n, 9).points
        T = np.random.default_rng(1).random((20, 2))
        for t in T:
            frac = np.all(P <= t, axis=1).mean()
            assert abs(frac - closed_mass(nu, t)) <= 4 / math.sqrt(n)

    def test_samples_stay_in_cube(self):
        nu = ProductMeasure(([0.0, 0.3, 1.0],), ([0.0, 0.0, 1.0],))
        x = sample(nu, 1000, 2).column(0)
        assert x.min() >= 0.3 and x.max() <= 1.0


class TestPushforward:
    def test_identity(self):
        nu = AtomicMeasure([[0.2], [0.8]], [0.3, 0.7])
        out = pushforward_atomic(nu, MapSpec.identity(1))
        assert out.atoms.tolist() == nu.atoms.tolist() and out.weights.tolist() == nu.weights.tolist()

    def test_collapse_sums_weights(self):
        nu = AtomicMeasure([[0.2], [0.8]], [0.3, 0.7])
        out = pushforward_atomic(nu, MapSpec.tabulated([[0.2], [0.8]], [[0.5], [0.5]]))
        assert out.atoms.tolist() == [[0.5]] and out.weights.tolist() == [1.0]

    def test_selection(self):
        nu = AtomicMeasure([[0.2, 0.6], [0.8, 0.1]], [0.3, 0.7])
        out = pushforward_atomic(nu, MapSpec.select(2, [1]))
        assert out.atoms.tolist() == [[0.6], [0.1]] and out.weights.tolist() == [0.3, 0.7]

    def test_range_violation(self):
        nu = AtomicMeasure([[0.9]], [1.0])
        with pytest.raises(MapRangeViolation):
            pushforward_atomic(nu, MapSpec.affine([[2.0]], [0.0], clamp=False))

    def test_empirical_merges_duplicates(self):
        nu = empirical(PointSet(np.array([[0.1], [0.3], [0.1], [0.2]])))
        assert nu.atoms.tolist() == [[0.1], [0.3], [0.2]] and nu.weights.tolist() == [0.5, 0.25, 0.25]


class TestProductWithUniform:
    def test_mass_formula(self):
        nu = AtomicMeasure([[0.25], [0.75]], [0.4, 0.6])
        mix = product_with_uniform(nu, 2)
        t = np.array([0.5, 0.5, 0.2])
        assert closed_mass(mix, t) == pytest.approx(0.4 * 0.5 * 0.2)
        assert open_mass(mix, [0.25, 1.0, 1.0]) == 0.0


class TestSigned:
    def test_total_variation(self):
        assert total_variation(SignedAtomicMeasure(1, [[0.5]], [1.0])) == 1
        assert total_variation(SignedAtomicMeasure(1, [[0.2], [0.8]], [0.5, -0.5])) == 1.0
        assert total_variation(SignedAtomicMeasure(1, [], [])) == 0

    def test_atom_at_top_corner_gives_constant(self):
        f = f_from_signed(SignedAtomicMeasure(2, [[1.0, 1.0]], [2.5]))
        assert np.all(f(np.random.default_rng(0).random((50, 2))) == 2.5)

    def test_indicator(self):
        f = f_from_signed(SignedAtomicMeasure(1, [[0.5]], [1.0]))
        assert f([0.4]) == 1.0 and f([0.6]) == 0.0 and f([0.5]) == 1.0

    def test_empty_is_offset(self):
        f = f_from_signed(SignedAtomicMeasure(1, [], [], 3.0))
        assert f([0.7]) == 3.0

    def test_offset_is_value_at_one(self):
        nu = SignedAtomicMeasure(2, [[0.2, 0.4], [0.9, 0.1]], [1.0, -2.0], 0.5)
        assert f_from_signed(nu)([1.0, 1.0]) == 0.5

    def test_json(self):
        nu = SignedAtomicMeasure(2, [[0.2, 0.4]], [-1.5], 0.25)
        back = SignedAtomicMeasure.from_json(nu.to_json())
        assert back.to_json() == nu.to_json()
