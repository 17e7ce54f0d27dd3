import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from koksma.errors import (
    DimensionMismatch,
    DimensionTooLarge,
    InvalidBase,
    MapDomainError,
    MapRangeViolation,
    OutOfUnitCube,
)
from koksma.point_set import (
    CsvFormatError,
    MapSpec,
    PointSet,
    apply_map,
    concat,
    equispaced_centers,
    format_csv,
    halton,
    parse_csv,
    validate,
    van_der_corput,
)
from oracles import radical_inverse

unit = st.floats(0.0, 1.0, allow_nan=False)


def point_arrays(max_m=12, max_d=3):
    return st.integers(1, max_d).flatmap(
        lambda d: st.lists(st.lists(unit, min_size=d, max_size=d), min_size=1, max_size=max_m)
    )


class TestValidate:
    def test_single_point(self):
        ps = validate([[0.5]], 1)
        assert (ps.m, ps.d) == (1, 1)

    def test_boundary_values_allowed(self):
        ps = validate([[0.2, 1.0], [0.0, 0.3]], 2)
        assert ps.points.tolist() == [[0.2, 1.0], [0.0, 0.3]]

    def test_out_of_cube_is_rejected_not_clamped(self):
        with pytest.raises(OutOfUnitCube) as e:
            validate([[1.2]], 1)
        assert (e.value.index, e.value.coordinate) == (0, 0)

    def test_reports_offending_index(self):
        with pytest.raises(OutOfUnitCube) as e:
            validate([[0.1, 0.2], [0.3, -0.1]], 2)
        assert (e.value.index, e.value.coordinate) == (1, 1)

    def test_wrong_dimension(self):
        with pytest.raises(DimensionMismatch):
            validate([[0.1, 0.2]], 3)

    def test_empty(self):
        with pytest.raises(Exception):
            validate([], 1)

    def test_nan_rejected(self):
        with pytest.raises(OutOfUnitCube):
            validate([[float("nan")]], 1)

    def test_points_are_read_only(self):
        ps = validate([[0.1]], 1)
        with pytest.raises(ValueError):
            ps.points[0, 0] = 0.2

    def test_duplicates_and_order_kept(self):
        ps = validate([[0.3], [0.1], [0.3]], 1)
        assert ps.column(0).tolist() == [0.3, 0.1, 0.3]


class TestMaps:
    def test_identity_is_bit_exact(self):
        ps = validate([[0.1, 0.7], [1.0, 0.0]], 2)
        assert apply_map(ps, MapSpec.identity(2)) == ps

    def test_selection(self):
        # second coordinate, 0-based index 1
        out = apply_map(validate([[0.1, 0.9]], 2), MapSpec.select(2, [1]))
        assert out.points.tolist() == [[0.9]]

    def test_affine(self):
        out = apply_map(validate([[0.0], [1.0]], 1), MapSpec.affine([[0.5]], [0.25]))
        assert out.points.tolist() == [[0.25], [0.75]]

    def test_affine_without_clamp_reports_range_violation(self):
        with pytest.raises(MapRangeViolation):
            apply_map(validate([[1.0]], 1), MapSpec.affine([[2.0]], [0.0], clamp=False))

    def test_affine_clamps_when_asked(self):
        out = apply_map(validate([[1.0]], 1), MapSpec.affine([[2.0]], [0.0]))
        assert out.points.tolist() == [[1.0]]

    def test_tabulated(self):
        mp = MapSpec.tabulated([[0.1], [0.2]], [[0.5, 0.5], [1.0, 0.0]])
        out = apply_map(validate([[0.2], [0.1], [0.2]], 1), mp)
        assert out.points.tolist() == [[1.0, 0.0], [0.5, 0.5], [1.0, 0.0]]

    def test_tabulated_off_support(self):
        mp = MapSpec.tabulated([[0.1]], [[0.5]])
        with pytest.raises(MapDomainError):
            apply_map(validate([[0.3]], 1), mp)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            apply_map(validate([[0.3]], 1), MapSpec.identity(2))

    @pytest.mark.parametrize(
        "mp",
        [
            MapSpec.identity(2),
            MapSpec.select(2, [1, 0, 1]),
            MapSpec.affine([[0.5, 0.25]], [0.1]),
            MapSpec.tabulated([[0.1, 0.2]], [[0.3]]),
        ],
    )
    def test_json_round_trip(self, mp):
        back = MapSpec.from_json(mp.to_json())
        assert back.to_json() == mp.to_json()

    @given(point_arrays())
    def test_map_preserves_m(self, pts):
        ps = PointSet(np.array(pts))
        mp = MapSpec.affine(np.full((2, ps.d), 0.7), [0.2, -0.1])
        assert apply_map(ps, mp).m == ps.m


class TestGenerators:
    def test_vdc_base2(self):
        assert van_der_corput(3, 2).column(0).tolist() == [0.5, 0.25, 0.75]

    def test_vdc_first(self):
        assert van_der_corput(1, 2).column(0).tolist() == [0.5]

    def test_vdc_base3(self):
        assert van_der_corput(2, 3).column(0).tolist() == [1 / 3, 2 / 3]

    def test_invalid_base(self):
        with pytest.raises(InvalidBase):
            van_der_corput(3, 1)

    def test_halton_2d(self):
        assert halton(2, 2).points.tolist() == [[0.5, 1 / 3], [0.25, 2 / 3]]

    def test_halton_first_point(self):
        assert halton(1, 4).points.tolist() == [[0.5, 1 / 3, 1 / 5, 1 / 7]]

    def test_halton_too_large(self):
        with pytest.raises(DimensionTooLarge):
            halton(4, 9)

    def test_halton_d1_is_vdc(self):
        assert halton(50, 1) == van_der_corput(50, 2)

    @pytest.mark.parametrize("j,p", [(0, 2), (1, 3), (2, 5), (7, 19)])
    def test_halton_columns_are_vdc(self, j, p):
        assert np.array_equal(halton(200, 8).column(j), van_der_corput(200, p).column(0))

    @pytest.mark.parametrize("base", [2, 3, 5, 7, 19])
    def test_vdc_matches_exact_fraction(self, base):
        got = van_der_corput(300, base).column(0).tolist()
        assert got == [radical_inverse(i, base) for i in range(1, 301)]

    def test_vdc_distinct_up_to_2_20(self):
        v = van_der_corput(1 << 20, 2).column(0)
        assert len(np.unique(v)) == len(v)

    def test_centers(self):
        assert equispaced_centers(1).column(0).tolist() == [0.5]
        assert equispaced_centers(2).column(0).tolist() == [0.25, 0.75]
        assert equispaced_centers(4).column(0).tolist() == [0.125, 0.375, 0.625, 0.875]


class TestCsv:
    @given(point_arrays())
    def test_round_trip_is_exact(self, pts):
        ps = PointSet(np.array(pts))
        assert parse_csv(format_csv(ps)) == ps

    def test_header(self):
        assert format_csv(validate([[0.5, 0.25]], 2)).splitlines()[0] == "# d=2"

    def test_missing_header(self):
        with pytest.raises(CsvFormatError) as e:
            parse_csv("0.1,0.2\n")
        assert e.value.line == 1

    def test_bad_row_reports_line(self):
        with pytest.raises(CsvFormatError) as e:
            parse_csv("# d=2\n0.1,0.2\n0.3\n")
        assert e.value.line == 3

    def test_out_of_range_reports_line(self):
        with pytest.raises(CsvFormatError) as e:
            parse_csv("# d=1\n0.1\n\n1.5\n")
        assert e.value.line == 4

    def test_non_numeric(self):
        with pytest.raises(CsvFormatError):
            parse_csv("# d=1\nabc\n")

    def test_concat(self):
        a, b = validate([[0.1]], 1), validate([[0.2], [0.3]], 1)
        assert concat([a, b]).column(0).tolist() == [0.1, 0.2, 0.3]
