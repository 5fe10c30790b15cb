"""Triangular arrays: row structure, normalization, and the series bridge."""

import math

import numpy as np
import pytest

from randsum.arrays import (
    ArrayError,
    RowLengths,
    SeriesForm,
    array_from_config,
    from_series,
    make_iid_array,
    make_rare_jump_array,
    make_shiryaev_array,
    normal_twin,
    shiryaev_series,
    validate,
)
from randsum.distributions import Normal, Rademacher, Uniform


class TestRowLengths:
    def test_builtin_rules(self):
        assert RowLengths("n")(7) == 7
        assert RowLengths("2n")(7) == 14
        assert RowLengths(lambda n: n * n)(5) == 25

    def test_minimum_floor(self):
        assert RowLengths("n", minimum=2)(1) == 2

    def test_rejects_bad_inputs(self):
        with pytest.raises(ArrayError):
            RowLengths("n+3")
        with pytest.raises(ArrayError):
            RowLengths("n")(0)
        with pytest.raises(ArrayError):
            RowLengths(lambda n: 0)(3)


class TestIidArray:
    def test_uniform_row_entries(self):
        arr = make_iid_array(Uniform(-1.0, 1.0))
        e = arr.entry(4, 1)
        # base variance 1/3, so the row-4 scale is sqrt(3)/2
        assert e.support()[1] == pytest.approx(math.sqrt(3.0) / 2.0, rel=1e-14)
        assert e.variance == pytest.approx(0.25, rel=1e-14)

    def test_entries_shared_within_row(self):
        arr = make_iid_array(Rademacher())
        assert arr.entry(6, 2) is arr.entry(6, 5)
        assert arr.entry(6, 1) is not arr.entry(7, 1)

    def test_row_validates(self):
        arr = make_iid_array(Uniform(0.0, 1.0))  # off-center base gets recentred
        for n in (1, 3, 17):
            v = validate(arr, n)
            assert v.passed
            assert v.var_residual <= 1e-12

    def test_entries_extend_past_row(self):
        # rows are conceptually infinite: position j > k_n reuses the row law
        arr = make_iid_array(Rademacher())
        assert arr.entry(4, 9).variance == pytest.approx(0.25)

    def test_rejects_degenerate_base(self):
        from randsum.distributions import FiniteDiscrete

        with pytest.raises(ArrayError):
            make_iid_array(FiniteDiscrete([2.0], [1.0]))


class TestShiryaevArray:
    def test_row_variances_exact(self):
        arr = make_shiryaev_array()
        vs = [arr.entry(4, j).variance for j in range(1, 5)]
        assert vs == [0.125, 0.125, 0.25, 0.5]
        assert arr.prefix_variance(4) == 1.0

    def test_top_entry_always_half(self):
        arr = make_shiryaev_array()
        for n in (2, 8, 32, 500):
            assert arr.entry(n, n).variance == 0.5
            assert validate(arr, n).passed

    def test_min_row_is_two(self):
        arr = make_shiryaev_array()
        assert arr.row_length(1) == 2

    def test_divergent_extension_saturates(self):
        # positions far past the row leave float range and report inf
        arr = make_shiryaev_array()
        assert math.isinf(arr.entry(4, 2000).variance)


class TestRareJumpArray:
    def test_entry_law(self):
        arr = make_rare_jump_array()
        e = arr.entry(4, 1)
        values, probs = e.atoms()
        assert list(values) == [-0.25, 1.0]
        assert probs[1] == pytest.approx(0.2)
        assert e.mean == pytest.approx(0.0, abs=1e-15)
        assert e.variance == pytest.approx(0.25, rel=1e-14)

    def test_rows_exact(self):
        arr = make_rare_jump_array()
        for n in (1, 5, 100):
            v = validate(arr, n)
            assert v.passed and v.var_residual <= 1e-12


class TestNormalTwin:
    def test_matches_variances(self):
        src = make_rare_jump_array()
        twin = normal_twin(src)
        for n in (3, 9):
            for j in (1, n):
                t = twin.entry(n, j)
                assert isinstance(t, Normal)
                assert t.variance == pytest.approx(src.entry(n, j).variance, rel=1e-14)

    def test_iid_twin_shares_row_object(self):
        twin = normal_twin(make_iid_array(Rademacher()))
        assert twin.entry(5, 1) is twin.entry(5, 4)


class TestSeriesForm:
    def test_generic_series_tracks_sums(self):
        s = SeriesForm(lambda j: Uniform(0.0, float(j)), label="ramp")
        # var(j) = j^2/12, centered at j/2
        assert s.variance(3) == pytest.approx(0.75)
        assert s.center(3) == pytest.approx(1.5)
        assert s.b_squared(4) == pytest.approx((1 + 4 + 9 + 16) / 12.0, rel=1e-14)
        std = s.standardized(2)
        assert std.mean == pytest.approx(0.0, abs=1e-15)
        assert std.variance == pytest.approx(1.0, rel=1e-12)

    def test_shiryaev_series_log_continuation(self):
        s = shiryaev_series()
        # exact while linear sums fit: B_k^2 = 2^(k-1)
        assert s.b_squared(4) == 8.0
        assert s.log_b_squared(4) == pytest.approx(3.0 * math.log(2.0), rel=1e-15)
        # far past float range the log form carries on and the raw sum is inf
        assert s.log_b_squared(2000) == pytest.approx(1999.0 * math.log(2.0), rel=1e-12)
        assert math.isinf(s.b_squared(2000))

    def test_profiles(self):
        s = shiryaev_series()
        lv = s.log_variance_profile(5)
        assert np.allclose(lv, [0.0, 0.0, math.log(2.0), math.log(4.0), math.log(8.0)])
        lb = s.log_b_squared_profile(5)
        assert lb[-1] == pytest.approx(4.0 * math.log(2.0), rel=1e-14)

    def test_rejects_flat_member(self):
        from randsum.distributions import FiniteDiscrete

        flat = FiniteDiscrete([2.0], [1.0])
        s = SeriesForm(lambda j: Uniform(0.0, 1.0) if j != 2 else flat)
        with pytest.raises(ArrayError):
            s.b_squared(3)


class TestSeriesArray:
    def test_entries_match_direct_normalization(self):
        s = SeriesForm(lambda j: Uniform(0.0, float(j)), label="ramp")
        arr = from_series(s)
        b2 = (1 + 4 + 9 + 16) / 12.0
        e = arr.entry(4, 3)
        assert e.variance == pytest.approx(0.75 / b2, rel=1e-13)
        assert validate(arr, 4).passed

    def test_deep_rows_stay_usable(self):
        # row 2000 of the doubling series: raw variances overflowed long ago,
        # yet the normalized top entries are plain numbers
        arr = from_series(shiryaev_series())
        assert arr.entry(2000, 1999).variance == pytest.approx(0.25, rel=1e-12)
        assert arr.entry(2000, 2000).variance == pytest.approx(0.5, rel=1e-12)

    def test_matches_closed_form_array(self):
        direct = make_shiryaev_array()
        via_series = from_series(shiryaev_series())
        for j in range(1, 9):
            assert via_series.entry(8, j).variance == pytest.approx(
                direct.entry(8, j).variance, rel=1e-12
            )

    def test_underflow_is_an_error(self):
        # an early member of a very deep row scales below the float floor;
        # silently returning a zero-variance law would corrupt functionals
        arr = from_series(shiryaev_series())
        with pytest.raises(ArrayError):
            arr.entry(3000, 1)


class TestConfig:
    def test_kinds(self):
        assert array_from_config({"array": "shiryaev"}).label == "shiryaev"
        assert array_from_config({"array": "rare-jump", "rows": "2n"}).row_length(3) == 6
        arr = array_from_config(
            {"array": "iid", "base": {"family": "uniform", "low": -1.0, "high": 1.0}}
        )
        assert arr.entry(4, 1).variance == pytest.approx(0.25)
        assert array_from_config({"array": "series", "base_seq": "shiryaev"}).entry(
            4, 4
        ).variance == pytest.approx(0.5)

    def test_unknown_kind(self):
        with pytest.raises(ArrayError):
            array_from_config({"array": "magic"})
