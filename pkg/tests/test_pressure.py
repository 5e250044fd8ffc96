import math

import numpy as np
import pytest

from ifsdim import systems
from ifsdim.errors import BudgetError
from ifsdim.ifs import contraction
from ifsdim.pressure import (
    affinity_oracle,
    dimension_upper_bound,
    moran_oracle,
    pressure_curve,
    pressure_n,
    singularity_dimension,
)

LOG2_LOG3 = math.log(2) / math.log(3)


class TestPressure:
    @pytest.mark.parametrize("n", [1, 3, 6])
    @pytest.mark.parametrize("s", [0.0, 0.4, LOG2_LOG3, 1.0])
    def test_cantor_closed_form(self, n, s):
        # constant derivative 1/3 makes the sum 2^n 3^(-sn) exactly
        got = pressure_n(systems.cantor(), s, n)
        assert got == pytest.approx(math.log(2) - s * math.log(3), abs=1e-12)

    def test_cantor_zero_at_dimension(self):
        assert pressure_n(systems.cantor(), LOG2_LOG3, 5) == pytest.approx(0.0, abs=1e-12)

    def test_diag_affine_zero_at_root(self):
        s = 1 + math.log(1.2) / math.log(5)
        assert pressure_n(systems.diag_affine(), s, 1) == pytest.approx(0.0, abs=1e-5)

    def test_budget_error(self):
        with pytest.raises(BudgetError):
            pressure_n(systems.cantor(), 0.5, 30, budget=2 ** 20)

    def test_singular_jacobian_error(self):
        from ifsdim.config import spec_from_config
        from ifsdim.errors import NumericError

        # a declared-zero Jacobian entry collapses every chained spectrum
        spec, _, _ = spec_from_config(
            {
                "dimension": 1,
                "alphabet_size": 2,
                "domain": {"min": [0.0], "max": [1.0]},
                "maps": [
                    {"components": ["0*x1 + 0.2"], "jacobian": [["0"]]},
                    {"components": ["0.3*x1"]},
                ],
            }
        )
        with pytest.raises(NumericError, match="singular Jacobian"):
            pressure_n(spec, 0.5, 2)

    def test_slope_bound_in_s(self):
        # P_n(s2) <= P_n(s1) - (s2 - s1) log(1/theta)
        for name in ("cantor", "diag_affine", "triangular_pair", "quadratic_pair"):
            f = systems.system(name)
            theta = contraction(f).theta
            grid = np.linspace(0.0, f.dim + 0.5, 5)
            values = [pressure_n(f, s, 3) for s in grid]
            for (s1, p1), (s2, p2) in zip(zip(grid, values), zip(grid[1:], values[1:])):
                assert p2 <= p1 - (s2 - s1) * math.log(1 / theta) + 1e-9

    def test_subadditive_levels_for_affine(self):
        f = systems.triangular_pair()
        s = 0.8
        for n, m in [(2, 3), (1, 4), (3, 3)]:
            pn = pressure_n(f, s, n)
            pm = pressure_n(f, s, m)
            pnm = pressure_n(f, s, n + m)
            assert (n + m) * pnm <= n * pn + m * pm + 1e-9

    def test_curve_decreasing_and_certified(self):
        curve = pressure_curve(systems.cantor(), 4, [0.0, 0.3, 0.6, 0.9, 1.2])
        assert curve.certified and curve.sup_strategy == "affine-exact"
        assert all(b < a for a, b in zip(curve.p_values, curve.p_values[1:]))

    def test_nonlinear_not_certified(self):
        curve = pressure_curve(systems.system("quadratic_pair"), 3, [0.0, 0.5, 1.0])
        assert not curve.certified and curve.sup_strategy == "sample-k-points"


class TestSingularityDimension:
    @pytest.mark.parametrize("n", [1, 4, 8])
    def test_cantor(self, n):
        est = singularity_dimension(systems.cantor(), n, 1e-8)
        assert est.s_star == pytest.approx(LOG2_LOG3, abs=1e-8)
        assert est.certified
        assert est.bracket[1] - est.bracket[0] <= 1e-8

    def test_diag_affine_level_one(self):
        est = singularity_dimension(systems.diag_affine(), 1, 1e-8)
        assert est.s_star == pytest.approx(1 + math.log(1.2) / math.log(5), abs=1e-8)

    def test_half_ratio_pair(self):
        est = singularity_dimension(systems.system("binary_interval"), 4, 1e-8)
        assert est.s_star == pytest.approx(1.0, abs=1e-8)

    def test_matches_moran_oracle(self):
        est = singularity_dimension(systems.cantor(), 6, 1e-7)
        assert abs(est.s_star - moran_oracle([1 / 3, 1 / 3])) <= 1e-7

    def test_matches_affinity_oracle(self):
        est = singularity_dimension(systems.diag_affine(), 1, 1e-7)
        assert abs(est.s_star - affinity_oracle([[0.6, 0.2], [0.6, 0.2]])) <= 1e-7

    def test_respects_entropy_bound(self):
        for name in ("cantor", "diag_affine", "triangular_pair", "quadratic_pair"):
            f = systems.system(name)
            est = singularity_dimension(f, 3, 1e-6)
            assert est.s_star <= dimension_upper_bound(f) + 1e-6

    def test_affine_estimates_non_increasing_in_n(self):
        f = systems.triangular_pair()
        values = [singularity_dimension(f, n, 1e-7).s_star for n in (1, 2, 3, 4, 5)]
        for a, b in zip(values, values[1:]):
            assert b <= a + 2e-7


class TestOracles:
    def test_moran_cantor(self):
        assert moran_oracle([1 / 3, 1 / 3]) == pytest.approx(0.6309297536, abs=1e-9)

    def test_moran_half(self):
        assert moran_oracle([0.5, 0.5]) == pytest.approx(1.0, abs=1e-11)

    def test_moran_four_quarters(self):
        assert moran_oracle([0.25] * 4) == pytest.approx(1.0, abs=1e-11)

    def test_affinity_diag(self):
        # 2 * 0.6 * 0.2^(s-1) = 1  =>  s = 1 + ln(1.2)/ln(5) = 1.1132828
        assert affinity_oracle([[0.6, 0.2]] * 2) == pytest.approx(
            1 + math.log(1.2) / math.log(5), abs=1e-10
        )

    def test_affinity_reduces_to_moran(self):
        assert affinity_oracle([[1 / 3, 1 / 3]] * 2) == pytest.approx(
            moran_oracle([1 / 3, 1 / 3]), abs=1e-10
        )

    def test_affinity_half(self):
        assert affinity_oracle([[0.5, 0.5]] * 2) == pytest.approx(1.0, abs=1e-10)
