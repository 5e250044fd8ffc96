import math

import numpy as np
import pytest

from ifsdim import systems
from ifsdim.errors import ConfigError, NumericError
from ifsdim.ifs import compose_jacobian
from ifsdim.symbolic import fixed_point, periodic_point
from ifsdim.transversality import (
    audit_gtc,
    check_theorem_conditions,
    default_audit_pairs,
    distortion_constant,
    kstar_select,
    z_function,
)


class TestConditionChecker:
    def test_triangular_pair_passes_case_one(self):
        rep = check_theorem_conditions(systems.triangular_pair())
        case = rep.case_triangular
        assert case.passed and rep.overall_pass
        assert case.triangular_ok and case.dominated_ok and case.convex_ok
        assert case.ratio_value == pytest.approx(0.7456951, abs=1e-6)

    def test_one_dim_conformal_pair_passes_case_two(self):
        rep = check_theorem_conditions(systems.system("conformal_pair"))
        assert rep.case_conformal.passed
        assert rep.case_conformal.ratio_value == pytest.approx(0.9, rel=1e-12)

    def test_expanding_ratio_fails_with_witness(self):
        rep = check_theorem_conditions(systems.system("ratio_fail_pair"))
        assert not rep.overall_pass
        assert rep.case_triangular.ratio_value == pytest.approx(1.1, rel=1e-12)
        assert rep.ratio_pair == (1, 2)
        assert "ratio condition fails" in rep.witness

    def test_product_passes_case_three(self):
        rep = check_theorem_conditions(systems.cantor_product())
        assert rep.case_product is not None
        assert rep.case_product.n_components == 2
        assert rep.case_product.passed and rep.overall_pass

    def test_api_built_product_carries_components(self):
        from ifsdim.ifs import direct_product

        prod = direct_product([systems.cantor(), systems.cantor()])
        rep = check_theorem_conditions(prod)
        assert rep.case_product is not None and rep.case_product.passed

    def test_perturbed_demo_passes_case_one(self):
        rep = check_theorem_conditions(systems.triangular_demo_family().base)
        assert rep.case_triangular.passed
        assert rep.case_triangular.ratio_value < 1

    def test_diag_affine_fails_hypotheses(self):
        # not conformal, and the pairwise norm sum is 0.6 + 0.6 = 1.2
        rep = check_theorem_conditions(systems.diag_affine())
        assert not rep.case_conformal.conformal_ok
        assert rep.case_triangular.triangular_ok and rep.case_triangular.dominated_ok
        assert rep.case_triangular.ratio_value == pytest.approx(1.2, rel=1e-12)
        assert not rep.overall_pass


class TestZFunction:
    def test_empty_word_identity(self):
        f = systems.cantor()
        assert z_function(f, (), 0.3) == pytest.approx(0.3, rel=1e-12)
        assert z_function(f, (), 2.0) == 1.0

    def test_affine_diag_word(self):
        from ifsdim.config import spec_from_config

        spec, _, _ = spec_from_config(
            {
                "dimension": 2,
                "alphabet_size": 2,
                "domain": {"min": [0.0, 0.0], "max": [1.0, 1.0]},
                "maps": [
                    {"components": ["0.5*x1", "0.2*x2"]},
                    {"components": ["0.5*x1 + 0.5", "0.2*x2 + 0.8"]},
                ],
                "declared_class": ["affine"],
            }
        )
        assert z_function(spec, (1,), 0.3) == pytest.approx(0.6, rel=1e-12)

    def test_cantor_word_11(self):
        got = z_function(systems.cantor(), (1, 1), 0.05)
        assert got == pytest.approx(0.45, rel=1e-12)


class TestBranchSelector:
    def test_symmetric_fixed_points(self):
        sel = kstar_select([0.4, 0.4], fixed_point(1), fixed_point(2))
        assert sel.k_star == 1
        assert sel.lambda_1 == pytest.approx(0.4 / 0.6, rel=1e-9)
        assert sel.lambda_2 == pytest.approx(0.4 / 0.6, rel=1e-9)
        assert sel.rho_bar == pytest.approx(0.8)

    def test_asymmetric_fixed_points(self):
        sel = kstar_select([0.3, 0.4], fixed_point(1), fixed_point(2))
        assert sel.k_star == 1
        assert sel.lambda_1 == pytest.approx(3 / 7, rel=1e-9)
        assert sel.lambda_2 == pytest.approx(2 / 3, rel=1e-9)

    def test_mixed_sequences(self):
        sel = kstar_select([0.1, 0.6], periodic_point((1,), (2,)), fixed_point(2))
        assert sel.k_star == 1
        assert sel.lambda_1 == pytest.approx(0.0, abs=1e-12)
        assert sel.lambda_2 == pytest.approx(0.1 / 0.4 + 0.6 / 0.4, rel=1e-9)

    def test_certified_branch_below_bound_randomized(self):
        import random

        rng = random.Random(23)
        for _ in range(200):
            rho = [rng.uniform(0.05, 0.45), rng.uniform(0.05, 0.45)]
            a = periodic_point(
                [1] + [rng.randint(1, 2) for _ in range(rng.randint(0, 2))],
                [rng.randint(1, 2) for _ in range(rng.randint(1, 3))],
            )
            b = periodic_point(
                [2] + [rng.randint(1, 2) for _ in range(rng.randint(0, 2))],
                [rng.randint(1, 2) for _ in range(rng.randint(1, 3))],
            )
            sel = kstar_select(rho, a, b, truncation=96)
            lam = sel.lambda_1 if sel.k_star == 1 else sel.lambda_2
            assert lam + sel.tail_bound < sel.rho_bar

    def test_wrong_leading_symbols_rejected(self):
        with pytest.raises(ValueError, match="start with"):
            kstar_select([0.4, 0.4], fixed_point(2), fixed_point(2))

    def test_too_short_truncation_reported(self):
        with pytest.raises(NumericError, match="increase truncation"):
            kstar_select([0.49, 0.49], fixed_point(1), fixed_point(2), truncation=1)


class TestDistortion:
    def test_affine_is_exactly_one(self):
        for n in (1, 3, 5):
            est = distortion_constant(systems.triangular_pair(), n, grid_per_axis=9)
            assert est.c_n == 1.0 and est.log_rate == 0.0

    def test_quadratic_level_one(self):
        est = distortion_constant(systems.system("quadratic_pair"), 1)
        assert est.c_n == pytest.approx(1.3, rel=1e-12)

    def test_log_rate_trends_to_zero(self):
        f = systems.system("quadratic_pair")
        rates = [
            distortion_constant(f, n, grid_per_axis=257).log_rate for n in range(1, 9)
        ]
        assert all(b < a + 1e-12 for a, b in zip(rates, rates[1:]))
        assert rates[-1] < rates[0] / 3

    def test_vanishing_diagonal_rejected(self):
        from ifsdim.config import spec_from_config

        spec, _, _ = spec_from_config(
            {
                "dimension": 1,
                "alphabet_size": 2,
                "domain": {"min": [-1.0], "max": [1.0]},
                "maps": [
                    {"components": ["0.25*x1^2"]},  # derivative vanishes at 0
                    {"components": ["0.3*x1"]},
                ],
            }
        )
        with pytest.raises(NumericError, match="vanishing diagonal"):
            distortion_constant(spec, 1)


class TestAudit:
    def test_closed_form_slab_cell(self):
        fam = systems.family("cantor_family")
        rep = audit_gtc(
            fam,
            t0=[0.0, 0.0],
            delta=0.5,
            pairs=[(fixed_point(1), fixed_point(2))],
            r_grid=[0.3],
            n_mc=100_000,
            seed=0,
        )
        cell = rep.cells[0]
        # fixed points sit at 1.5 t_k; the r-close set is the slab
        # {1.5 |t1 - t2| < 0.3} of area 1 - 0.8^2 = 0.36 in the unit box
        assert abs(cell.measure - 0.36) <= 3 * cell.stderr
        assert cell.z_value == pytest.approx(0.3, rel=1e-12)
        assert cell.ratio == pytest.approx(0.36 / 0.3, abs=3 * cell.stderr / 0.3)

    def test_constant_over_fine_grid(self):
        fam = systems.family("cantor_family")
        rep = audit_gtc(
            fam,
            t0=[0.0, 0.0],
            delta=0.5,
            pairs=[(fixed_point(1), fixed_point(2))],
            r_grid=[0.05, 0.1, 0.2, 0.3, 0.5, 0.75, 1.0, 1.5],
            n_mc=100_000,
            seed=1,
        )
        # ratio (2 - a)/1.5 with a = r/1.5 approaches 4/3 as r shrinks
        assert 1.2 <= rep.c_hat <= 1.5
        assert rep.verdict

    def test_radius_larger_than_diameter(self):
        fam = systems.family("cantor_family")
        rep = audit_gtc(
            fam,
            t0=[0.0, 0.0],
            delta=0.5,
            pairs=[(fixed_point(1), fixed_point(2))],
            r_grid=[2.5],
            n_mc=20_000,
            seed=2,
        )
        cell = rep.cells[0]
        assert cell.measure == pytest.approx(1.0, rel=1e-12)  # full box volume
        assert cell.z_value == 1.0
        assert cell.ratio == pytest.approx(1.0, rel=1e-12)

    def test_ratio_times_z_recovers_measure(self):
        fam = systems.family("cantor_family")
        rep = audit_gtc(fam, [0.0, 0.0], 0.4, n_mc=5_000, seed=3)
        for cell in rep.cells:
            assert cell.ratio * cell.z_value == pytest.approx(cell.measure, rel=1e-12)

    def test_delta_beyond_radius_rejected(self):
        fam = systems.family("cantor_family")
        with pytest.raises(ConfigError, match="exceeds the family"):
            audit_gtc(fam, [0.0, 0.0], 0.6, n_mc=100, seed=0)

    def test_default_pairs_cover_prefix_lengths(self):
        pairs = default_audit_pairs(2)
        from ifsdim.symbolic import common_prefix

        lengths = [len(common_prefix(i, j)) for i, j in pairs]
        assert lengths == [0, 1, 2, 3]

    def test_threads_do_not_change_report(self):
        fam = systems.family("cantor_family")
        a = audit_gtc(fam, [0.0, 0.0], 0.5, n_mc=20_000, seed=5, threads=1)
        b = audit_gtc(fam, [0.0, 0.0], 0.5, n_mc=20_000, seed=5, threads=4)
        assert a == b


class TestGrowthWithParameterDistance:
    def test_row_sampled_inverse_product_slope_shrinks_with_delta(self):
        # sup over sampled base points, words and nearby parameters of
        # (1/n) log || D_y f_w^s . (D*_z f_w^t)^-1 || grows at most linearly
        # in n, with slope shrinking as the parameter distance shrinks.
        # Common random draws across delta keep the comparison paired.
        fam = systems.triangular_demo_family()
        base = fam.base
        rng = np.random.default_rng(42)
        grid = base.domain.grid(4)
        lengths = (2, 4, 6)
        draws = []
        for n in lengths:
            for _ in range(16):
                draws.append(
                    (
                        n,
                        rng.uniform(-fam.radius, fam.radius, 4),
                        rng.uniform(-1, 1, 4),
                        tuple(rng.integers(1, 3, size=n)),
                        grid[rng.integers(len(grid))],
                        grid[rng.integers(len(grid), size=2)],
                    )
                )

        def log_norm(delta, n, s_par, direction, word, y, zs):
            step = direction * min(1.0, delta / max(np.linalg.norm(direction), 1e-12))
            t_par = np.clip(s_par + step, -fam.radius, fam.radius)
            fs, ft = fam.member(s_par), fam.member(t_par)
            jac_y = compose_jacobian(fs, word, y)
            row_jac = np.stack(
                [compose_jacobian(ft, word, zs[i])[i] for i in range(2)]
            )
            m = jac_y @ np.linalg.inv(row_jac)
            return math.log(np.linalg.norm(m, 2))

        slopes = {}
        for delta in (0.1, 0.01, 0.001):
            sups = {n: -math.inf for n in lengths}
            for n, s_par, direction, word, y, zs in draws:
                sups[n] = max(sups[n], log_norm(delta, n, s_par, direction, word, y, zs))
            slopes[delta] = np.polyfit(lengths, [sups[n] for n in lengths], 1)[0]
        assert slopes[0.001] <= slopes[0.1] + 1e-9
        assert slopes[0.001] <= 0.05
