import math

import numpy as np
import pytest

from ifsdim import systems
from ifsdim.props import (
    random_triangular_matrix,
    run_all,
    suite_geometric_volume,
    suite_svf_norm_bound,
    suite_svf_submultiplicative,
    suite_translation_composition,
    suite_triangular_inverse,
    suite_triangular_products,
    suite_zmin_product,
)
from ifsdim.measures import rng_from_seed


def test_random_triangular_matrices_are_in_class():
    rng = rng_from_seed(1)
    for _ in range(100):
        d = int(rng.integers(2, 5))
        c = float(rng.uniform(1.0, 5.0))
        m = random_triangular_matrix(rng, d, c)
        diag = np.abs(np.diag(m))
        assert np.all(np.diff(diag) <= 1e-15) and np.all(diag > 0)
        assert np.all(np.abs(np.triu(m, 1)) == 0)
        for i in range(d):
            for j in range(d):
                assert abs(m[i, j]) <= c * diag[j] * (1 + 1e-12)


@pytest.mark.parametrize(
    "suite,trials",
    [
        (suite_svf_submultiplicative, 200),
        (suite_svf_norm_bound, 200),
        (suite_triangular_inverse, 200),
        (suite_triangular_products, 200),
        (suite_zmin_product, 200),
    ],
)
def test_matrix_suites_pass(suite, trials):
    result = suite(seed=7, trials=trials)
    assert result.passed and result.violations == 0


def test_translation_suite_passes():
    result = suite_translation_composition(systems.props_families(), seed=7, trials=120)
    assert result.passed and result.violations == 0


def test_geometric_volume_suite_passes():
    result = suite_geometric_volume(seed=7, trials=120, n_mc=4096)
    assert result.passed and result.violations == 0


def test_geometric_volume_ellipse_example():
    # A = diag(2, 1), r1 = r2 = 1: the intersection is the half-axis ellipse
    # of area pi/2, and the parallelepiped bound is 2^2 * 1/2 = 2
    rng = rng_from_seed(3)
    a = np.diag([2.0, 1.0])
    pts = rng.uniform(-1, 1, size=(200_000, 2))
    inside = (np.sum(pts ** 2, axis=1) <= 1.0) & (np.sum((pts @ a.T) ** 2, axis=1) <= 1.0)
    volume = float(np.mean(inside)) * 4.0
    assert volume == pytest.approx(math.pi / 2, abs=0.02)
    assert volume <= 2.0


def test_run_all_matrix(in_process_families=None):
    results = run_all(systems.props_families(), seed=5)
    assert len(results) == 7
    assert all(r.passed for r in results)
    names = {r.name for r in results}
    assert "svf submultiplicative" in names
    assert "geometric volume bound" in names
