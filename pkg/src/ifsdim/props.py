"""Randomized property suites for the matrix and composition inequalities the
dimension machinery relies on.  Every inequality here is a theorem in exact
arithmetic; the suites run seeded trials with a small relative slack that
absorbs rounding only, so any violation indicates an implementation bug."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ifs import TranslationalFamily, contraction
from .measures import rng_from_seed
from .smallmat import (
    singular_values,
    spectral_norm,
    svf,
    triangular_inverse_bound_check,
    triangular_product_bound_check,
    z_min,
)

REL_SLACK = 1e-9


@dataclass(frozen=True)
class SuiteResult:
    name: str
    trials: int
    violations: int
    worst_margin: float  # max of checked/allowed; <= 1 + slack when passing
    passed: bool
    detail: str = ""


def _random_matrix(rng, d: int, min_det: float = 1e-3) -> np.ndarray:
    while True:
        m = rng.uniform(-1.5, 1.5, size=(d, d))
        if abs(np.linalg.det(m)) >= min_det:
            return m


def random_triangular_matrix(rng, d: int, c: float) -> np.ndarray:
    """Lower triangular with non-increasing positive diagonal magnitudes and
    |a_ij| <= c |a_jj|."""
    diag = np.sort(rng.uniform(0.1, 1.0, size=d))[::-1]
    signs = rng.choice([-1.0, 1.0], size=d)
    m = np.zeros((d, d))
    for j in range(d):
        m[j, j] = diag[j] * signs[j]
        for i in range(j + 1, d):
            m[i, j] = rng.uniform(-c, c) * diag[j]
    return m


def suite_svf_submultiplicative(seed: int = 0, trials: int = 1000) -> SuiteResult:
    """phi^s(S T) <= phi^s(S) phi^s(T) over random non-singular pairs."""
    rng = rng_from_seed(seed, stream=101)
    s_grid = (0.5, 1.0, 1.5, 2.0, 2.7)
    violations = 0
    worst = 0.0
    for k in range(trials):
        d = 2 + (k % 2)
        a = _random_matrix(rng, d)
        b = _random_matrix(rng, d)
        for s in s_grid:
            lhs = svf(a @ b, s)
            rhs = svf(a, s) * svf(b, s)
            margin = lhs / rhs if rhs > 0 else math.inf
            worst = max(worst, margin)
            if lhs > rhs * (1 + REL_SLACK):
                violations += 1
    return SuiteResult(
        "svf submultiplicative", trials, violations, worst, violations == 0
    )


def suite_svf_norm_bound(seed: int = 0, trials: int = 1000) -> SuiteResult:
    """phi^(s+t)(T) <= phi^s(T) ||T||^t over the same randomized regime."""
    rng = rng_from_seed(seed, stream=102)
    s_grid = (0.5, 1.0, 1.5, 2.0, 2.7)
    t_grid = (0.3, 0.7, 1.1)
    violations = 0
    worst = 0.0
    for k in range(trials):
        d = 2 + (k % 2)
        m = _random_matrix(rng, d)
        norm = spectral_norm(m)
        for s in s_grid:
            for t in t_grid:
                lhs = svf(m, s + t)
                rhs = svf(m, s) * norm ** t
                margin = lhs / rhs if rhs > 0 else math.inf
                worst = max(worst, margin)
                if lhs > rhs * (1 + REL_SLACK):
                    violations += 1
    return SuiteResult("svf norm bound", trials, violations, worst, violations == 0)


def suite_triangular_inverse(seed: int = 0, trials: int = 1000) -> SuiteResult:
    """Inverse entry bound over random dominated triangular matrices."""
    rng = rng_from_seed(seed, stream=103)
    dims = (2, 3, 4)
    cs = (1.0, 2.0, 5.0)
    violations = 0
    worst = 0.0
    for k in range(trials):
        d = dims[k % len(dims)]
        c = cs[(k // len(dims)) % len(cs)]
        m = random_triangular_matrix(rng, d, c)
        check = triangular_inverse_bound_check(m, c, REL_SLACK)
        worst = max(worst, check.worst_ratio / check.bound)
        if not check.ok:
            violations += 1
    return SuiteResult(
        "triangular inverse entry bound", trials, violations, worst, violations == 0
    )


def suite_triangular_products(seed: int = 0, trials: int = 1000) -> SuiteResult:
    """Product entry bound |(A_1..A_n)_ij| <= (cn)^(i-j) |(A_1..A_n)_jj|."""
    rng = rng_from_seed(seed, stream=104)
    violations = 0
    worst = 0.0
    for k in range(trials):
        d = 2 + (k % 3)
        c = (1.0, 2.0, 5.0)[(k // 3) % 3]
        n = 1 + (k % 6)
        mats = [random_triangular_matrix(rng, d, c) for _ in range(n)]
        check = triangular_product_bound_check(mats, c, REL_SLACK)
        worst = max(worst, check.worst_ratio)
        if not check.ok:
            violations += 1
    return SuiteResult(
        "triangular product entry bound", trials, violations, worst, violations == 0
    )


def suite_translation_composition(
    families: list[TranslationalFamily], seed: int = 0, trials: int = 500
) -> SuiteResult:
    """Composed maps under two nearby translations stay within
    |t - s|/(1 - theta) + theta^n (|u - v| - |t - s|/(1 - theta))."""
    rng = rng_from_seed(seed, stream=105)
    violations = 0
    worst = 0.0
    for k in range(trials):
        fam = families[k % len(families)]
        f = fam.base
        theta = contraction(f).theta
        n_par = fam.n_params
        t = rng.uniform(-fam.radius, fam.radius, size=n_par)
        s = rng.uniform(-fam.radius, fam.radius, size=n_par)
        n = int(rng.integers(1, 9))
        word = tuple(int(v) for v in rng.integers(1, f.n_maps + 1, size=n))
        u = np.array([rng.uniform(lo, hi) for lo, hi in zip(f.domain.lower, f.domain.upper)])
        v = np.array([rng.uniform(lo, hi) for lo, hi in zip(f.domain.lower, f.domain.upper)])
        ft = fam.member(t)
        fs = fam.member(s)
        lhs = float(np.linalg.norm(ft.apply_word(word, u) - fs.apply_word(word, v)))
        drift = float(np.linalg.norm(t - s)) / (1.0 - theta)
        rhs = drift + theta ** n * (float(np.linalg.norm(u - v)) - drift)
        margin = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else math.inf)
        worst = max(worst, margin)
        if lhs > rhs * (1 + REL_SLACK) + 1e-15:
            violations += 1
    return SuiteResult(
        "translation composition bound", trials, violations, worst, violations == 0
    )


def suite_zmin_product(seed: int = 0, trials: int = 1000) -> SuiteResult:
    """z_min of a block-diagonal spectrum factors over the blocks."""
    rng = rng_from_seed(seed, stream=106)
    violations = 0
    worst = 0.0
    for k in range(trials):
        d1 = 1 + (k % 3)
        d2 = 1 + ((k // 3) % 3)
        a = _random_matrix(rng, d1)
        b = _random_matrix(rng, d2)
        r = float(rng.uniform(0.05, 3.0))
        block = np.zeros((d1 + d2, d1 + d2))
        block[:d1, :d1] = a
        block[d1:, d1:] = b
        lhs = z_min(singular_values(block), r)
        rhs = z_min(singular_values(a), r) * z_min(singular_values(b), r)
        margin = max(lhs / rhs, rhs / lhs) if min(lhs, rhs) > 0 else math.inf
        worst = max(worst, margin)
        if not math.isclose(lhs, rhs, rel_tol=1e-12, abs_tol=0.0):
            violations += 1
    return SuiteResult(
        "z_min block product identity", trials, violations, worst, violations == 0
    )


def suite_geometric_volume(seed: int = 0, trials: int = 1000, n_mc: int = 8192) -> SuiteResult:
    """Monte-Carlo volume of (A^-1 Ball(r1)) intersect Ball(r2) stays under
    2^d min_k r1^k r2^(d-k) / phi^k(A) plus three binomial standard errors."""
    rng = rng_from_seed(seed, stream=107)
    violations = 0
    worst = 0.0
    for k in range(trials):
        d = 2 + (k % 2)
        a = _random_matrix(rng, d, min_det=1e-2)
        r1 = float(rng.uniform(0.2, 2.0))
        r2 = float(rng.uniform(0.2, 2.0))
        pts = rng.uniform(-r2, r2, size=(n_mc, d))
        inside = (np.sum(pts ** 2, axis=1) <= r2 ** 2) & (
            np.sum((pts @ a.T) ** 2, axis=1) <= r1 ** 2
        )
        p_hat = float(np.mean(inside))
        box_vol = (2.0 * r2) ** d
        volume = p_hat * box_vol
        stderr = box_vol * math.sqrt(max(p_hat * (1 - p_hat), 0.0) / n_mc)
        alphas = singular_values(a)
        bound = min(
            r1 ** j * r2 ** (d - j) / (float(np.prod(alphas[:j])) if j else 1.0)
            for j in range(d + 1)
        ) * 2.0 ** d
        allowed = bound + 3.0 * stderr
        margin = volume / allowed if allowed > 0 else math.inf
        worst = max(worst, margin)
        if volume > allowed:
            violations += 1
    return SuiteResult(
        "geometric volume bound", trials, violations, worst, violations == 0
    )


def run_all(families: list[TranslationalFamily], seed: int = 0) -> list[SuiteResult]:
    """The full lemma matrix as run by the CLI props command."""
    return [
        suite_svf_submultiplicative(seed),
        suite_svf_norm_bound(seed),
        suite_triangular_inverse(seed),
        suite_triangular_products(seed),
        suite_translation_composition(families, seed),
        suite_zmin_product(seed),
        suite_geometric_volume(seed),
    ]
