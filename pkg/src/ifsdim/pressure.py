"""Truncated sub-additive pressure of the singular-value potential and the
level-n singularity dimension via monotone bisection, with closed-form
oracles for self-similar and constant-diagonal affine systems."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BudgetError, NumericError
from .ifs import IfsSpec, contraction
from .smallmat import batch_singular_values, log_svf_from_log_spectrum
from .symbolic import DEFAULT_WORD_BUDGET

DEFAULT_SUP_SAMPLES = 8
DEFAULT_TOL = 1e-6


@dataclass(frozen=True)
class PressureCurve:
    n: int
    s_values: tuple[float, ...]
    p_values: tuple[float, ...]
    sup_strategy: str  # "affine-exact" or "sample-k-points"
    certified: bool


@dataclass(frozen=True)
class DimensionEstimate:
    s_star: float
    bracket: tuple[float, float]
    n: int
    tolerance: float
    certified: bool


@dataclass(frozen=True)
class CylinderStats:
    """Cached per-word log singular spectra of chained Jacobians at level n.

    log_alphas has shape (n_words, n_samples, d); the word axis is in a fixed
    traversal order so downstream log-sum accumulation is reproducible.
    """

    n: int
    log_alphas: np.ndarray
    exact: bool

    @property
    def sup_strategy(self) -> str:
        return "affine-exact" if self.exact else "sample-k-points"


def cylinder_stats(
    f: IfsSpec,
    n: int,
    sup_samples: int = DEFAULT_SUP_SAMPLES,
    budget: int = DEFAULT_WORD_BUDGET,
) -> CylinderStats:
    """Singular spectra of D f_w for every word w of length n.

    The cylinder supremum base points are ``sup_samples`` quasi-random domain
    points pushed through the suffix maps; suffixes of words are shared in a
    depth-first pass so each of the l^n words costs O(1) map evaluations.
    Constant-Jacobian systems use a single base point and are exact.
    """
    if n < 1:
        raise ValueError("level n must be at least 1")
    n_words = f.n_maps ** n
    if n_words > budget:
        raise BudgetError(
            f"enumeration budget exceeded: {f.n_maps}^{n} = {n_words} > {budget}"
        )
    exact = f.is_affine()
    if exact:
        base = f.domain.center[None, :]
    else:
        base = f.domain.quasi_random(max(1, sup_samples))
    k, d = base.shape[0], f.dim
    jac0 = np.broadcast_to(np.eye(d), (k, d, d)).copy()
    leaves: list[np.ndarray] = []

    # depth-first over word suffixes: a node holds P = f_suffix(base points)
    # and J = D_base f_suffix; prepending symbol i maps (P, J) to
    # (f_i(P), Df_i(P) @ J) by the chain rule.
    stack: list[tuple[int, np.ndarray, np.ndarray]] = [(0, base, jac0)]
    while stack:
        depth, pts, jac = stack.pop()
        if depth == n:
            alphas = batch_singular_values(jac)
            if np.any(alphas <= 0.0):
                raise NumericError("singular Jacobian encountered in pressure sum")
            leaves.append(np.log(alphas))
            continue
        for sym in range(f.n_maps, 0, -1):
            step = f.maps[sym - 1].jacobian_batch(pts)
            stack.append((depth + 1, f.apply_map(sym, pts), step @ jac))
    return CylinderStats(n=n, log_alphas=np.stack(leaves), exact=exact)


def pressure_from_stats(stats: CylinderStats, s: float) -> float:
    """P_n(s) from cached spectra: (1/n) log sum over words of the sampled
    cylinder sup of the singular value function, via max-shifted log-sum."""
    log_phi = log_svf_from_log_spectrum(stats.log_alphas, s)
    per_word = log_phi.max(axis=1)
    shift = float(per_word.max())
    total = math.log(float(np.sum(np.exp(per_word - shift)))) + shift
    return total / stats.n


def pressure_n(
    f: IfsSpec,
    s: float,
    n: int,
    sup_samples: int = DEFAULT_SUP_SAMPLES,
    budget: int = DEFAULT_WORD_BUDGET,
) -> float:
    """Level-n pressure of the singular-value potential at exponent s."""
    if s < 0:
        raise ValueError("s must be non-negative")
    return pressure_from_stats(cylinder_stats(f, n, sup_samples, budget), s)


def pressure_curve(
    f: IfsSpec,
    n: int,
    s_values,
    sup_samples: int = DEFAULT_SUP_SAMPLES,
    budget: int = DEFAULT_WORD_BUDGET,
) -> PressureCurve:
    """P_n on a grid of s values; the curve must be strictly decreasing."""
    stats = cylinder_stats(f, n, sup_samples, budget)
    s_sorted = [float(s) for s in s_values]
    if any(b <= a for a, b in zip(s_sorted, s_sorted[1:])):
        raise ValueError("s grid must be strictly increasing")
    p = [pressure_from_stats(stats, s) for s in s_sorted]
    for (s1, p1), (s2, p2) in zip(zip(s_sorted, p), zip(s_sorted[1:], p[1:])):
        if not p2 < p1 + 1e-12:
            raise NumericError(
                f"non-monotone pressure curve: P({s1}) = {p1}, P({s2}) = {p2}"
            )
    return PressureCurve(
        n=n,
        s_values=tuple(s_sorted),
        p_values=tuple(p),
        sup_strategy=stats.sup_strategy,
        certified=stats.exact,
    )


def dimension_upper_bound(f: IfsSpec) -> float:
    """log l / log(1/theta), the entropy/contraction bound on the dimension."""
    theta = contraction(f).theta
    return math.log(f.n_maps) / math.log(1.0 / theta)


def singularity_dimension(
    f: IfsSpec,
    n: int,
    tol: float = DEFAULT_TOL,
    sup_samples: int = DEFAULT_SUP_SAMPLES,
    budget: int = DEFAULT_WORD_BUDGET,
) -> DimensionEstimate:
    """Zero of s -> P_n(s) by bisection.

    P_n is strictly decreasing in s because every chained Jacobian has norm
    at most theta^n < 1, so the bracket [0, d + log l / log(1/theta)] always
    contains a sign change.
    """
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    stats = cylinder_stats(f, n, sup_samples, budget)
    bound = dimension_upper_bound(f)
    lo, hi = 0.0, f.dim + bound
    p_lo = pressure_from_stats(stats, lo)
    p_hi = pressure_from_stats(stats, hi)
    if p_lo < 0:
        raise NumericError(
            f"P_n(0) = {p_lo} < 0 with {f.n_maps} maps: numerical corruption"
        )
    if p_hi >= 0:
        raise NumericError(f"no sign change on bracket: P_n({hi}) = {p_hi} >= 0")
    seen = [(lo, p_lo), (hi, p_hi)]
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        p_mid = pressure_from_stats(stats, mid)
        seen.append((mid, p_mid))
        if p_mid > 0:
            lo = mid
        else:
            hi = mid
    seen.sort()
    for (s1, p1), (s2, p2) in zip(seen, seen[1:]):
        if s2 > s1 and p2 > p1 + 1e-12:
            raise NumericError("non-monotone pressure detected during bisection")
    s_star = 0.5 * (lo + hi)
    if s_star > bound + tol:
        raise NumericError(
            f"dimension estimate {s_star} exceeds the contraction bound {bound}"
        )
    return DimensionEstimate(
        s_star=s_star,
        bracket=(lo, hi),
        n=n,
        tolerance=tol,
        certified=stats.exact,
    )


# ---------------------------------------------------------------------------
# Closed-form validation oracles
# ---------------------------------------------------------------------------

def _bisect_decreasing(fn, tol: float = 1e-12) -> float:
    """Root of a continuous strictly decreasing fn with fn(0) > 0."""
    lo = 0.0
    hi = 1.0
    while fn(hi) > 0:
        hi *= 2.0
        if hi > 1e6:
            raise NumericError("oracle bracket expansion failed")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if fn(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def moran_oracle(ratios) -> float:
    """Solution of sum_i r_i^s = 1 for contraction ratios in (0, 1)."""
    r = [float(v) for v in ratios]
    if len(r) < 2:
        raise ValueError("need at least two ratios")
    if any(not 0 < v < 1 for v in r):
        raise ValueError("ratios must lie in (0, 1)")
    return _bisect_decreasing(lambda s: sum(v ** s for v in r) - 1.0)


def affinity_oracle(diag_entries) -> float:
    """Zero of the level-1 pressure for constant diagonal Jacobians.

    Each argument row is one map's singular spectrum (positive values below
    1, sorted non-increasing); solves log sum_i phi^s(diag_i) = 0.
    """
    rows = [np.asarray(row, dtype=float) for row in diag_entries]
    if len(rows) < 2:
        raise ValueError("need at least two maps")
    d = rows[0].shape[0]
    for row in rows:
        if row.shape[0] != d:
            raise ValueError("all maps must share one dimension")
        if np.any(row <= 0) or np.any(row >= 1):
            raise ValueError("diagonal entries must lie in (0, 1)")
        if np.any(np.diff(row) > 0):
            raise ValueError("diagonal entries must be sorted non-increasing")
    log_rows = np.stack([np.log(row) for row in rows])

    def fn(s: float) -> float:
        log_phi = log_svf_from_log_spectrum(log_rows, s)
        shift = float(log_phi.max())
        return math.log(float(np.sum(np.exp(log_phi - shift)))) + shift

    return _bisect_decreasing(fn)
