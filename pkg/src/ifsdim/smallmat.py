"""Dense d x d matrices (d <= 8): singular values via cyclic Jacobi sweeps,
the singular value function, the transversality kernel z_min, and the
triangular-matrix entry bounds used by the condition checkers.

Singular values are computed from the eigenvalues of m^T m with plain cyclic
Jacobi rotations: deterministic, dependency-free, and bit-reproducible, which
the report determinism contract relies on.  numpy's LAPACK SVD is used only
as an independent oracle in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericError

MAX_DIM = 8

_JACOBI_EPS = 1e-15
_JACOBI_MAX_SWEEPS = 60


def as_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if a.shape[0] < 1 or a.shape[0] > MAX_DIM:
        raise ValueError(f"matrix dimension must be 1..{MAX_DIM}, got {a.shape[0]}")
    return a


def symmetric_eigenvalues(s: np.ndarray) -> np.ndarray:
    """Eigenvalues of a symmetric matrix by cyclic Jacobi, sorted non-increasing."""
    a = np.array(s, dtype=float, copy=True)
    d = a.shape[0]
    if d == 1:
        return a[0, :1].copy()
    scale = max(1.0, float(np.abs(a).max()))
    for _ in range(_JACOBI_MAX_SWEEPS):
        off = 0.0
        for p in range(d - 1):
            for q in range(p + 1, d):
                off = max(off, abs(a[p, q]))
        if off <= _JACOBI_EPS * scale:
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = a[p, q]
                if abs(apq) <= _JACOBI_EPS * scale * 1e-2:
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                if tau >= 0:
                    t = 1.0 / (tau + math.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                sn = t * c
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - sn * rq
                a[q, :] = sn * rp + c * rq
                cp = a[:, p].copy()
                cq = a[:, q].copy()
                a[:, p] = c * cp - sn * cq
                a[:, q] = sn * cp + c * cq
                a[p, q] = 0.0
                a[q, p] = 0.0
    eig = np.sort(np.diag(a))[::-1]
    return eig.copy()


def singular_values(m) -> np.ndarray:
    """Singular values sorted non-increasing (square roots of eigenvalues of m^T m).

    Forming m^T m squares the condition number, which destroys the smallest
    singular value of long contraction chains; it is restored from the
    determinant, which chained products carry at full relative accuracy.
    """
    a = as_matrix(m)
    eig = symmetric_eigenvalues(a.T @ a)
    sv = np.sqrt(np.clip(eig, 0.0, None))
    d = a.shape[0]
    if d >= 2 and sv[0] > 0:
        head = float(np.prod(sv[:-1]))
        if head > 0:
            sv = sv.copy()
            sv[-1] = min(abs(float(np.linalg.det(a))) / head, sv[-2])
    return sv


def spectral_norm(m) -> float:
    """Largest singular value."""
    return float(singular_values(m)[0])


def batch_singular_values(mats: np.ndarray) -> np.ndarray:
    """Singular values for a stack of matrices, shape (N, d, d) -> (N, d).

    d = 1 and d = 2 are closed-form (the 2x2 case is the single exact Jacobi
    rotation); larger d falls back to the per-matrix sweep.
    """
    a = np.asarray(mats, dtype=float)
    if a.ndim == 2:
        a = a[None]
    d = a.shape[-1]
    if d == 1:
        return np.abs(a[:, 0, :])
    if d == 2:
        s11 = a[:, 0, 0] ** 2 + a[:, 1, 0] ** 2
        s22 = a[:, 0, 1] ** 2 + a[:, 1, 1] ** 2
        s12 = a[:, 0, 0] * a[:, 0, 1] + a[:, 1, 0] * a[:, 1, 1]
        mean = 0.5 * (s11 + s22)
        rad = np.sqrt((0.5 * (s11 - s22)) ** 2 + s12 ** 2)
        hi = np.sqrt(np.clip(mean + rad, 0.0, None))
        # mean - rad cancels catastrophically for ill-conditioned chains;
        # sigma_2 = |det| / sigma_1 is exact where the product matrix is
        det = np.abs(a[:, 0, 0] * a[:, 1, 1] - a[:, 0, 1] * a[:, 1, 0])
        lo = np.divide(det, hi, out=np.zeros_like(det), where=hi > 0)
        return np.stack([hi, lo], axis=1)
    return np.stack([singular_values(a[k]) for k in range(a.shape[0])])


# ---------------------------------------------------------------------------
# Singular value function
# ---------------------------------------------------------------------------

def svf_from_spectrum(alphas, s: float) -> float:
    """Singular value function from a non-increasing spectrum.

    For 0 <= s < d: alpha_1 .. alpha_k * alpha_{k+1}^(s-k) with k = floor(s)
    and the convention 0^0 = 1; for s >= d: (alpha_1 .. alpha_d)^(s/d).
    """
    if s < 0:
        raise ValueError("s must be non-negative")
    a = np.asarray(alphas, dtype=float)
    d = a.shape[-1]
    if s == 0:
        return 1.0
    if s >= d:
        return float(np.prod(a)) ** (s / d)
    k = int(math.floor(s))
    head = float(np.prod(a[:k])) if k > 0 else 1.0
    frac = s - k
    if frac == 0.0:
        return head
    return head * float(a[k]) ** frac


def svf(m, s: float) -> float:
    """Singular value function of a matrix."""
    a = as_matrix(m)
    d = a.shape[0]
    if s < 0:
        raise ValueError("s must be non-negative")
    if s == 0:
        return 1.0
    if s >= d:
        return abs(float(np.linalg.det(a))) ** (s / d)
    return svf_from_spectrum(singular_values(a), s)


def log_svf_from_log_spectrum(log_alphas: np.ndarray, s: float) -> np.ndarray:
    """Vectorized log of the singular value function from log spectra.

    log_alphas has shape (..., d) with rows non-increasing; returns shape (...).
    """
    la = np.asarray(log_alphas, dtype=float)
    d = la.shape[-1]
    if s < 0:
        raise ValueError("s must be non-negative")
    if s == 0:
        return np.zeros(la.shape[:-1])
    if s >= d:
        return (s / d) * la.sum(axis=-1)
    k = int(math.floor(s))
    out = la[..., :k].sum(axis=-1)
    frac = s - k
    if frac > 0.0:
        out = out + frac * la[..., k]
    return out


# ---------------------------------------------------------------------------
# Transversality kernel
# ---------------------------------------------------------------------------

def z_min(spectrum, r: float) -> float:
    """min over k = 0..d of r^k / (alpha_1 .. alpha_k) for a positive spectrum.

    Equals the product form prod_i min(alpha_i, r) / alpha_i; both forms are
    computed and must agree to relative 1e-12, else a NumericError is raised.
    """
    a = np.asarray(spectrum, dtype=float)
    if r <= 0:
        raise ValueError("r must be positive")
    if np.any(a <= 0):
        raise NumericError("singular Jacobian: zero singular value in z_min")
    best = 1.0
    rk = 1.0
    phi = 1.0
    for k in range(a.shape[0]):
        rk *= r
        phi *= float(a[k])
        best = min(best, rk / phi)
    product_form = float(np.prod(np.minimum(a, r) / a))
    if not math.isclose(best, product_form, rel_tol=1e-12, abs_tol=0.0):
        raise NumericError(
            f"z_min forms disagree: min form {best!r} vs product form {product_form!r}"
        )
    return best


# ---------------------------------------------------------------------------
# Triangular-matrix entry bounds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EntryBoundCheck:
    ok: bool
    worst_ratio: float
    worst_entry: tuple[int, int]  # 1-based
    bound: float


def lower_triangular_inverse(a: np.ndarray) -> np.ndarray:
    """Inverse of a non-singular lower triangular matrix by forward substitution."""
    d = a.shape[0]
    inv = np.zeros_like(a)
    for j in range(d):
        e = np.zeros(d)
        e[j] = 1.0
        for i in range(d):
            s = e[i] - a[i, :i] @ inv[:i, j]
            inv[i, j] = s / a[i, i]
    return inv


def triangular_inverse_bound_check(a, c: float, rel_slack: float = 1e-9) -> EntryBoundCheck:
    """Check |(A^-1)_ij| <= (c sqrt(d))^(d-1) |(A^-1)_ii| for a lower triangular A
    whose entries satisfy |a_ij| <= c |a_jj|.  Returns the worst entry ratio."""
    m = as_matrix(a)
    d = m.shape[0]
    if c < 1:
        raise ValueError("c must be at least 1")
    if np.any(np.abs(np.triu(m, 1)) > 0):
        raise ValueError("matrix is not lower triangular")
    if np.any(np.diag(m) == 0):
        raise ValueError("matrix is singular")
    diag = np.abs(np.diag(m))
    for i in range(d):
        for j in range(d):
            if abs(m[i, j]) > c * diag[j] * (1 + 1e-12):
                raise ValueError(
                    f"precondition |a_ij| <= c|a_jj| fails at entry ({i + 1}, {j + 1})"
                )
    inv = lower_triangular_inverse(m)
    bound = (c * math.sqrt(d)) ** (d - 1)
    worst = -1.0
    worst_entry = (1, 1)
    for i in range(d):
        for j in range(d):
            ratio = abs(inv[i, j]) / abs(inv[i, i])
            if ratio > worst:
                worst = ratio
                worst_entry = (i + 1, j + 1)
    return EntryBoundCheck(worst <= bound * (1 + rel_slack), worst, worst_entry, bound)


def triangular_product_bound_check(mats, c: float, rel_slack: float = 1e-9) -> EntryBoundCheck:
    """Check |(A_1..A_n)_ij| <= (c n)^(i-j) |(A_1..A_n)_jj| for lower triangular
    factors with dominated diagonals and |a_ij| <= c |a_jj|."""
    if not mats:
        raise ValueError("need at least one matrix")
    prod = as_matrix(mats[0]).copy()
    for m in mats[1:]:
        prod = prod @ as_matrix(m)
    n = len(mats)
    d = prod.shape[0]
    worst = -1.0
    worst_entry = (1, 1)
    ok = True
    for i in range(d):
        for j in range(i + 1):
            bound = (c * n) ** (i - j) * abs(prod[j, j])
            value = abs(prod[i, j])
            margin = value / bound if bound > 0 else math.inf
            if margin > worst:
                worst = margin
                worst_entry = (i + 1, j + 1)
            if value > bound * (1 + rel_slack):
                ok = False
    return EntryBoundCheck(ok, worst, worst_entry, 1.0)
