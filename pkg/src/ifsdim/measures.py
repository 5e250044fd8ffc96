"""Bernoulli measures on the shift: entropy, Monte-Carlo estimates of the
sub-additive singular-value functional, the Lyapunov dimension, and a local
dimension estimator for the push-forward measure on the attractor."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericError
from .ifs import IfsSpec, coding_depth
from .pressure import DimensionEstimate, dimension_upper_bound
from .smallmat import batch_singular_values, log_svf_from_log_spectrum

DEFAULT_N_SAMPLES = 20_000
DEFAULT_RADII = tuple(2.0 ** (-k) for k in range(4, 11))


@dataclass(frozen=True)
class BernoulliMeasure:
    probabilities: tuple[float, ...]

    def __post_init__(self):
        p = self.probabilities
        if any(v < 0 for v in p):
            raise ValueError("probabilities must be non-negative")
        if abs(sum(p) - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {sum(p)}, not 1")
        object.__setattr__(self, "probabilities", tuple(float(v) for v in p))

    @property
    def n_symbols(self) -> int:
        return len(self.probabilities)


@dataclass(frozen=True)
class LyapunovEstimate:
    s: float
    mean: float
    stderr: float
    orbit_length: int
    n_samples: int
    seed: int


@dataclass(frozen=True)
class LocalDimensionSummary:
    slopes: np.ndarray
    quantiles: dict[float, float]
    radii: tuple[float, ...]
    n_points: int
    degenerate: bool


def rng_from_seed(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator: identical (seed, stream) gives identical output."""
    key = np.array([seed % (1 << 64), stream % (1 << 64)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def entropy(mu: BernoulliMeasure) -> float:
    """Shannon entropy in nats with the 0 log 0 = 0 convention."""
    total = 0.0
    for p in mu.probabilities:
        if p > 0:
            total -= p * math.log(p)
    return total


def _masked_apply(f: IfsSpec, symbols: np.ndarray, points: np.ndarray) -> np.ndarray:
    out = points.copy()
    for sym in range(1, f.n_maps + 1):
        mask = symbols == sym
        if np.any(mask):
            out[mask] = f.apply_map(sym, points[mask])
    return out


def sample_orbit_spectra(
    f: IfsSpec,
    mu: BernoulliMeasure,
    n: int,
    n_samples: int,
    seed: int,
    pi_precision: float = 1e-12,
) -> np.ndarray:
    """Per-sample log singular spectra of D_y f_{i|n} along mu-random words.

    The base point y approximates the coding map of the shifted word: each
    sample draws n + tail symbols and pushes the box center through the tail
    so the truncation error is below pi_precision.  Returns (n_samples, d).
    """
    if mu.n_symbols != f.n_maps:
        raise ValueError("measure and system have different alphabet sizes")
    if n < 1:
        raise ValueError("orbit length must be at least 1")
    tail = coding_depth(f, pi_precision)
    rng = rng_from_seed(seed)
    symbols = rng.choice(
        np.arange(1, f.n_maps + 1), size=(n_samples, n + tail), p=mu.probabilities
    )
    d = f.dim
    pts = np.broadcast_to(f.domain.center, (n_samples, d)).copy()
    for col in range(n + tail - 1, n - 1, -1):
        pts = _masked_apply(f, symbols[:, col], pts)
    jac = np.broadcast_to(np.eye(d), (n_samples, d, d)).copy()
    for col in range(n - 1, -1, -1):
        syms = symbols[:, col]
        step = np.empty_like(jac)
        for sym in range(1, f.n_maps + 1):
            mask = syms == sym
            if np.any(mask):
                step[mask] = f.maps[sym - 1].jacobian_batch(pts[mask])
        jac = step @ jac
        pts = _masked_apply(f, syms, pts)
    alphas = batch_singular_values(jac)
    if np.any(alphas <= 0.0):
        raise NumericError("singular Jacobian encountered along a sampled orbit")
    return np.log(alphas)


def lyapunov_functional(
    f: IfsSpec,
    mu: BernoulliMeasure,
    s: float,
    n: int,
    n_samples: int = DEFAULT_N_SAMPLES,
    seed: int = 0,
) -> LyapunovEstimate:
    """Monte-Carlo estimate of the mean of (1/n) log phi^s over chained
    Jacobians along mu-random orbits.  Variance is exactly zero when every
    map has a constant Jacobian shared across maps."""
    if s < 0:
        raise ValueError("s must be non-negative")
    log_alphas = sample_orbit_spectra(f, mu, n, n_samples, seed)
    vals = log_svf_from_log_spectrum(log_alphas, s) / n
    if np.all(vals == vals[0]):
        # constant-Jacobian systems: exactly zero variance, exact mean
        return LyapunovEstimate(s, float(vals[0]), 0.0, n, n_samples, seed)
    mean = float(vals.mean())
    if n_samples > 1:
        stderr = float(vals.std(ddof=1) / math.sqrt(n_samples))
    else:
        stderr = 0.0
    return LyapunovEstimate(s, mean, stderr, n, n_samples, seed)


def lyapunov_dimension(
    f: IfsSpec,
    mu: BernoulliMeasure,
    n: int,
    n_samples: int = DEFAULT_N_SAMPLES,
    seed: int = 0,
    tol: float = 1e-6,
) -> DimensionEstimate:
    """Unique s with entropy + singular-value functional = 0, by bisection.

    One batch of common random words is reused for every s, which keeps the
    objective strictly decreasing sample-wise (each chained Jacobian has norm
    below 1) and the bisection well posed.
    """
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    h = entropy(mu)
    if h == 0.0:
        return DimensionEstimate(0.0, (0.0, 0.0), n, tol, certified=True)
    log_alphas = sample_orbit_spectra(f, mu, n, n_samples, seed)

    def objective(s: float) -> float:
        return h + float(np.mean(log_svf_from_log_spectrum(log_alphas, s))) / n

    lo = 0.0
    hi = f.dim + dimension_upper_bound(f)
    if objective(hi) >= 0:
        raise NumericError(f"bracket sign failure: objective({hi}) >= 0")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if objective(mid) > 0:
            lo = mid
        else:
            hi = mid
    return DimensionEstimate(
        s_star=0.5 * (lo + hi),
        bracket=(lo, hi),
        n=n,
        tolerance=tol,
        # exact (zero-variance) only when every sampled orbit saw the same spectra
        certified=bool(np.all(log_alphas == log_alphas[0])),
    )


def pushforward_local_dimension(
    f: IfsSpec,
    mu: BernoulliMeasure,
    n_points: int = 4000,
    radii=DEFAULT_RADII,
    seed: int = 0,
) -> LocalDimensionSummary:
    """Per-point slopes of log measure(ball)/log radius for the push-forward
    of mu under the coding map, estimated from sample fractions in balls and
    a least-squares fit over the radii window."""
    radii = tuple(float(r) for r in radii)
    if len(radii) < 3 or any(b >= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be strictly decreasing with at least 3 values")
    if mu.n_symbols != f.n_maps:
        raise ValueError("measure and system have different alphabet sizes")
    depth = coding_depth(f, min(radii) * 1e-3)
    rng = rng_from_seed(seed, stream=1)
    symbols = rng.choice(
        np.arange(1, f.n_maps + 1), size=(n_points, depth), p=mu.probabilities
    )
    pts = np.broadcast_to(f.domain.center, (n_points, f.dim)).copy()
    for col in range(depth - 1, -1, -1):
        pts = _masked_apply(f, symbols[:, col], pts)

    spread = float(np.max(pts.max(axis=0) - pts.min(axis=0)))
    if spread < 1e-12:
        return LocalDimensionSummary(
            slopes=np.zeros(n_points),
            quantiles={q: 0.0 for q in (0.1, 0.25, 0.5, 0.75, 0.9)},
            radii=radii,
            n_points=n_points,
            degenerate=True,
        )

    log_r = np.log(np.asarray(radii))
    counts = np.zeros((n_points, len(radii)), dtype=np.int64)
    block = max(1, int(2e7) // max(1, n_points))
    for start in range(0, n_points, block):
        stop = min(n_points, start + block)
        diff = pts[start:stop, None, :] - pts[None, :, :]
        dist = np.sqrt(np.sum(diff ** 2, axis=2))
        for ri, r in enumerate(radii):
            counts[start:stop, ri] = (dist <= r).sum(axis=1) - 1  # exclude self
    slopes = np.full(n_points, np.nan)
    for i in range(n_points):
        # radii with very few in-ball samples carry mostly Poisson noise;
        # weight by sqrt(count) (inverse variance of the log count)
        valid = counts[i] >= 5
        if valid.sum() < 2:
            valid = counts[i] > 0
        if valid.sum() < 2:
            continue
        frac = counts[i, valid] / (n_points - 1)
        weights = np.sqrt(counts[i, valid])
        slopes[i] = np.polyfit(log_r[valid], np.log(frac), 1, w=weights)[0]
    finite = slopes[np.isfinite(slopes)]
    if finite.size == 0:
        finite = np.zeros(1)
    quantiles = {
        q: float(np.quantile(finite, q)) for q in (0.1, 0.25, 0.5, 0.75, 0.9)
    }
    return LocalDimensionSummary(
        slopes=slopes,
        quantiles=quantiles,
        radii=radii,
        n_points=n_points,
        degenerate=False,
    )
