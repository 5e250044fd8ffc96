"""Hypothesis checks for the dimension-formula theorem (dominated triangular,
conformal, and product cases), the transversality kernel Z, the series-based
branch selector, distortion constants, and the empirical GTC audit over
translational families."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import expr as ex
from .errors import ConfigError, NumericError
from .ifs import (
    DomainBox,
    IfsSpec,
    SmoothMap,
    TranslationalFamily,
    coding_depth,
    compose_jacobian,
    code_point,
    contraction,
    default_grid_per_axis,
)
from .measures import rng_from_seed
from .smallmat import batch_singular_values, singular_values, z_min
from .symbolic import (
    DEFAULT_WORD_BUDGET,
    PeriodicPoint,
    Word,
    enumerate_words,
    common_prefix,
    fixed_point,
    periodic_point,
)

TRIANGULAR_GRID_TOL = 1e-12
CONFORMAL_REL_TOL = 1e-9


# ---------------------------------------------------------------------------
# Theorem hypothesis checker
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TriangularCase:
    triangular_ok: bool
    dominated_ok: bool
    ratio_value: float
    ratio_ok: bool
    convex_ok: bool
    passed: bool
    witness: str | None


@dataclass(frozen=True)
class ConformalCase:
    conformal_ok: bool
    ratio_value: float
    ratio_ok: bool
    connected_ok: bool
    passed: bool
    witness: str | None


@dataclass(frozen=True)
class ProductCase:
    n_components: int
    component_overall: tuple[bool, ...]
    passed: bool
    witness: str | None


@dataclass(frozen=True)
class ConditionReport:
    case_triangular: TriangularCase
    case_conformal: ConformalCase
    case_product: ProductCase | None
    ratio_pair: tuple[int, int]
    overall_pass: bool
    witness: str | None


def _ratio_condition(f: IfsSpec) -> tuple[float, tuple[int, int]]:
    """max over i != j of rho_i + rho_j and the attaining pair (1-based)."""
    rho = contraction(f).rho
    worst = -1.0
    pair = (1, 2)
    for i in range(len(rho)):
        for j in range(len(rho)):
            if i == j:
                continue
            v = rho[i] + rho[j]
            if v > worst:
                worst = v
                pair = (i + 1, j + 1)
    return worst, pair


def _check_triangular(f: IfsSpec, grid: np.ndarray) -> tuple[bool, bool, str | None]:
    """Symbolic-first triangularity plus diagonal domination on the grid."""
    witness = None
    triangular_ok = True
    for mi, m in enumerate(f.maps):
        for i in range(f.dim):
            for j in range(i + 1, f.dim):
                entry = m.jacobian[i][j]
                if ex.is_zero(entry):
                    continue
                vals = np.atleast_1d(ex.eval_expr(entry, grid))
                if np.max(np.abs(vals)) >= TRIANGULAR_GRID_TOL:
                    triangular_ok = False
                    witness = f"map {mi + 1} Jacobian entry ({i + 1},{j + 1}) is not zero"
    dominated_ok = True
    if triangular_ok:
        for mi, m in enumerate(f.maps):
            diag = np.abs(
                np.stack(
                    [np.atleast_1d(ex.eval_expr(m.jacobian[i][i], grid)) * np.ones(grid.shape[0])
                     for i in range(f.dim)],
                    axis=1,
                )
            )
            drops = np.diff(diag, axis=1)
            if np.any(drops > 1e-12):
                dominated_ok = False
                axis = int(np.argwhere(np.any(drops > 1e-12, axis=0))[0][0])
                witness = witness or (
                    f"map {mi + 1} diagonal not dominated at axis {axis + 1}"
                )
    return triangular_ok, dominated_ok, witness


def _check_conformal(f: IfsSpec, grid: np.ndarray) -> tuple[bool, str | None]:
    if f.dim == 1:
        return True, None
    for mi, m in enumerate(f.maps):
        jac = m.jacobian_batch(grid)
        gram = np.einsum("nki,nkj->nij", jac, jac)
        c2 = np.einsum("nii->n", gram) / f.dim
        dev = gram - c2[:, None, None] * np.eye(f.dim)[None]
        worst = np.sqrt(np.sum(dev ** 2, axis=(1, 2)))
        if np.any(worst > CONFORMAL_REL_TOL * np.maximum(c2, 1e-300)):
            return False, f"map {mi + 1} Jacobian is not a conformal multiple of an isometry"
    return True, None


def decompose_product(f: IfsSpec) -> tuple[IfsSpec, ...] | None:
    """Recover product components.

    Components built by direct_product travel with the system object; for
    systems declared "product" in a config the decomposition is inferred from
    the variable-dependency structure of the component expressions (axes fall
    in one block when some map couples them)."""
    if f.product_components is not None:
        return f.product_components
    if "product" not in f.declared_class:
        return None
    parent = list(range(f.dim))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a: int, b: int) -> None:
        parent[find(a)] = find(b)

    for m in f.maps:
        for i in range(f.dim):
            deps = ex.used_vars(m.components[i]) | {
                j + 1
                for j in range(f.dim)
                if not ex.is_zero(m.jacobian[i][j])
            }
            for j in deps:
                union(i, j - 1)
    blocks: dict[int, list[int]] = {}
    for axis in range(f.dim):
        blocks.setdefault(find(axis), []).append(axis)
    ordered = sorted(blocks.values(), key=lambda b: b[0])
    if len(ordered) < 2:
        return None
    if any(b != list(range(b[0], b[0] + len(b))) for b in ordered):
        return None  # interleaved blocks: not a recognizable direct product
    components = []
    for block in ordered:
        off = block[0]
        width = len(block)
        mapping = lambda i, off=off: i - off
        maps = []
        for m in f.maps:
            comps = [ex.remap_vars(m.components[off + r], mapping) for r in range(width)]
            jac = [
                [ex.remap_vars(m.jacobian[off + r][off + c], mapping) for c in range(width)]
                for r in range(width)
            ]
            maps.append(SmoothMap(width, comps, jac))
        domain = DomainBox(
            lower=f.domain.lower[off : off + width],
            upper=f.domain.upper[off : off + width],
        )
        components.append(
            IfsSpec(
                dim=width,
                maps=tuple(maps),
                domain=domain,
                declared_class=f.declared_class - {"product"},
                translations=f.translations[:, off : off + width],
            )
        )
    return tuple(components)


def check_theorem_conditions(f: IfsSpec, grid_per_axis: int | None = None) -> ConditionReport:
    """Evaluate the three sufficient conditions for the translational family
    of f to satisfy the GTC; failures are report entries, never errors."""
    if grid_per_axis is None:
        grid_per_axis = default_grid_per_axis(f.dim)
    grid = f.domain.grid(grid_per_axis)
    ratio_value, ratio_pair = _ratio_condition(f)
    ratio_ok = ratio_value < 1.0
    ratio_witness = None if ratio_ok else (
        f"ratio condition fails: rho_{ratio_pair[0]} + rho_{ratio_pair[1]} = {ratio_value}"
    )

    triangular_ok, dominated_ok, tri_witness = _check_triangular(f, grid)
    case_i = TriangularCase(
        triangular_ok=triangular_ok,
        dominated_ok=dominated_ok,
        ratio_value=ratio_value,
        ratio_ok=ratio_ok,
        convex_ok=True,  # box domains are convex
        passed=triangular_ok and dominated_ok and ratio_ok,
        witness=tri_witness or ratio_witness,
    )

    conformal_ok, conf_witness = _check_conformal(f, grid)
    case_ii = ConformalCase(
        conformal_ok=conformal_ok,
        ratio_value=ratio_value,
        ratio_ok=ratio_ok,
        connected_ok=True,  # box domains are connected
        passed=conformal_ok and ratio_ok,
        witness=conf_witness or ratio_witness,
    )

    case_iii = None
    components = decompose_product(f)
    if components is not None:
        verdicts = []
        for comp in components:
            sub = check_theorem_conditions(comp, grid_per_axis)
            verdicts.append(sub.case_triangular.passed or sub.case_conformal.passed)
        passed = all(verdicts)
        witness = None
        if not passed:
            bad = verdicts.index(False) + 1
            witness = f"product component {bad} satisfies neither the triangular nor the conformal case"
        case_iii = ProductCase(len(components), tuple(verdicts), passed, witness)

    overall = case_i.passed or case_ii.passed or (case_iii.passed if case_iii else False)
    witness = None
    if not overall:
        witness = ratio_witness or case_i.witness or case_ii.witness
    return ConditionReport(
        case_triangular=case_i,
        case_conformal=case_ii,
        case_product=case_iii,
        ratio_pair=ratio_pair,
        overall_pass=overall,
        witness=witness,
    )


# ---------------------------------------------------------------------------
# Transversality kernel Z and the branch selector
# ---------------------------------------------------------------------------

def standard_coding_samples(n_maps: int, count: int = 8) -> tuple[PeriodicPoint, ...]:
    """Deterministic eventually periodic sample points: all fixed points,
    then 2-periodic mixes until ``count`` points are available."""
    samples = [fixed_point(i) for i in range(1, n_maps + 1)]
    for a in range(1, n_maps + 1):
        for b in range(1, n_maps + 1):
            if a != b and len(samples) < count:
                samples.append(periodic_point((), (a, b)))
    return tuple(samples[:count])


def z_function(
    f: IfsSpec,
    word: Word,
    r: float,
    x_samples: int = 8,
    pi_precision: float = 1e-10,
) -> float:
    """Infimum over sampled codings of min_k r^k / phi^k(D f_word).

    The empty word has the identity Jacobian, giving min(1, r)^d.
    """
    if r <= 0:
        raise ValueError("r must be positive")
    if not word:
        return z_min(np.ones(f.dim), r)
    depth = coding_depth(f, pi_precision)
    best = math.inf
    for point in standard_coding_samples(f.n_maps, x_samples):
        base, _ = code_point(f, point, depth)
        jac = compose_jacobian(f, word, base)
        best = min(best, z_min(singular_values(jac), r))
    return best


@dataclass(frozen=True)
class BranchSelection:
    k_star: int
    lambda_1: float
    lambda_2: float
    tail_bound: float
    rho_bar: float


def kstar_select(
    rho,
    a: PeriodicPoint,
    b: PeriodicPoint,
    truncation: int = 64,
) -> BranchSelection:
    """Pick the branch k in {1, 2} whose translation-derivative series is
    certified below the pairwise contraction bound.

    lambda_k sums the products rho_{a_1}..rho_{a_n} over n with a_{n+1} = k
    (and likewise for b), truncated with a geometric tail bound; theory
    guarantees one branch certifies, so failure signals too-short truncation.
    """
    rho = [float(v) for v in rho]
    if a.symbol_at(0) != 1 or b.symbol_at(0) != 2:
        raise ValueError("sequences must start with symbols 1 and 2")
    rho_bar = max(
        rho[i] + rho[j] for i in range(len(rho)) for j in range(len(rho)) if i != j
    )
    if rho_bar >= 1:
        raise ValueError(f"pairwise contraction bound {rho_bar} >= 1")
    theta = max(rho)
    lam = {1: 0.0, 2: 0.0}
    for seq in (a, b):
        prod = 1.0
        for n in range(1, truncation + 1):
            prod *= rho[seq.symbol_at(n - 1) - 1]
            nxt = seq.symbol_at(n)
            if nxt in (1, 2):
                lam[nxt] += prod
    # each of the two series may hide up to sum_{n > truncation} theta^n
    tail = 2.0 * theta ** (truncation + 1) / (1.0 - theta)
    if lam[1] + tail < rho_bar:
        k_star = 1
    elif lam[2] + tail < rho_bar:
        k_star = 2
    else:
        raise NumericError(
            "neither branch certified below the contraction bound: increase truncation"
        )
    return BranchSelection(k_star, lam[1], lam[2], tail, rho_bar)


# ---------------------------------------------------------------------------
# Distortion constants
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DistortionEstimate:
    n: int
    c_n: float
    log_rate: float  # (1/n) log C_n


def distortion_constant(
    f: IfsSpec,
    n: int,
    grid_per_axis: int | None = None,
    family_offset: float = 0.0,
    t_samples: int = 4,
    budget: int = DEFAULT_WORD_BUDGET,
) -> DistortionEstimate:
    """Sup over grid base points, words of length n, sampled translations and
    axes of the diagonal-entry ratio of chained triangular Jacobians."""
    if n < 1:
        raise ValueError("level must be at least 1")
    if grid_per_axis is None:
        grid_per_axis = default_grid_per_axis(f.dim)
    grid = f.domain.grid(grid_per_axis)
    offsets = [np.zeros(f.n_maps * f.dim)]
    if family_offset > 0:
        box = DomainBox(
            lower=(-family_offset,) * (f.n_maps * f.dim),
            upper=(family_offset,) * (f.n_maps * f.dim),
        )
        offsets.extend(box.quasi_random(max(0, t_samples - 1)))
    worst = 1.0
    for t in offsets:
        shift = np.asarray(t).reshape(f.n_maps, f.dim)
        for word in enumerate_words(n, f.n_maps, budget):
            pts = grid
            acc = np.ones((grid.shape[0], f.dim))
            for sym in reversed(word):
                m = f.maps[sym - 1]
                for axis in range(f.dim):
                    acc[:, axis] *= np.atleast_1d(
                        ex.eval_expr(m.jacobian[axis][axis], pts)
                    ) * np.ones(pts.shape[0])
                pts = m.apply(pts) + f.translations[sym - 1] + shift[sym - 1]
            mags = np.abs(acc)
            lows = mags.min(axis=0)
            if np.any(lows <= 0):
                raise NumericError("vanishing diagonal Jacobian entry in distortion sup")
            worst = max(worst, float((mags.max(axis=0) / lows).max()))
    return DistortionEstimate(n=n, c_n=worst, log_rate=math.log(worst) / n)


# ---------------------------------------------------------------------------
# GTC audit
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AuditCell:
    pair_index: int
    prefix_length: int
    r: float
    measure: float
    stderr: float
    z_value: float
    ratio: float


@dataclass(frozen=True)
class GtcAuditReport:
    t0: tuple[float, ...]
    delta: float
    pairs: tuple[tuple[str, str], ...]
    r_grid: tuple[float, ...]
    cells: tuple[AuditCell, ...]
    c_hat: float
    psi_hat: float
    psi_note: str
    psi_construction: float
    n_mc: int
    seed: int
    psi_bound: float
    verdict: bool


def default_audit_pairs(n_maps: int, max_prefix: int = 3) -> tuple[tuple[PeriodicPoint, PeriodicPoint], ...]:
    """Pairs whose common prefix lengths run 0..max_prefix, for the psi fit."""
    pairs = []
    prefix: tuple[int, ...] = ()
    for k in range(max_prefix + 1):
        i = periodic_point(prefix + (1,), (2,))
        j = periodic_point(prefix + (2,), (1,))
        pairs.append((i, j))
        prefix = prefix + (1 + (k % 2),)
    return tuple(pairs)


def continuity_modulus(f: IfsSpec, u: float, grid_per_axis: int = 12,
                       sample_cap: int = 256) -> float:
    """Grid estimate of the shared continuity modulus of log ||Df_i|| at
    separation u, used for the reference psi construction."""
    grid = f.domain.grid(grid_per_axis)
    if grid.shape[0] > sample_cap:
        step = grid.shape[0] // sample_cap
        grid = grid[::step]
    worst = 0.0
    for m in f.maps:
        norms = batch_singular_values(m.jacobian_batch(grid))[:, 0]
        logs = np.log(np.maximum(norms, 1e-300))
        diff = np.abs(logs[:, None] - logs[None, :])
        dist = np.sqrt(
            np.sum((grid[:, None, :] - grid[None, :, :]) ** 2, axis=2)
        )
        close = dist <= u
        if np.any(close):
            worst = max(worst, float(diff[close].max()))
    return worst


def _pi_batch(f: IfsSpec, point: PeriodicPoint, draws: np.ndarray, depth: int) -> np.ndarray:
    """Coding map of one sequence under many translation draws (n, l*d)."""
    n = draws.shape[0]
    t = draws.reshape(n, f.n_maps, f.dim)
    pts = np.broadcast_to(f.domain.center, (n, f.dim)).copy()
    word = point.prefix(depth)
    for sym in reversed(word):
        pts = f.maps[sym - 1].apply(pts) + f.translations[sym - 1] + t[:, sym - 1, :]
    return pts


def _audit_cell(
    fam: TranslationalFamily,
    pair_index: int,
    pair: tuple[PeriodicPoint, PeriodicPoint],
    prefix_len: int,
    r: float,
    z_value: float,
    lo: np.ndarray,
    hi: np.ndarray,
    volume: float,
    n_mc: int,
    seed: int,
    cell_index: int,
    depth: int,
) -> AuditCell:
    rng = rng_from_seed(seed, stream=10_000 + cell_index)
    draws = rng.uniform(lo, hi, size=(n_mc, lo.shape[0]))
    pi_i = _pi_batch(fam.base, pair[0], draws, depth)
    pi_j = _pi_batch(fam.base, pair[1], draws, depth)
    dist = np.sqrt(np.sum((pi_i - pi_j) ** 2, axis=1))
    p_hat = float(np.mean(dist < r))
    measure = p_hat * volume
    stderr = volume * math.sqrt(max(p_hat * (1.0 - p_hat), 0.0) / n_mc)
    return AuditCell(
        pair_index=pair_index,
        prefix_length=prefix_len,
        r=r,
        measure=measure,
        stderr=stderr,
        z_value=z_value,
        ratio=measure / z_value,
    )


def audit_gtc(
    fam: TranslationalFamily,
    t0,
    delta: float,
    pairs=None,
    r_grid=None,
    n_mc: int = 100_000,
    seed: int = 0,
    psi_bound: float = 0.5,
    threads: int = 1,
) -> GtcAuditReport:
    """Monte-Carlo audit of the transversality inequality.

    For every (pair, r) cell the Lebesgue measure of the parameter set where
    the two coded points come r-close is estimated over the box
    B(t0, delta) intersected with the family parameter box, then compared
    against the kernel Z at t0.  The growth rate psi is fitted from the
    per-prefix-length maxima and the constant from the residual sup.
    """
    t0 = np.asarray(t0, dtype=float).reshape(-1)
    if t0.shape[0] != fam.n_params:
        raise ConfigError(f"t0 must have {fam.n_params} coordinates")
    if delta <= 0:
        raise ConfigError("delta must be positive")
    if delta > fam.radius + 1e-12:
        raise ConfigError(
            f"delta = {delta} exceeds the family parameter radius {fam.radius}"
        )
    lo = np.maximum(t0 - delta, -fam.radius)
    hi = np.minimum(t0 + delta, fam.radius)
    if np.any(hi <= lo):
        raise ConfigError("audit box is empty inside the family parameter box")
    volume = float(np.prod(hi - lo))
    if pairs is None:
        pairs = default_audit_pairs(fam.base.n_maps)
    if r_grid is None:
        diam = fam.base.domain.diameter
        r_grid = tuple(
            float(diam * g) for g in np.geomspace(0.02, 1.5, 8)
        )
    r_grid = tuple(float(r) for r in r_grid)
    if any(r <= 0 for r in r_grid):
        raise ConfigError("r grid must be positive")

    spec_t0 = fam.member(t0)
    prefix_words: list[Word] = []
    for (i, j) in pairs:
        if i == j:
            raise ConfigError("audit pairs must be distinct sequences")
        prefix_words.append(common_prefix(i, j))
    depth = coding_depth(fam.base, 1e-10)

    tasks = []
    cell_index = 0
    for pair_index, (pair, word) in enumerate(zip(pairs, prefix_words)):
        for r in r_grid:
            z_value = z_function(spec_t0, word, r)
            tasks.append((pair_index, pair, len(word), r, z_value, cell_index))
            cell_index += 1

    def run(task):
        pair_index, pair, plen, r, z_value, idx = task
        return _audit_cell(
            fam, pair_index, pair, plen, r, z_value,
            lo, hi, volume, n_mc, seed, idx, depth,
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            cells = list(pool.map(run, tasks))
    else:
        cells = [run(t) for t in tasks]

    by_prefix: dict[int, float] = {}
    for cell in cells:
        by_prefix[cell.prefix_length] = max(
            by_prefix.get(cell.prefix_length, 0.0), cell.ratio
        )
    lengths = sorted(n for n, m in by_prefix.items() if m > 0)
    if len(lengths) >= 2:
        xs = np.array(lengths, dtype=float)
        ys = np.log([by_prefix[n] for n in lengths])
        psi_hat = max(0.0, float(np.polyfit(xs, ys, 1)[0]))
        psi_note = f"slope fit over prefix lengths {lengths}, clamped at 0"
    else:
        psi_hat = 0.0
        psi_note = "single prefix length: growth rate not identifiable, set to 0"
    c_hat = max(
        (cell.ratio / math.exp(psi_hat * cell.prefix_length) for cell in cells),
        default=0.0,
    )
    theta = contraction(fam.base).theta
    gamma_hat = continuity_modulus(fam.base, delta / (1.0 - theta))
    psi_construction = delta + fam.base.dim * gamma_hat
    verdict = math.isfinite(c_hat) and psi_hat <= psi_bound
    return GtcAuditReport(
        t0=tuple(float(v) for v in t0),
        delta=float(delta),
        pairs=tuple((i.to_string(), j.to_string()) for i, j in pairs),
        r_grid=r_grid,
        cells=tuple(cells),
        c_hat=float(c_hat),
        psi_hat=psi_hat,
        psi_note=psi_note,
        psi_construction=float(psi_construction),
        n_mc=n_mc,
        seed=seed,
        psi_bound=psi_bound,
        verdict=verdict,
    )
