"""C1 iterated function systems on a box domain: map and Jacobian evaluation,
chained Jacobians, the coding map, contraction certification, translations,
and direct products."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import expr as ex
from .errors import NumericError
from .smallmat import MAX_DIM, batch_singular_values, spectral_norm
from .symbolic import PeriodicPoint, Word

MAX_MAPS = 16

CONTAINMENT_TOL = 1e-9

# default sup-grid resolution per axis, by ambient dimension
_DEFAULT_GRID = {1: 1025, 2: 65, 3: 17, 4: 9}


def default_grid_per_axis(dim: int) -> int:
    return _DEFAULT_GRID.get(dim, 5)


@dataclass(frozen=True)
class DomainBox:
    """Axis-aligned box domain.  Boxes are convex and connected; the flags are
    recorded so product components can report them."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    flags: tuple[str, ...] = ("convex", "connected")

    def __post_init__(self):
        if len(self.lower) != len(self.upper):
            raise ValueError("lower and upper must have equal length")
        if not 1 <= len(self.lower) <= MAX_DIM:
            raise ValueError(f"dimension must be 1..{MAX_DIM}")
        for lo, hi in zip(self.lower, self.upper):
            if not lo < hi:
                raise ValueError("domain box needs lower < upper componentwise")

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def center(self) -> np.ndarray:
        return (np.asarray(self.lower) + np.asarray(self.upper)) / 2.0

    @property
    def diameter(self) -> float:
        side = np.asarray(self.upper) - np.asarray(self.lower)
        return float(np.sqrt(np.sum(side ** 2)))

    def contains(self, points, tol: float = CONTAINMENT_TOL) -> bool:
        p = np.atleast_2d(np.asarray(points, dtype=float))
        lo = np.asarray(self.lower) - tol
        hi = np.asarray(self.upper) + tol
        return bool(np.all(p >= lo) and np.all(p <= hi))

    def grid(self, per_axis: int) -> np.ndarray:
        """Uniform grid including the box corners, shape (per_axis**d, d)."""
        if per_axis < 2:
            raise ValueError("grid_per_axis must be at least 2")
        axes = [
            np.linspace(self.lower[k], self.upper[k], per_axis)
            for k in range(self.dim)
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def quasi_random(self, count: int) -> np.ndarray:
        """Deterministic low-discrepancy points (Weyl additive recurrence)."""
        d = self.dim
        phi = 2.0
        for _ in range(32):
            phi = (1.0 + phi) ** (1.0 / (d + 1))
        alpha = np.array([(1.0 / phi) ** (k + 1) % 1.0 for k in range(d)])
        idx = np.arange(1, count + 1)[:, None]
        frac = (0.5 + idx * alpha[None, :]) % 1.0
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        return lo + frac * (hi - lo)


class SmoothMap:
    """A C1 self-map given by component expressions and a (possibly derived)
    Jacobian expression matrix.  Compiled evaluators are built once."""

    def __init__(self, dim: int, components: Sequence[ex.ExprNode],
                 jacobian: Sequence[Sequence[ex.ExprNode]] | None = None):
        if len(components) != dim:
            raise ValueError(f"expected {dim} components, got {len(components)}")
        for comp in components:
            if ex.max_var_index(comp) > dim:
                raise ValueError("component references a variable beyond the dimension")
        self.dim = dim
        self.components = tuple(components)
        if jacobian is None:
            jacobian = [
                [ex.differentiate(comp, j + 1) for j in range(dim)]
                for comp in self.components
            ]
        self.jacobian = tuple(tuple(row) for row in jacobian)
        if len(self.jacobian) != dim or any(len(r) != dim for r in self.jacobian):
            raise ValueError("jacobian must be a d x d expression matrix")
        self._comp_np = [ex.compile_expr(c, dim, "numpy") for c in self.components]
        self._comp_scalar = [ex.compile_expr(c, dim, "math") for c in self.components]
        self._jac_np = [
            [ex.compile_expr(e, dim, "numpy") for e in row] for row in self.jacobian
        ]
        self.jacobian_is_constant = all(
            ex.is_constant(e) for row in self.jacobian for e in row
        )
        self._const_jacobian = None
        if self.jacobian_is_constant:
            self._const_jacobian = np.array(
                [[ex.constant_value(e) for e in row] for row in self.jacobian]
            )

    @classmethod
    def from_sources(cls, dim: int, component_sources: Sequence[str],
                     jacobian_sources: Sequence[Sequence[str]] | None = None) -> "SmoothMap":
        comps = [ex.parse_expr(s, dim) for s in component_sources]
        jac = None
        if jacobian_sources is not None:
            jac = [[ex.parse_expr(s, dim) for s in row] for row in jacobian_sources]
        return cls(dim, comps, jac)

    def apply(self, x) -> np.ndarray:
        """Evaluate at a point (d,) or a batch (N, d)."""
        p = np.asarray(x, dtype=float)
        out = np.empty_like(p)
        for k, f in enumerate(self._comp_np):
            out[..., k] = f(p)
        return out

    def apply_scalar(self, x: tuple) -> tuple:
        """Pure-float evaluation for tight sequential loops."""
        return tuple(f(*x) for f in self._comp_scalar)

    def jacobian_at(self, x) -> np.ndarray:
        if self._const_jacobian is not None:
            return self._const_jacobian.copy()
        p = np.asarray(x, dtype=float)
        d = self.dim
        out = np.empty((d, d))
        for i in range(d):
            for j in range(d):
                out[i, j] = self._jac_np[i][j](p)
        return out

    def jacobian_batch(self, points) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, dtype=float))
        n, d = p.shape
        if self._const_jacobian is not None:
            return np.broadcast_to(self._const_jacobian, (n, d, d)).copy()
        out = np.empty((n, d, d))
        for i in range(d):
            for j in range(d):
                out[:, i, j] = self._jac_np[i][j](p)
        return out


@dataclass(frozen=True)
class ContractionData:
    theta: float
    rho: tuple[float, ...]
    certified: bool
    grid_spacing: float
    inflation: float


@dataclass
class IfsSpec:
    """An IFS of n_maps C1 contractions on a box, with optional per-map
    translation vectors.  Instances are treated as immutable after
    construction; the contraction certificate is cached lazily."""

    dim: int
    maps: tuple[SmoothMap, ...]
    domain: DomainBox
    declared_class: frozenset[str] = frozenset()
    translations: np.ndarray | None = None
    product_components: tuple["IfsSpec", ...] | None = None
    _contraction: ContractionData | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not 2 <= len(self.maps) <= MAX_MAPS:
            raise ValueError(f"alphabet must have at least 2 symbols (and at most {MAX_MAPS})")
        if self.domain.dim != self.dim:
            raise ValueError("domain dimension mismatch")
        for m in self.maps:
            if m.dim != self.dim:
                raise ValueError("map dimension mismatch")
        if self.translations is None:
            self.translations = np.zeros((len(self.maps), self.dim))
        else:
            t = np.asarray(self.translations, dtype=float)
            if t.shape != (len(self.maps), self.dim):
                raise ValueError("translations must have shape (n_maps, dim)")
            self.translations = t
        self.declared_class = frozenset(self.declared_class)

    @property
    def n_maps(self) -> int:
        return len(self.maps)

    def apply_map(self, symbol: int, x) -> np.ndarray:
        return self.maps[symbol - 1].apply(x) + self.translations[symbol - 1]

    def apply_map_scalar(self, symbol: int, x: tuple) -> tuple:
        base = self.maps[symbol - 1].apply_scalar(x)
        t = self.translations[symbol - 1]
        return tuple(b + tk for b, tk in zip(base, t))

    def apply_word(self, word: Word, x) -> np.ndarray:
        """f_{w1} o .. o f_{wn} applied to x (innermost map first)."""
        p = np.asarray(x, dtype=float)
        for sym in reversed(word):
            p = self.apply_map(sym, p)
        return p

    def is_affine(self) -> bool:
        return all(m.jacobian_is_constant for m in self.maps)


def jacobian_at(m: SmoothMap, x) -> np.ndarray:
    """Jacobian matrix of a single map at a point inside the domain."""
    return m.jacobian_at(x)


def compose_jacobian(f: IfsSpec, word: Word, x) -> np.ndarray:
    """Chain-rule Jacobian of f_{w1} o .. o f_{wn} at x (translations do not
    alter derivatives)."""
    if not word:
        return np.eye(f.dim)
    p = np.asarray(x, dtype=float)
    jac = np.eye(f.dim)
    for sym in reversed(word):
        jac = f.maps[sym - 1].jacobian_at(p) @ jac
        p = f.apply_map(sym, p)
    return jac


def code_point(f: IfsSpec, point: PeriodicPoint, depth: int) -> tuple[np.ndarray, float]:
    """Truncated coding map: f_{i1} o .. o f_{i_depth}(box center) with the
    guaranteed error bound theta^depth * diam(domain) attached."""
    if depth < 1:
        raise ValueError("depth must be at least 1")
    p = f.apply_word(point.prefix(depth), f.domain.center)
    bound = contraction(f).theta ** depth * f.domain.diameter
    return p, bound


def coding_depth(f: IfsSpec, precision: float = 1e-12) -> int:
    """Depth at which the coding-map truncation error drops below precision."""
    theta = contraction(f).theta
    diam = f.domain.diameter
    if precision >= diam:
        return 1
    depth = int(math.ceil(math.log(precision / diam) / math.log(theta)))
    return max(1, min(depth, 4096))


def contraction_data(f: IfsSpec, grid_per_axis: int | None = None) -> ContractionData:
    """Per-map sup of the Jacobian norm over the domain, from a uniform grid
    plus a modulus-of-continuity inflation term (max variation between
    neighboring grid nodes).  Exact for constant Jacobians."""
    if grid_per_axis is None:
        grid_per_axis = default_grid_per_axis(f.dim)
    if grid_per_axis < 2:
        raise ValueError("grid_per_axis must be at least 2")
    side = np.asarray(f.domain.upper) - np.asarray(f.domain.lower)
    h = float(side.max()) / (grid_per_axis - 1)
    grid = None
    rho = []
    inflation = 0.0
    all_exact = True
    for m in f.maps:
        if m.jacobian_is_constant:
            rho.append(spectral_norm(m.jacobian_at(f.domain.center)))
            continue
        all_exact = False
        if grid is None:
            grid = f.domain.grid(grid_per_axis)
        norms = batch_singular_values(m.jacobian_batch(grid))[:, 0]
        lattice = norms.reshape((grid_per_axis,) * f.dim)
        infl = 0.0
        for axis in range(f.dim):
            infl = max(infl, float(np.abs(np.diff(lattice, axis=axis)).max()))
        inflation = max(inflation, infl)
        rho.append(float(norms.max()) + infl)
    theta = max(rho)
    if theta >= 1.0:
        raise NumericError(f"not a contraction system: theta estimate {theta} >= 1")
    certified = all_exact or inflation < 1e-6
    return ContractionData(theta, tuple(rho), certified, h, inflation)


def contraction(f: IfsSpec, grid_per_axis: int | None = None) -> ContractionData:
    """Cached contraction certificate at the default grid resolution."""
    if grid_per_axis is not None:
        return contraction_data(f, grid_per_axis)
    if f._contraction is None:
        f._contraction = contraction_data(f)
    return f._contraction


def validate_containment(f: IfsSpec, grid_per_axis: int | None = None,
                         margin: float = 0.0, tol: float = CONTAINMENT_TOL) -> None:
    """Check every translated map sends a domain grid into the domain box,
    shrunk by ``margin`` on each side (closure membership with tolerance)."""
    if grid_per_axis is None:
        grid_per_axis = default_grid_per_axis(f.dim)
    grid = f.domain.grid(grid_per_axis)
    lo = np.asarray(f.domain.lower) + margin - tol
    hi = np.asarray(f.domain.upper) - margin + tol
    for i in range(1, f.n_maps + 1):
        image = f.apply_map(i, grid)
        if not (np.all(image >= lo) and np.all(image <= hi)):
            raise NumericError(
                f"translation leaves domain: image of map {i} escapes the box"
            )


def translate(f: IfsSpec, t) -> IfsSpec:
    """The same system with translation vectors added (one d-vector per map).
    Accepts a flat vector of length n_maps*dim or an (n_maps, dim) array."""
    t = np.asarray(t, dtype=float).reshape(f.n_maps, f.dim)
    out = IfsSpec(
        dim=f.dim,
        maps=f.maps,
        domain=f.domain,
        declared_class=f.declared_class,
        translations=f.translations + t,
        product_components=f.product_components,
    )
    validate_containment(out)
    return out


def direct_product(components: Sequence[IfsSpec]) -> IfsSpec:
    """Block-diagonal product IFS: the i-th map acts componentwise by the i-th
    map of each factor.  All factors must share the same number of maps."""
    if len(components) < 2:
        raise ValueError("need at least two components")
    n_maps = components[0].n_maps
    for c in components:
        if c.n_maps != n_maps:
            raise ValueError(
                f"component map counts differ: {c.n_maps} vs {n_maps}"
            )
    total_dim = sum(c.dim for c in components)
    if total_dim > MAX_DIM:
        raise ValueError(f"product dimension {total_dim} exceeds {MAX_DIM}")
    offsets = np.cumsum([0] + [c.dim for c in components])
    maps = []
    for i in range(n_maps):
        comps: list[ex.ExprNode] = []
        jac: list[list[ex.ExprNode]] = []
        for ci, c in enumerate(components):
            off = int(offsets[ci])
            cmap = c.maps[i]
            for row in range(c.dim):
                comps.append(ex.shift_vars(cmap.components[row], off))
                jrow: list[ex.ExprNode] = (
                    [ex.Const(0.0)] * off
                    + [ex.shift_vars(e, off) for e in cmap.jacobian[row]]
                    + [ex.Const(0.0)] * (total_dim - off - c.dim)
                )
                jac.append(jrow)
        maps.append(SmoothMap(total_dim, comps, jac))
    domain = DomainBox(
        lower=tuple(x for c in components for x in c.domain.lower),
        upper=tuple(x for c in components for x in c.domain.upper),
    )
    translations = np.concatenate([c.translations for c in components], axis=1)
    declared = frozenset.union(*[c.declared_class for c in components]) | {"product"}
    return IfsSpec(
        dim=total_dim,
        maps=tuple(maps),
        domain=domain,
        declared_class=declared,
        translations=translations,
        product_components=tuple(components),
    )


@dataclass
class TranslationalFamily:
    """Translational family over the parameter box {max_k |t_k| < radius} in
    R^(n_maps*dim).  The sup-norm box geometry keeps parameter-ball measures
    in closed form for the audit harness."""

    base: IfsSpec
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("family radius must be positive")
        # every member must keep mapping into the domain: base images must
        # stay at least radius away from the boundary
        validate_containment(self.base, margin=self.radius)

    @property
    def n_params(self) -> int:
        return self.base.n_maps * self.base.dim

    def member(self, t) -> IfsSpec:
        t = np.asarray(t, dtype=float).reshape(-1)
        if t.shape[0] != self.n_params:
            raise ValueError(f"expected {self.n_params} translation parameters")
        if np.max(np.abs(t)) > self.radius + CONTAINMENT_TOL:
            raise ValueError("translation outside the family parameter box")
        return translate(self.base, t)
