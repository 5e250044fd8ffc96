"""Config-file ingestion: JSON schema validation with path-to-field errors,
expression parsing, and construction of the system plus optional family and
measure."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .expr import ExprError, parse_expr
from .ifs import DomainBox, IfsSpec, SmoothMap, TranslationalFamily, validate_containment
from .measures import BernoulliMeasure

_TOP_KEYS = {
    "dimension",
    "alphabet_size",
    "domain",
    "maps",
    "declared_class",
    "family",
    "measure",
}
_DOMAIN_KEYS = {"min", "max", "flags"}
_MAP_KEYS = {"components", "jacobian"}
_FAMILY_KEYS = {"radius"}
_MEASURE_KEYS = {"probabilities"}
_KNOWN_CLASSES = {"affine", "conformal", "lower_triangular", "product"}


@dataclass(frozen=True)
class LoadedConfig:
    spec: IfsSpec
    family: TranslationalFamily | None
    measure: BernoulliMeasure | None
    sha256: str
    raw: dict


def _require_keys(obj: dict, allowed: set[str], path: str) -> None:
    for key in obj:
        if key not in allowed:
            raise ConfigError(f"{path}{key}: unknown key")


def _number_list(value, length: int, path: str) -> tuple[float, ...]:
    if not isinstance(value, list) or len(value) != length:
        raise ConfigError(f"{path}: expected a list of {length} numbers")
    out = []
    for k, v in enumerate(value):
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise ConfigError(f"{path}[{k}]: expected a number")
        out.append(float(v))
    return tuple(out)


def _verify_jacobian(m: SmoothMap, domain: DomainBox, path: str,
                     rel: float = 1e-5, step: float = 1e-6) -> None:
    """Declared Jacobian entries must match central finite differences of the
    components at sampled interior points."""
    for x in domain.quasi_random(8):
        jac = m.jacobian_at(x)
        for j in range(m.dim):
            e = np.zeros(m.dim)
            e[j] = step
            fd = (m.apply(x + e) - m.apply(x - e)) / (2 * step)
            bad = np.abs(jac[:, j] - fd) > rel * np.maximum(1.0, np.abs(fd))
            if np.any(bad):
                i = int(np.argwhere(bad)[0][0])
                raise ConfigError(
                    f"{path}.jacobian[{i}][{j}]: declared entry disagrees with "
                    f"the derivative of the component ({jac[i, j]} vs {fd[i]})"
                )


def spec_from_config(raw: dict) -> tuple[IfsSpec, TranslationalFamily | None, BernoulliMeasure | None]:
    """Validate a parsed config dict and build the system it describes."""
    if not isinstance(raw, dict):
        raise ConfigError("config root must be an object")
    _require_keys(raw, _TOP_KEYS, "")
    for key in ("dimension", "alphabet_size", "domain", "maps"):
        if key not in raw:
            raise ConfigError(f"{key}: required key missing")

    dim = raw["dimension"]
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
        raise ConfigError("dimension: expected a positive integer")
    n_maps = raw["alphabet_size"]
    if not isinstance(n_maps, int) or isinstance(n_maps, bool):
        raise ConfigError("alphabet_size: expected an integer")
    if n_maps < 2:
        raise ConfigError("alphabet_size: alphabet must have at least 2 symbols")

    domain_raw = raw["domain"]
    if not isinstance(domain_raw, dict):
        raise ConfigError("domain: expected an object")
    _require_keys(domain_raw, _DOMAIN_KEYS, "domain.")
    lower = _number_list(domain_raw.get("min"), dim, "domain.min")
    upper = _number_list(domain_raw.get("max"), dim, "domain.max")
    flags = domain_raw.get("flags", ["convex", "connected"])
    if not isinstance(flags, list) or not all(isinstance(v, str) for v in flags):
        raise ConfigError("domain.flags: expected a list of strings")
    try:
        domain = DomainBox(lower, upper, tuple(flags))
    except ValueError as err:
        raise ConfigError(f"domain: {err}") from err

    maps_raw = raw["maps"]
    if not isinstance(maps_raw, list) or len(maps_raw) != n_maps:
        raise ConfigError(f"maps: expected a list of {n_maps} map objects")
    maps = []
    for mi, map_raw in enumerate(maps_raw):
        path = f"maps[{mi}]."
        if not isinstance(map_raw, dict):
            raise ConfigError(f"maps[{mi}]: expected an object")
        _require_keys(map_raw, _MAP_KEYS, path)
        comp_raw = map_raw.get("components")
        if not isinstance(comp_raw, list) or len(comp_raw) != dim:
            raise ConfigError(f"{path}components: expected {dim} expression strings")
        try:
            components = [parse_expr(src, dim) for src in comp_raw]
        except ExprError as err:
            raise ConfigError(f"{path}components: {err}") from err
        jacobian = None
        if "jacobian" in map_raw:
            jac_raw = map_raw["jacobian"]
            if (
                not isinstance(jac_raw, list)
                or len(jac_raw) != dim
                or any(not isinstance(r, list) or len(r) != dim for r in jac_raw)
            ):
                raise ConfigError(f"{path}jacobian: expected a {dim}x{dim} matrix of expressions")
            try:
                jacobian = [[parse_expr(src, dim) for src in row] for row in jac_raw]
            except ExprError as err:
                raise ConfigError(f"{path}jacobian: {err}") from err
        smooth = SmoothMap(dim, components, jacobian)
        if jacobian is not None:
            _verify_jacobian(smooth, domain, f"maps[{mi}]")
        maps.append(smooth)

    declared_raw = raw.get("declared_class", [])
    if not isinstance(declared_raw, list) or not all(isinstance(v, str) for v in declared_raw):
        raise ConfigError("declared_class: expected a list of strings")
    for v in declared_raw:
        if v not in _KNOWN_CLASSES:
            raise ConfigError(
                f"declared_class: unknown class {v!r} (known: {sorted(_KNOWN_CLASSES)})"
            )

    spec = IfsSpec(
        dim=dim,
        maps=tuple(maps),
        domain=domain,
        declared_class=frozenset(declared_raw),
    )
    validate_containment(spec)

    family = None
    if "family" in raw:
        fam_raw = raw["family"]
        if not isinstance(fam_raw, dict):
            raise ConfigError("family: expected an object")
        _require_keys(fam_raw, _FAMILY_KEYS, "family.")
        radius = fam_raw.get("radius")
        if not isinstance(radius, (int, float)) or isinstance(radius, bool) or radius <= 0:
            raise ConfigError("family.radius: expected a positive number")
        try:
            family = TranslationalFamily(spec, float(radius))
        except Exception as err:
            raise ConfigError(f"family: {err}") from err

    measure = None
    if "measure" in raw:
        meas_raw = raw["measure"]
        if not isinstance(meas_raw, dict):
            raise ConfigError("measure: expected an object")
        _require_keys(meas_raw, _MEASURE_KEYS, "measure.")
        probs = _number_list(meas_raw.get("probabilities"), n_maps, "measure.probabilities")
        try:
            measure = BernoulliMeasure(probs)
        except ValueError as err:
            raise ConfigError(f"measure.probabilities: {err}") from err

    return spec, family, measure


def load_config(path) -> LoadedConfig:
    """Read and validate a config file; errors carry the failing field."""
    p = Path(path)
    try:
        data = p.read_bytes()
    except OSError as err:
        raise ConfigError(f"cannot read config file {p}: {err}") from err
    try:
        raw = json.loads(data)
    except json.JSONDecodeError as err:
        raise ConfigError(f"{p}: invalid JSON at line {err.lineno}: {err.msg}") from err
    spec, family, measure = spec_from_config(raw)
    return LoadedConfig(
        spec=spec,
        family=family,
        measure=measure,
        sha256=hashlib.sha256(data).hexdigest(),
        raw=raw,
    )
