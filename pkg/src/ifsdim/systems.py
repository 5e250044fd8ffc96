"""Builders for the demo systems shipped with the package.

Each builder loads the packaged config file of the same name, so the config
loader is exercised on every use and library callers and the CLI see exactly
the same systems.
"""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources

from .config import spec_from_config
from .ifs import IfsSpec, TranslationalFamily
from .measures import BernoulliMeasure

SHIPPED = (
    "cantor",
    "cantor_family",
    "binary_interval",
    "diag_affine",
    "triangular_pair",
    "triangular_demo",
    "conformal_pair",
    "ratio_fail_pair",
    "quadratic_pair",
    "quadratic_family",
    "cantor_product",
)


def config_path(name: str):
    """Filesystem path of a packaged config (for CLI --config usage)."""
    if name not in SHIPPED:
        raise KeyError(f"unknown shipped system {name!r} (have {SHIPPED})")
    return resources.files(__package__) / "configs" / f"{name}.json"


@lru_cache(maxsize=None)
def _load(name: str) -> tuple[IfsSpec, TranslationalFamily | None, BernoulliMeasure | None]:
    raw = json.loads(config_path(name).read_text())
    return spec_from_config(raw)


def system(name: str) -> IfsSpec:
    return _load(name)[0]


def family(name: str) -> TranslationalFamily:
    fam = _load(name)[1]
    if fam is None:
        raise KeyError(f"shipped system {name!r} declares no translational family")
    return fam


def measure(name: str) -> BernoulliMeasure:
    mu = _load(name)[2]
    if mu is None:
        raise KeyError(f"shipped system {name!r} declares no measure")
    return mu


def cantor() -> IfsSpec:
    """Two maps with ratio 1/3 on [0, 1]; attractor dimension log 2 / log 3."""
    return system("cantor")


def diag_affine() -> IfsSpec:
    """Two affine maps with Jacobian diag(0.6, 0.2)."""
    return system("diag_affine")


def triangular_pair() -> IfsSpec:
    """Dominated lower triangular affine pair used by the condition checker."""
    return system("triangular_pair")


def triangular_demo_family() -> TranslationalFamily:
    """Trigonometric perturbation of the triangular pair, with its family."""
    return family("triangular_demo")


def cantor_product() -> IfsSpec:
    """Full product of two ratio-1/3 systems (four maps, dimension 2)."""
    return system("cantor_product")


def props_families() -> list[TranslationalFamily]:
    """Families exercised by the translation-composition property suite."""
    return [family("cantor_family"), family("quadratic_family"), family("triangular_demo")]
