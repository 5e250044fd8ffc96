"""Command line interface: subcommand dispatch, deterministic report emission.

Exit codes: 0 success, 2 configuration error, 3 numeric invariant violation,
4 enumeration budget exceeded.  Reports embed the config hash, seed, and tool
version, and are byte-identical across runs for a fixed config and seed,
independent of the worker count.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import asdict, is_dataclass
from pathlib import Path

import numpy as np

from . import __version__
from . import systems
from .config import LoadedConfig, load_config
from .errors import BudgetError, ConfigError, IfsdimError, NumericError
from .estimators import (
    SurveyConfig,
    box_counting_dimension,
    sample_attractor,
    survey_translations,
)
from .expr import DomainError
from .measures import lyapunov_dimension
from .pressure import (
    dimension_upper_bound,
    pressure_curve,
    singularity_dimension,
)
from .props import run_all
from .transversality import audit_gtc, check_theorem_conditions

COMMANDS = ("dim-sing", "dim-lyap", "dim-box", "check-gtc", "audit-gtc", "survey", "props")


def _plain(obj):
    """Recursively convert dataclasses / numpy values into JSON-ready data."""
    if is_dataclass(obj) and not isinstance(obj, type):
        return {k: _plain(v) for k, v in asdict(obj).items()}
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def _write_json(path: str | None, payload: dict) -> str:
    text = json.dumps(_plain(payload), sort_keys=True, indent=2) + "\n"
    if path:
        Path(path).write_text(text)
    return text


def _write_csv(path: str, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(repr(v) if isinstance(v, float) else str(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def _report(args, command: str, loaded: LoadedConfig | None, parameters: dict,
            results: dict) -> dict:
    return {
        "tool": "ifsdim",
        "version": __version__,
        "command": command,
        "config_sha256": loaded.sha256 if loaded else None,
        "seed": parameters.get("seed"),
        "parameters": parameters,
        "results": results,
    }


def _default_depth(n_maps: int, cap: int = 4096) -> int:
    n = 1
    while n_maps ** (n + 1) <= cap:
        n += 1
    return n


def _need_config(args) -> LoadedConfig:
    if not args.config:
        raise ConfigError("--config is required for this command")
    return load_config(args.config)


def _need_family(loaded: LoadedConfig):
    if loaded.family is None:
        raise ConfigError("config declares no translational family (family.radius)")
    return loaded.family


def cmd_dim_sing(args) -> dict:
    loaded = _need_config(args)
    spec = loaded.spec
    depth = args.depth or _default_depth(spec.n_maps)
    tol = args.tol if args.tol is not None else 1e-6
    est = singularity_dimension(spec, depth, tol, sup_samples=args.samples or 8)
    results = {
        "s_star": est.s_star,
        "bracket": list(est.bracket),
        "n": est.n,
        "tolerance": est.tolerance,
        "certified": est.certified,
        "dimension_upper_bound": dimension_upper_bound(spec),
    }
    if args.csv:
        hi = spec.dim + dimension_upper_bound(spec)
        grid = [hi * k / 20.0 for k in range(21)]
        curve = pressure_curve(spec, depth, grid, sup_samples=args.samples or 8)
        _write_csv(
            args.csv,
            ["s", "P_n", "certified"],
            [[s, p, curve.certified] for s, p in zip(curve.s_values, curve.p_values)],
        )
    params = {
        "depth": depth,
        "tol": tol,
        "samples": args.samples or 8,
        "seed": args.seed,
    }
    return _report(args, "dim-sing", loaded, params, results)


def cmd_dim_lyap(args) -> dict:
    loaded = _need_config(args)
    if loaded.measure is None:
        raise ConfigError("dim-lyap needs measure.probabilities in the config")
    depth = args.depth or 64
    samples = args.samples or 100_000
    tol = args.tol if args.tol is not None else 1e-6
    est = lyapunov_dimension(
        loaded.spec, loaded.measure, n=depth, n_samples=samples,
        seed=args.seed, tol=tol,
    )
    results = {
        "s_star": est.s_star,
        "bracket": list(est.bracket),
        "orbit_length": est.n,
        "n_samples": samples,
        "tolerance": est.tolerance,
        "certified": est.certified,
    }
    params = {"depth": depth, "samples": samples, "tol": tol, "seed": args.seed}
    return _report(args, "dim-lyap", loaded, params, results)


def cmd_dim_box(args) -> dict:
    loaded = _need_config(args)
    size = args.samples or 200_000
    cloud = sample_attractor(loaded.spec, "chaos", size=size, seed=args.seed)
    result = box_counting_dimension(cloud)
    results = {
        "slope": result.slope,
        "r_squared": result.r_squared,
        "degenerate": result.degenerate,
        "scales": list(result.scales),
        "counts": list(result.counts),
        "cloud_size": size,
        "provenance": cloud.provenance,
    }
    if args.csv:
        _write_csv(
            args.csv,
            ["scale", "count"],
            [[s, c] for s, c in zip(result.scales, result.counts)],
        )
    params = {"samples": size, "seed": args.seed}
    return _report(args, "dim-box", loaded, params, results)


def cmd_check_gtc(args) -> dict:
    loaded = _need_config(args)
    report = check_theorem_conditions(loaded.spec)
    params = {"seed": args.seed}
    return _report(args, "check-gtc", loaded, params, _plain(report))


def cmd_audit_gtc(args) -> dict:
    loaded = _need_config(args)
    fam = _need_family(loaded)
    delta = args.delta if args.delta is not None else fam.radius
    n_mc = args.samples or 100_000
    report = audit_gtc(
        fam,
        t0=[0.0] * fam.n_params,
        delta=delta,
        n_mc=n_mc,
        seed=args.seed,
        threads=args.threads,
    )
    if args.csv:
        _write_csv(
            args.csv,
            ["pair", "n_prefix", "r", "measure", "stderr", "Z", "ratio"],
            [
                [c.pair_index, c.prefix_length, c.r, c.measure, c.stderr, c.z_value, c.ratio]
                for c in report.cells
            ],
        )
    payload = _plain(report)
    params = {"delta": delta, "samples": n_mc, "seed": args.seed}
    return _report(args, "audit-gtc", loaded, params, payload)


def cmd_survey(args) -> dict:
    loaded = _need_config(args)
    fam = _need_family(loaded)
    n_draws = args.samples if args.samples is not None else 20
    cfg = SurveyConfig(
        depth=args.depth or 6,
        tol=args.tol if args.tol is not None else 1e-4,
        threads=args.threads,
    )
    result = survey_translations(fam, n_draws, cfg, seed=args.seed)
    if args.csv:
        header = ["draw"]
        header += [f"t{k + 1}" for k in range(fam.n_params)]
        header += ["s_n", "box_dim", "abs_gap", "within_tol"]
        rows = []
        for row in result.rows:
            rows.append([row.draw, *row.t, row.s_n, row.box_dim, row.abs_gap,
                         int(row.within_tol)])
        _write_csv(args.csv, header, rows)
    params = {
        "draws": n_draws,
        "depth": cfg.depth,
        "tol": cfg.tol,
        "agreement_tol": cfg.agreement_tol,
        "seed": args.seed,
    }
    return _report(args, "survey", loaded, params, _plain(result))


def cmd_props(args) -> dict:
    results = run_all(systems.props_families(), seed=args.seed)
    for suite in results:
        status = "pass" if suite.passed else "FAIL"
        print(f"{suite.name}: {status} ({suite.trials} trials, "
              f"{suite.violations} violations)")
    params = {"seed": args.seed}
    report = _report(args, "props", None, params, {"suites": _plain(results)})
    if any(not suite.passed for suite in results):
        raise NumericError("one or more property suites failed")
    return report


_HANDLERS = {
    "dim-sing": cmd_dim_sing,
    "dim-lyap": cmd_dim_lyap,
    "dim-box": cmd_dim_box,
    "check-gtc": cmd_check_gtc,
    "audit-gtc": cmd_audit_gtc,
    "survey": cmd_survey,
    "props": cmd_props,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ifsdim",
        description="Dimension estimates and transversality audits for C1 IFSs",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="path to a system config (JSON)")
        p.add_argument("--depth", type=int, help="word length / orbit length n")
        p.add_argument("--tol", type=float, help="bisection tolerance in s")
        p.add_argument("--seed", type=int, default=0, help="64-bit seed")
        p.add_argument("--samples", type=int,
                       help="sample count (sup points, MC draws, cloud size, survey draws)")
        p.add_argument("--delta", type=float, help="parameter-ball radius for audits")
        p.add_argument("--out", help="write the JSON report here")
        p.add_argument("--csv", help="write the CSV table here")
        p.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                       help="worker count; results do not depend on it")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        report = _HANDLERS[args.command](args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except BudgetError as err:
        print(f"budget exceeded: {err}", file=sys.stderr)
        return 4
    except (NumericError, DomainError) as err:
        print(f"numeric error: {err}", file=sys.stderr)
        return 3
    except IfsdimError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except ValueError as err:
        print(f"invalid parameter: {err}", file=sys.stderr)
        return 2
    text = _write_json(args.out, report)
    if not args.out:
        print(text, end="")
    else:
        print(f"report written to {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
