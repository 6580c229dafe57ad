"""Command-line harness: ``dcpl {solve,converge,taylor,verify} --config FILE --out DIR``.

Config is one JSON document::

    {
      "version": 1,
      "map": {"name": "exp", "params": {}},
      "lattice": {"angles": ["80deg", "60deg", "40deg"], "origin": [0, 0]},
      "region": {"type": "disc", "center": [0, 0], "radius": 0.8},
      "epsilons": [0.2, 0.1, 0.05, 0.025],
      "solver": {"gradient_tolerance": 1e-10, "max_iterations": 50, "line_search_shrink": 0.5},
      "normalization": {"source": "analytic"},
      "taylor": {"v0": [1, 0]},
      "verify": {"samples": 200},
      "seed": 0
    }

Angles are radians unless given as strings ending in ``deg`` or the degree
sign, or unless ``"units": "deg"`` is set.  Complex numbers are ``[re, im]``
pairs, plain numbers or Python-style strings such as ``"1+2j"``.

Exit codes: 0 success, 1 config error, 2 solver non-convergence,
3 precondition violation (non-acute lattice, failed verification, ...).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import export
from .analytic import get_map
from .errors import (
    ConfigError,
    DCPLError,
    InfeasibleTriangle,
    NotAcute,
    OrientationFlip,
    OutsideDomain,
    RegionTooSmall,
    SolverError,
    TopologyFailure,
    UnknownMap,
)
from .lattice import Disc, LatticeSpec, Polygon, build_lattice_patch
from .layout import Normalization, layout
from .solver import SolverOptions, solve_dirichlet
from .study import ERROR_COLUMNS, run_convergence_study, run_taylor_study
from .verify import (
    barrier_constants,
    barrier_fields,
    barrier_inequality_check,
    in_trap,
    inward_gradient_check,
)

log = logging.getLogger("dcpl")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_PRECONDITION = 0, 1, 2, 3
CONFIG_VERSION = 1
CSV_HEADER = ("epsilon",) + ERROR_COLUMNS + ("iterations",)
TAYLOR_HEADER = ("epsilon", "defect", "defect_over_eps4", "predicted_constant")


# ---------------------------------------------------------------- config


def _complex(value, what):
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return complex(value)
    if isinstance(value, str):
        try:
            return complex(value.replace(" ", ""))
        except ValueError:
            pass
    raise ConfigError(f"{what}: cannot read {value!r} as a complex number")


def _angle(value, degrees):
    if isinstance(value, str):
        s = value.strip().lower()
        for suffix in ("deg", "°"):
            if s.endswith(suffix):
                return math.radians(float(s[: -len(suffix)]))
        if s.endswith("rad"):
            return float(s[:-3])
        value = float(s)
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ConfigError(f"lattice angle {value!r} is not a number")
    return math.radians(value) if degrees else float(value)


@dataclass
class StudyConfig:
    map_name: str
    map_params: dict
    angles: tuple
    origin: complex
    region: object
    epsilons: list
    solver: SolverOptions
    normalization: dict
    taylor_v0: complex | None = None
    verify_samples: int = 200
    seed: int = 0
    raw: dict = field(default_factory=dict, repr=False)

    def cmap(self):
        return get_map(self.map_name, **self.map_params)

    def spec(self, epsilon=None):
        a, b, c = self.angles
        eps = self.epsilons[0] if epsilon is None else epsilon
        return LatticeSpec(a, b, c, eps, self.origin)


def _region(raw):
    kind = raw.get("type")
    try:
        if kind == "disc":
            return Disc(_complex(raw.get("center", 0), "region.center"), float(raw["radius"]))
        if kind == "polygon":
            return Polygon(tuple(_complex(v, "region.vertices") for v in raw["vertices"]))
    except KeyError as exc:
        raise ConfigError(f"region is missing {exc.args[0]!r}") from None
    except ValueError as exc:
        raise ConfigError(f"region: {exc}") from None
    raise ConfigError(f"region.type must be 'disc' or 'polygon', got {kind!r}")


def _map_params(raw):
    out = {}
    for k, v in (raw or {}).items():
        # numbers stay real where possible so factory defaults keep their type
        out[k] = v if isinstance(v, (int, float)) and not isinstance(v, bool) else _complex(v, f"map.params.{k}")
    return out


def parse_config(raw):
    """Validate a decoded JSON config and return a :class:`StudyConfig`."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    version = raw.get("version")
    if version != CONFIG_VERSION:
        raise ConfigError(f"unsupported config version {version!r} (expected {CONFIG_VERSION})")

    m = raw.get("map")
    if isinstance(m, str):
        m = {"name": m}
    if not isinstance(m, dict) or "name" not in m:
        raise ConfigError("map must name a builtin map")
    params = _map_params(m.get("params"))
    try:
        get_map(m["name"], **params)
    except UnknownMap as exc:
        raise ConfigError(str(exc.args[0])) from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"map parameters: {exc}") from None

    lat = raw.get("lattice", {})
    degrees = lat.get("units", "rad") in ("deg", "degree", "degrees")
    angles = [_angle(a, degrees) for a in lat.get("angles", [math.pi / 3] * 3)]
    if len(angles) == 2:
        angles.append(math.pi - sum(angles))
    if len(angles) != 3:
        raise ConfigError("lattice.angles needs two or three entries")
    origin = _complex(lat.get("origin", 0), "lattice.origin")
    try:
        LatticeSpec(*angles, 1.0, origin)
    except ValueError as exc:
        raise ConfigError(f"lattice: {exc}") from None

    eps = raw.get("epsilons", raw.get("epsilon"))
    eps = [eps] if isinstance(eps, (int, float)) else eps
    if not isinstance(eps, list) or not eps:
        raise ConfigError("epsilons must be a nonempty list")
    try:
        eps = [float(e) for e in eps]
    except (TypeError, ValueError):
        raise ConfigError("epsilons must be numbers") from None
    if any(not e > 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
        raise ConfigError("epsilons must be positive and strictly decreasing")

    s = raw.get("solver", {})
    try:
        solver = SolverOptions(
            gradient_tolerance=float(s.get("gradient_tolerance", 1e-10)),
            max_iterations=int(s.get("max_iterations", 50)),
            line_search_shrink=float(s.get("line_search_shrink", 0.5)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"solver: {exc}") from None

    norm = raw.get("normalization", {"source": "analytic"})
    if norm.get("source") == "explicit":
        norm = {
            "source": "explicit",
            "image_of_origin": _complex(norm.get("image_of_origin", 0), "normalization.image_of_origin"),
            "seed_direction": float(norm.get("seed_direction", 0.0)),
        }
    elif norm.get("source") != "analytic":
        raise ConfigError("normalization.source must be 'analytic' or 'explicit'")

    taylor = raw.get("taylor", {})
    v0 = _complex(taylor["v0"], "taylor.v0") if "v0" in taylor else None
    samples = int(raw.get("verify", {}).get("samples", 200))
    seed = int(raw.get("seed", 0))
    return StudyConfig(
        map_name=m["name"],
        map_params=params,
        angles=tuple(angles),
        origin=origin,
        region=_region(raw.get("region", {})),
        epsilons=eps,
        solver=solver,
        normalization=norm,
        taylor_v0=v0,
        verify_samples=samples,
        seed=seed,
        raw=raw,
    )


def load_config(path):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc}") from None
    return parse_config(raw)


# ---------------------------------------------------------------- commands


def _normalization(cfg, cmap, sub):
    if cfg.normalization["source"] == "explicit":
        return Normalization(cfg.normalization["image_of_origin"], cfg.normalization["seed_direction"])
    return Normalization.from_map(cmap, sub)


def _single_epsilon(cfg, mode):
    if len(cfg.epsilons) != 1:
        raise ConfigError(f"{mode} needs exactly one epsilon, got {len(cfg.epsilons)}")
    return cfg.epsilons[0]


def run_solve(cfg, out):
    eps = _single_epsilon(cfg, "solve")
    cmap = cfg.cmap()
    sub = build_lattice_patch(cfg.spec(eps), cfg.region)
    cmap.check(sub.positions)
    u_exact = cmap.log_abs_fprime(sub.positions)
    report = {"mode": "solve", "map": cmap.name, "epsilon": eps, "n_vertices": sub.n_vertices}
    try:
        res = solve_dirichlet(sub, u_exact[sub.boundary], cfg.solver)
    except SolverError as exc:
        report.update(status="solver_failure", error=type(exc).__name__, message=str(exc))
        export.write_json(out / "report.json", report)
        log.error("%s", exc)
        return EXIT_SOLVER
    pl = layout(sub, res.u, _normalization(cfg, cmap, sub))

    export.write_json(
        out / "scalefield.json",
        {
            "epsilon": eps,
            "vertices": [
                {
                    "m": int(m),
                    "n": int(n),
                    "position": sub.positions[i],
                    "u": res.u[i],
                    "boundary": bool(i in set(sub.boundary.tolist())),
                }
                for i, (m, n) in enumerate(sub.coords)
            ],
        },
    )
    export.write_obj(out / "mesh_source.obj", sub.positions, sub.triangles)
    export.write_obj(out / "mesh_image.obj", pl.image_positions, sub.triangles)
    export.write_svg_overlay(
        out / "overlay.svg", sub.positions, pl.image_positions, sub.edges, title=f"{cmap.name}, eps = {eps:g}"
    )
    report.update(
        status="ok",
        iterations=res.iterations,
        final_gradient_norm=res.final_gradient_norm,
        holonomy_defect=pl.holonomy_defect,
        err_u=float(np.max(np.abs(res.u - u_exact))),
        err_f_vertices=float(np.max(np.abs(pl.image_positions - cmap.f(sub.positions)))),
    )
    export.write_json(out / "report.json", report)
    return EXIT_OK


def run_convergence(cfg, out):
    if len(cfg.epsilons) < 3:
        raise ConfigError("converge needs at least three epsilons")
    cmap = cfg.cmap()
    rep = run_convergence_study(cmap, cfg.spec(), cfg.region, cfg.epsilons, cfg.solver)
    export.write_csv(out / "errors.csv", CSV_HEADER, rep.rows)
    doc = rep.to_dict()
    doc["mode"] = "converge"
    export.write_json(out / "report.json", doc)
    failed = rep.failed_rows
    if failed and all(r["error"] == "NotAcute" for r in failed):
        return EXIT_PRECONDITION
    return EXIT_SOLVER if failed else EXIT_OK


def run_taylor(cfg, out):
    if cfg.taylor_v0 is None:
        raise ConfigError("taylor needs taylor.v0")
    cmap = cfg.cmap()
    rep = run_taylor_study(cmap, cfg.spec(), cfg.taylor_v0, cfg.epsilons)
    export.write_csv(out / "taylor.csv", TAYLOR_HEADER, rep.rows)
    doc = rep.to_dict()
    doc.update(mode="taylor", map=cmap.name)
    export.write_json(out / "report.json", doc)
    return EXIT_OK


def run_verify(cfg, out):
    eps = _single_epsilon(cfg, "verify")
    cmap = cfg.cmap()
    sub = build_lattice_patch(cfg.spec(eps), cfg.region)
    constants = barrier_constants(cmap, sub)
    trap = barrier_fields(cmap, sub, constants, eps)
    barrier = barrier_inequality_check(cmap, sub, trap)
    inward = inward_gradient_check(cmap, sub, trap, cfg.verify_samples, seed=cfg.seed)
    doc = {
        "mode": "verify",
        "map": cmap.name,
        "epsilon": eps,
        "constants": constants.__dict__,
        "trap_width": trap.width,
        "barrier": barrier.to_dict(),
        "inward": inward.to_dict(),
    }
    passed = barrier.passed and inward.passed
    if passed and sub.spec.strictly_acute:
        try:
            res = solve_dirichlet(sub, trap.lower[sub.boundary], cfg.solver)
            doc["solution_in_trap"] = in_trap(trap, res.u)
            passed = passed and doc["solution_in_trap"]
        except SolverError as exc:
            doc["solution_in_trap"] = None
            doc["solver_error"] = str(exc)
    doc["passed"] = passed
    if not passed:
        doc["diagnostics"] = {
            "trap_width_exceeds_epsilon": not barrier.width_within_epsilon,
            "barrier_violations": len(barrier.violations),
            "inward_failures": len(inward.failures),
        }
    export.write_json(out / "report.json", doc)
    return EXIT_OK if passed else EXIT_PRECONDITION


COMMANDS = {"solve": run_solve, "converge": run_convergence, "taylor": run_taylor, "verify": run_verify}


def build_parser():
    p = argparse.ArgumentParser(prog="dcpl", description="Discrete conformal PL-map experiments on triangular lattices.")
    p.add_argument("-v", "--verbose", action="store_true")
    subs = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = subs.add_parser(name)
        sp.add_argument("--config", required=True, type=Path)
        sp.add_argument("--out", required=True, type=Path)
        sp.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        args.out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (NotAcute, RegionTooSmall, TopologyFailure, OutsideDomain, InfeasibleTriangle, OrientationFlip) as exc:
        print(f"precondition violated: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except DCPLError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION


if __name__ == "__main__":
    sys.exit(main())
