"""Command-line runner: ``hurwitz-wp <subcommand> [--config FILE] [flags]``.

Config files are flat ``key = value`` text (``#`` starts a comment); keys are
flag names without the leading dashes, and flags given on the command line
win.  Every subcommand writes one JSON result embedding the resolved config
and a git-style hash of its inputs.  Exit codes: 0 success, 2 invalid
config, 3 budget exceeded, 4 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .cohomology import cohomology_profile, hypercohomology_dims, obstruction_vanishes, tangent_dims
from .combinatorics import (BudgetExceeded, MonodromyDatum, braid_orbits, enumerate_classes,
                            genus_from_relation)
from .mesh import BranchConfiguration, MeshError, MeshParams, build_cover, hexagon_configuration
from .solver import SolverError, assemble_operators, face_area_estimate, solve_liouville
from .wp import random_identity_check, wp_norm

OUTPUT_DIR_ENV = "HURWITZ_WP_OUTPUT_DIR"
EXIT_OK, EXIT_CONFIG, EXIT_BUDGET, EXIT_SOLVER = 0, 2, 3, 4
MAX_REFINEMENT = 5
OUTPUT_KEYS = {"out", "mesh_out", "dump_fields", "table_out", "workers"}


class ConfigError(ValueError):
    """Unreadable or inconsistent configuration."""


class PartialFailure(RuntimeError):
    """A study failed part way; ``report`` holds what was finished."""

    def __init__(self, message: str, report: dict, exit_code: int):
        super().__init__(message)
        self.report = report
        self.exit_code = exit_code


# -- configuration ------------------------------------------------------------

def read_config_file(path) -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{path}:{lineno}: empty key")
        out[key.replace("-", "_")] = value
    return out


def float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a comma separated list of numbers: {text}") from exc


def int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a comma separated list of integers: {text}") from exc


def git_hash(data: bytes) -> str:
    """Content hash in git's blob format."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


@dataclass
class ExperimentConfig:
    """Resolved settings of one run plus the raw bytes of its input files."""

    command: str
    values: dict
    inputs: dict[str, bytes] = field(default_factory=dict)

    def validate(self) -> None:
        v = self.values
        for key in ("tol", "rtol"):
            if key in v and v[key] is not None and not v[key] > 0:
                raise ConfigError(f"{key} must be positive")
        if "eps" in v and v["eps"]:
            eps = v["eps"]
            if any(e <= 0 for e in eps):
                raise ConfigError("eps must be positive")
            if any(b >= a for a, b in zip(eps, eps[1:])):
                raise ConfigError("eps list must be strictly decreasing")
        if "refinements" in v:
            r = v["refinements"]
            if any(b <= a for a, b in zip(r, r[1:])):
                raise ConfigError("refinement list must be strictly increasing")
        levels = v.get("refinements") or [v.get("refinement", 0)]
        if max(levels) > v.get("max_refinement", MAX_REFINEMENT):
            raise BudgetExceeded(f"refinement above the budget {v.get('max_refinement')}")
        if min(levels) < 0:
            raise ConfigError("refinement must be non-negative")
        if "workers" in v and v["workers"] < 1:
            raise ConfigError("workers must be at least 1")

    def input_hash(self) -> str:
        """Hash of everything that determines the result (not output paths)."""
        keys = sorted(set(self.values) - OUTPUT_KEYS)
        blob = json.dumps({"command": self.command,
                           "values": {k: self.values[k] for k in keys}},
                          sort_keys=True, default=str).encode()
        for name in sorted(self.inputs):
            blob += name.encode() + b"\0" + self.inputs[name]
        return git_hash(blob)

    def provenance(self) -> dict:
        return {
            "command": self.command,
            "config": self.values,
            "input_hash": self.input_hash(),
            "version": __version__,
        }


# -- helpers ------------------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if np.isfinite(x) else str(x)
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def output_path(cfg: ExperimentConfig) -> Path:
    out = cfg.values.get("out")
    if out:
        return Path(out)
    base = Path(os.environ.get(OUTPUT_DIR_ENV, "."))
    return base / f"{cfg.command}.json"


def write_result(cfg: ExperimentConfig, result: dict, status: str = "ok") -> Path:
    path = output_path(cfg)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {"status": status, "provenance": cfg.provenance(), "result": result}
    path.write_text(json.dumps(_jsonable(payload), indent=2) + "\n")
    return path


def load_configuration(cfg: ExperimentConfig) -> BranchConfiguration:
    """Branch configuration from ``surface`` (a JSON file) or the hexagon."""
    src = cfg.values.get("surface")
    if not src:
        return hexagon_configuration()
    try:
        raw = Path(src).read_bytes()
        data = json.loads(raw)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read configuration {src}: {exc}") from exc
    cfg.inputs["surface"] = raw
    try:
        return BranchConfiguration.from_json(data)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed configuration {src}: {exc}") from exc


def parse_complex(text) -> complex:
    try:
        return complex(str(text).replace(" ", ""))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a complex number: {text}") from exc


def mesh_params(cfg: ExperimentConfig) -> MeshParams:
    v = cfg.values
    kw = {}
    if v.get("disk_radius") is not None:
        kw["disk_radius"] = v["disk_radius"]
    if v.get("coarse_spacing") is not None:
        kw["coarse_spacing"] = v["coarse_spacing"]
    return MeshParams(**kw)


def hyperbolic_area(genus: int) -> float:
    return 4 * np.pi * (genus - 1)


# -- subcommands --------------------------------------------------------------

def cmd_enumerate(cfg: ExperimentConfig) -> dict:
    n, b = cfg.values["n"], cfg.values["b"]
    classes = enumerate_classes(n, b)
    return {"n": n, "b": b, "count": len(classes),
            "genus": genus_from_relation(n, 0, b) if classes else None,
            "classes": [d.to_json() for d in classes]}


def _load_classes(cfg: ExperimentConfig) -> list[MonodromyDatum]:
    src = cfg.values.get("classes")
    if not src:
        return enumerate_classes(cfg.values["n"], cfg.values["b"])
    try:
        raw = Path(src).read_bytes()
        data = json.loads(raw)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read classes {src}: {exc}") from exc
    cfg.inputs["classes"] = raw
    if isinstance(data, dict):
        data = data.get("result", data).get("classes", [])
    try:
        return [MonodromyDatum.from_json(d) for d in data]
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed classes file {src}: {exc}") from exc


def cmd_orbits(cfg: ExperimentConfig) -> dict:
    classes = _load_classes(cfg)
    orbits = braid_orbits(classes)
    return {"classes": [d.to_json() for d in classes], "orbits": orbits,
            "num_orbits": len(orbits)}


def cmd_dims(cfg: ExperimentConfig) -> dict:
    n, h, b = (cfg.values[k] for k in ("n", "h", "b"))
    p = genus_from_relation(n, h, b)
    profile = cohomology_profile(n, h, b)
    return {"n": n, "h": h, "b": b, "genus": p,
            "profile": profile.to_json(),
            "tangent_dims": tangent_dims(b),
            "hypercohomology_dims": hypercohomology_dims(n, h, b),
            "obstruction_vanishes": obstruction_vanishes(p, b),
            "alternating_sum": profile.alternating_sum()}


def cmd_solve_metric(cfg: ExperimentConfig) -> dict:
    v = cfg.values
    config = load_configuration(cfg)
    surface = build_cover(config, v["refinement"], mesh_params(cfg))
    if v.get("mesh_out"):
        surface.write_json(v["mesh_out"])
    ops = assemble_operators(surface)
    metric = solve_liouville(surface, ops, tol=v["tol"], max_iter=v["max_iter"])
    target = hyperbolic_area(surface.genus)
    if v.get("dump_fields"):
        w = surface.plane_coords()
        metric.write_csv(v["dump_fields"], {"w": w, "sheet": surface.vertex_sheet})
    quad = face_area_estimate(surface, ops, metric)
    return {"genus": surface.genus, "vertices": surface.num_vertices,
            "faces": len(surface.faces), "area": metric.area, "target_area": target,
            "area_face_quadrature": quad, "area_error": abs(quad - target) / target,
            "gauss_bonnet_error": abs(metric.area - target) / target,
            "iterations": metric.iterations, "converged": metric.converged,
            "residual_history": list(metric.residual_history)}


def _wp_fields(t, psi, stencil) -> dict:
    c = stencil.center
    return {"w": c.surface.plane_coords(), "u": c.metric.u, "g": t.g, "phi": t.phi,
            "mu_abs2": np.abs(t.mu) ** 2, "psi": psi, "zeta_abs": np.abs(t.zeta),
            "xi_abs": np.abs(t.xi)}


def cmd_wp_norm(cfg: ExperimentConfig) -> dict:
    v = cfg.values
    config = load_configuration(cfg)
    k = v["k"]
    if not 0 <= k < config.b:
        raise ConfigError(f"k must lie in 0..{config.b - 1}")
    eps = v.get("eps")
    res, t, psi, stencil = wp_norm(
        config, k, parse_complex(v["direction"]), refinement=v["refinement"],
        eps=eps or None, params=mesh_params(cfg), tol=v["tol"],
        rtol=v["rtol"], workers=v["workers"])
    if v.get("mesh_out"):
        stencil.center.surface.write_json(v["mesh_out"])
    if v.get("dump_fields"):
        stencil.center.metric.write_csv(v["dump_fields"], _wp_fields(t, psi, stencil))
    out = res.to_json()
    out["canonical_config"] = stencil.config.to_json()
    return out


def cmd_identity_check(cfg: ExperimentConfig) -> dict:
    v = cfg.values
    worst = random_identity_check(v["samples"], v["seed"])
    return {"samples": v["samples"], "seed": v["seed"], "max_residual": worst,
            "threshold": 1e-12, "passed": bool(worst <= 1e-12)}


# -- convergence study ----------------------------------------------------------

def _strictly_decreasing(values) -> bool:
    return all(b < a for a, b in zip(values, values[1:]))


def convergence_flags(levels: list[dict]) -> dict:
    refs = [r["refinement"] for r in levels]
    area = [r["area_error"] for r in levels]
    beyond = [a for r, a in zip(refs, area) if r >= 2]
    totals = [r["wp_total"] for r in levels]
    diffs = [abs(b - a) for a, b in zip(totals, totals[1:])]
    return {
        "area_error_decreasing": _strictly_decreasing(area),
        "area_error_decreasing_beyond_2": _strictly_decreasing(beyond),
        "ell_residual_decreasing": _strictly_decreasing([r["ell_residual"] for r in levels]),
        "g0_gap_decreasing": _strictly_decreasing([r["g0_gap"] for r in levels]),
        "wp_total_differences_decreasing": len(diffs) >= 2 and _strictly_decreasing(diffs),
    }


def convergence_study(config: BranchConfiguration, k: int, refinements, eps=None,
                      params: MeshParams = MeshParams(), tol: float = 1e-10,
                      rtol: float = 1e-3, workers: int = 1) -> dict:
    """Self-convergence table of one direction over several refinement levels.

    Any failure raises ``PartialFailure`` carrying the levels completed so far.
    """
    refinements = list(refinements)
    if len(refinements) < 3:
        raise ConfigError("a convergence study needs at least 3 refinement levels")
    levels = []
    report = {"k": k, "levels": levels}
    for r in refinements:
        try:
            res, _, _, stencil = wp_norm(config, k, refinement=r, eps=eps, params=params,
                                         tol=tol, rtol=rtol, workers=workers)
        except (SolverError, MeshError) as exc:
            report["flags"] = convergence_flags(levels)
            raise PartialFailure(f"refinement {r}: {exc}", report, EXIT_SOLVER) from exc
        c = stencil.center
        target = hyperbolic_area(c.surface.genus)
        levels.append({
            "refinement": r, "vertices": c.surface.num_vertices,
            "area": c.metric.area,
            "area_error": abs(face_area_estimate(c.surface, c.ops, c.metric) - target) / target,
            "ell_residual": res.ell_residual,
            "g0_direct": res.g0_direct, "g0_pde": res.g0_pde,
            "g0_gap": abs(res.g0_pde - res.g0_direct),
            "g1": res.g1, "fiber_integral": res.fiber_integral, "wp_total": res.wp_total,
            "eps": res.eps, "phi_min": res.phi_min,
        })
    report["flags"] = convergence_flags(levels)
    return report


TABLE_COLUMNS = ("refinement", "vertices", "area_error", "ell_residual", "g0_gap",
                 "wp_total", "eps")


def write_table(levels: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TABLE_COLUMNS)
        for row in levels:
            w.writerow([row[c] if isinstance(row[c], int) else f"{row[c]:.17g}"
                        for c in TABLE_COLUMNS])


def cmd_convergence(cfg: ExperimentConfig) -> dict:
    v = cfg.values
    config = load_configuration(cfg)
    if not 0 <= v["k"] < config.b:
        raise ConfigError(f"k must lie in 0..{config.b - 1}")
    report = convergence_study(config, v["k"], v["refinements"], v.get("eps") or None,
                               mesh_params(cfg), v["tol"], v["rtol"], v["workers"])
    if v.get("table_out"):
        write_table(report["levels"], v["table_out"])
    return report


# -- argument parsing ---------------------------------------------------------

COMMANDS = {
    "enumerate": cmd_enumerate,
    "orbits": cmd_orbits,
    "dims": cmd_dims,
    "solve-metric": cmd_solve_metric,
    "wp-norm": cmd_wp_norm,
    "convergence": cmd_convergence,
    "identity-check": cmd_identity_check,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _surface_args(p, refinement: bool = True) -> None:
    p.add_argument("--surface", help="branch configuration JSON (default: hexagon)")
    if refinement:
        p.add_argument("--refinement", type=int, default=3)
    p.add_argument("--max-refinement", type=int, default=MAX_REFINEMENT,
                   help="budget; larger levels exit with code 3")
    p.add_argument("--disk-radius", type=float, help="spherical radius of the branch disks")
    p.add_argument("--coarse-spacing", type=float, help="mesh spacing at refinement 0")
    p.add_argument("--tol", type=float, default=1e-10, help="Newton tolerance, max |residual|")
    p.add_argument("--mesh-out", help="write the cover mesh as JSON")
    p.add_argument("--dump-fields", help="write per-vertex fields as CSV")


def _wp_args(p) -> None:
    p.add_argument("--k", type=int, default=0, help="index of the moving branch point")
    p.add_argument("--eps", type=float_list,
                   help="step, or decreasing comma list for the Richardson check")
    p.add_argument("--rtol", type=float, default=1e-3, help="Richardson agreement tolerance")
    p.add_argument("--workers", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hurwitz-wp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    subs = {}
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--out", help=f"result JSON (default: ${OUTPUT_DIR_ENV}/{name}.json)")
        subs[name] = p
    for name in ("enumerate", "orbits"):
        subs[name].add_argument("--n", type=int, default=3)
        subs[name].add_argument("--b", type=int, default=4)
    subs["orbits"].add_argument("--classes", help="classes JSON written by 'enumerate'")
    p = subs["dims"]
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--h", type=int, default=0)
    p.add_argument("--b", type=int, default=6)
    p = subs["solve-metric"]
    _surface_args(p)
    p.add_argument("--max-iter", type=int, default=60)
    p = subs["wp-norm"]
    _surface_args(p)
    _wp_args(p)
    p.add_argument("--direction", default="1", help="complex velocity of the moving point")
    p = subs["convergence"]
    _surface_args(p, refinement=False)
    _wp_args(p)
    p.add_argument("--refinements", type=int_list, default="2,3,4")
    p.add_argument("--table-out", help="write the convergence table as CSV")
    p = subs["identity-check"]
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    return parser


def resolve(argv) -> ExperimentConfig:
    """Parse flags on top of the optional config file."""
    parser = build_parser()
    ns = parser.parse_args(argv)
    inputs = {}
    if ns.config:
        try:
            raw = Path(ns.config).read_bytes()
            values = read_config_file(ns.config)
        except OSError as exc:
            raise ConfigError(f"cannot read config {ns.config}: {exc}") from exc
        inputs["config"] = raw
        sub = parser._subparsers._group_actions[0].choices[ns.command]
        known = {a.dest for a in sub._actions}
        unknown = sorted(set(values) - known - {"command"})
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        values.pop("command", None)
        sub.set_defaults(**values)
        ns = parser.parse_args(argv)
    values = {k: v for k, v in vars(ns).items() if k not in ("command", "config")}
    cfg = ExperimentConfig(ns.command, values, inputs)
    cfg.validate()
    return cfg


def _error(code: int, exc: BaseException, argv) -> int:
    report = {"status": "error", "exit_code": code, "error": type(exc).__name__,
              "message": str(exc), "argv": list(argv)}
    history = getattr(exc, "history", None)
    if history:
        report["residual_history"] = history
    print(json.dumps(_jsonable(report)), file=sys.stderr)
    return code


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        cfg = resolve(argv)
    except BudgetExceeded as exc:
        return _error(EXIT_BUDGET, exc, argv)
    except (ConfigError, argparse.ArgumentTypeError) as exc:
        return _error(EXIT_CONFIG, exc, argv)
    try:
        result = COMMANDS[cfg.command](cfg)
    except PartialFailure as exc:
        write_result(cfg, exc.report, status="partial")
        return _error(exc.exit_code, exc, argv)
    except BudgetExceeded as exc:
        return _error(EXIT_BUDGET, exc, argv)
    except (SolverError, MeshError) as exc:
        return _error(EXIT_SOLVER, exc, argv)
    except ValueError as exc:
        return _error(EXIT_CONFIG, exc, argv)
    path = write_result(cfg, result)
    print(json.dumps({"status": "ok", "command": cfg.command, "output": str(path)}))
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
