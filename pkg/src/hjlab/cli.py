"""Command line: ``hj <subcommand> --config <path> [--out <dir>] [--seed <n>]``.

Exit status: 0 when every check in the report passed, 1 when the run
completed but a check failed, 2 for configuration errors and 3 for errors
raised by the numerical modules. Errors are printed to stderr as one JSON
object.
"""
from __future__ import annotations

import argparse
import json
import os
import platform
import sys
import time
from importlib import metadata
from pathlib import Path

import numpy as np

from . import experiments as ex
from .bounds import constants_report
from .config import SUBCOMMANDS, ExperimentConfig, load_config
from .errors import ConfigError, HJError
from .hamiltonian import HamiltonianSpec
from .io import to_jsonable, write_csv, write_json

EXIT_OK, EXIT_CHECKS, EXIT_CONFIG, EXIT_MODULE = 0, 1, 2, 3
OUTPUT_ENV = "HJ_OUTPUT_DIR"


def _versions() -> dict:
    out = {"python": platform.python_version()}
    for pkg in ("hjlab", "numpy", "scipy", "pydantic", "shapely"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = None
    return out


def dispatch(sub: str, cfg: ExperimentConfig, rng: np.random.Generator) -> ex.ExperimentResult:
    """Run one experiment and attach the constants report its comparisons rely on."""
    p = cfg.params_for(sub)
    spec = cfg.spec()
    # (R, M, T) of the constants report to embed; None when the runner embeds its own
    embed = None
    grid = (cfg.grid.a, cfg.grid.n, cfg.grid.N)
    solver = cfg.solver.to_solver()
    if sub == "validate":
        res = ex.run_validate(spec, rng, p.box, p.p_box, p.n_samples)
        embed = (1.0, 1.0, 1.0)
    elif sub == "solve":
        res = ex.run_solve(spec, grid, solver, p.initial, p.T, p.snapshots)
        embed = (1.0, 1.0, p.T)
    elif sub == "constants":
        res = ex.run_constants(spec, p.R, p.M, p.T, p.K, p.T_query)
    elif sub == "dominance":
        res = ex.run_dominance(spec, grid, solver, rng, p.R, p.M, tuple(p.times), p.count, p.generator,
                               p.pieces, p.sc_scale, p.sc_slack)
    elif sub == "entropy":
        res = ex.run_entropy(spec, grid, solver, rng, p.mode, tuple(p.epsilons), p.R, p.M, p.T, p.count,
                             p.generator, p.pieces, p.r, p.K, p.alpha, p.tau, p.dx, p.attain_samples)
    elif sub == "controllability":
        res = ex.run_controllability(spec, solver, p.r, p.tau, p.amplitude, p.dx, cfg.grid.N, p.inner_tol,
                                     p.outer_tol, p.auto_tau)
        rec = res.report["reconstruction"]
        embed = (12.0 * p.r, 10.0 * rec["m"], rec["tau"])
    elif sub == "convergence":
        res = ex.run_convergence(p.a, tuple(tuple(lv) for lv in p.levels), tuple(p.initials), p.T,
                                 p.error_tol, p.min_ratio, cfg.solver.q_samples, cfg.solver.refine_iters)
        embed = (1.0, 1.0, p.T)
        spec = HamiltonianSpec.quadratic()
    else:
        raise ConfigError(f"unknown subcommand {sub!r}", field="subcommand")
    if embed is not None:
        res.report["constants"] = constants_report(spec, *embed).to_dict()
    return res


def run(sub: str, config_path, out: str | None = None, seed: int | None = None) -> int:
    t0 = time.perf_counter()
    try:
        cfg = load_config(config_path)
        cfg.params_for(sub)
    except ConfigError as exc:
        print(json.dumps(exc.to_dict()), file=sys.stderr)
        return EXIT_CONFIG
    seed = cfg.seed if seed is None else seed
    out_dir = Path(out or os.environ.get(OUTPUT_ENV) or cfg.output_dir)
    rng = np.random.default_rng(seed)
    try:
        res = dispatch(sub, cfg, rng)
    except ConfigError as exc:
        print(json.dumps(exc.to_dict()), file=sys.stderr)
        return EXIT_CONFIG
    except HJError as exc:
        print(json.dumps(to_jsonable(exc.to_dict())), file=sys.stderr)
        return EXIT_MODULE
    except ValueError as exc:
        print(json.dumps({"error": "invalid_argument", "message": str(exc), "details": {}}), file=sys.stderr)
        return EXIT_MODULE
    files = []
    for name, (head, rows) in sorted(res.tables.items()):
        write_csv(out_dir / name, head, rows)
        files.append(name)
    write_json(out_dir / "report.json", {"subcommand": sub, "passed": res.passed, **res.report})
    code = EXIT_OK if res.passed else EXIT_CHECKS
    manifest = {
        "subcommand": sub,
        "config_hash": cfg.config_hash(),
        "config": json.loads(cfg.canonical()),
        "seed": seed,
        "versions": _versions(),
        "wall_seconds": time.perf_counter() - t0,
        "files": ["report.json", *files],
        "passed": res.passed,
        "exit_code": code,
    }
    write_json(out_dir / "manifest.json", manifest)
    print(f"{sub}: {'passed' if res.passed else 'checks failed'}; outputs in {out_dir}")
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hj", description="Hamilton-Jacobi numerical experiments")
    subs = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        sp = subs.add_parser(name, help=f"run the {name} experiment")
        sp.add_argument("--config", required=True, help="path to a JSON experiment config")
        sp.add_argument("--out", default=None, help=f"output directory (else ${OUTPUT_ENV}, else config)")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed is not None and args.seed < 0:
        print(json.dumps({"error": "config_error", "message": "seed must be non-negative",
                          "details": {"field": "seed", "line": None}}), file=sys.stderr)
        return EXIT_CONFIG
    return run(args.subcommand, args.config, args.out, args.seed)


if __name__ == "__main__":
    sys.exit(main())
