"""Command line entry point: ``run``, ``study`` and ``mesh`` on an INI case file.

Exit codes: 0 success, 1 solver failure, 2 configuration or mesh error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np
import scipy.io

from .. import __version__
from ..mesh import MeshError, mesh_summary, validate, write_mesh_sidecar, write_vtk
from ..solver.linear import LinearSolveError
from ..solver.newton import ConvergenceError, NewtonOptions
from ..solver.system import SolverError
from ..verify.benchmark import REFERENCE
from ..verify.cases import CASES
from ..verify.norms import convergence_order
from ..verify.runner import build_mesh, run_cavity, run_manufactured
from .config import CaseConfig, ConfigError, parse_config

log = logging.getLogger("polyfv")

EXIT_OK, EXIT_SOLVER, EXIT_CONFIG = 0, 1, 2
CSV_HEADER = ["N", "h", "variable", "eps2", "epsinf", "epsH1", "config_hash"]


def _options(cfg: CaseConfig) -> NewtonOptions:
    return NewtonOptions(omega=cfg.omega, omega_max=cfg.omega_max, atol=cfg.atol, rtol=cfg.rtol,
                         max_iter=cfg.max_iter, linear_method=cfg.linear)


def _json_ready(obj):
    if isinstance(obj, dict):
        return {str(k): _json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_ready(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(_json_ready(doc), indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, rows, cfg: CaseConfig) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")  # RFC 4180 line endings
        w.writerow(CSV_HEADER)
        for N, h, var, e2, einf, eh1 in rows:
            w.writerow([N, repr(float(h)), var, repr(float(e2)), repr(float(einf)), repr(float(eh1)), cfg.config_hash])


def _header(cfg: CaseConfig) -> dict:
    return {"config_hash": cfg.config_hash, "config": cfg.hashed_fields(), "version": __version__}


def _build_checked_mesh(cfg: CaseConfig, N: int | None = None):
    mesh = build_mesh(cfg.family, N or cfg.N, cfg.dim, cfg.seed, cfg.amplitude)
    report = validate(mesh)
    if not report.passed:
        raise MeshError(f"mesh validation failed: {', '.join(report.failed())}")
    return mesh


def _cell_data(state) -> dict:
    fs = state.fields
    sysm = state.system
    data = {"cluster": sysm.clusters.assignment.astype(float)}
    if sysm.problem.flow:
        data["velocity"] = fs.u
        data["pressure"] = fs.p
    if sysm.problem.energy:
        data["temperature"] = fs.T
    return data


def _dump_matrices(out: Path, state, cfg: CaseConfig) -> None:
    sysm = state.system
    comment = f"config_hash {cfg.config_hash}"
    scipy.io.mmwrite(out / "diffusion.mtx", sysm.diffusion.matrix, comment=comment)
    scipy.io.mmwrite(out / "jacobian.mtx", sysm.jacobian(state.x, state.Ra), comment=comment)


def _write_history(path: Path, state, cfg: CaseConfig) -> None:
    lines = [f"# config_hash {cfg.config_hash}"] + [r.line() for r in state.history]
    path.write_text("\n".join(lines) + "\n")


def cmd_run(cfg: CaseConfig, check: bool) -> int:
    mesh = _build_checked_mesh(cfg)
    if check:
        print(f"config ok ({cfg.config_hash}); mesh ok: {mesh}")
        return EXIT_OK
    out = cfg.output_dir()
    out.mkdir(parents=True, exist_ok=True)
    doc = _header(cfg)
    doc["mesh"] = {k: v for k, v in mesh_summary(mesh).items() if k != "quality"}
    opts = _options(cfg)
    try:
        if cfg.case == "cavity":
            state, metrics = run_cavity(mesh, cfg.Pr, cfg.Ra, cfg.lam, cfg.ladder or None, cfg.transport, opts)
            metrics.pop("wall_time", None)
            ref = REFERENCE.get(cfg.N) if cfg.family == "gauss_lobatto" and cfg.Ra == 1e7 else None
            if ref:
                metrics["reference"] = ref
                metrics["deviation"] = {k: metrics[k] / v - 1.0 for k, v in ref.items()}
            doc["metrics"] = metrics
        else:
            case = CASES[cfg.case](cfg.dim)
            res = run_manufactured(case, mesh, cfg.lam, cfg.transport, opts)
            state = res.state
            res.metrics.pop("wall_time", None)
            doc["metrics"] = res.metrics
            doc["errors"] = {k: v.as_dict() for k, v in res.errors.items()}
            _write_csv(out / "errors.csv", res.rows(), cfg)
    except ConvergenceError as exc:
        doc["failure"] = str(exc)
        _write_json(out / "metrics.json", doc)
        _write_history(out / "newton.log", exc.state, cfg)
        log.error("solver failure: %s", exc)
        return EXIT_SOLVER
    doc["converged"] = True
    _write_json(out / "metrics.json", doc)
    _write_history(out / "newton.log", state, cfg)
    if cfg.vtk:
        write_vtk(mesh, out / "fields.vtk", _cell_data(state), title=f"polyfv {cfg.case} config_hash={cfg.config_hash}")
    if cfg.dump_matrix:
        _dump_matrices(out, state, cfg)
    log.info("run finished; artifacts in %s", out)
    return EXIT_OK


def cmd_study(cfg: CaseConfig, levels, check: bool) -> int:
    if cfg.case == "cavity":
        raise ConfigError(f"{cfg.source}: studies apply to manufactured cases only")
    levels = levels or cfg.levels
    if len(levels) < 3:
        raise ConfigError(f"{cfg.source}: a convergence study needs at least 3 levels, got {levels}")
    meshes = {N: _build_checked_mesh(cfg, N) for N in levels} if check else None
    if check:
        print(f"config ok ({cfg.config_hash}); meshes ok for levels {levels}")
        return EXIT_OK
    out = cfg.output_dir()
    out.mkdir(parents=True, exist_ok=True)
    case = CASES[cfg.case](cfg.dim)
    opts = _options(cfg)
    results, failure = [], None
    for N in levels:
        try:
            mesh = meshes[N] if meshes else _build_checked_mesh(cfg, N)
            res = run_manufactured(case, mesh, cfg.lam, cfg.transport, opts)
        except (ConvergenceError, LinearSolveError, SolverError) as exc:
            failure = {"level": N, "error": str(exc)}
            log.error("study level N=%d failed: %s", N, exc)
            break
        results.append(res)
    rows = [r for res in results for r in res.rows()]
    _write_csv(out / "convergence.csv", rows, cfg)
    doc = _header(cfg)
    doc["levels"] = [res.N for res in results]
    doc["h"] = [res.h for res in results]
    doc["complete"] = failure is None
    if failure:
        doc["failure"] = failure
    slopes = {}
    if len(results) >= 3:
        h = [res.h for res in results]
        for var in results[0].errors:
            for norm in ("eps2", "epsinf", "epsH1"):
                eps = [res.errors[var].as_dict()[norm] for res in results]
                if all(np.isfinite(eps)) and min(eps) > 0:
                    slopes.setdefault(var, {})[norm] = convergence_order(h, eps)
    doc["slopes"] = slopes
    _write_json(out / "slopes.json", doc)
    for var in (results[0].errors if results else {}):
        for norm in ("eps2", "epsinf", "epsH1"):
            lines = [f"# config_hash {cfg.config_hash}", f"# h {norm}({var})"]
            lines += [f"{res.h!r} {res.errors[var].as_dict()[norm]!r}" for res in results]
            (out / f"loglog_{var}_{norm}.dat").write_text("\n".join(lines) + "\n")
    return EXIT_OK if failure is None else EXIT_SOLVER


def cmd_mesh(cfg: CaseConfig, export: bool, check: bool) -> int:
    mesh = build_mesh(cfg.family, cfg.N, cfg.dim, cfg.seed, cfg.amplitude)
    report = validate(mesh)
    print(report)
    if not report.passed:
        return EXIT_CONFIG
    if export and not check:
        out = cfg.output_dir()
        out.mkdir(parents=True, exist_ok=True)
        write_vtk(mesh, out / "mesh.vtk", title=f"polyfv mesh config_hash={cfg.config_hash}")
        write_mesh_sidecar(mesh, out / "mesh.json", extra=_header(cfg))
        print(f"mesh exported to {out}")
    return EXIT_OK


def _levels(text: str):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"levels must be comma-separated integers: {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="polyfv", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="solve one case")
    r.add_argument("config")
    r.add_argument("--check", action="store_true", help="validate config and mesh only")
    s = sub.add_parser("study", help="convergence study over mesh levels")
    s.add_argument("config")
    s.add_argument("--levels", type=_levels, default=None, help="e.g. 8,16,32")
    s.add_argument("--check", action="store_true", help="validate config and meshes only")
    m = sub.add_parser("mesh", help="build and validate the mesh only")
    m.add_argument("config")
    m.add_argument("--export", action="store_true", help="write mesh.vtk and mesh.json")
    m.add_argument("--check", action="store_true", help="validate only, write nothing")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(args.config)
        if args.command == "run":
            return cmd_run(cfg, args.check)
        if args.command == "study":
            return cmd_study(cfg, args.levels, args.check)
        return cmd_mesh(cfg, args.export, args.check)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MeshError as exc:
        print(f"mesh error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, LinearSolveError, SolverError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
