"""Mesh-family-agnostic drivers for manufactured cases, studies and the cavity."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from ..mesh import (
    Mesh,
    build_gauss_lobatto_box,
    build_random_perturbed,
    build_smooth_mapped,
    build_truncated_cone,
    build_uniform_box,
    split_nonplanar_faces,
)
from ..solver.energy import energy_identities
from ..solver.newton import NewtonOptions, SolverState, continuation_in_Ra, default_ladder, newton_solve
from ..solver.system import CoupledSystem
from .benchmark import nusselt, velocity_maxima
from .cases import CAVITY_LAMBDA, CAVITY_PR, CAVITY_RA, CASES, ManufacturedCase, cavity_problem
from .norms import convergence_order, error_norms

log = logging.getLogger(__name__)

MESH_FAMILIES = ("uniform", "gauss_lobatto", "smooth", "random", "cone")


def build_mesh(family: str, N: int, dim: int = 3, seed: int = 0, amplitude: float = 0.45) -> Mesh:
    """Build a mesh of the named family; random meshes come with their faces split."""
    if family == "uniform":
        return build_uniform_box(N, dim)
    if family == "gauss_lobatto":
        return build_gauss_lobatto_box(N, dim)
    if family in ("smooth", "cone") and dim != 3:
        raise ValueError(f"mesh family {family!r} is three-dimensional only")
    if family == "smooth":
        return build_smooth_mapped(N)
    if family == "random":
        m = build_random_perturbed(N, amplitude, seed, dim)
        return split_nonplanar_faces(m) if dim == 3 else m
    if family == "cone":
        return build_truncated_cone(N)
    raise ValueError(f"unknown mesh family {family!r}; expected one of {MESH_FAMILIES}")


@dataclass
class CaseResult:
    case: str
    N: int
    h: float
    n_cells: int
    errors: dict  # variable -> ErrorNorms
    state: SolverState
    metrics: dict = field(default_factory=dict)

    def rows(self):
        """(N, h, variable, eps2, epsinf, epsH1) records."""
        return [
            (self.N, self.h, var, e.eps_2, e.eps_inf, e.eps_h1) for var, e in self.errors.items()
        ]


def manufactured_errors(case: ManufacturedCase, state: SolverState) -> dict:
    sysm = state.system
    grads = sysm.diffusion.grads
    m = sysm.mesh
    fs = state.fields
    out = {}
    if case.energy:
        out["T"] = error_norms(grads, fs.T, fs.T_boundary, case.T_ref, case.grad_T)
    if case.flow:
        nb = len(m.boundary_faces)
        for i in range(m.dim):
            out[f"u{i + 1}"] = error_norms(
                grads,
                fs.u[:, i],
                np.zeros(nb),
                lambda x, i=i: case.u_ref(x)[:, i],
                lambda x, i=i: case.grad_u(x)[:, i, :],
            )
        # pressure has no boundary unknowns: its owner value closes grad_K
        pb = fs.p[m.face_owner[m.boundary_faces]]
        out["p"] = error_norms(grads, fs.p, pb, case.p_ref, case.grad_p)
    return out


def run_manufactured(case: ManufacturedCase, mesh: Mesh, lam: float = 0.0, transport: str = "centered",
                     options: NewtonOptions | None = None) -> CaseResult:
    t0 = time.perf_counter()
    sysm = CoupledSystem(mesh, case.problem(mesh.boundary_tags, lam, transport))
    state = newton_solve(sysm, options=options)
    errors = manufactured_errors(case, state)
    metrics = {
        "newton_iterations": state.iterations,
        "residual": state.residual_norm,
        "wall_time": time.perf_counter() - t0,
    }
    if case.flow:
        rep = energy_identities(state)
        metrics.update(
            mass_residual=float(np.abs(state.residual_blocks()["mass"]).max()),
            kinetic_rel=rep.kinetic_rel,
            mean_pressure=float(mesh.cell_volume @ state.fields.p),
        )
    N = int(mesh.metadata.get("N", 0))
    return CaseResult(case.name, N, mesh.max_diameter, mesh.n_cells, errors, state, metrics)


@dataclass
class ConvergenceReport:
    case: str
    family: str
    levels: list  # CaseResult per N
    slopes: dict = field(default_factory=dict)  # (variable, norm) -> slope

    def rows(self):
        return [r for res in self.levels for r in res.rows()]

    def compute_slopes(self):
        h = [res.h for res in self.levels]
        for var in self.levels[0].errors:
            for norm in ("eps2", "epsinf", "epsH1"):
                eps = [res.errors[var].as_dict()[norm] for res in self.levels]
                if all(np.isfinite(eps)) and all(e > 0 for e in eps):
                    self.slopes[(var, norm)] = convergence_order(h, eps)
        return self.slopes


def run_study(case_name: str, family: str, levels, dim: int = 3, lam: float = 0.0, seed: int = 0,
              amplitude: float = 0.45, transport: str = "centered",
              options: NewtonOptions | None = None) -> ConvergenceReport:
    levels = [int(n) for n in levels]
    if len(levels) < 3:
        raise ValueError("a convergence study needs at least 3 mesh levels")
    case = CASES[case_name](dim)
    results = []
    for N in levels:
        mesh = build_mesh(family, N, dim, seed, amplitude)
        res = run_manufactured(case, mesh, lam, transport, options)
        log.info("study %s %s N=%d h=%.4g errors=%s", case_name, family, N, res.h,
                 {k: v.as_dict() for k, v in res.errors.items()})
        results.append(res)
    rep = ConvergenceReport(case_name, family, results)
    rep.compute_slopes()
    return rep


def run_cavity(mesh: Mesh, Pr: float = CAVITY_PR, Ra: float = CAVITY_RA, lam: float = CAVITY_LAMBDA,
               ladder=None, transport: str = "centered", options: NewtonOptions | None = None):
    """Solve the cavity with continuation and return (state, metrics)."""
    sysm = CoupledSystem(mesh, cavity_problem(Pr, Ra, lam, transport))
    ladder = list(ladder) if ladder else default_ladder(Ra)
    if ladder[-1] != Ra:
        raise ValueError("continuation ladder must end at the target Ra")
    state = continuation_in_Ra(sysm, ladder, options=options)
    return state, cavity_metrics(state)


def cavity_metrics(state: SolverState) -> dict:
    u = velocity_maxima(state)
    nu0, nu1 = nusselt(state, "xmin"), nusselt(state, "xmax")
    rep = energy_identities(state)
    out = {
        "Nu": nu0,
        "Nu_xmin": nu0,
        "Nu_xmax": nu1,
        "heat_balance_rel": abs(nu0 - nu1) / abs(nu0) if nu0 else float("nan"),
        "newton_iterations": sum(1 for r in state.history if r.accepted),
        "residual": state.residual_norm,
        "mass_residual": float(np.abs(state.residual_blocks()["mass"]).max()),
        "kinetic_rel": rep.kinetic_rel,
        "transport_rel": rep.transport_rel,
        "wall_time": state.wall_time,
    }
    for i, v in enumerate(u):
        out[f"u{i + 1}_max"] = v
    return out
