"""Under-relaxed Newton iteration and continuation in the Rayleigh number."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .linear import LinearSolveError, linear_solve
from .system import CoupledSystem, FieldSet, SolverError

log = logging.getLogger(__name__)


@dataclass
class NewtonOptions:
    omega: float = 0.8
    omega_max: float = 1.0
    increase_after: int = 3  # consecutive residual reductions before omega -> omega_max
    min_omega: float = 1.0 / 64
    atol: float = 1e-10
    rtol: float = 1e-12
    max_iter: int = 100
    linear_method: str = "auto"

    def __post_init__(self):
        if not 0 < self.omega <= self.omega_max <= 1:
            raise ValueError("need 0 < omega <= omega_max <= 1")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")


@dataclass
class IterationRecord:
    iteration: int
    residual: float
    omega: float
    Ra: float
    accepted: bool
    linear_method: str = ""
    linear_residual: float = 0.0

    def line(self) -> str:
        return (
            f"newton it={self.iteration} Ra={self.Ra:.6g} res={self.residual:.6e} "
            f"omega={self.omega:.4g} accepted={int(self.accepted)} "
            f"linear={self.linear_method} linres={self.linear_residual:.2e}"
        )


@dataclass
class SolverState:
    """Unknown vector with its system, Rayleigh number and convergence record."""

    system: CoupledSystem
    x: np.ndarray
    Ra: float
    converged: bool = False
    iterations: int = 0
    residual_norm: float = np.inf
    history: list = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def fields(self) -> FieldSet:
        return self.system.fields(self.x)

    def residual_blocks(self) -> dict:
        return self.system.residual_blocks(self.x, self.Ra)


class ConvergenceError(SolverError):
    def __init__(self, message: str, state: SolverState):
        super().__init__(message)
        self.state = state


def conduction_guess(system: CoupledSystem, options: NewtonOptions | None = None) -> np.ndarray:
    """Zero velocity and pressure; temperature from the pure conduction problem."""
    x = system.zero_state()
    L = system.layout
    if not L.energy:
        return x
    options = options or NewtonOptions()
    J = system.jacobian(x, Ra=0.0)
    r = system.residual(x, Ra=0.0)
    idx = np.r_[L.T, L.Tn]
    # with u = p = 0 the energy rows are linear and decoupled from the flow
    dx, _ = linear_solve(J[idx][:, idx], -r[idx], options.linear_method)
    x[idx] = dx
    return x


def newton_solve(system: CoupledSystem, x0: np.ndarray | None = None, Ra: float | None = None,
                 options: NewtonOptions | None = None) -> SolverState:
    """Iterate ``x <- x - omega J^{-1} R`` until ``|R|_inf <= atol`` or ``|R| <= rtol |R_0|``.

    A step that increases the residual is rejected and retried with half
    the relaxation.  Linear problems take the full step.
    """
    opts = options or NewtonOptions()
    Ra = system.problem.Ra if Ra is None else float(Ra)
    if x0 is not None:
        x = np.array(x0, dtype=float)
    elif system.problem.linear:
        x = system.zero_state()  # one full Newton step is the linear solve
    else:
        x = conduction_guess(system, opts)
    t0 = time.perf_counter()
    state = SolverState(system, x, Ra)
    r = system.residual(x, Ra)
    res0 = res = float(np.abs(r).max())
    omega = 1.0 if system.problem.linear else opts.omega
    streak = 0
    log.info("newton start Ra=%.6g res=%.6e", Ra, res)
    for it in range(1, opts.max_iter + 1):
        if res <= opts.atol or res <= opts.rtol * res0:
            state.converged = True
            break
        J = system.jacobian(x, Ra)
        try:
            dx, stats = linear_solve(J, r, opts.linear_method)
        except (LinearSolveError, RuntimeError) as exc:
            state.x, state.residual_norm = x, res
            raise ConvergenceError(f"linear solve failed at iteration {it}: {exc}", state) from exc
        while True:
            x_new = x - omega * dx
            r_new = system.residual(x_new, Ra)
            res_new = float(np.abs(r_new).max())
            ok = res_new < res or system.problem.linear
            rec = IterationRecord(it, res_new, omega, Ra, ok, stats.method, stats.rel_residual)
            state.history.append(rec)
            log.info(rec.line())
            if ok:
                break
            streak = 0
            omega *= 0.5
            if omega < opts.min_omega:
                state.x, state.residual_norm, state.iterations = x, res, it
                raise ConvergenceError(
                    f"stagnation at iteration {it}: residual {res:.3e}, relaxation below {opts.min_omega}",
                    state,
                )
        x, r, res = x_new, r_new, res_new
        state.iterations = it
        streak += 1
        if streak >= opts.increase_after:
            omega = opts.omega_max
    else:
        state.converged = res <= opts.atol or res <= opts.rtol * res0
    state.x, state.residual_norm = x, res
    state.wall_time = time.perf_counter() - t0
    if not state.converged:
        raise ConvergenceError(
            f"no convergence after {opts.max_iter} iterations (residual {res:.3e})", state
        )
    log.info("newton converged Ra=%.6g in %d iterations, res=%.3e", Ra, state.iterations, res)
    return state


def continuation_in_Ra(system: CoupledSystem, targets, x0: np.ndarray | None = None,
                       options: NewtonOptions | None = None) -> SolverState:
    """Solve for each Rayleigh number in ``targets`` (ascending), warm-starting each rung."""
    targets = [float(t) for t in targets]
    if not targets:
        raise ValueError("empty continuation ladder")
    if any(b <= a for a, b in zip(targets, targets[1:])):
        raise ValueError("continuation ladder must be strictly ascending")
    x = x0
    history = []
    last = None
    t0 = time.perf_counter()
    for Ra in targets:
        try:
            last = newton_solve(system, x, Ra, options)
        except ConvergenceError as exc:
            exc.state.history = history + exc.state.history
            if last is not None:
                exc.state.last_good = last
            raise
        history += last.history
        x = last.x
    last.history = history
    last.wall_time = time.perf_counter() - t0
    return last


def default_ladder(Ra: float) -> list[float]:
    """Decades from 1e4 up to ``Ra`` (e.g. 1e4, 1e5, 1e6, 1e7 for Ra = 1e7)."""
    if Ra <= 1e4:
        return [Ra]
    rungs = [10.0**k for k in range(4, int(np.floor(np.log10(Ra))) + 1) if 10.0**k < Ra]
    return rungs + [Ra]
