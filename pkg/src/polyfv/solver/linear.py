"""Sparse linear solves for the Newton corrections.

Small systems are factorised directly (deterministic).  Larger systems use
the MKL PARDISO direct solver when the optional ``pypardiso`` package can be
loaded, otherwise restarted GMRES preconditioned by an incomplete LU
factorisation.  Every path checks the achieved relative residual.
"""

from __future__ import annotations

import glob
import logging
import os
import sys
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

log = logging.getLogger(__name__)

DIRECT_LIMIT = 5000
RTOL = 1e-8
# 1-based PARDISO iparm: user settings, nested dissection, pivot perturbation 1e-8,
# scaling, weighted matching, up to 20 refinement steps.  The default 1e-13
# perturbation breaks down on the zero pressure/multiplier diagonal.
PARDISO_IPARM = {1: 1, 2: 2, 10: 8, 11: 1, 13: 1, 8: 20}
_pardiso = None


class LinearSolveError(RuntimeError):
    pass


@dataclass
class LinearStats:
    method: str
    rel_residual: float
    iterations: int = 0


def _load_pardiso():
    """Import pypardiso, pointing it at a versioned ``libmkl_rt`` if needed."""
    global _pardiso
    if _pardiso is not None:
        return _pardiso or None
    if "PYPARDISO_MKL_RT" not in os.environ:
        for root in (sys.prefix, "/usr/local", "/usr"):
            hits = sorted(glob.glob(os.path.join(root, "lib*", "libmkl_rt.so*")))
            if hits:
                os.environ["PYPARDISO_MKL_RT"] = hits[0]
                break
    try:
        import pypardiso

        _pardiso = pypardiso
    except (ImportError, OSError) as exc:
        log.info("pypardiso unavailable (%s); using GMRES/ILU for large systems", exc)
        _pardiso = False
    return _pardiso or None


def _rel(A, x, b) -> float:
    nb = np.linalg.norm(b)
    return float(np.linalg.norm(A @ x - b) / nb) if nb > 0 else float(np.linalg.norm(A @ x))


def _refine(A, b, x, solve, steps=3):
    """A few steps of iterative refinement with the same factorisation."""
    for _ in range(steps):
        if _rel(A, x, b) <= RTOL * 1e-2:
            break
        x = x + solve(b - A @ x)
    return x


def linear_solve(A: sp.spmatrix, b: np.ndarray, method: str = "auto", rtol: float = RTOL,
                 restart: int = 100, maxiter: int = 50) -> tuple[np.ndarray, LinearStats]:
    """Solve ``A x = b`` to relative residual ``rtol``.

    ``method`` is ``auto``, ``direct``, ``pardiso`` or ``gmres``.  In ``auto``
    mode a failed large-system solve falls back to the next method in line
    (pardiso, SuperLU, GMRES/ILU).
    """
    A = sp.csr_matrix(A)
    A.sort_indices()
    b = np.asarray(b, dtype=float)
    if method != "auto":
        return _solve(A, b, method, rtol, restart, maxiter)
    if A.shape[0] < DIRECT_LIMIT:
        return _solve(A, b, "direct", rtol, restart, maxiter)
    chain = (["pardiso"] if _load_pardiso() else []) + ["direct", "gmres"]
    for i, name in enumerate(chain):
        try:
            return _solve(A, b, name, rtol, restart, maxiter)
        except (LinearSolveError, RuntimeError) as exc:
            if i == len(chain) - 1:
                raise
            log.warning("%s solve failed (%s); trying %s", name, exc, chain[i + 1])


def _solve(A, b, method, rtol, restart, maxiter):
    if method == "direct":
        lu = spla.splu(A.tocsc())
        x = _refine(A, b, lu.solve(b), lu.solve)
        its = 0
    elif method == "pardiso":
        pp = _load_pardiso()
        if pp is None:
            raise LinearSolveError("pardiso requested but pypardiso is not available")
        solver = pp.PyPardisoSolver()
        for k, v in PARDISO_IPARM.items():
            solver.set_iparm(k, v)
        solver.factorize(A)
        x = _refine(A, b, solver.solve(A, b), lambda r: solver.solve(A, r))
        solver.free_memory(everything=True)
        its = 0
    elif method == "gmres":
        ilu = spla.spilu(A.tocsc(), drop_tol=1e-5, fill_factor=20)
        M = spla.LinearOperator(A.shape, ilu.solve)
        count = [0]

        def cb(_):
            count[0] += 1

        x, info = spla.gmres(A, b, M=M, rtol=rtol, restart=restart, maxiter=maxiter,
                             callback=cb, callback_type="pr_norm")
        its = count[0]
        if info != 0:
            raise LinearSolveError(f"GMRES did not converge (info={info}, residual {_rel(A, x, b):.3e})")
    else:
        raise ValueError(f"unknown linear method {method!r}")
    rel = _rel(A, x, b)
    if not np.isfinite(rel) or rel > rtol:
        raise LinearSolveError(f"{method} solve reached relative residual {rel:.3e} > {rtol:.1e}")
    return x, LinearStats(method, rel, its)
