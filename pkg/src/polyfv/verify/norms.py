"""Relative error norms and least-squares convergence orders."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..operators.gradient import GradientOperators, cell_gradients


@dataclass(frozen=True)
class ErrorNorms:
    eps_inf: float
    eps_2: float
    eps_h1: float

    def as_dict(self) -> dict:
        return {"epsinf": self.eps_inf, "eps2": self.eps_2, "epsH1": self.eps_h1}


def error_norms(grads: GradientOperators, values: np.ndarray, boundary: np.ndarray, reference,
                reference_grad=None) -> ErrorNorms:
    """Relative max, L2 and H1 errors of a scalar discrete field against ``reference``.

    ``values`` are the cell unknowns and ``boundary`` the boundary-face values
    (``mesh.boundary_faces`` order) needed by the cell gradient ``grad_K``.
    All norms are evaluated at the collocation points with weights ``m_K``.
    """
    m = grads.bary.mesh
    xk = m.cell_center
    vol = m.cell_volume
    ref = np.asarray(reference(xk), dtype=float)
    if not np.any(ref):
        raise ValueError("reference vanishes at every collocation point; relative norm undefined")
    err = values - ref
    e_inf = np.abs(err).max() / np.abs(ref).max()
    e_2 = np.sqrt(vol @ err**2 / (vol @ ref**2))
    e_h1 = np.nan
    if reference_grad is not None:
        gd = cell_gradients(grads, np.concatenate([values, boundary]))
        gr = np.asarray(reference_grad(xk), dtype=float)
        den = vol @ np.sum(gr**2, axis=1)
        if den == 0:
            raise ValueError("reference gradient vanishes; relative H1 norm undefined")
        e_h1 = np.sqrt(vol @ np.sum((gd - gr) ** 2, axis=1) / den)
    return ErrorNorms(float(e_inf), float(e_2), float(e_h1))


def convergence_order(h, eps) -> float:
    """Least-squares slope of ``log eps`` against ``log h`` (at least 3 points)."""
    h = np.asarray(h, dtype=float)
    eps = np.asarray(eps, dtype=float)
    if h.shape != eps.shape or h.size < 3:
        raise ValueError("need at least 3 (h, eps) pairs")
    if np.any(h <= 0) or np.any(eps <= 0):
        raise ValueError("h and eps must be positive")
    return float(np.polyfit(np.log(h), np.log(eps), 1)[0])
