"""Manufactured solutions and the differentially heated cavity problem."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
import sympy

from ..solver.system import Problem

CAVITY_PR = 0.71
CAVITY_RA = 1e7
CAVITY_LAMBDA = 1e-8
NS_LAMBDA = 1e-8


@dataclass
class ManufacturedCase:
    """Closed-form reference fields and the sources they induce.

    Reference callables take points of shape (n, d).  ``u_ref`` returns (n, d)
    and ``grad_*`` return (n, d) or (n, d, d) for the velocity.
    """

    name: str
    dim: int
    flow: bool
    energy: bool
    Pr: float = 1.0
    Ra: float = 0.0
    T_ref: Callable | None = None
    grad_T: Callable | None = None
    u_ref: Callable | None = None
    grad_u: Callable | None = None
    p_ref: Callable | None = None
    grad_p: Callable | None = None
    f: Callable | None = None
    g: Callable | None = None
    linear_exact: bool = False
    meta: dict = field(default_factory=dict)

    def problem(self, boundary_tags, lam: float = 0.0, transport: str = "centered") -> Problem:
        """Solver problem with Gamma_1 = whole boundary for the temperature."""
        return Problem(
            flow=self.flow,
            energy=self.energy,
            Pr=self.Pr,
            Ra=self.Ra,
            lam=lam,
            transport=transport,
            dirichlet_tags=tuple(boundary_tags) if self.energy else (),
            T_b=self.T_ref,
            f=self.f,
            g=self.g,
        )


def _symbols(d):
    return sympy.symbols("x1:%d" % (d + 1), real=True)


def _lambdify(X, expr):
    """Vectorised callable of points (n, d) returning (n,) for a scalar expression."""
    fn = sympy.lambdify(X, expr, "numpy")

    def call(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = fn(*x.T)
        return np.broadcast_to(np.asarray(out, dtype=float), (x.shape[0],)).copy()

    return call


def _stack(calls, axis=-1):
    def call(x):
        return np.stack([c(x) for c in calls], axis=axis)

    return call


def poisson_linear_case(dim: int = 3) -> ManufacturedCase:
    """Affine temperature, no source: reproduced to rounding on any mesh."""
    coef = np.array([2.0, -1.0, 0.5][:dim])

    def T(x):
        return 1.0 + np.atleast_2d(x) @ coef

    def grad(x):
        return np.broadcast_to(coef, np.atleast_2d(x).shape).copy()

    def zero(x):
        return np.zeros(np.atleast_2d(x).shape[0])

    return ManufacturedCase("poisson_linear", dim, False, True, T_ref=T, grad_T=grad, g=zero, linear_exact=True)


@lru_cache(maxsize=None)
def _poisson_trig_exprs(dim):
    X = _symbols(dim)
    T = sympy.sin(sympy.pi * X[0])
    for xi in X[1:]:
        T *= sympy.cos(sympy.pi * xi)
    g = sympy.simplify(-sum(sympy.diff(T, xi, 2) for xi in X))
    return X, T, g


def poisson_trig_case(dim: int = 3) -> ManufacturedCase:
    """``T = sin(pi x1) cos(pi x2) cos(pi x3)`` with ``g = -Laplace T = d pi^2 T``."""
    X, T, g = _poisson_trig_exprs(dim)
    return ManufacturedCase(
        "poisson_trig",
        dim,
        False,
        True,
        T_ref=_lambdify(X, T),
        grad_T=_stack([_lambdify(X, sympy.diff(T, xi)) for xi in X]),
        g=_lambdify(X, g),
        meta={"T": str(T), "g": str(g)},
    )


@lru_cache(maxsize=None)
def _ns_exprs(dim, Pr):
    X = _symbols(dim)
    bump = [4 * xi * (xi - 1) for xi in X]
    if dim == 3:
        psi = bump[0] ** 3 * bump[1] ** 4 * bump[2] ** 5
        # curl of the vector potential psi (e1 + e2 + e3)
        u = [
            sympy.diff(psi, X[1]) - sympy.diff(psi, X[2]),
            sympy.diff(psi, X[2]) - sympy.diff(psi, X[0]),
            sympy.diff(psi, X[0]) - sympy.diff(psi, X[1]),
        ]
    elif dim == 2:
        psi = bump[0] ** 3 * bump[1] ** 4
        u = [sympy.diff(psi, X[1]), -sympy.diff(psi, X[0])]
    else:
        raise ValueError("dimension must be 2 or 3")
    p = sympy.Integer(1)
    for xi in X:
        p *= sympy.cos(sympy.pi * xi)
    f = [
        sum(u[j] * sympy.diff(u[i], X[j]) for j in range(dim))
        + sympy.diff(p, X[i])
        - Pr * sum(sympy.diff(u[i], xj, 2) for xj in X)
        for i in range(dim)
    ]
    return X, u, p, f


def isothermal_ns_case(dim: int = 3, Pr: float = 1.0) -> ManufacturedCase:
    """Divergence-free curl velocity and cosine pressure; ``f`` by symbolic differentiation."""
    X, u, p, f = _ns_exprs(dim, Pr)
    return ManufacturedCase(
        "ns_manufactured",
        dim,
        True,
        False,
        Pr=Pr,
        Ra=0.0,
        u_ref=_stack([_lambdify(X, ui) for ui in u]),
        # grad_u(x)[:, i, j] = d u_i / d x_j
        grad_u=_stack([_stack([_lambdify(X, sympy.diff(ui, xj)) for xj in X]) for ui in u], axis=1),
        p_ref=_lambdify(X, p),
        grad_p=_stack([_lambdify(X, sympy.diff(p, xi)) for xi in X]),
        f=_stack([_lambdify(X, fi) for fi in f]),
        meta={"u": [str(e) for e in u], "p": str(p)},
    )


def ns_divergence(dim: int = 3):
    """Callable evaluating ``div u_ref`` from the symbolic field (should vanish)."""
    X, u, _, _ = _ns_exprs(dim, 1.0)
    return _lambdify(X, sympy.simplify(sum(sympy.diff(u[i], X[i]) for i in range(dim))))


def cavity_problem(Pr: float = CAVITY_PR, Ra: float = CAVITY_RA, lam: float = CAVITY_LAMBDA,
                   transport: str = "centered", hot: float = 0.5) -> Problem:
    """Differentially heated cube: ``T = +hot`` on x1 = 0, ``-hot`` on x1 = 1, other walls adiabatic.

    Gravity acts along the last axis; the velocity vanishes on every wall.
    """

    def T_b(x):
        return np.where(x[:, 0] < 0.5, hot, -hot)

    def zero(x):
        return np.zeros(len(x))

    return Problem(
        flow=True,
        energy=True,
        Pr=Pr,
        Ra=Ra,
        lam=lam,
        transport=transport,
        dirichlet_tags=("xmin", "xmax"),
        T_b=T_b,
        q_b=zero,
    )


CASES = {
    "poisson_linear": poisson_linear_case,
    "poisson_trig": poisson_trig_case,
    "ns_manufactured": isothermal_ns_case,
}
