"""Coupled Boussinesq system: unknown layout, residual and exact Jacobian.

Unknowns are ordered component-blocked as
``[u_1 .. u_d (n_cells each), p, mu, T (cells), T (Gamma_2 faces)]``; ``mu`` is
the Lagrange multiplier of the zero-mean pressure constraint.  Blocks of
inactive equations (flow or energy) are simply absent.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from ..mesh.core import Mesh
from ..operators.clusters import ClusterPartition, build_clusters
from ..operators.diffusion import DiffusionOperator, assemble_diffusion
from ..operators.flow import TRANSPORT_MODES, FlowOperators, build_flow_operators
from ..spaces import BarycentricMap, build_barycentric_map

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    """Raised on non-finite residuals, singular systems or failed solves."""


@dataclass
class Problem:
    """Physical parameters, data and active equations.

    Callables take points of shape (n, d); ``f`` returns (n, d), the others (n,).
    ``dirichlet_tags`` lists the boundary tags forming Gamma_1 for the
    temperature; the velocity is zero on the whole boundary.
    """

    flow: bool = True
    energy: bool = True
    Pr: float = 1.0
    Ra: float = 0.0
    lam: float = 0.0
    transport: str = "centered"
    dirichlet_tags: tuple = ()
    T_b: Callable | None = None
    q_b: Callable | None = None
    f: Callable | None = None
    g: Callable | None = None

    def __post_init__(self):
        if not (self.flow or self.energy):
            raise ValueError("at least one of flow/energy must be active")
        if self.Pr <= 0:
            raise ValueError("Pr must be positive")
        if self.Ra < 0 or self.lam < 0:
            raise ValueError("Ra and lambda must be non-negative")
        if self.transport not in TRANSPORT_MODES:
            raise ValueError(f"transport must be one of {TRANSPORT_MODES}")
        self.dirichlet_tags = tuple(self.dirichlet_tags)

    @property
    def linear(self) -> bool:
        """Energy-only problems are linear (no transport without velocity)."""
        return not self.flow


@dataclass
class Layout:
    n_cells: int
    dim: int
    flow: bool
    energy: bool
    n_neumann: int

    def __post_init__(self):
        nc, d = self.n_cells, self.dim
        pos = 0
        self.u = []
        if self.flow:
            self.u = [slice(pos + i * nc, pos + (i + 1) * nc) for i in range(d)]
            pos += d * nc
            self.p = slice(pos, pos + nc)
            self.mu = slice(pos + nc, pos + nc + 1)
            pos += nc + 1
        if self.energy:
            self.T = slice(pos, pos + nc)
            self.Tn = slice(pos + nc, pos + nc + self.n_neumann)
            pos += nc + self.n_neumann
        self.size = pos


@dataclass
class FieldSet:
    """Unknowns unpacked into physical fields (zeros for inactive blocks)."""

    u: np.ndarray  # (n_cells, d)
    p: np.ndarray
    mu: float
    T: np.ndarray  # cells
    T_boundary: np.ndarray  # every boundary face, Gamma_1 values included


@dataclass
class CoupledSystem:
    mesh: Mesh
    problem: Problem
    bary: BarycentricMap | None = None
    diffusion: DiffusionOperator = field(init=False)
    clusters: ClusterPartition = field(init=False)
    flow: FlowOperators = field(init=False)
    layout: Layout = field(init=False)

    def __post_init__(self):
        m, pb = self.mesh, self.problem
        if self.bary is None:
            self.bary = build_barycentric_map(m)
        self.diffusion = assemble_diffusion(self.bary, pb.dirichlet_tags if pb.energy else ())
        if pb.energy and self.diffusion.singular:
            raise SolverError("temperature problem without Dirichlet faces is singular")
        self.clusters = build_clusters(m)
        self.flow = build_flow_operators(self.bary, self.clusters.lambda_map(pb.lam))
        nc = m.n_cells
        bf = m.boundary_faces
        self.neumann = np.nonzero(~self.diffusion.dirichlet)[0]  # positions in boundary_faces
        self.layout = Layout(nc, m.dim, pb.flow, pb.energy, len(self.neumann) if pb.energy else 0)
        A = self.diffusion.matrix
        self._A_cc = A[:nc, :nc].tocsr()
        self._vol = m.cell_volume
        self._f = (
            np.asarray(pb.f(m.cell_center), dtype=float).reshape(nc, m.dim)
            if pb.f is not None
            else np.zeros((nc, m.dim))
        )
        self._g = np.asarray(pb.g(m.cell_center), dtype=float) if pb.g is not None else np.zeros(nc)
        T_bnd = np.zeros(len(bf))
        g1 = self.diffusion.dirichlet
        if pb.energy and pb.T_b is not None and g1.any():
            T_bnd[g1] = pb.T_b(m.face_center[bf[g1]])
        self._T_dirichlet = T_bnd
        nf = bf[self.neumann]
        self._q = (
            m.face_area[nf] * np.asarray(pb.q_b(m.face_center[nf]), dtype=float)
            if pb.q_b is not None and len(nf)
            else np.zeros(len(nf))
        )
        if pb.energy:
            rows = np.concatenate([np.arange(nc), nc + self.neumann])
            self._A_T = A[rows].tocsr()  # rows for T cells and Gamma_2 faces, all columns
            free = self.diffusion.free
            self._A_T_free = self._A_T[:, free].tocsr()
        log.info(
            "system: %d cells, %d unknowns, %d clusters, flow=%s energy=%s",
            nc, self.layout.size, self.clusters.n_clusters, pb.flow, pb.energy,
        )

    # -- unpacking ---------------------------------------------------------
    @property
    def size(self) -> int:
        return self.layout.size

    def fields(self, x: np.ndarray) -> FieldSet:
        L, m = self.layout, self.mesh
        nc = m.n_cells
        if L.flow:
            u = np.column_stack([x[s] for s in L.u])
            p, mu = x[L.p], float(x[L.mu][0])
        else:
            u, p, mu = np.zeros((nc, m.dim)), np.zeros(nc), 0.0
        Tb = self._T_dirichlet.copy()
        if L.energy:
            T = x[L.T]
            Tb[self.neumann] = x[L.Tn]
        else:
            T = np.zeros(nc)
        return FieldSet(u, p, mu, T, Tb)

    def pack(self, fs: FieldSet) -> np.ndarray:
        L = self.layout
        x = np.zeros(L.size)
        if L.flow:
            for i, s in enumerate(L.u):
                x[s] = fs.u[:, i]
            x[L.p] = fs.p
            x[L.mu] = fs.mu
        if L.energy:
            x[L.T] = fs.T
            x[L.Tn] = fs.T_boundary[self.neumann]
        return x

    def zero_state(self) -> np.ndarray:
        return np.zeros(self.size)

    # -- residual ----------------------------------------------------------
    def residual_blocks(self, x: np.ndarray, Ra: float | None = None) -> dict:
        """Residual split into momentum, mass, constraint, energy and Neumann blocks."""
        pb, fs = self.problem, self.fields(x)
        Ra = pb.Ra if Ra is None else Ra
        m, fl, vol = self.mesh, self.flow, self._vol
        d = m.dim
        phi = fl.mass_flux(fs.u, fs.p) if pb.flow else None
        out = {}
        if pb.flow:
            gp = fl.pressure_gradient(fs.p) * vol[:, None]
            mom = np.empty((m.n_cells, d))
            for i in range(d):
                ui = fs.u[:, i]
                mom[:, i] = pb.Pr * (self._A_cc @ ui) + gp[:, i] + fl.transport(ui, phi, pb.transport)
                mom[:, i] -= vol * self._f[:, i]
            mom[:, d - 1] -= Ra * pb.Pr * vol * fs.T
            out["momentum"] = mom
            out["mass"] = fl.inc @ phi + vol * fs.mu
            out["constraint"] = np.array([vol @ fs.p])
        if pb.energy:
            AT = self._A_T @ np.concatenate([fs.T, fs.T_boundary])
            nc = m.n_cells
            en = AT[:nc] - vol * self._g
            if pb.flow:
                en += fl.transport(fs.T, phi, pb.transport)
            out["energy"] = en
            out["neumann"] = -AT[nc:] - self._q
        for name, r in out.items():
            bad = np.nonzero(~np.isfinite(r))[0]
            if len(bad):
                raise SolverError(f"non-finite {name} residual at row {int(bad[0])} (cell/face index)")
        return out

    def residual(self, x: np.ndarray, Ra: float | None = None) -> np.ndarray:
        b = self.residual_blocks(x, Ra)
        parts = []
        if self.problem.flow:
            parts += [b["momentum"].T.ravel(), b["mass"], b["constraint"]]
        if self.problem.energy:
            parts += [b["energy"], b["neumann"]]
        return np.concatenate(parts)

    # -- Jacobian ----------------------------------------------------------
    def jacobian(self, x: np.ndarray, Ra: float | None = None) -> sp.csr_matrix:
        """Exact derivative of :meth:`residual` with respect to all unknowns."""
        pb, fs = self.problem, self.fields(x)
        Ra = pb.Ra if Ra is None else Ra
        m, fl, vol = self.mesh, self.flow, self._vol
        d, nc = m.dim, m.n_cells
        V = sp.diags(vol)
        nT = nc + self.layout.n_neumann if pb.energy else 0
        rows = []
        if pb.flow:
            phi = fl.mass_flux(fs.u, fs.p)
            G = [-D.T for D in fl.div]
            for i in range(d):
                Jw, Jphi = fl.transport_jacobians(fs.u[:, i], phi, pb.transport)
                row = []
                for j in range(d):
                    blk = Jphi @ fl.Fu[j]
                    if i == j:
                        blk = blk + pb.Pr * self._A_cc + Jw
                    row.append(blk)
                row += [G[i] + Jphi @ fl.Fp, None]
                if pb.energy:
                    bT = -Ra * pb.Pr * V if i == d - 1 else None
                    row += [bT, None] if self.layout.n_neumann else [bT]
                rows.append(row)
            mass = [fl.div[j] for j in range(d)] + [fl.inc @ fl.Fp, sp.csr_matrix(vol[:, None])]
            cons = [None] * d + [sp.csr_matrix(vol[None, :]), None]
            if pb.energy:
                pad = [None, None] if self.layout.n_neumann else [None]
                mass += pad
                cons += pad
            rows += [mass, cons]
        if pb.energy:
            AT = self._A_T_free
            Acell, Aneu = AT[:nc], -AT[nc:]
            if pb.flow:
                Jw, Jphi = fl.transport_jacobians(fs.T, phi, pb.transport)
                Acell = Acell + sp.hstack([Jw, sp.csr_matrix((nc, nT - nc))])
                en = [Jphi @ fl.Fu[j] for j in range(d)] + [Jphi @ fl.Fp, None]
                ne = [None] * (d + 2)
            else:
                en, ne = [], []
            rows.append(en + [Acell[:, :nc]] + ([Acell[:, nc:]] if self.layout.n_neumann else []))
            if self.layout.n_neumann:
                rows.append(ne + [Aneu[:, :nc], Aneu[:, nc:]])
        J = sp.bmat(rows, format="csr")
        if J.shape != (self.size, self.size):
            raise SolverError(f"Jacobian shape {J.shape} does not match {self.size} unknowns")
        return J
