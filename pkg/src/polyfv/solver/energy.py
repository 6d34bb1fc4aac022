"""Discrete energy identities evaluated on a solver state (report only)."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .newton import SolverState


@dataclass
class EnergyReport:
    thermal_lhs: float  # |grad_D T|^2
    thermal_rhs: float  # int g P_M T
    kinetic_lhs: float  # Pr |grad_D u|^2 + sum m_sigma lambda_sigma (p_L - p_K)^2
    kinetic_rhs: float  # int (f + Ra Pr T e_d) . P_M u
    transport_T: float  # sum_K m_K div^lambda_K(T, u, p) T_K
    transport_scale: float
    mass_balance: float  # max_K |sum_sigma Phi_{K,sigma}|

    @staticmethod
    def _rel(a: float, b: float) -> float:
        s = max(abs(a), abs(b))
        return abs(a - b) / s if s > 0 else 0.0

    @property
    def thermal_rel(self) -> float:
        return self._rel(self.thermal_lhs, self.thermal_rhs)

    @property
    def kinetic_rel(self) -> float:
        return self._rel(self.kinetic_lhs, self.kinetic_rhs)

    @property
    def transport_rel(self) -> float:
        return abs(self.transport_T) / self.transport_scale if self.transport_scale > 0 else 0.0

    def as_dict(self) -> dict:
        out = asdict(self)
        out.update(thermal_rel=self.thermal_rel, kinetic_rel=self.kinetic_rel, transport_rel=self.transport_rel)
        return out


def energy_identities(state: SolverState) -> EnergyReport:
    """Both sides of the thermal and kinetic identities and the transport term.

    The thermal identity only balances for homogeneous boundary data
    (``T_b = 0``, ``q_b = 0``); it is reported regardless.
    """
    sysm = state.system
    pb, m, fl = sysm.problem, sysm.mesh, sysm.flow
    fs = state.fields
    vol = m.cell_volume
    A = sysm.diffusion.matrix
    Tfull = np.concatenate([fs.T, fs.T_boundary])
    th_l = float(Tfull @ (A @ Tfull))
    th_r = float(vol @ (sysm._g * fs.T))
    if pb.flow:
        phi = fl.mass_flux(fs.u, fs.p)
        kin_l = pb.Pr * sum(float(fs.u[:, i] @ (sysm._A_cc @ fs.u[:, i])) for i in range(m.dim))
        dp = fl.own @ fs.p - fl.nbr @ fs.p
        inner = m.interior_faces
        kin_l += float(np.sum(m.face_area[inner] * fl.lam * dp**2))
        force = sysm._f.copy()
        force[:, -1] += state.Ra * pb.Pr * fs.T
        kin_r = float(np.sum(vol[:, None] * force * fs.u))
        t = fl.transport(fs.T, phi, pb.transport)
        tr = float(t @ fs.T)
        scale = float(np.abs(phi) @ (0.5 * (np.abs(fl.own @ fs.T) + np.abs(fl.nbr @ fs.T))) ** 2)
        mb = float(np.abs(fl.inc @ phi).max())
    else:
        kin_l = kin_r = tr = scale = mb = 0.0
    return EnergyReport(th_l, th_r, kin_l, kin_r, tr, scale, mb)
