"""Point-wise physics for the 2D compressible equations with gravity.

The conserved state is U = (rho, rho*u, rho*w, rho*theta) where theta is
the potential temperature; pressure closes the system through
p = p0 * (R_d * rho * theta / p0)**gamma. All functions are vectorized
over leading axes, with the component axis last.

The well-balanced formulation evolves perturbations U' around a steady
background atmosphere; the pert_* variants return exactly zero for a zero
perturbation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

# component indices
RHO, RHO_U, RHO_W, RHO_THETA = 0, 1, 2, 3


class InadmissibleStateError(ValueError):
    """A state with non-positive density, rho*theta, or star pressure."""

    def __init__(self, message: str, location=None):
        super().__init__(message)
        self.location = location


@dataclass(frozen=True)
class PhysConstants:
    """Gas and problem constants.

    mu is a kinematic-viscosity-like coefficient multiplying rho in the
    diffusive flux; p0 is the reference pressure of the potential
    temperature.
    """

    c_p: float
    c_v: float
    g: float = 9.81
    mu: float = 0.0
    p0: float = 1.0e5

    def __post_init__(self):
        if not self.c_p > self.c_v > 0:
            raise ValueError(f"need c_p > c_v > 0, got c_p={self.c_p}, c_v={self.c_v}")
        if self.mu < 0:
            raise ValueError(f"viscosity coefficient must be nonnegative, got {self.mu}")

    @property
    def R_d(self) -> float:
        return self.c_p - self.c_v

    @property
    def gamma(self) -> float:
        return self.c_p / self.c_v


def pressure(U: np.ndarray, c: PhysConstants) -> np.ndarray:
    """Pressure from rho*theta: p = p0 (R_d rho theta / p0)**gamma."""
    rt = np.asarray(U)[..., RHO_THETA]
    if np.any(rt <= 0.0):
        raise InadmissibleStateError("non-positive rho*theta in pressure evaluation")
    return c.p0 * (c.R_d * rt / c.p0) ** c.gamma


def sound_speed(U: np.ndarray, c: PhysConstants) -> np.ndarray:
    rho = np.asarray(U)[..., RHO]
    if np.any(rho <= 0.0):
        raise InadmissibleStateError("non-positive density in sound speed evaluation")
    return np.sqrt(c.gamma * pressure(U, c) / rho)


def max_wave_speed(U: np.ndarray, n: np.ndarray, c: PhysConstants) -> np.ndarray:
    """|v . n| + sound speed, for CFL estimates and pseudo-time steps."""
    U = np.asarray(U)
    vn = (U[..., RHO_U] * n[0] + U[..., RHO_W] * n[1]) / U[..., RHO]
    return np.abs(vn) + sound_speed(U, c)


def flux_convective(U: np.ndarray, c: PhysConstants) -> np.ndarray:
    """Convective flux tensor, shape (..., 4, 2); column 0 is the x-flux."""
    U = np.asarray(U)
    p = pressure(U, c)
    rho = U[..., RHO]
    u = U[..., RHO_U] / rho
    w = U[..., RHO_W] / rho
    F = np.empty(U.shape + (2,))
    F[..., RHO, 0] = U[..., RHO_U]
    F[..., RHO_U, 0] = U[..., RHO_U] * u + p
    F[..., RHO_W, 0] = U[..., RHO_W] * u
    F[..., RHO_THETA, 0] = U[..., RHO_THETA] * u
    F[..., RHO, 1] = U[..., RHO_W]
    F[..., RHO_U, 1] = U[..., RHO_U] * w
    F[..., RHO_W, 1] = U[..., RHO_W] * w + p
    F[..., RHO_THETA, 1] = U[..., RHO_THETA] * w
    return F


def flux_convective_xz(U: np.ndarray, c: PhysConstants) -> tuple[np.ndarray, np.ndarray]:
    """Convective flux columns as two contiguous arrays (hot-path form of
    flux_convective)."""
    U = np.asarray(U)
    p = pressure(U, c)
    rho = U[..., RHO]
    u = U[..., RHO_U] / rho
    w = U[..., RHO_W] / rho
    Fx = np.empty_like(U)
    Fx[..., RHO] = U[..., RHO_U]
    Fx[..., RHO_U] = U[..., RHO_U] * u + p
    Fx[..., RHO_W] = U[..., RHO_W] * u
    Fx[..., RHO_THETA] = U[..., RHO_THETA] * u
    Fz = np.empty_like(U)
    Fz[..., RHO] = U[..., RHO_W]
    Fz[..., RHO_U] = U[..., RHO_U] * w
    Fz[..., RHO_W] = U[..., RHO_W] * w + p
    Fz[..., RHO_THETA] = U[..., RHO_THETA] * w
    return Fx, Fz


def flux_viscous(U: np.ndarray, grad_prims: np.ndarray, c: PhysConstants) -> np.ndarray:
    """Diffusive flux mu*rho*(0, grad u, grad w, grad theta), shape (..., 4, 2).

    grad_prims holds the gradients of the primitive fields (u, w, theta)
    with shape (..., 3, 2), last axis (d/dx, d/dz).
    """
    U = np.asarray(U)
    F = np.zeros(U.shape + (2,))
    if c.mu == 0.0:
        return F
    scale = c.mu * U[..., RHO, None, None]
    F[..., 1:, :] = scale * np.asarray(grad_prims)
    return F


def source_gravity(U: np.ndarray, c: PhysConstants) -> np.ndarray:
    """Gravity source (0, 0, -rho g, 0)."""
    U = np.asarray(U)
    S = np.zeros_like(U)
    S[..., RHO_W] = -U[..., RHO] * c.g
    return S


def _hllc_normal(UL: np.ndarray, UR: np.ndarray, axis: int, c: PhysConstants):
    """HLLC flux in the face frame for grid-aligned normals.

    axis 0 means normal +x (tangential w); axis 1 means normal +z. Returns
    the four flux components (mass, normal momentum, tangential momentum,
    rho*theta) in the face frame. Wave speeds use the Davis bounds; theta
    and the tangential velocity ride the contact wave.

    Uses the branchless form: clipping the outer wave speeds to
    min(S_L, 0) / max(S_R, 0) folds the supersonic cases into the star
    fluxes, so only the contact sign selects a side.
    """
    mn, mt = 1 + axis, 2 - axis
    rhoL, rhoR = UL[..., RHO], UR[..., RHO]
    rtL, rtR = UL[..., RHO_THETA], UR[..., RHO_THETA]
    if (
        np.any(rhoL <= 0.0) or np.any(rhoR <= 0.0)
        or np.any(rtL <= 0.0) or np.any(rtR <= 0.0)
    ):
        raise InadmissibleStateError("non-positive density or rho*theta passed to HLLC")
    unL, unR = UL[..., mn] / rhoL, UR[..., mn] / rhoR
    utL, utR = UL[..., mt] / rhoL, UR[..., mt] / rhoR
    pL = c.p0 * (c.R_d * rtL / c.p0) ** c.gamma
    pR = c.p0 * (c.R_d * rtR / c.p0) ** c.gamma
    cL = np.sqrt(c.gamma * pL / rhoL)
    cR = np.sqrt(c.gamma * pR / rhoR)

    SL = np.minimum(unL - cL, unR - cR)
    SR = np.maximum(unL + cL, unR + cR)
    dL = rhoL * (SL - unL)
    dR = rhoR * (SR - unR)
    SM = (pR - pL + unL * dL - unR * dR) / (dL - dR)
    p_star = pL + dL * (SM - unL)
    if np.any(p_star <= 0.0) or np.any(SM <= SL) or np.any(SM >= SR):
        raise InadmissibleStateError("vacuum or negative-pressure HLLC star state")

    left = SM >= 0.0
    S = np.where(left, np.minimum(SL, 0.0), np.maximum(SR, 0.0))
    rho = np.where(left, rhoL, rhoR)
    un = np.where(left, unL, unR)
    ut = np.where(left, utL, utR)
    rt = np.where(left, rtL, rtR)
    p = np.where(left, pL, pR)
    Sd = np.where(left, SL, SR)
    fac = (Sd - un) / (Sd - SM)
    drho = rho * (fac - 1.0)
    m = rho * un
    f0 = m + S * drho
    f1 = m * un + p + S * (rho * fac * SM - m)
    f2 = (m + S * drho) * ut
    f3 = (un + S * (fac - 1.0)) * rt
    return f0, f1, f2, f3


def hllc_flux_axis(UL: np.ndarray, UR: np.ndarray, axis: int, c: PhysConstants) -> np.ndarray:
    """HLLC flux through a face with normal +x (axis=0) or +z (axis=1)."""
    UL, UR = np.asarray(UL), np.asarray(UR)
    f_rho, f_n, f_t, f_rt = _hllc_normal(UL, UR, axis, c)
    F = np.empty(np.broadcast(UL, UR).shape)
    F[..., RHO] = f_rho
    F[..., 1 + axis] = f_n
    F[..., 2 - axis] = f_t
    F[..., RHO_THETA] = f_rt
    return F


def hllc_flux(UL: np.ndarray, UR: np.ndarray, n, c: PhysConstants) -> np.ndarray:
    """HLLC flux for an arbitrary unit normal n = (n_x, n_z).

    Consistent (equal states give F_c(U) . n) and conservative
    (hllc(UL, UR, n) == -hllc(UR, UL, -n)).
    """
    UL, UR = np.asarray(UL), np.asarray(UR)
    nx, nz = float(n[0]), float(n[1])
    tx, tz = -nz, nx
    def rotate(U):
        V = U.copy()
        V[..., RHO_U] = U[..., RHO_U] * nx + U[..., RHO_W] * nz
        V[..., RHO_W] = U[..., RHO_U] * tx + U[..., RHO_W] * tz
        return V

    f_rho, f_n, f_t, f_rt = _hllc_normal(rotate(UL), rotate(UR), 0, c)
    F = np.empty(np.broadcast(UL, UR).shape)
    F[..., RHO] = f_rho
    F[..., RHO_U] = f_n * nx + f_t * tx
    F[..., RHO_W] = f_n * nz + f_t * tz
    F[..., RHO_THETA] = f_rt
    return F


def wall_flux_axis(U_in: np.ndarray, axis: int, c: PhysConstants,
                   ghost_on_left: bool) -> np.ndarray:
    """Slip-wall flux from the mirrored-ghost Riemann problem.

    The ghost state negates the normal momentum of the interior trace;
    ghost_on_left says which side of the face (in global +axis
    orientation) the wall is on. For the mirrored problem the contact
    sits on the wall, so the mass, tangential-momentum and rho*theta
    fluxes vanish identically; they are zeroed exactly here and only the
    normal-momentum (pressure) flux of the HLLC solve is kept.
    """
    U_in = np.asarray(U_in)
    ghost = U_in.copy()
    ghost[..., 1 + axis] = -ghost[..., 1 + axis]
    if ghost_on_left:
        _, f_n, _, _ = _hllc_normal(ghost, U_in, axis, c)
    else:
        _, f_n, _, _ = _hllc_normal(U_in, ghost, axis, c)
    F = np.zeros_like(U_in)
    F[..., 1 + axis] = f_n
    return F


@dataclass(frozen=True)
class Atmosphere:
    """Steady background state, defined by theta and pressure profiles.

    Conserved backgrounds follow from pressure preservation:
    rho*theta = p0**(R_d/c_p) * p**(1/gamma) / R_d depends on pressure only,
    so perturbing theta at fixed pressure leaves rho*theta unchanged.
    """

    constants: PhysConstants
    theta: Callable[[np.ndarray, np.ndarray], np.ndarray]
    pressure: Callable[[np.ndarray, np.ndarray], np.ndarray]
    u: float = 0.0
    w: float = 0.0

    def state(self, x, z, theta_pert=None) -> np.ndarray:
        """Conserved state at (x, z), optionally with a theta perturbation
        inserted pressure-preservingly."""
        c = self.constants
        x, z = np.asarray(x, dtype=float), np.asarray(z, dtype=float)
        th = self.theta(x, z)
        if theta_pert is not None:
            th = th + theta_pert
        p = self.pressure(x, z)
        rho_theta = c.p0 ** (c.R_d / c.c_p) * p ** (1.0 / c.gamma) / c.R_d
        rho = rho_theta / th
        U = np.empty(np.broadcast(rho, rho_theta).shape + (4,))
        U[..., RHO] = rho
        U[..., RHO_U] = rho * self.u
        U[..., RHO_W] = rho * self.w
        U[..., RHO_THETA] = rho_theta
        return U


def pert_flux_convective(Up, x, z, atm: Atmosphere, c: PhysConstants) -> np.ndarray:
    """F_c(U' + Ubar) - F_c(Ubar); exactly zero for U' = 0."""
    Ub = atm.state(x, z)
    return flux_convective(np.asarray(Up) + Ub, c) - flux_convective(Ub, c)


def pert_source(Up, x, z, atm: Atmosphere, c: PhysConstants) -> np.ndarray:
    """Gravity source of the perturbation system, (0, 0, -rho' g, 0)."""
    return source_gravity(np.asarray(Up), c)


def pert_hllc(UpL, UpR, x, z, n, atm: Atmosphere, c: PhysConstants) -> np.ndarray:
    """HLLC flux difference against the background at the face point."""
    Ub = atm.state(x, z)
    return hllc_flux(np.asarray(UpL) + Ub, np.asarray(UpR) + Ub, n, c) - hllc_flux(
        Ub, Ub, n, c
    )
