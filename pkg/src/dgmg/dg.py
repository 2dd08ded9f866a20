"""Nodal tensor-product DG discretization of the perturbation system.

The solution is stored nodally at tensor Gauss-Legendre points, so the
mass matrix is diagonal and volume integrals collocate with the nodes.
Field layout: array of shape (nz, nx, p, p, 4) with axes (cell row,
cell column, z-node, x-node, component) and p = k + 1.

The spatial operator returns f(U') = M^-1 L(U') for the well-balanced
perturbation equations: volume fluxes and sources are differences against
the background, face fluxes are HLLC differences against the background
numerical flux evaluated through the identical code path, which makes
f(0) = 0 bit-exact.
"""

from __future__ import annotations

import numpy as np

from . import physics
from .mesh import BoundaryKind, GridHierarchy, SubgridMap
from .physics import InadmissibleStateError, PhysConstants
from .quadrature import gauss_legendre


class DGBasis:
    """1D Lagrange basis on Gauss-Legendre nodes of [0, 1].

    Carries the differentiation matrix, its weak (mass-scaled) form, the
    trace vectors at the interval ends and the diagonal mass weights.
    """

    def __init__(self, k: int):
        rule = gauss_legendre(k)
        self.k = k
        self.p = k + 1
        self.nodes = rule.nodes
        self.weights = rule.weights
        # barycentric weights
        diff = self.nodes[:, None] - self.nodes[None, :]
        np.fill_diagonal(diff, 1.0)
        self.bary = 1.0 / np.prod(diff, axis=1)
        # D[i, j] = l_j'(node_i)
        D = np.zeros((self.p, self.p))
        for i in range(self.p):
            for j in range(self.p):
                if i != j:
                    D[i, j] = (self.bary[j] / self.bary[i]) / (
                        self.nodes[i] - self.nodes[j]
                    )
        np.fill_diagonal(D, -D.sum(axis=1))
        self.diff = D
        # weak-form matrix: (Dhat F)_i = sum_m (w_m / w_i) l_i'(node_m) F_m
        self.dhat = (self.weights[None, :] / self.weights[:, None]) * D.T
        self.e0 = self.eval_matrix(np.array([0.0]))[0]
        self.e1 = self.eval_matrix(np.array([1.0]))[0]
        self.traces = np.stack([self.e0, self.e1])
        self.lift0 = self.e0 / self.weights
        self.lift1 = self.e1 / self.weights

    def eval_matrix(self, pts: np.ndarray) -> np.ndarray:
        """Values of every Lagrange basis function at pts, shape (npts, p)."""
        pts = np.atleast_1d(np.asarray(pts, dtype=float))
        diff = pts[:, None] - self.nodes[None, :]
        hit = diff == 0.0
        safe = np.where(hit, 1.0, diff)
        terms = self.bary[None, :] / safe
        out = terms / terms.sum(axis=1, keepdims=True)
        rows = hit.any(axis=1)
        out[rows] = hit[rows].astype(float)
        return out


class DGOperator:
    """Spatial operator for one case on the DG level of a hierarchy.

    Precomputes node coordinates and all background data (volume states,
    face states, background numerical fluxes) at construction; the
    per-call work is pure vectorized arithmetic. Instances count their
    invocations in ncalls.
    """

    def __init__(self, hierarchy: GridHierarchy, subgrid: SubgridMap, basis: DGBasis, case):
        self.hierarchy = hierarchy
        self.subgrid = subgrid
        self.basis = basis
        self.case = case
        self.constants: PhysConstants = case.constants
        lvl = subgrid.dg_level
        self.level = lvl
        self.nx = hierarchy.nx[lvl]
        self.nz = hierarchy.nz[lvl]
        self.dx = hierarchy.dx[lvl]
        self.dz = hierarchy.dz[lvl]
        self.ncalls = 0

        p = basis.p
        dom = hierarchy.domain
        self.x_edges = dom.x_min + self.dx * np.arange(self.nx + 1)
        self.z_edges = dom.z_min + self.dz * np.arange(self.nz + 1)
        # node coordinates per cell: xn[cell, node]
        self.xn = self.x_edges[:-1, None] + self.dx * basis.nodes[None, :]
        self.zn = self.z_edges[:-1, None] + self.dz * basis.nodes[None, :]
        # volume node coordinate arrays, shape (nz, nx, p, p)
        self.X = np.broadcast_to(
            self.xn[None, :, None, :], (self.nz, self.nx, p, p)
        ).copy()
        self.Z = np.broadcast_to(
            self.zn[:, None, :, None], (self.nz, self.nx, p, p)
        ).copy()

        atm = case.atmosphere
        self.bg_vol = atm.state(self.X, self.Z)
        self.bg_Fx, self.bg_Fz = physics.flux_convective_xz(self.bg_vol, self.constants)

        # x-face background: faces indexed 0..nx, nodes along z
        Xf = np.broadcast_to(self.x_edges[None, :, None], (self.nz, self.nx + 1, p))
        Zf = np.broadcast_to(self.zn[:, None, :], (self.nz, self.nx + 1, p))
        self.bg_xface = atm.state(Xf, Zf)
        # z-face background: faces 0..nz, nodes along x
        Xg = np.broadcast_to(self.xn[None, :, :], (self.nz + 1, self.nx, p))
        Zg = np.broadcast_to(self.z_edges[:, None, None], (self.nz + 1, self.nx, p))
        self.bg_zface = atm.state(Xg, Zg)

        west, east, south, north = case.bc
        self.periodic_x = west is BoundaryKind.PERIODIC
        self.periodic_z = south is BoundaryKind.PERIODIC
        if (west is BoundaryKind.PERIODIC) != (east is BoundaryKind.PERIODIC):
            raise ValueError("periodic boundaries must be paired in x")
        if (south is BoundaryKind.PERIODIC) != (north is BoundaryKind.PERIODIC):
            raise ValueError("periodic boundaries must be paired in z")

        c = self.constants
        # background numerical fluxes, evaluated through the same HLLC/wall
        # code path as the runtime fluxes so the U'=0 difference is bit-exact
        self.bg_hflux_x = np.zeros_like(self.bg_xface)
        self.bg_hflux_x[:, 1:-1] = physics.hllc_flux_axis(
            self.bg_xface[:, 1:-1], self.bg_xface[:, 1:-1], 0, c
        )
        if self.periodic_x:
            self.bg_hflux_x[:, 0] = physics.hllc_flux_axis(
                self.bg_xface[:, 0], self.bg_xface[:, 0], 0, c
            )
            self.bg_hflux_x[:, -1] = self.bg_hflux_x[:, 0]
        else:
            self.bg_hflux_x[:, 0] = physics.wall_flux_axis(
                self.bg_xface[:, 0], 0, c, ghost_on_left=True
            )
            self.bg_hflux_x[:, -1] = physics.wall_flux_axis(
                self.bg_xface[:, -1], 0, c, ghost_on_left=False
            )
        self.bg_hflux_z = np.zeros_like(self.bg_zface)
        self.bg_hflux_z[1:-1] = physics.hllc_flux_axis(
            self.bg_zface[1:-1], self.bg_zface[1:-1], 1, c
        )
        if self.periodic_z:
            self.bg_hflux_z[0] = physics.hllc_flux_axis(
                self.bg_zface[0], self.bg_zface[0], 1, c
            )
            self.bg_hflux_z[-1] = self.bg_hflux_z[0]
        else:
            self.bg_hflux_z[0] = physics.wall_flux_axis(
                self.bg_zface[0], 1, c, ghost_on_left=True
            )
            self.bg_hflux_z[-1] = physics.wall_flux_axis(
                self.bg_zface[-1], 1, c, ghost_on_left=False
            )

        # interior-penalty coefficient eta/h with eta = (k+1)^2
        self.pen_x = p * p / self.dx
        self.pen_z = p * p / self.dz

        if c.mu > 0.0:
            # discrete viscous flux of the background itself; analytically
            # zero for the constant-primitive atmospheres used with mu > 0,
            # subtracted as a grouped difference so that the perturbation
            # operator vanishes bit-exactly on U' = 0
            Vb, Gxb, Gzb = self._primitive_gradients(self.bg_vol)
            rb = self.bg_vol[..., physics.RHO, None]
            self.bg_visc_vol_x = c.mu * rb * Gxb
            self.bg_visc_vol_z = c.mu * rb * Gzb
            self.bg_hvx, self.bg_hvz = self._viscous_face_fluxes(
                Vb, Gxb, Gzb,
                self.bg_xface[:, :-1], self.bg_xface[:, 1:],
                self.bg_zface[:-1], self.bg_zface[1:],
            )

        w2d = basis.weights[:, None] * basis.weights[None, :]
        w = np.broadcast_to(
            (self.dx * self.dz * w2d)[None, None, :, :, None],
            (self.nz, self.nx, p, p, 4),
        )
        self.norm_weights = (w / w.sum()).copy()
        self._mass_scale = self.dx * self.dz * w2d

    # -- small helpers -------------------------------------------------

    def zero_field(self) -> np.ndarray:
        p = self.basis.p
        return np.zeros((self.nz, self.nx, p, p, 4))

    def project(self, fn) -> np.ndarray:
        """Nodal interpolation of fn(x, z) -> (..., 4) at the GL points.

        Under the diagonal mass matrix this coincides with the L2
        projection onto the discrete space; polynomials of degree <= k per
        direction are reproduced exactly.
        """
        return np.asarray(fn(self.X, self.Z), dtype=float)

    def total_mass(self, field: np.ndarray, component: int | None = None):
        """Integral of the field over the domain (exact for DG polynomials)."""
        m = np.einsum("ab,zxabc->c", self._mass_scale, field)
        return m if component is None else float(m[component])

    def _admissible(self, full: np.ndarray, where: str):
        bad = np.minimum(full[..., physics.RHO], full[..., physics.RHO_THETA])
        if np.all(bad > 0.0):
            return
        idx = np.unravel_index(np.argmin(bad), bad.shape)
        loc = (self.level, int(idx[1]), int(idx[0]))
        raise InadmissibleStateError(
            f"inadmissible total state at {where}, cell (level={loc[0]}, i={loc[1]}, j={loc[2]})",
            location=loc,
        )

    def max_wave_speeds(self, Up: np.ndarray):
        """Per-cell directional max wave speeds (|u|+c, |w|+c) of U'+Ubar."""
        full = Up + self.bg_vol
        cs = physics.sound_speed(full, self.constants)
        lx = np.abs(full[..., physics.RHO_U] / full[..., physics.RHO]) + cs
        lz = np.abs(full[..., physics.RHO_W] / full[..., physics.RHO]) + cs
        return lx.max(axis=(2, 3)), lz.max(axis=(2, 3))

    def stable_dt(self, Up: np.ndarray, cfl: float = 0.8) -> float:
        """CFL-based explicit step from the current maximum wave speeds;
        the stability limit of the SSP(4,3) scheme sits near cfl = 1 in
        this normalization."""
        lx, lz = self.max_wave_speeds(Up)
        fac = 2 * self.basis.k + 1
        rate = fac * (lx / self.dx + lz / self.dz)
        mu = self.constants.mu
        if mu > 0.0:
            rate = rate + 2.0 * mu * fac * fac * (1.0 / self.dx**2 + 1.0 / self.dz**2)
        return cfl / float(rate.max())

    # -- the operator --------------------------------------------------

    def __call__(self, Up: np.ndarray, t: float = 0.0) -> np.ndarray:
        self.ncalls += 1
        c = self.constants
        b = self.basis
        nz, nx, p = self.nz, self.nx, b.p

        full = Up + self.bg_vol
        self._admissible(full, "volume node")

        # volume flux difference against the background
        Fx, Fz = physics.flux_convective_xz(full, c)
        Fx -= self.bg_Fx
        Fz -= self.bg_Fz

        mu = c.mu
        if mu > 0.0:
            V, dVdx, dVdz = self._primitive_gradients(full)
            rho = full[..., physics.RHO]
            Fx[..., 1:] -= mu * rho[..., None] * dVdx - self.bg_visc_vol_x
            Fz[..., 1:] -= mu * rho[..., None] * dVdz - self.bg_visc_vol_z

        # contractions as broadcasted GEMMs on contiguous views:
        # x-direction contracts axis 3 of (nz, nx, p, p, 4) seen as
        # (nz*nx*p, p, 4); z-direction contracts axis 2 seen as
        # (nz*nx, p, p*4)
        rhs = (b.dhat @ Fx.reshape(-1, p, 4)).reshape(nz, nx, p, p, 4) / self.dx
        rhs += (b.dhat @ Fz.reshape(nz * nx, p, p * 4)).reshape(nz, nx, p, p, 4) / self.dz
        rhs[..., physics.RHO_W] -= c.g * Up[..., physics.RHO]

        # traces of the perturbation, then full face states
        tx = (b.traces @ Up.reshape(-1, p, 4)).reshape(nz, nx, p, 2, 4)
        Uw, Ue = tx[..., 0, :], tx[..., 1, :]
        tz = (b.traces @ Up.reshape(nz * nx, p, p * 4)).reshape(nz, nx, 2, p, 4)
        Us, Un = tz[..., 0, :, :], tz[..., 1, :, :]
        UwF = Uw + self.bg_xface[:, :-1]
        UeF = Ue + self.bg_xface[:, 1:]
        UsF = Us + self.bg_zface[:-1]
        UnF = Un + self.bg_zface[1:]
        self._admissible(UwF, "west trace")
        self._admissible(UeF, "east trace")
        self._admissible(UsF, "south trace")
        self._admissible(UnF, "north trace")

        Hx = np.empty((nz, nx + 1, p, 4))
        Hx[:, 1:-1] = physics.hllc_flux_axis(UeF[:, :-1], UwF[:, 1:], 0, c)
        if self.periodic_x:
            wrap_left = Ue[:, -1] + self.bg_xface[:, 0]
            Hx[:, 0] = physics.hllc_flux_axis(wrap_left, UwF[:, 0], 0, c)
            Hx[:, -1] = Hx[:, 0]
        else:
            Hx[:, 0] = physics.wall_flux_axis(UwF[:, 0], 0, c, ghost_on_left=True)
            Hx[:, -1] = physics.wall_flux_axis(UeF[:, -1], 0, c, ghost_on_left=False)
        Hx -= self.bg_hflux_x

        Hz = np.empty((nz + 1, nx, p, 4))
        Hz[1:-1] = physics.hllc_flux_axis(UnF[:-1], UsF[1:], 1, c)
        if self.periodic_z:
            wrap_bot = Un[-1] + self.bg_zface[0]
            Hz[0] = physics.hllc_flux_axis(wrap_bot, UsF[0], 1, c)
            Hz[-1] = Hz[0]
        else:
            Hz[0] = physics.wall_flux_axis(UsF[0], 1, c, ghost_on_left=True)
            Hz[-1] = physics.wall_flux_axis(UnF[-1], 1, c, ghost_on_left=False)
        Hz -= self.bg_hflux_z

        if mu > 0.0:
            hvx, hvz = self._viscous_face_fluxes(V, dVdx, dVdz, UwF, UeF, UsF, UnF)
            Hx[..., 1:] -= hvx - self.bg_hvx
            Hz[..., 1:] -= hvz - self.bg_hvz

        l0x = b.lift0.reshape(1, 1, 1, p, 1)
        l1x = b.lift1.reshape(1, 1, 1, p, 1)
        rhs -= (Hx[:, 1:, :, None, :] * l1x - Hx[:, :-1, :, None, :] * l0x) / self.dx
        l0z = b.lift0.reshape(1, 1, p, 1, 1)
        l1z = b.lift1.reshape(1, 1, p, 1, 1)
        rhs -= (Hz[1:, :, None, :, :] * l1z - Hz[:-1, :, None, :, :] * l0z) / self.dz
        return rhs

    def _primitive_gradients(self, full: np.ndarray):
        """Primitives (u, w, theta) at the nodes and their per-cell
        polynomial gradients."""
        b = self.basis
        rho = full[..., physics.RHO]
        V = np.stack(
            [
                full[..., physics.RHO_U] / rho,
                full[..., physics.RHO_W] / rho,
                full[..., physics.RHO_THETA] / rho,
            ],
            axis=-1,
        )
        nz, nx, p = self.nz, self.nx, b.p
        dVdx = (b.diff @ V.reshape(-1, p, 3)).reshape(nz, nx, p, p, 3) / self.dx
        dVdz = (b.diff @ V.reshape(nz * nx, p, p * 3)).reshape(nz, nx, p, p, 3) / self.dz
        return V, dVdx, dVdz

    def _viscous_face_fluxes(self, V, dVdx, dVdz, UwF, UeF, UsF, UnF):
        """Interior-penalty viscous face flux: average of mu*rho*grad_n
        plus an eta/h penalty on the primitive jump; zero through slip
        walls. Returns per-face arrays for the (u, w, theta) rows."""
        b = self.basis
        mu = self.constants.mu
        p = b.p

        def ip_flux(rho_L, G_L, V_L, rho_R, G_R, V_R, pen):
            avg = 0.5 * mu * (rho_L[..., None] * G_L + rho_R[..., None] * G_R)
            jump = 0.5 * mu * pen * (rho_L + rho_R)[..., None] * (V_L - V_R)
            return avg - jump

        Vw = np.einsum("b,zxabq->zxaq", b.e0, V)
        Ve = np.einsum("b,zxabq->zxaq", b.e1, V)
        Gw = np.einsum("b,zxabq->zxaq", b.e0, dVdx)
        Ge = np.einsum("b,zxabq->zxaq", b.e1, dVdx)
        rho_w = UwF[..., physics.RHO]
        rho_e = UeF[..., physics.RHO]
        hvx = np.zeros((self.nz, self.nx + 1, p, 3))
        hvx[:, 1:-1] = ip_flux(
            rho_e[:, :-1], Ge[:, :-1], Ve[:, :-1],
            rho_w[:, 1:], Gw[:, 1:], Vw[:, 1:],
            self.pen_x,
        )
        if self.periodic_x:
            hvx[:, 0] = ip_flux(
                rho_e[:, -1], Ge[:, -1], Ve[:, -1],
                rho_w[:, 0], Gw[:, 0], Vw[:, 0],
                self.pen_x,
            )
            hvx[:, -1] = hvx[:, 0]

        Vs = np.einsum("a,zxabq->zxbq", b.e0, V)
        Vn = np.einsum("a,zxabq->zxbq", b.e1, V)
        Gs = np.einsum("a,zxabq->zxbq", b.e0, dVdz)
        Gn = np.einsum("a,zxabq->zxbq", b.e1, dVdz)
        rho_s = UsF[..., physics.RHO]
        rho_n = UnF[..., physics.RHO]
        hvz = np.zeros((self.nz + 1, self.nx, p, 3))
        hvz[1:-1] = ip_flux(
            rho_n[:-1], Gn[:-1], Vn[:-1],
            rho_s[1:], Gs[1:], Vs[1:],
            self.pen_z,
        )
        if self.periodic_z:
            hvz[0] = ip_flux(
                rho_n[-1], Gn[-1], Vn[-1], rho_s[0], Gs[0], Vs[0], self.pen_z
            )
            hvz[-1] = hvz[0]
        return hvx, hvz


def l2_project(fn, op: DGOperator) -> np.ndarray:
    """Project an analytic initial perturbation onto the DG space."""
    return op.project(fn)


def evaluate(field: np.ndarray, basis: DGBasis, i: int, j: int, local: np.ndarray) -> np.ndarray:
    """Evaluate the tensor polynomial of cell (i, j) at reference points.

    local has shape (..., 2) with columns (x-ref, z-ref) in [0, 1]^2.
    """
    local = np.asarray(local, dtype=float)
    pts = local.reshape(-1, 2)
    Ax = basis.eval_matrix(pts[:, 0])
    Az = basis.eval_matrix(pts[:, 1])
    vals = np.einsum("pa,pb,abc->pc", Az, Ax, field[j, i])
    return vals.reshape(local.shape[:-1] + (4,))
