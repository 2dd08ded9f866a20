"""Transfers between DG nodal fields and finest-level FV fields.

The forward map T evaluates each cell's tensor polynomial at its FV
subcell centers; since the (k+1)^2 centers determine a degree-k tensor
polynomial uniquely, T is square and invertible, and T^-1 reconstructs
the DG nodal values from subcell-center samples.

The mass-fix variant T^mf shifts each cell's subcell values by a constant
so the piecewise-constant mass matches the DG mass exactly. The DG mass
is computed from the already-evaluated subcell-center values with the
cell-center quadrature weights, which are exact for tensor cubics.
"""

from __future__ import annotations

import numpy as np

from .dg import DGBasis
from .mesh import SubgridMap
from .quadrature import modified_newton_cotes


class TransferOperators:
    def __init__(self, basis: DGBasis, subgrid: SubgridMap):
        p = basis.p
        if subgrid.subcells_per_side != p:
            raise ValueError(
                f"subgrid has {subgrid.subcells_per_side} subcells per side, basis has p={p}"
            )
        self.basis = basis
        self.subgrid = subgrid
        self.p = p
        centers = (2 * np.arange(p) + 1) / (2 * p)
        self.centers = centers
        self.T1 = basis.eval_matrix(centers)        # (m, i) = l_i(center_m)
        self.T1inv = np.linalg.inv(self.T1)
        self.nc_weights = modified_newton_cotes(basis.k).weights

    def _scatter(self, cellwise: np.ndarray) -> np.ndarray:
        """(nz, nx, p, p, 4) per-cell values -> flat (nz*p, nx*p, 4) grid."""
        nz, nx, p = cellwise.shape[0], cellwise.shape[1], self.p
        return cellwise.transpose(0, 2, 1, 3, 4).reshape(nz * p, nx * p, 4)

    def _gather(self, flat: np.ndarray) -> np.ndarray:
        nzp, nxp = flat.shape[0], flat.shape[1]
        p = self.p
        return flat.reshape(nzp // p, p, nxp // p, p, 4).transpose(0, 2, 1, 3, 4)

    def dg_to_fv(self, U: np.ndarray) -> np.ndarray:
        """Interpolation transfer T: polynomial values at subcell centers."""
        vals = np.einsum("ma,zxabc->zxmbc", self.T1, U)
        vals = np.einsum("nb,zxmbc->zxmnc", self.T1, vals)
        return self._scatter(vals)

    def dg_to_fv_massfix(self, U: np.ndarray) -> np.ndarray:
        """Mass-conservative transfer T^mf.

        Per cell and component the plain interpolation is shifted by the
        (piecewise-constant minus DG) mass average, so subcell averages
        integrate to the DG mass exactly.
        """
        vals = np.einsum("ma,zxabc->zxmbc", self.T1, U)
        vals = np.einsum("nb,zxmbc->zxmnc", self.T1, vals)
        fv_mean = vals.mean(axis=(2, 3))
        dg_mean = np.einsum("m,n,zxmnc->zxc", self.nc_weights, self.nc_weights, vals)
        vals = vals - (fv_mean - dg_mean)[:, :, None, None, :]
        return self._scatter(vals)

    def fv_to_dg(self, u: np.ndarray) -> np.ndarray:
        """Inverse transfer T^-1: nodal values of the unique degree-k
        tensor polynomial interpolating the subcell-center values."""
        vals = self._gather(u)
        vals = np.einsum("am,zxmnc->zxanc", self.T1inv, vals)
        return np.einsum("bn,zxanc->zxabc", self.T1inv, vals)
