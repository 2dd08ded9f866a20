"""Jacobian-free geometric multigrid preconditioner on the FV subgrid.

The preconditioner approximates the inverse of the outer stage Jacobian
as T^-1 q^-1 T: transfer the residual to the piecewise-constant subgrid,
run one multigrid cycle on the low-order linearization, and map the
correction back, optionally wrapped in pseudo-time smoothing sweeps on
the DG system itself.

Grid transfers are agglomeration restriction (volume-weighted child
average) and injection prolongation. The smoother integrates the dual
pseudo-time ODE dw/dtau = (b - g'(u) w)/(alpha dt) with explicit
Runge-Kutta steps; the per-cell pseudo step

    dtau = pseudo_cfl / (1 + alpha dt * ((|u|+c)/dx + (|w|+c)/dz
                                          + 2 mu (1/dx^2 + 1/dz^2)))

is the local stability bound of that scaled system (the "+1" is the
identity shift of the implicit stage residual), so pseudo_cfl < 2 is
stable and the alpha*dt -> 0 limit solves the identity system in one
step at pseudo_cfl = 1.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from . import physics
from .fv import FVLinearization, FVOperator
from .transfer import TransferOperators


class MGConfigError(ValueError):
    pass


@dataclass(frozen=True)
class MGConfig:
    """Smoothing counts and cycle type, parsed from the key 'mg abcdef G'.

    a, b: pre/post smoothing on the DG system; c, d: on the finest FV
    level; e, f: on intermediate FV levels; cycle: V or W.
    """

    dg_pre: int
    dg_post: int
    fine_pre: int
    fine_post: int
    mid_pre: int
    mid_post: int
    cycle: str
    pseudo_cfl: float = 1.0
    smoother_stages: int = 1

    def __post_init__(self):
        counts = (self.dg_pre, self.dg_post, self.fine_pre, self.fine_post,
                  self.mid_pre, self.mid_post)
        if any(n < 0 for n in counts):
            raise MGConfigError(f"smoothing counts must be nonnegative, got {counts}")
        if self.cycle not in ("V", "W"):
            raise MGConfigError(f"cycle must be 'V' or 'W', got {self.cycle!r}")
        if self.smoother_stages < 1:
            raise MGConfigError(f"smoother needs at least one stage, got {self.smoother_stages}")

    @property
    def key(self) -> str:
        return "mg{}{}{}{}{}{}{}".format(
            self.dg_pre, self.dg_post, self.fine_pre, self.fine_post,
            self.mid_pre, self.mid_post, self.cycle,
        )


_MG_KEY = re.compile(r"mg(\d)(\d)(\d)(\d)(\d)(\d)([VW])")


def parse_mg_config(text: str, pseudo_cfl: float = 1.0, smoother_stages: int = 1) -> MGConfig:
    """Parse 'mg' + six decimal digits + cycle letter, e.g. 'mg001111V'."""
    if not text.startswith("mg"):
        raise MGConfigError(f"{text!r}: expected prefix 'mg' at position 0")
    if len(text) != 9:
        raise MGConfigError(
            f"{text!r}: expected 'mg' + 6 digits + cycle letter (9 characters, got {len(text)})"
        )
    for pos in range(2, 8):
        if not text[pos].isdigit():
            raise MGConfigError(f"{text!r}: expected digit at position {pos}, got {text[pos]!r}")
    if text[8] not in "VW":
        raise MGConfigError(f"{text!r}: expected 'V' or 'W' at position 8, got {text[8]!r}")
    m = _MG_KEY.fullmatch(text)
    a, b, c, d, e, f = (int(text[i]) for i in range(2, 8))
    return MGConfig(a, b, c, d, e, f, m.group(7),
                    pseudo_cfl=pseudo_cfl, smoother_stages=smoother_stages)


def restrict(u: np.ndarray) -> np.ndarray:
    """Agglomeration restriction: volume-weighted average of the four
    children (arithmetic mean on uniform grids)."""
    nz, nx = u.shape[0], u.shape[1]
    if nz % 2 or nx % 2:
        raise ValueError(f"cannot coarsen a {nz}x{nx} grid")
    return u.reshape(nz // 2, 2, nx // 2, 2, *u.shape[2:]).mean(axis=(1, 3))


def prolong(u: np.ndarray) -> np.ndarray:
    """Injection prolongation: each child receives its parent's value."""
    return np.repeat(np.repeat(u, 2, axis=0), 2, axis=1)


def smooth(matvec, x: np.ndarray, b: np.ndarray, n_steps: int, dtau: np.ndarray,
           stages: int = 1) -> np.ndarray:
    """Pseudo-time Runge-Kutta smoothing steps for the system g' x = b.

    One step of the default one-stage scheme is the explicit Euler update
    x <- x + dtau * (b - g' x). Multi-stage sweeps use the standard
    1/(s+1-j) stage fractions. Zero iterates skip the operator call.
    """
    for _ in range(n_steps):
        y = x
        for j in range(stages):
            r = b - matvec(y) if np.any(y) else b
            y = x + (dtau / (stages - j)) * r
        x = y
    return x


@dataclass
class MGLevel:
    """Frozen linearization and pseudo-time step sizes of one grid level."""

    matvec: object
    dtau: np.ndarray


def mg_cycle(levels: list[MGLevel], l: int, x: np.ndarray, b: np.ndarray,
             cfg: MGConfig) -> np.ndarray:
    """One V- or W-cycle on the level stack (levels[0] is coarsest).

    Pre-smooth, restrict the residual, recurse (once for V, twice for W),
    subtract the prolonged correction, post-smooth. The coarsest level
    applies the smoother max(2, pre+post) times.
    """
    lev = levels[l]
    finest = len(levels) - 1
    if l == 0:
        pre, post = (cfg.fine_pre, cfg.fine_post) if finest == 0 else (cfg.mid_pre, cfg.mid_post)
        return smooth(lev.matvec, x, b, max(2, pre + post), lev.dtau, cfg.smoother_stages)
    pre, post = (cfg.fine_pre, cfg.fine_post) if l == finest else (cfg.mid_pre, cfg.mid_post)
    x = smooth(lev.matvec, x, b, pre, lev.dtau, cfg.smoother_stages)
    r = restrict(lev.matvec(x) - b) if np.any(x) else restrict(-b)
    v = np.zeros_like(r)
    for _ in range(2 if cfg.cycle == "W" else 1):
        v = mg_cycle(levels, l - 1, v, r, cfg)
    x = x - prolong(v)
    return smooth(lev.matvec, x, b, post, lev.dtau, cfg.smoother_stages)


class MultigridPreconditioner:
    """Builds per-Newton-iterate preconditioner applications.

    Holds the FV operators of every hierarchy level, the DG/FV transfer,
    and the cycle configuration. factory() freezes the current Newton
    iterate: the DG state is transferred to the finest FV level and
    restricted downward, each level gets an FD linearization and local
    pseudo-time steps, and the returned closure applies one cycle per
    call. The closure is linear to FD accuracy and stateless across calls.
    """

    def __init__(self, dg_op, fv_ops: list[FVOperator], transfer: TransferOperators,
                 cfg: MGConfig, use_massfix: bool = False):
        self.dg_op = dg_op
        self.fv_ops = fv_ops
        self.transfer = transfer
        self.cfg = cfg
        self.forward = transfer.dg_to_fv_massfix if use_massfix else transfer.dg_to_fv

    def total_fv_calls(self) -> int:
        return sum(op.ncalls for op in self.fv_ops)

    def _fv_dtau(self, op: FVOperator, u_frozen: np.ndarray, alpha_dt: float) -> np.ndarray:
        c = op.constants
        full = u_frozen + op.bg
        cs = physics.sound_speed(full, c)
        lx = np.abs(full[..., physics.RHO_U] / full[..., physics.RHO]) + cs
        lz = np.abs(full[..., physics.RHO_W] / full[..., physics.RHO]) + cs
        rate = lx / op.dx + lz / op.dz
        if c.mu > 0.0:
            rate = rate + 2.0 * c.mu * (1.0 / op.dx**2 + 1.0 / op.dz**2)
        return (self.cfg.pseudo_cfl / (1.0 + alpha_dt * rate))[..., None]

    def _dg_dtau(self, U_frozen: np.ndarray, alpha_dt: float) -> np.ndarray:
        # effective spacing h/(2k+1) accounts for the DG CFL restriction.
        # The extra 0.5 keeps dtau * eig well below 1: a one-stage Euler
        # sweep at the stability limit nearly annihilates the modes with
        # dtau * eig ~ 1, which makes the preconditioner ill-conditioned
        # and stalls restarted GMRES at tight forcing tolerances.
        op = self.dg_op
        c = op.constants
        fac = 2 * op.basis.k + 1
        lx, lz = op.max_wave_speeds(U_frozen)
        dxe, dze = op.dx / fac, op.dz / fac
        rate = lx / dxe + lz / dze
        if c.mu > 0.0:
            rate = rate + 2.0 * c.mu * (1.0 / dxe**2 + 1.0 / dze**2)
        return (0.5 * self.cfg.pseudo_cfl / (1.0 + alpha_dt * rate))[..., None, None, None]

    def factory(self, dg_lin, alpha_dt: float):
        cfg = self.cfg
        finest = len(self.fv_ops) - 1
        states: list[np.ndarray | None] = [None] * (finest + 1)
        states[finest] = self.forward(dg_lin.u0)
        for l in range(finest, 0, -1):
            states[l - 1] = restrict(states[l])
        levels = [
            MGLevel(
                FVLinearization(self.fv_ops[l], states[l], alpha_dt).matvec,
                self._fv_dtau(self.fv_ops[l], states[l], alpha_dt),
            )
            for l in range(finest + 1)
        ]
        dg_dtau = (
            self._dg_dtau(dg_lin.u0, alpha_dt) if (cfg.dg_pre or cfg.dg_post) else None
        )

        def precondition(y: np.ndarray) -> np.ndarray:
            x = np.zeros_like(y)
            if cfg.dg_pre:
                x = smooth(dg_lin.matvec, x, y, cfg.dg_pre, dg_dtau, cfg.smoother_stages)
                r = y - dg_lin.matvec(x)
            else:
                r = y
            bf = self.forward(r)
            v = mg_cycle(levels, finest, np.zeros_like(bf), bf, cfg)
            x = x + self.transfer.fv_to_dg(v)
            if cfg.dg_post:
                x = smooth(dg_lin.matvec, x, y, cfg.dg_post, dg_dtau, cfg.smoother_stages)
            return x

        return precondition
