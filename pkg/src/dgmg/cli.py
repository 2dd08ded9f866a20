"""Batch driver: config parsing, run orchestration, CSV output.

Configs are line-oriented `key = value` files; command-line flags
override file values. A run integrates one case to its final time,
writing field snapshots at a fixed interval and one statistics row per
implicit stage (or per explicit step). Reruns of the same config
reproduce the statistics log byte for byte.

Exit codes: 0 success, 2 configuration error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import cases, timeint
from .cases import CaseSetup, build_initial_state
from .dg import DGBasis, DGOperator
from .fv import FVOperator, fv_background
from .mesh import build_hierarchy
from .mgprecond import MGConfig, MGConfigError, MultigridPreconditioner, parse_mg_config
from .physics import InadmissibleStateError
from .timeint import NewtonParams, SolverFailure, sdirk2_step, ssprk34_step
from .transfer import TransferOperators

SNAPSHOT_HEADER = "x,z,rho_p,rhou_p,rhow_p,theta_p"
STATS_HEADER = "time,stage,newton_iters,gmres_iters,dg_ops,fv_ops,residual"


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    case: str
    k: int = 3
    level: int = 0
    base_nx: int | None = None
    base_nz: int | None = None
    dx: float | None = None
    dt: float | None = None
    t_final: float | None = None
    integrator: str = "implicit"
    mg: str = "none"
    transfer: str = "interp"
    newton_tol: float = 1e-3
    outdir: str = "out"
    output_interval: float | None = None
    log_format: str = "csv"
    pseudo_cfl: float = 1.0
    smoother_stages: int = 1
    explicit_cfl: float = 0.8
    vtk: bool = False

    def validate(self) -> None:
        if self.case not in cases.CASES:
            raise ConfigError(
                f"unknown case {self.case!r}; available: {', '.join(sorted(cases.CASES))}"
            )
        if self.integrator not in ("implicit", "explicit"):
            raise ConfigError(f"integrator must be implicit or explicit, got {self.integrator!r}")
        if self.transfer not in ("interp", "massfix"):
            raise ConfigError(f"transfer must be interp or massfix, got {self.transfer!r}")
        if self.log_format not in ("csv", "jsonl"):
            raise ConfigError(f"log_format must be csv or jsonl, got {self.log_format!r}")
        if self.base_nx is None and self.dx is None:
            raise ConfigError("either base_nx/base_nz or a target dx must be given")
        if (self.base_nx is None) != (self.base_nz is None):
            raise ConfigError("base_nx and base_nz must be given together")
        if self.dt is not None and self.dt <= 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.integrator == "implicit" and self.dt is None:
            raise ConfigError("implicit runs need an explicit dt value")
        if not 0 < self.newton_tol < 1:
            raise ConfigError(f"newton_tol must be in (0, 1), got {self.newton_tol}")

    def mg_config(self) -> MGConfig | None:
        if self.mg == "none":
            return None
        try:
            return parse_mg_config(
                self.mg, pseudo_cfl=self.pseudo_cfl, smoother_stages=self.smoother_stages
            )
        except MGConfigError as err:
            raise ConfigError(str(err)) from err


_SCHEMA = {
    "case": str,
    "k": int,
    "level": int,
    "base_nx": int,
    "base_nz": int,
    "dx": float,
    "dt": float,
    "t_final": float,
    "integrator": str,
    "mg": str,
    "transfer": str,
    "newton_tol": float,
    "outdir": str,
    "output_interval": float,
    "log_format": str,
    "pseudo_cfl": float,
    "smoother_stages": int,
    "explicit_cfl": float,
    "vtk": lambda s: s.lower() in ("1", "true", "yes"),
}


def parse_config(path: str | None, overrides: dict | None = None) -> RunConfig:
    """Read a key = value file, apply flag overrides, and validate."""
    values: dict = {}
    if path is not None:
        try:
            with open(path) as fh:
                lines = fh.readlines()
        except OSError as err:
            raise ConfigError(f"cannot read config file {path}: {err}") from err
        for lineno, raw in enumerate(lines, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            key, _, val = (part.strip() for part in line.partition("="))
            if key not in _SCHEMA:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                values[key] = _SCHEMA[key](val)
            except ValueError as err:
                raise ConfigError(f"{path}:{lineno}: bad value for {key}: {err}") from err
    for key, val in (overrides or {}).items():
        if val is not None:
            values[key] = val
    if "case" not in values:
        raise ConfigError("no case selected (key 'case' or flag --case)")
    cfg = RunConfig(**values)
    cfg.validate()
    cfg.mg_config()
    return cfg


@dataclass
class SolverBundle:
    cfg: RunConfig
    case: CaseSetup
    dg_op: DGOperator
    transfer: TransferOperators
    fv_ops: list
    mg: MultigridPreconditioner | None
    params: NewtonParams
    U0: np.ndarray

    def op_counts(self) -> tuple[int, int]:
        return self.dg_op.ncalls, sum(op.ncalls for op in self.fv_ops)

    def rhs(self, U, t=0.0):
        return self.dg_op(U, t)


def _grid_dims(cfg: RunConfig, case: CaseSetup) -> tuple[int, int]:
    if cfg.base_nx is not None:
        return cfg.base_nx, cfg.base_nz
    scale = 2**cfg.level
    nx_dg = round(case.domain.width / cfg.dx)
    nz_dg = round(case.domain.height / cfg.dx)
    for n, axis in ((nx_dg, "x"), (nz_dg, "z")):
        if n < scale or n % scale:
            raise ConfigError(
                f"target dx={cfg.dx} gives {n} DG cells in {axis}, "
                f"not divisible by 2^level = {scale}"
            )
    return nx_dg // scale, nz_dg // scale


def build_solver(cfg: RunConfig) -> SolverBundle:
    cfg.validate()
    case = cases.by_name(cfg.case)
    base_nx, base_nz = _grid_dims(cfg, case)
    try:
        hierarchy, subgrid = build_hierarchy(case.domain, base_nx, base_nz, cfg.level, cfg.k)
    except ValueError as err:
        raise ConfigError(str(err)) from err
    basis = DGBasis(cfg.k)
    dg_op = DGOperator(hierarchy, subgrid, basis, case)
    transfer = TransferOperators(basis, subgrid)
    mg_cfg = cfg.mg_config()
    fv_ops: list[FVOperator] = []
    mg = None
    if mg_cfg is not None:
        fv_ops = [FVOperator(hierarchy, l, case) for l in range(hierarchy.n_levels)]
        mg = MultigridPreconditioner(
            dg_op, fv_ops, transfer, mg_cfg, use_massfix=cfg.transfer == "massfix"
        )
    params = NewtonParams(tol=cfg.newton_tol)
    U0 = build_initial_state(case, dg_op)
    return SolverBundle(cfg, case, dg_op, transfer, fv_ops, mg, params, U0)


def write_snapshot(field: np.ndarray, bundle: SolverBundle, path: str) -> None:
    """Plot-ready perturbations at the FV subcell centers.

    theta_p is the perturbation of the intensive potential temperature,
    (rho theta)_total / rho_total - theta_bar.
    """
    tr = bundle.transfer
    u = tr.dg_to_fv(field)
    hierarchy = bundle.dg_op.hierarchy
    lvl = tr.subgrid.fv_level
    bgc = fv_background(bundle.case, hierarchy, lvl)
    full = u + bgc
    theta_p = full[..., 3] / full[..., 0] - bgc[..., 3] / bgc[..., 0]
    dx, dz = hierarchy.dx[lvl], hierarchy.dz[lvl]
    xc = hierarchy.domain.x_min + dx * (np.arange(hierarchy.nx[lvl]) + 0.5)
    zc = hierarchy.domain.z_min + dz * (np.arange(hierarchy.nz[lvl]) + 0.5)
    with open(path, "w") as fh:
        fh.write(SNAPSHOT_HEADER + "\n")
        for j, z in enumerate(zc):
            for i, x in enumerate(xc):
                fh.write(
                    f"{x:.10g},{z:.10g},{u[j, i, 0]:.12e},{u[j, i, 1]:.12e},"
                    f"{u[j, i, 2]:.12e},{theta_p[j, i]:.12e}\n"
                )
    if bundle.cfg.vtk:
        _write_vtk(path[:-4] + ".vtk", xc, zc, dx, dz, u, theta_p)


def _write_vtk(path, xc, zc, dx, dz, u, theta_p):
    nz, nx = theta_p.shape
    names = {"rho_p": u[..., 0], "rhou_p": u[..., 1], "rhow_p": u[..., 2], "theta_p": theta_p}
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\nperturbation snapshot\nASCII\n")
        fh.write("DATASET STRUCTURED_POINTS\n")
        fh.write(f"DIMENSIONS {nx} {nz} 1\n")
        fh.write(f"ORIGIN {xc[0]:.10g} {zc[0]:.10g} 0\n")
        fh.write(f"SPACING {dx:.10g} {dz:.10g} 1\n")
        fh.write(f"POINT_DATA {nx * nz}\n")
        for name, data in names.items():
            fh.write(f"SCALARS {name} double\nLOOKUP_TABLE default\n")
            for j in range(nz):
                for i in range(nx):
                    fh.write(f"{data[j, i]:.12e}\n")


class _StatsLog:
    def __init__(self, path: str, fmt: str):
        self.fmt = fmt
        self.fh = open(path, "w")
        if fmt == "csv":
            self.fh.write(STATS_HEADER + "\n")

    def row(self, time, stage, newton, gmres, dg_ops, fv_ops, residual):
        if self.fmt == "csv":
            self.fh.write(
                f"{time:.6f},{stage},{newton},{gmres},{dg_ops},{fv_ops},{residual:.12e}\n"
            )
        else:
            self.fh.write(
                '{"time": %.6f, "stage": %d, "newton_iters": %d, "gmres_iters": %d, '
                '"dg_ops": %d, "fv_ops": %d, "residual": %.12e}\n'
                % (time, stage, newton, gmres, dg_ops, fv_ops, residual)
            )
        self.fh.flush()

    def close(self):
        self.fh.close()


def run(cfg: RunConfig) -> int:
    """Integrate the configured case to its final time, writing outputs."""
    bundle = build_solver(cfg)
    case = bundle.case
    t_final = cfg.t_final if cfg.t_final is not None else case.t_final
    interval = cfg.output_interval if cfg.output_interval is not None else t_final
    os.makedirs(cfg.outdir, exist_ok=True)

    stats = _StatsLog(
        os.path.join(cfg.outdir, "stats." + ("csv" if cfg.log_format == "csv" else "jsonl")),
        cfg.log_format,
    )
    U = bundle.U0
    t = 0.0
    write_snapshot(U, bundle, os.path.join(cfg.outdir, _snap_name(t)))
    next_output = interval

    factory = bundle.mg.factory if bundle.mg is not None else None
    alpha_frac = timeint.SDIRK2_ALPHA

    if cfg.integrator == "explicit":
        dt = cfg.dt if cfg.dt is not None else bundle.dg_op.stable_dt(U, cfg.explicit_cfl)
    else:
        dt = cfg.dt

    try:
        while t < t_final - 1e-9 * max(t_final, 1.0):
            step_dt = min(dt, t_final - t)
            if cfg.integrator == "implicit":
                U, step_stats = sdirk2_step(
                    bundle.rhs,
                    U,
                    t,
                    step_dt,
                    params=bundle.params,
                    weights=bundle.dg_op.norm_weights,
                    precond_factory=factory,
                    op_counts=bundle.op_counts,
                )
                stage_times = (t + alpha_frac * step_dt, t + step_dt)
                for st, ts in zip(step_stats.stages, stage_times):
                    stats.row(ts, st.stage, st.newton_iters, st.gmres_iters,
                              st.dg_ops, st.fv_ops, st.residual_final)
            else:
                before = bundle.op_counts()
                U = ssprk34_step(bundle.rhs, U, t, step_dt)
                after = bundle.op_counts()
                stats.row(t + step_dt, 0, 0, 0, after[0] - before[0], 0, 0.0)
            t += step_dt
            if t >= next_output - 1e-9 * max(t_final, 1.0):
                write_snapshot(U, bundle, os.path.join(cfg.outdir, _snap_name(t)))
                while next_output <= t + 1e-9 * max(t_final, 1.0):
                    next_output += interval
    except (SolverFailure, InadmissibleStateError) as err:
        stats.close()
        print(f"solver failure at t = {t:.6f}: {err}", file=sys.stderr)
        return 3
    if not math.isclose(t, next_output - interval, rel_tol=0, abs_tol=1e-6 * max(t_final, 1.0)):
        write_snapshot(U, bundle, os.path.join(cfg.outdir, _snap_name(t)))
    stats.close()
    return 0


def _snap_name(t: float) -> str:
    return f"snapshot_t{t:012.4f}.csv"


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="solver",
        description="2D compressible-flow DG solver with multigrid-preconditioned implicit stepping",
    )
    ap.add_argument("--config", help="key = value configuration file")
    ap.add_argument("--case", choices=sorted(cases.CASES))
    ap.add_argument("--k", type=int)
    ap.add_argument("--level", type=int)
    ap.add_argument("--base-nx", dest="base_nx", type=int)
    ap.add_argument("--base-nz", dest="base_nz", type=int)
    ap.add_argument("--dx", type=float, help="target DG cell size (alternative to base dims)")
    ap.add_argument("--dt", type=float)
    ap.add_argument("--t-final", dest="t_final", type=float)
    ap.add_argument("--integrator", choices=("implicit", "explicit"))
    ap.add_argument("--mg", help="multigrid key like mg001111V, or none")
    ap.add_argument("--transfer", choices=("interp", "massfix"))
    ap.add_argument("--newton-tol", dest="newton_tol", type=float)
    ap.add_argument("--outdir")
    ap.add_argument("--output-interval", dest="output_interval", type=float)
    ap.add_argument("--log-format", dest="log_format", choices=("csv", "jsonl"))
    ap.add_argument("--pseudo-cfl", dest="pseudo_cfl", type=float)
    ap.add_argument("--explicit-cfl", dest="explicit_cfl", type=float)
    ap.add_argument("--vtk", action="store_const", const=True, default=None)
    args = vars(ap.parse_args(argv))
    config_path = args.pop("config")
    try:
        cfg = parse_config(config_path, overrides=args)
    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 2
    try:
        return run(cfg)
    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
