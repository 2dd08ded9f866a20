"""Implicit SDIRK2 stepping with Jacobian-free Newton-GMRES.

The stage systems G(U) = U - alpha*dt*f(U) - Ubar = 0 are solved by an
inexact Newton method whose linear solves use right-preconditioned,
restarted GMRES with finite-difference Jacobian-vector products. The
forcing tolerance follows the second Eisenstat-Walker criterion. An
explicit 4-stage, 3rd-order SSP integrator serves as the reference
scheme.

All routines operate on plain ndarrays of any shape; norms are discrete
L2 norms weighted by cell volumes and mass weights, normalized to a mean
square so that vector magnitudes stay O(field scale) independent of the
domain size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

_EPS_FD = float(np.sqrt(np.finfo(float).eps))

SDIRK2_ALPHA = 1.0 - math.sqrt(2.0) / 2.0


@dataclass(frozen=True)
class SDIRK2Tableau:
    """Ellsiepen's 2-stage, order-2, singly diagonal tableau."""

    alpha: float = SDIRK2_ALPHA

    @property
    def a(self) -> np.ndarray:
        return np.array([[self.alpha, 0.0], [1.0 - self.alpha, self.alpha]])

    @property
    def b(self) -> np.ndarray:
        return np.array([1.0 - self.alpha, self.alpha])

    @property
    def c(self) -> np.ndarray:
        return np.array([self.alpha, 1.0])


@dataclass
class NewtonParams:
    tol: float = 1e-3
    max_iters: int = 50
    ew_gamma: float = 0.1
    ew_alpha: float = 1.0
    eta_initial: float = 0.1
    eta_max: float = 0.5
    eta_min: float = 1e-8
    gmres_restart: int = 30
    gmres_maxiter: int = 400

    def __post_init__(self):
        if not 0.0 < self.tol < 1.0:
            raise ValueError(f"newton tolerance must be in (0, 1), got {self.tol}")
        if not 0.0 < self.ew_gamma <= 1.0:
            raise ValueError(f"ew_gamma must be in (0, 1], got {self.ew_gamma}")


@dataclass
class StageStats:
    stage: int = 0
    newton_iters: int = 0
    gmres_iters: int = 0
    dg_ops: int = 0
    fv_ops: int = 0
    residual_initial: float = 0.0
    residual_final: float = 0.0


@dataclass
class SolveStats:
    stages: list = field(default_factory=list)

    @property
    def newton_iters(self) -> int:
        return sum(s.newton_iters for s in self.stages)

    @property
    def gmres_iters(self) -> int:
        return sum(s.gmres_iters for s in self.stages)


class SolverFailure(RuntimeError):
    def __init__(self, message: str, stats=None):
        super().__init__(message)
        self.stats = stats


def weighted_rms(u: np.ndarray, weights: np.ndarray | None = None) -> float:
    """Discrete L2 norm; with weights summing to one this is a volume- and
    mass-weighted root mean square."""
    if weights is None:
        return float(np.sqrt(np.mean(u * u)))
    return float(np.sqrt(np.sum(weights * u * u)))


def weighted_dot(u: np.ndarray, v: np.ndarray, weights: np.ndarray | None = None) -> float:
    if weights is None:
        return float(np.mean(u * v))
    return float(np.sum(weights * u * v))


class FDLinearization:
    """Directional finite-difference linearization G'(u0) y of a residual.

    The base residual G(u0) is computed once and reused by every
    Jacobian-vector product: G'(u0) y ~= (G(u0 + eps y) - G(u0)) / eps
    with eps = sqrt(machine eps) / ||y||.
    """

    def __init__(self, residual, u0: np.ndarray, r0: np.ndarray, weights=None):
        self.residual = residual
        self.u0 = u0
        self.r0 = r0
        self.weights = weights

    def matvec(self, y: np.ndarray) -> np.ndarray:
        norm = weighted_rms(y, self.weights)
        if norm == 0.0:
            return np.zeros_like(y)
        eps = _EPS_FD / norm
        return (self.residual(self.u0 + eps * y) - self.r0) / eps


@dataclass
class GMRESInfo:
    iterations: int
    residual: float
    converged: bool
    residual_history: list


def gmres_solve(
    matvec,
    b: np.ndarray,
    M=None,
    eta: float = 1e-8,
    restart: int = 30,
    maxiter: int = 400,
    weights: np.ndarray | None = None,
) -> tuple[np.ndarray, GMRESInfo]:
    """Right-preconditioned restarted GMRES.

    Terminates when the true residual norm drops below eta * ||b||; with
    right preconditioning the Arnoldi residual estimate equals the
    unpreconditioned residual. Returns the solution and iteration info;
    a zero right-hand side returns immediately.
    """
    if not 0.0 < eta < 1.0:
        raise ValueError(f"forcing tolerance must be in (0, 1), got {eta}")
    bnorm = weighted_rms(b, weights)
    x = np.zeros_like(b)
    history: list[float] = []
    if bnorm == 0.0:
        return x, GMRESInfo(0, 0.0, True, history)

    tol = eta * bnorm
    total = 0
    r = b.copy()
    rnorm = bnorm
    while True:
        m = min(restart, maxiter - total)
        if m <= 0:
            return x, GMRESInfo(total, rnorm, False, history)
        V = [r / rnorm]
        Z = []
        H = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = rnorm
        j_last = -1
        converged = False
        stalled = False
        cycle_start = rnorm
        for j in range(m):
            z = M(V[j]) if M is not None else V[j]
            Z.append(z)
            w = matvec(z)
            total += 1
            for i in range(j + 1):
                H[i, j] = weighted_dot(V[i], w, weights)
                w = w - H[i, j] * V[i]
            H[j + 1, j] = weighted_rms(w, weights)
            breakdown = H[j + 1, j] < 1e-14 * max(bnorm, 1e-300)
            if not breakdown:
                V.append(w / H[j + 1, j])
            for i in range(j):
                t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = t
            d = math.hypot(H[j, j], H[j + 1, j])
            if d == 0.0:
                # the operator annihilated this direction; drop the column
                stalled = True
                break
            cs[j], sn[j] = H[j, j] / d, H[j + 1, j] / d
            H[j, j] = d
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            rnorm = abs(g[j + 1])
            history.append(rnorm)
            j_last = j
            if rnorm <= tol or breakdown:
                # a happy breakdown makes the Krylov solve exact; restarting
                # could only regenerate the same space
                converged = True
                break
        if j_last >= 0:
            y = np.zeros(j_last + 1)
            for i in range(j_last, -1, -1):
                y[i] = (g[i] - H[i, i + 1 : j_last + 1] @ y[i + 1 : j_last + 1]) / H[i, i]
            for i in range(j_last + 1):
                x = x + y[i] * Z[i]
        if converged:
            return x, GMRESInfo(total, rnorm, rnorm <= tol, history)
        if total >= maxiter:
            return x, GMRESInfo(total, rnorm, False, history)
        r = b - matvec(x)
        rnorm = weighted_rms(r, weights)
        if rnorm <= tol:
            return x, GMRESInfo(total, rnorm, True, history)
        if stalled and rnorm >= (1.0 - 1e-12) * cycle_start:
            return x, GMRESInfo(total, rnorm, False, history)


def eisenstat_walker_eta(
    norm_k: float, norm_km1: float, eta_prev: float, params: NewtonParams
) -> float:
    """Second Eisenstat-Walker forcing term with the standard safeguard."""
    if norm_k <= 0.0 or norm_km1 <= 0.0:
        raise ValueError("residual norms must be positive")
    eta = params.ew_gamma * (norm_k / norm_km1) ** params.ew_alpha
    safeguard = params.ew_gamma * eta_prev**params.ew_alpha
    if safeguard > 0.1:
        eta = max(eta, safeguard)
    return float(np.clip(eta, params.eta_min, params.eta_max))


@dataclass
class NewtonResult:
    u: np.ndarray
    iterations: int
    gmres_iters: int
    residual_initial: float
    residual_final: float
    converged: bool


def newton_solve(
    residual,
    u0: np.ndarray,
    params: NewtonParams,
    weights: np.ndarray | None = None,
    precond_factory=None,
    alpha_dt: float = 0.0,
) -> NewtonResult:
    """Inexact Newton iteration terminating on |G| < tol * |G(u0)|.

    precond_factory, if given, maps the current FD linearization (and
    alpha*dt) to a linear preconditioner callable for GMRES. Raises
    SolverFailure on stagnation or iteration exhaustion.
    """
    u = np.array(u0, copy=True)
    r = residual(u)
    norm0 = weighted_rms(r, weights)
    norms = [norm0]
    gmres_total = 0
    if norm0 == 0.0:
        return NewtonResult(u, 0, 0, 0.0, 0.0, True)
    eta = params.eta_initial
    for k in range(params.max_iters):
        lin = FDLinearization(residual, u, r, weights)
        M = precond_factory(lin, alpha_dt) if precond_factory is not None else None
        delta, info = gmres_solve(
            lin.matvec,
            -r,
            M=M,
            eta=eta,
            restart=params.gmres_restart,
            maxiter=params.gmres_maxiter,
            weights=weights,
        )
        gmres_total += info.iterations
        u = u + delta
        r = residual(u)
        norms.append(weighted_rms(r, weights))
        if norms[-1] < params.tol * norm0:
            return NewtonResult(u, k + 1, gmres_total, norm0, norms[-1], True)
        if len(norms) >= 4 and norms[-1] > (1.0 - 1e-3) * norms[-4]:
            raise SolverFailure(
                f"Newton stagnation: residual {norms[-1]:.3e} after {k + 1} iterations",
                stats=norms,
            )
        eta = eisenstat_walker_eta(norms[-1], norms[-2], eta, params)
    raise SolverFailure(
        f"Newton did not converge in {params.max_iters} iterations "
        f"(residual {norms[-1]:.3e} vs target {params.tol * norm0:.3e})",
        stats=norms,
    )


def sdirk2_step(
    f,
    U: np.ndarray,
    t: float,
    dt: float,
    params: NewtonParams | None = None,
    weights: np.ndarray | None = None,
    precond_factory=None,
    op_counts=None,
) -> tuple[np.ndarray, SolveStats]:
    """One SDIRK2 step; the second stage is the new solution value.

    Stage right-hand sides follow the tableau; f(U1) is recovered from the
    solved first stage as (U1 - Ubar1)/(alpha*dt), avoiding an extra
    operator call. op_counts, if given, is a callable returning cumulative
    (dg, fv) operator-call counters for the statistics.
    """
    if dt <= 0.0:
        raise ValueError(f"time step must be positive, got {dt}")
    params = params or NewtonParams()
    alpha = SDIRK2_ALPHA
    a_dt = alpha * dt
    stats = SolveStats()

    def solve_stage(stage: int, Ubar: np.ndarray, ts: float) -> np.ndarray:
        before = op_counts() if op_counts is not None else (0, 0)

        def G(V):
            return V - a_dt * f(V, ts) - Ubar

        try:
            res = newton_solve(
                G, Ubar, params, weights, precond_factory, alpha_dt=a_dt
            )
        except SolverFailure as err:
            raise SolverFailure(f"stage {stage}: {err}", stats=stats) from err
        after = op_counts() if op_counts is not None else (0, 0)
        stats.stages.append(
            StageStats(
                stage=stage,
                newton_iters=res.iterations,
                gmres_iters=res.gmres_iters,
                dg_ops=after[0] - before[0],
                fv_ops=after[1] - before[1],
                residual_initial=res.residual_initial,
                residual_final=res.residual_final,
            )
        )
        return res.u

    U1 = solve_stage(1, U, t + alpha * dt)
    f1 = (U1 - U) / a_dt
    Ubar2 = U + (1.0 - alpha) * dt * f1
    U2 = solve_stage(2, Ubar2, t + dt)
    return U2, stats


def ssprk34_step(f, U: np.ndarray, t: float, dt: float) -> np.ndarray:
    """4-stage, 3rd-order strong-stability-preserving step."""
    u1 = U + 0.5 * dt * f(U, t)
    u2 = u1 + 0.5 * dt * f(u1, t + 0.5 * dt)
    u3 = (2.0 / 3.0) * U + (1.0 / 3.0) * u2 + (dt / 6.0) * f(u2, t + dt)
    return u3 + 0.5 * dt * f(u3, t + 0.5 * dt)
