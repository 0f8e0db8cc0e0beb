"""Marching-on-in-time drivers and current recovery.

Both drivers solve, step by step,

    Q_0 w_i = r_i - sum_k Q_k w_{i-k}

with a lower-triangular block-Toeplitz history.  The regularized system
has finitely many nonzero history blocks; the classical baseline
additionally carries a constant tail matrix applied to the running sum
of solutions older than the stored blocks.

The physical currents are recovered from the auxiliary unknowns as

    j_i = P_LH u_i + (T_max / dt) P_S (u_i - u_{i-1})

(and likewise m from v), with the loop and star components stored
separately: at large timesteps the star part dominates by T_max / dt and
summing first would destroy the loop digits.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .errors import GmresStagnation, SolverDiverged
from .projectors import ProjectorSet
from .system_assembly import ClassicalSystem, MotSystem

__all__ = [
    "SolverConfig",
    "MotSolution",
    "march",
    "march_classical",
    "recover_currents",
    "write_current_csv",
]


@dataclass(frozen=True)
class SolverConfig:
    """Inner-solver configuration for the per-step systems."""

    method: str = "lu"          # "lu" or "gmres"
    rtol: float = 1e-8
    maxiter: int = 800
    restart: int = 100


@dataclass
class MotSolution:
    """Marching history; index 0 is the zero initial state."""

    u: list = field(default_factory=list)
    v: list = field(default_factory=list)
    j_loop: list = field(default_factory=list)
    j_star: list = field(default_factory=list)
    m_loop: list = field(default_factory=list)
    m_star: list = field(default_factory=list)
    gmres_iters: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    dt: float = 0.0

    @property
    def n_steps(self) -> int:
        return len(self.u) - 1

    def w(self, i: int) -> np.ndarray:
        return np.concatenate([self.u[i], self.v[i]])

    def j(self, i: int) -> np.ndarray:
        return self.j_loop[i] + self.j_star[i]

    def m(self, i: int) -> np.ndarray:
        return self.m_loop[i] + self.m_star[i]


class _StepSolver:
    """One-matrix solver: dense LU, or GMRES with iteration accounting."""

    def __init__(self, q0: np.ndarray, cfg: SolverConfig):
        self.q0 = q0
        self.cfg = cfg
        self._lu = None
        if cfg.method not in ("lu", "gmres"):
            raise ValueError(f"unknown solver method {cfg.method!r}")
        if cfg.method == "lu":
            self._lu = sla.lu_factor(q0)

    def solve(self, b: np.ndarray):
        """Returns (x, n_iters, relative residual)."""
        nb = np.linalg.norm(b)
        if nb == 0.0:
            return np.zeros_like(b), 0, 0.0
        if self.cfg.method == "lu":
            x = sla.lu_solve(self._lu, b)
            res = np.linalg.norm(self.q0 @ x - b) / nb
            return x, 0, res
        hist = []
        x, info = spla.gmres(
            self.q0,
            b,
            rtol=self.cfg.rtol,
            atol=0.0,
            restart=self.cfg.restart,
            maxiter=max(1, -(-self.cfg.maxiter // self.cfg.restart)),
            callback=lambda pr: hist.append(float(pr)),
            callback_type="pr_norm",
        )
        res = np.linalg.norm(self.q0 @ x - b) / nb
        n_it = len(hist)
        if info != 0 and res > self.cfg.rtol:
            raise GmresStagnation(
                f"GMRES did not reach rtol={self.cfg.rtol:g} in "
                f"{n_it} iterations (residual {res:.3e})",
                partial=(x, n_it, res),
            )
        return x, n_it, res


def _split(w: np.ndarray):
    n = w.shape[0] // 2
    return w[:n], w[n:]


def march(
    system: MotSystem,
    n_t: int,
    solver: SolverConfig = SolverConfig(),
    progress_every: int = 0,
) -> MotSolution:
    """March the regularized system for n_t steps."""
    if n_t < 1:
        raise ValueError("n_t must be >= 1")
    blocks = system.Q_blocks
    n = blocks[0].shape[0]
    step = _StepSolver(blocks[0], solver)
    sol = MotSolution(dt=system.dt)
    zeros = np.zeros(n // 2)
    sol.u.append(zeros.copy())
    sol.v.append(zeros.copy())
    sol.gmres_iters.append(0)
    sol.residuals.append(0.0)
    ws = [np.zeros(n)]
    for i in range(1, n_t + 1):
        b = system.rhs(i)
        for k in range(1, min(i, len(blocks))):
            b = b - blocks[k] @ ws[i - k]
        x, it, res = step.solve(b)
        if not np.all(np.isfinite(x)):
            raise SolverDiverged(f"non-finite solution at step {i}")
        ws.append(x)
        ui, vi = _split(x)
        sol.u.append(ui)
        sol.v.append(vi)
        sol.gmres_iters.append(it)
        sol.residuals.append(res)
        if progress_every and i % progress_every == 0:
            print(f"  step {i}/{n_t}  |w| = {np.linalg.norm(x):.3e}", flush=True)
    return sol


def march_classical(
    system: ClassicalSystem,
    rhs,
    n_t: int,
    solver: SolverConfig = SolverConfig(),
    progress_every: int = 0,
) -> MotSolution:
    """March the classical baseline; unknowns are (j, m) directly.

    The recovered-current slots hold the solution itself (star slots
    zero) so the same post-processing utilities apply.
    """
    if n_t < 1:
        raise ValueError("n_t must be >= 1")
    blocks = system.blocks
    n = blocks[0].shape[0]
    step = _StepSolver(blocks[0], solver)
    sol = MotSolution(dt=system.dt)
    zeros = np.zeros(n // 2)
    sol.u.append(zeros.copy())
    sol.v.append(zeros.copy())
    sol.gmres_iters.append(0)
    sol.residuals.append(0.0)
    ws = [np.zeros(n)]
    run_sum = np.zeros(n)
    for i in range(1, n_t + 1):
        # solutions older than the stored blocks interact via the tail
        i_old = i - (system.k_max + 2)
        if i_old >= 1:
            run_sum = run_sum + ws[i_old]
        b = rhs(i) - system.tail @ run_sum
        for k in range(1, min(i, len(blocks))):
            b = b - blocks[k] @ ws[i - k]
        x, it, res = step.solve(b)
        if not np.all(np.isfinite(x)):
            raise SolverDiverged(f"non-finite solution at step {i}")
        ws.append(x)
        ui, vi = _split(x)
        sol.u.append(ui)
        sol.v.append(vi)
        sol.j_loop.append(ui.copy())
        sol.m_loop.append(vi.copy())
        sol.gmres_iters.append(it)
        sol.residuals.append(res)
        if progress_every and i % progress_every == 0:
            print(f"  step {i}/{n_t}  |w| = {np.linalg.norm(x):.3e}", flush=True)
    # align: slot 0 for the zero state
    sol.j_loop.insert(0, zeros.copy())
    sol.m_loop.insert(0, zeros.copy())
    sol.j_star = [np.zeros_like(z) for z in sol.j_loop]
    sol.m_star = [np.zeros_like(z) for z in sol.m_loop]
    return sol


def recover_currents(
    sol: MotSolution,
    projectors: ProjectorSet,
    t_max: float,
    dt: float,
) -> MotSolution:
    """Populate the separated loop / star current components in place."""
    scale = t_max / dt
    sol.j_loop = [projectors.apply_P_LambdaH(u) for u in sol.u]
    sol.m_loop = [projectors.apply_P_LambdaH(v) for v in sol.v]
    sol.j_star = [np.zeros_like(sol.u[0])]
    sol.m_star = [np.zeros_like(sol.v[0])]
    for i in range(1, len(sol.u)):
        sol.j_star.append(scale * projectors.apply_P_Sigma(sol.u[i] - sol.u[i - 1]))
        sol.m_star.append(scale * projectors.apply_P_Sigma(sol.v[i] - sol.v[i - 1]))
    return sol


def write_current_csv(path, sol: MotSolution, dt: float) -> None:
    """Per-step summary CSV: step, time, |j|, |m|, iterations, residual."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["step", "time", "norm_j", "norm_m", "gmres_iters", "residual"])
        for i in range(1, len(sol.u)):
            nj = np.linalg.norm(sol.j(i)) if sol.j_loop else np.linalg.norm(sol.u[i])
            nm = np.linalg.norm(sol.m(i)) if sol.m_loop else np.linalg.norm(sol.v[i])
            wr.writerow(
                [i, repr(i * dt), repr(nj), repr(nm),
                 sol.gmres_iters[i], repr(sol.residuals[i])]
            )
