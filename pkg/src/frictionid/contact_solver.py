"""Hard frictional contact: per-contact Gauss-Seidel with an exact case analysis.

Each contact is solved in turn with the others' impulses frozen.  A contact is
``open`` if its free normal velocity separates, ``clamping`` if the impulse that
zeroes its velocity lies strictly inside the friction cone, and ``sliding``
otherwise, in which case the impulse minimizing ``v^T A_k v`` (``A_k`` the
apparent inertia) is found on the cone boundary with the normal velocity held
at zero.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .rigid_model import GeneralizedState, ModelEval, RobotModel, evaluate, integrate

OPEN = "open"
CLAMPING = "clamping"
SLIDING = "sliding"

N_ANGLE_SAMPLES = 64
N_BISECTION = 40
CLAMP_MARGIN = 1e-8
SPECULATIVE_SPEED = 10.0  # m/s; candidate contacts reachable within one step


class ContactSolverError(RuntimeError):
    def __init__(self, message: str, residuals=None):
        super().__init__(message)
        self.residuals = residuals


@dataclass
class ContactProblem:
    delassus: np.ndarray  # J M^-1 J^T over the active contacts
    v_free: np.ndarray  # contact velocity at zero impulse, gap term included on normal rows
    mu: float
    dt: float
    upsilon_free: np.ndarray  # generalized velocity at zero impulse
    Minv_JT: np.ndarray
    eval: Optional[ModelEval] = None

    @property
    def n_contacts(self) -> int:
        return self.v_free.shape[0] // 3

    def block(self, k: int, j: Optional[int] = None) -> np.ndarray:
        j = k if j is None else j
        return self.delassus[3 * k : 3 * k + 3, 3 * j : 3 * j + 3]

    def apparent_inertia(self, k: int) -> np.ndarray:
        return np.linalg.inv(self.block(k))

    def with_mu(self, mu: float) -> "ContactProblem":
        return ContactProblem(self.delassus, self.v_free, float(mu), self.dt, self.upsilon_free, self.Minv_JT, self.eval)


@dataclass
class ContactSolution:
    """Impulses and post-step contact velocities, shape (n_c, 3) ordered tx, ty, n.

    ``theta`` is the angle of ``-lambda_t`` for sliding contacts (nan otherwise),
    i.e. the direction the contact slides in.
    """

    impulses: np.ndarray
    velocities: np.ndarray
    labels: list
    theta: np.ndarray
    mu: float
    iterations: int = 0
    problem: Optional[ContactProblem] = field(default=None, repr=False)

    @property
    def n_contacts(self) -> int:
        return len(self.labels)

    @property
    def stacked(self) -> np.ndarray:
        return self.impulses.reshape(-1)

    def indices(self, label: str) -> list:
        return [k for k, lab in enumerate(self.labels) if lab == label]


def assemble_problem(eval: ModelEval, state: GeneralizedState, tau, dt: float, mu: float, f_ext=None) -> ContactProblem:
    """Delassus matrix and free velocities; ``f_ext`` is an optional generalized force (pushes)."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    if mu < 0:
        raise ValueError("friction coefficient must be nonnegative")
    tau = np.zeros(eval.B.shape[1]) if tau is None else np.asarray(tau, dtype=float)
    try:
        chol = np.linalg.cholesky(eval.M)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"mass matrix is not positive definite: {exc}") from exc

    def solve_M(rhs):
        return np.linalg.solve(chol.T, np.linalg.solve(chol, rhs))

    force = -eval.h + eval.B @ tau
    if f_ext is not None:
        force = force + np.asarray(f_ext, dtype=float)
    upsilon_free = state.upsilon + solve_M(force * dt)
    Minv_JT = solve_M(eval.J.T) if eval.n_active else np.zeros((eval.M.shape[0], 0))
    delassus = eval.J @ Minv_JT
    delassus = 0.5 * (delassus + delassus.T)
    v_free = eval.J @ upsilon_free
    if eval.n_active:
        # a positive gap may close during the step without impulse
        v_free[2::3] += np.maximum(eval.gaps, 0.0) / dt
    return ContactProblem(delassus, v_free, float(mu), float(dt), upsilon_free, Minv_JT, eval)


def _boundary_point(phi: float, D: np.ndarray, sigma: np.ndarray, mu: float):
    c = np.array([math.cos(phi), math.sin(phi)])
    den = D[2, 2] + mu * (D[2, :2] @ c)
    if den <= 0:
        return None
    lam_n = -sigma[2] / den
    lam = np.array([mu * lam_n * c[0], mu * lam_n * c[1], lam_n])
    return lam, sigma + D @ lam


def _objective_slope(phi: float, d, s, mu: float) -> float:
    """d/dphi of the boundary objective, up to a positive factor (scalar arithmetic)."""
    c, sn = math.cos(phi), math.sin(phi)
    den = d[8] + mu * (d[6] * c + d[7] * sn)
    lam_n = -s[2] / den
    dlam_n = s[2] * mu * (-d[6] * sn + d[7] * c) / (den * den)
    lx, ly = mu * lam_n * c, mu * lam_n * sn
    vx = s[0] + d[0] * lx + d[1] * ly + d[2] * lam_n
    vy = s[1] + d[3] * lx + d[4] * ly + d[5] * lam_n
    dlx = mu * (dlam_n * c - lam_n * sn)
    dly = mu * (dlam_n * sn + lam_n * c)
    return vx * dlx + vy * dly


def _sliding_impulse(D: np.ndarray, sigma: np.ndarray, mu: float) -> np.ndarray:
    """Minimize v^T D^-1 v over the cone boundary with zero normal velocity."""
    if mu == 0.0:
        return np.array([0.0, 0.0, -sigma[2] / D[2, 2]])
    phis = np.arange(N_ANGLE_SAMPLES) * (2.0 * math.pi / N_ANGLE_SAMPLES)
    c = np.stack([np.cos(phis), np.sin(phis)], axis=1)
    den = D[2, 2] + mu * (c @ D[2, :2])
    valid = den > 0
    if not valid.any():
        raise ContactSolverError("no admissible sliding impulse on the cone boundary")
    lam_n = -sigma[2] / np.where(valid, den, 1.0)
    lam = np.column_stack([mu * lam_n * c[:, 0], mu * lam_n * c[:, 1], lam_n])
    v = sigma + lam @ D.T
    f = np.einsum("ij,ij->i", v, np.linalg.solve(D, v.T).T)
    f[~valid] = np.inf
    i = int(np.argmin(f))
    step = phis[1]
    d = D.reshape(-1).tolist()
    s = sigma.tolist()
    phi = phis[i]
    lo, hi = phi - step, phi + step
    if valid[i - 1] and valid[(i + 1) % N_ANGLE_SAMPLES]:
        f_lo, f_hi = _objective_slope(lo, d, s, mu), _objective_slope(hi, d, s, mu)
        if f_lo == 0.0 or f_hi == 0.0:
            phi = lo if f_lo == 0.0 else hi
        elif f_lo < 0.0 < f_hi:
            phi = brentq(_objective_slope, lo, hi, args=(d, s, mu), xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=N_BISECTION)
    return _boundary_point(phi, D, sigma, mu)[0]


def solve_single_contact(D: np.ndarray, sigma: np.ndarray, mu: float):
    """Exact impulse for one contact with Delassus block ``D`` and free velocity ``sigma``."""
    if sigma[2] >= 0.0:
        return np.zeros(3), OPEN
    lam = -np.linalg.solve(D, sigma)
    if lam[2] > 0.0 and math.hypot(lam[0], lam[1]) < mu * lam[2] * (1.0 - CLAMP_MARGIN):
        return lam, CLAMPING
    if mu == 0.0 and lam[2] > 0.0 and math.hypot(lam[0], lam[1]) == 0.0:
        return lam, CLAMPING
    return _sliding_impulse(D, sigma, mu), SLIDING


def solve_contacts(problem: ContactProblem, tol: float = 1e-10, max_iters: int = 200) -> ContactSolution:
    n = problem.n_contacts
    lam = np.zeros(3 * n)
    labels = [OPEN] * n
    if n == 0:
        return ContactSolution(np.zeros((0, 3)), np.zeros((0, 3)), [], np.zeros(0), problem.mu, 0, problem)
    D = problem.delassus
    blocks = [problem.block(k) for k in range(n)]
    change = math.inf
    sweep = 0
    while sweep < max_iters:
        sweep += 1
        change = 0.0
        for k in range(n):
            sl = slice(3 * k, 3 * k + 3)
            sigma = problem.v_free[sl] + D[sl] @ lam - blocks[k] @ lam[sl]
            new, labels[k] = solve_single_contact(blocks[k], sigma, problem.mu)
            change = max(change, float(np.abs(new - lam[sl]).max()))
            lam[sl] = new
        if change < tol or n == 1:
            break
    else:
        vel = problem.v_free + D @ lam
        raise ContactSolverError(f"Gauss-Seidel did not converge in {max_iters} sweeps (last change {change:.3e})", residuals={"change": change, "velocity": vel})
    impulses = lam.reshape(n, 3)
    velocities = (problem.v_free + D @ lam).reshape(n, 3)
    theta = np.full(n, np.nan)
    for k in range(n):
        if labels[k] == SLIDING:
            t = -impulses[k, :2]
            if np.linalg.norm(t) > 0:
                theta[k] = math.atan2(t[1], t[0])
            else:
                theta[k] = math.atan2(velocities[k, 1], velocities[k, 0])
    return ContactSolution(impulses, velocities, labels, theta, problem.mu, sweep, problem)


def velocity_update(problem: ContactProblem, solution: ContactSolution) -> np.ndarray:
    if solution.n_contacts == 0:
        return problem.upsilon_free.copy()
    return problem.upsilon_free + problem.Minv_JT @ solution.stacked


def step_dynamics(
    model: RobotModel,
    state: GeneralizedState,
    tau,
    mu: float,
    dt: float,
    activation_threshold: float = 1e-4,
    tol: float = 1e-10,
    max_iters: int = 200,
    f_ext=None,
):
    """One hard-contact step: evaluate, assemble, solve, update velocity, integrate.

    Contacts within reach of the next step are included speculatively; a
    positive gap enters the normal free velocity, so they stay open unless the
    gap would close.
    """
    threshold = activation_threshold + SPECULATIVE_SPEED * dt
    ev = evaluate(model, state, threshold)
    problem = assemble_problem(ev, state, tau, dt, mu, f_ext)
    solution = solve_contacts(problem, tol, max_iters)
    upsilon_next = velocity_update(problem, solution)
    return integrate(state, upsilon_next, dt), solution
