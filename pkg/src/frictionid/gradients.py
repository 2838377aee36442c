"""Derivatives of contact impulses with respect to the friction coefficient.

Three flavours share one output type:

* nonsmooth: implicit differentiation of the active hard-contact constraints
  (clamping velocities and sliding normal velocities held at zero);
* smoothed: the tangential complementarity is relaxed to
  ``|v_t| (mu^2 lam_n^2 - |lam_t|^2) = rho_t`` and differentiated at the hard
  solution, which keeps clamping contacts informative;
* randomized: Gaussian smoothing of an arbitrary loss, either with the score
  estimator (zeroth order) or by averaging analytic gradients (first order).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .contact_solver import CLAMPING, OPEN, SLIDING, ContactProblem, ContactSolution, ContactSolverError
from .rigid_model import ModelEval

NONSMOOTH = "Nonsmooth"
SMOOTHED = "Smoothed"
RAND_ZEROTH = "RandZeroth"
RAND_FIRST = "RandFirst"
FINITE_DIFF = "FiniteDiff"

MAX_CONDITION = 1e14
EPS_DEN_REL = 1e-6


class GradientError(RuntimeError):
    """Raised when the linear system behind a gradient is singular."""

    def __init__(self, message: str, condition: float = math.inf):
        super().__init__(message)
        self.condition = condition


class OracleError(RuntimeError):
    pass


@dataclass
class StackedContactSystem:
    """``0 = A x + b`` over clamping impulses and sliding normal impulses."""

    A: np.ndarray
    b: np.ndarray
    dA_dmu: np.ndarray
    db_dmu: np.ndarray
    clamping: list
    sliding: list
    E: np.ndarray  # (n_s, 3) cone-boundary bases
    x: np.ndarray  # stacked unknowns at the solution
    condition: float

    @property
    def size(self) -> int:
        return self.A.shape[0]


@dataclass
class SmoothedGradientTerms:
    rho_t: float
    contacts: list  # non-open contact indices, in order of the stacked blocks
    Theta: np.ndarray  # (n, 2)
    rho_hat: np.ndarray  # (n,)
    Gamma: np.ndarray  # (3n, 3n)
    gamma_vec: np.ndarray  # (3n,)
    eps_den: np.ndarray  # (n,) denominator floor per contact
    n_clamped_den: int = 0
    dropped: list = field(default_factory=list)  # contacts whose direction is undefined


@dataclass
class ImpulseGradient:
    dlambda_dmu: np.ndarray  # (3 n_c,) stacked tx, ty, n
    method_tag: str
    dstate_dmu: Optional[np.ndarray] = None
    condition: float = float("nan")
    diagnostics: dict = field(default_factory=dict)

    @property
    def per_contact(self) -> np.ndarray:
        return self.dlambda_dmu.reshape(-1, 3)


def _delassus(solution: ContactSolution, eval: Optional[ModelEval]) -> np.ndarray:
    if solution.problem is not None:
        return solution.problem.delassus
    if eval is None:
        raise ValueError("need either a solution carrying its problem or a model evaluation")
    D = eval.J @ np.linalg.solve(eval.M, eval.J.T)
    return 0.5 * (D + D.T)


def _condition(A: np.ndarray) -> float:
    if A.size == 0:
        return 1.0
    with np.errstate(all="ignore"):
        return float(np.linalg.cond(A))


def build_stacked_system(solution: ContactSolution, eval: Optional[ModelEval] = None) -> StackedContactSystem:
    D = _delassus(solution, eval)
    v_free = solution.problem.v_free if solution.problem is not None else np.zeros(D.shape[0])
    mu = solution.mu
    clamp = solution.indices(CLAMPING)
    slide = solution.indices(SLIDING)
    rows = [3 * k + r for k in clamp for r in range(3)] + [3 * k + 2 for k in slide]
    n_x = len(rows)
    A = np.zeros((n_x, n_x))
    dA = np.zeros((n_x, n_x))
    E = np.zeros((len(slide), 3))
    x = np.zeros(n_x)
    col = 0
    for k in clamp:
        A[:, col : col + 3] = D[np.ix_(rows, range(3 * k, 3 * k + 3))]
        x[col : col + 3] = solution.impulses[k]
        col += 3
    for j, k in enumerate(slide):
        c, s = math.cos(solution.theta[k]), math.sin(solution.theta[k])
        E[j] = (-mu * c, -mu * s, 1.0)
        block = D[np.ix_(rows, range(3 * k, 3 * k + 3))]
        A[:, col] = block @ E[j]
        dA[:, col] = block @ np.array([-c, -s, 0.0])
        x[col] = solution.impulses[k, 2]
        col += 1
    b = v_free[rows]
    return StackedContactSystem(A, b, dA, np.zeros(n_x), clamp, slide, E, x, _condition(A))


def nonsmooth_impulse_gradient(
    solution: ContactSolution,
    eval: Optional[ModelEval] = None,
    tau=None,
    dt: Optional[float] = None,
    mu: Optional[float] = None,
) -> ImpulseGradient:
    """Implicit derivative of the hard solution with the contact partition and sliding directions fixed.

    A solution without sliding contacts does not depend on mu at all, so the
    exact zero is returned without forming the system.
    """
    n = solution.n_contacts
    grad = np.zeros(3 * n)
    if not solution.indices(SLIDING):
        return ImpulseGradient(grad, NONSMOOTH, condition=1.0, diagnostics={"n_sliding": 0})
    sys = build_stacked_system(solution, eval)
    if not np.isfinite(sys.condition) or sys.condition > MAX_CONDITION:
        raise GradientError(f"stacked contact matrix is singular (condition {sys.condition:.3e})", sys.condition)
    # 0 = A x + b with db/dmu = 0  =>  dx = -A^-1 dA x
    dx = -np.linalg.solve(sys.A, sys.dA_dmu @ sys.x + sys.db_dmu)
    col = 0
    for k in sys.clamping:
        grad[3 * k : 3 * k + 3] = dx[col : col + 3]
        col += 3
    for j, k in enumerate(sys.sliding):
        c, s = math.cos(solution.theta[k]), math.sin(solution.theta[k])
        lam_n = solution.impulses[k, 2]
        dn = dx[col]
        grad[3 * k] = -c * lam_n + sys.E[j, 0] * dn
        grad[3 * k + 1] = -s * lam_n + sys.E[j, 1] * dn
        grad[3 * k + 2] = dn
        col += 1
    return ImpulseGradient(
        grad,
        NONSMOOTH,
        condition=sys.condition,
        diagnostics={"n_sliding": len(sys.sliding), "n_clamping": len(sys.clamping)},
    )


def contact_direction(solution: ContactSolution, k: int) -> Optional[np.ndarray]:
    """Unit tangential direction used by the smoothed terms, or None if undefined.

    Sliding contacts use their velocity direction; clamping contacts the
    direction opposite to the friction impulse.
    """
    if solution.labels[k] == SLIDING:
        v_t = solution.velocities[k, :2]
        nv = float(np.hypot(*v_t))
        if nv > 0:
            return v_t / nv
    lam_t = solution.impulses[k, :2]
    nl = float(np.hypot(*lam_t))
    if nl == 0.0:
        return None
    return -lam_t / nl


def smoothed_terms(
    solution: ContactSolution,
    rho_t: float,
    eps_den: Optional[float] = None,
    impulses: Optional[np.ndarray] = None,
    directions: Optional[dict] = None,
    mu: Optional[float] = None,
) -> SmoothedGradientTerms:
    """Gamma and gamma blocks over the non-open contacts.

    ``impulses`` and ``directions`` override the values taken from
    ``solution`` (the oracle evaluates at its own smoothed solution).
    ``eps_den`` is an absolute floor; by default it is relative,
    ``1e-6 (mu lam_n)^2`` per contact.
    """
    if not rho_t > 0:
        raise ValueError("rho_t must be positive")
    mu = solution.mu if mu is None else float(mu)
    lam_all = solution.impulses if impulses is None else impulses
    contacts = [k for k, lab in enumerate(solution.labels) if lab != OPEN]
    n = len(contacts)
    Theta = np.zeros((n, 2))
    rho_hat = np.zeros(n)
    floors = np.zeros(n)
    Gamma = np.zeros((3 * n, 3 * n))
    gamma = np.zeros(3 * n)
    clamped = 0
    dropped = []
    for j, k in enumerate(contacts):
        lam_t, lam_n = lam_all[k, :2], lam_all[k, 2]
        theta = directions.get(k) if directions is not None else contact_direction(solution, k)
        floors[j] = EPS_DEN_REL * (mu * lam_n) ** 2 if eps_den is None else eps_den
        if theta is None or (solution.labels[k] == CLAMPING and not np.any(lam_t)):
            dropped.append(k)
            continue
        den = mu * mu * lam_n * lam_n - float(lam_t @ lam_t)
        if den < floors[j]:
            den = floors[j]
            clamped += 1
        if den <= 0:
            dropped.append(k)
            continue
        Theta[j] = theta
        rho_hat[j] = rho_t / (den * den)
        row = np.array([-2.0 * lam_t[0], -2.0 * lam_t[1], 2.0 * mu * mu * lam_n])
        Gamma[3 * j : 3 * j + 2, 3 * j : 3 * j + 3] = rho_hat[j] * np.outer(theta, row)
        gamma[3 * j : 3 * j + 2] = theta * rho_hat[j] * 2.0 * mu * lam_n * lam_n
    return SmoothedGradientTerms(rho_t, contacts, Theta, rho_hat, Gamma, gamma, floors, clamped, dropped)


def smoothed_impulse_gradient(
    solution: ContactSolution,
    eval: Optional[ModelEval] = None,
    tau=None,
    dt: Optional[float] = None,
    mu: Optional[float] = None,
    rho_t: float = 0.05,
    eps_den: Optional[float] = None,
    strict: bool = True,
    impulses: Optional[np.ndarray] = None,
    directions: Optional[dict] = None,
) -> ImpulseGradient:
    """Solve ``(D + Gamma) dlam = -gamma`` over all non-open contacts.

    Every non-open contact keeps its three rows of the Delassus relation, so
    neither the matrix nor the offset depends on mu and only ``gamma`` drives
    the derivative.  With ``strict=False`` a singular system (redundant
    contacts such as four coplanar corners) falls back to the minimum-norm
    least-squares solution instead of raising.
    """
    D = _delassus(solution, eval)
    n = solution.n_contacts
    grad = np.zeros(3 * n)
    terms = smoothed_terms(solution, rho_t, eps_den, impulses, directions, mu)
    diag = {"n_clamped_den": terms.n_clamped_den, "dropped": list(terms.dropped), "rho_hat": terms.rho_hat.copy()}
    if not terms.contacts:
        return ImpulseGradient(grad, SMOOTHED, condition=1.0, diagnostics=diag)
    idx = np.array([3 * k + r for k in terms.contacts for r in range(3)])
    K = D[np.ix_(idx, idx)] + terms.Gamma
    cond = _condition(K)
    diag["condition"] = cond
    if not np.any(terms.gamma_vec):
        return ImpulseGradient(grad, SMOOTHED, condition=cond, diagnostics=diag)
    if np.isfinite(cond) and cond < MAX_CONDITION:
        dlam = -np.linalg.solve(K, terms.gamma_vec)
    elif strict:
        raise GradientError(f"smoothed contact matrix is singular (condition {cond:.3e})", cond)
    else:
        dlam = -np.linalg.lstsq(K, terms.gamma_vec, rcond=None)[0]
        diag["least_squares"] = True
    grad[idx] = dlam
    return ImpulseGradient(grad, SMOOTHED, condition=cond, diagnostics=diag)


def smoothed_solution_oracle(
    problem: ContactProblem,
    hard: ContactSolution,
    rho_t: float,
    newton_tol: float = 1e-12,
    max_iters: int = 200,
    directions: Optional[dict] = None,
) -> ContactSolution:
    """Newton solve of the smoothed contact conditions with directions held fixed.

    Unknowns are the impulses of the contacts that are not open in ``hard``.
    Tangential rows enforce ``v_t = Theta rho_t / (mu^2 lam_n^2 - |lam_t|^2)``
    and normal rows ``v_n = 0``; the residual Jacobian is ``D + Gamma``.
    """
    if not rho_t > 0:
        raise ValueError("rho_t must be positive")
    mu = problem.mu
    contacts = [k for k, lab in enumerate(hard.labels) if lab != OPEN]
    if directions is None:
        directions = {k: contact_direction(hard, k) for k in contacts}
    if any(directions[k] is None for k in contacts):
        raise OracleError("contact direction undefined for the smoothed oracle")
    idx = np.array([3 * k + r for k in contacts for r in range(3)])
    D = problem.delassus[np.ix_(idx, idx)]
    sigma = problem.v_free[idx]
    Th = np.concatenate([np.append(directions[k], 0.0) for k in contacts])
    m = len(contacts)

    def margins(lam):
        L = lam.reshape(m, 3)
        return mu * mu * L[:, 2] ** 2 - np.sum(L[:, :2] ** 2, axis=1)

    def residual(lam):
        den = np.repeat(margins(lam), 3)
        return sigma + D @ lam - Th * rho_t / den

    lam = hard.impulses[contacts].reshape(-1).copy()
    # pull sliding impulses off the cone boundary, where the residual is singular,
    # to roughly the margin the smoothed condition predicts
    L = lam.reshape(m, 3)
    for j, k in enumerate(contacts):
        if hard.labels[k] == SLIDING:
            cap = (mu * L[j, 2]) ** 2
            speed = float(np.hypot(*hard.velocities[k, :2]))
            den0 = min(rho_t / speed if speed > 0 else cap, 0.02 * cap)
            L[j, :2] *= math.sqrt(max(1.0 - den0 / cap, 0.0)) if cap > 0 else 1.0
    if np.any(margins(lam) <= 0):
        raise OracleError("warm start outside the friction cone")
    F = residual(lam)
    for it in range(max_iters):
        err = float(np.abs(F).max())
        if err < newton_tol:
            break
        terms = smoothed_terms(hard, rho_t, eps_den=0.0, impulses=_scatter(lam, contacts, hard.n_contacts), directions=directions, mu=mu)
        step = np.linalg.solve(D + terms.Gamma, -F)
        t = 1.0
        while t > 1e-12:
            trial = lam + t * step
            if np.all(margins(trial) > 0) and np.all(trial.reshape(m, 3)[:, 2] > 0):
                Ft = residual(trial)
                if np.abs(Ft).max() < err:
                    break
            t *= 0.5
        else:
            raise OracleError(f"smoothed Newton stalled at residual {err:.3e}")
        lam, F = trial, Ft
    else:
        raise OracleError(f"smoothed Newton did not converge (residual {float(np.abs(F).max()):.3e})")
    impulses = _scatter(lam, contacts, hard.n_contacts).reshape(-1, 3)
    velocities = (problem.v_free + problem.delassus @ impulses.reshape(-1)).reshape(-1, 3)
    return ContactSolution(impulses, velocities, list(hard.labels), hard.theta.copy(), mu, it, problem)


def _scatter(lam: np.ndarray, contacts: list, n: int) -> np.ndarray:
    full = np.zeros((n, 3))
    full[contacts] = lam.reshape(-1, 3)
    return full


def state_gradient(grad: ImpulseGradient, eval: ModelEval, dt: float, Minv_JT: Optional[np.ndarray] = None) -> np.ndarray:
    """Derivative of ``[q_next (tangent); upsilon_next]`` with respect to mu.

    Returns ``2 n_v`` entries: position-tangent rows first, then velocity rows.
    """
    if Minv_JT is None:
        Minv_JT = np.linalg.solve(eval.M, eval.J.T) if eval.n_active else np.zeros((eval.M.shape[0], 0))
    dv = Minv_JT @ grad.dlambda_dmu if grad.dlambda_dmu.size else np.zeros(eval.M.shape[0])
    out = np.concatenate([dt * dv, dv])
    grad.dstate_dmu = out
    return out


@dataclass
class RandomizedEstimate:
    value: np.ndarray
    std_error: np.ndarray
    n_projected: int
    n_samples: int
    method_tag: str


def _sample_offsets(seed: int, n_samples: int, sigma: float) -> np.ndarray:
    # one stream per sample so the estimate does not depend on evaluation order
    return np.array([np.random.default_rng([seed, i]).normal(0.0, sigma) for i in range(n_samples)])


def randomized_gradient(
    loss_fn: Callable[[float], np.ndarray],
    mu: float,
    n_samples: int = 50,
    sigma_rand: float = 0.05,
    order: str = "zeroth",
    seed: int = 0,
    grad_fn: Optional[Callable[[float], np.ndarray]] = None,
    bounds: tuple = (0.01, 1.0),
    baseline: bool = True,
) -> RandomizedEstimate:
    """Gaussian-smoothing gradient estimates of a scalar or vector loss.

    Zeroth order averages ``(L(mu + e) - L(mu)) e / sigma^2``; the subtracted
    baseline has zero mean contribution and only reduces variance
    (``baseline=False`` gives the plain score estimator).  First order averages
    ``grad_fn(mu + e)``.  Perturbed points outside ``bounds`` are projected
    back and counted.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    if not sigma_rand > 0:
        raise ValueError("sigma_rand must be positive")
    if order not in ("zeroth", "first"):
        raise ValueError(f"unknown order {order!r}")
    if order == "first" and grad_fn is None:
        raise ValueError("first-order estimate needs grad_fn")
    eps = _sample_offsets(seed, n_samples, sigma_rand)
    lo, hi = bounds
    points = np.clip(mu + eps, lo, hi)
    n_proj = int(np.count_nonzero(points != mu + eps))
    if order == "zeroth":
        base = np.asarray(loss_fn(mu), dtype=float) if baseline else 0.0
        samples = np.array([(np.asarray(loss_fn(p), dtype=float) - base) * e / sigma_rand**2 for p, e in zip(points, eps)])
        tag = RAND_ZEROTH
    else:
        samples = np.array([np.asarray(grad_fn(p), dtype=float) for p in points])
        tag = RAND_FIRST
    value = samples.mean(axis=0)
    std_err = samples.std(axis=0, ddof=1) / math.sqrt(n_samples) if n_samples > 1 else np.full_like(value, np.inf)
    return RandomizedEstimate(value, std_err, n_proj, n_samples, tag)


def finite_difference_gradient(fn: Callable[[float], np.ndarray], mu: float, h: float = 1e-5) -> np.ndarray:
    """Central difference of ``fn`` at ``mu``."""
    return (np.asarray(fn(mu + h), dtype=float) - np.asarray(fn(mu - h), dtype=float)) / (2.0 * h)


def impulse_gradient(solution: ContactSolution, method: str, rho_t: float = 0.05, strict: bool = False) -> ImpulseGradient:
    """Dispatch on the analytic method tag."""
    if method == NONSMOOTH:
        try:
            return nonsmooth_impulse_gradient(solution)
        except GradientError:
            if strict:
                raise
            return _nonsmooth_lstsq(solution)
    if method == SMOOTHED:
        return smoothed_impulse_gradient(solution, rho_t=rho_t, strict=strict)
    raise ValueError(f"no analytic impulse gradient for {method!r}")


def _nonsmooth_lstsq(solution: ContactSolution) -> ImpulseGradient:
    sys = build_stacked_system(solution)
    dx = -np.linalg.lstsq(sys.A, sys.dA_dmu @ sys.x, rcond=None)[0]
    grad = np.zeros(3 * solution.n_contacts)
    col = 0
    for k in sys.clamping:
        grad[3 * k : 3 * k + 3] = dx[col : col + 3]
        col += 3
    for j, k in enumerate(sys.sliding):
        c, s = math.cos(solution.theta[k]), math.sin(solution.theta[k])
        lam_n = solution.impulses[k, 2]
        grad[3 * k : 3 * k + 3] = (-c * lam_n + sys.E[j, 0] * dx[col], -s * lam_n + sys.E[j, 1] * dx[col], dx[col])
        col += 1
    return ImpulseGradient(grad, NONSMOOTH, condition=sys.condition, diagnostics={"least_squares": True})


__all__ = [
    "NONSMOOTH",
    "SMOOTHED",
    "RAND_ZEROTH",
    "RAND_FIRST",
    "FINITE_DIFF",
    "GradientError",
    "OracleError",
    "StackedContactSystem",
    "SmoothedGradientTerms",
    "ImpulseGradient",
    "RandomizedEstimate",
    "build_stacked_system",
    "nonsmooth_impulse_gradient",
    "smoothed_terms",
    "smoothed_impulse_gradient",
    "smoothed_solution_oracle",
    "state_gradient",
    "randomized_gradient",
    "finite_difference_gradient",
    "impulse_gradient",
    "contact_direction",
]
