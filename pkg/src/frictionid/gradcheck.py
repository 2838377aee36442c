"""Analytic impulse gradients checked against finite-difference oracles."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .contact_solver import OPEN, ContactProblem, solve_contacts
from .fixtures import decoupled_problem, edge_box_problem, monoped_slide_problem, point_mass_problem, synthetic_problem
from .gradients import contact_direction, nonsmooth_impulse_gradient, smoothed_impulse_gradient, smoothed_solution_oracle

NONSMOOTH_TOL = 1e-4
SMOOTHED_TOL = 1e-3
ORACLE_STEP = 1e-6  # the oracle is smooth; a smaller step than the hard FD keeps truncation low


@dataclass
class CheckResult:
    name: str
    kind: str  # nonsmooth-fd | smoothed-oracle | dichotomy
    value: float  # relative error, or 0/1 for the exact checks
    threshold: float
    passed: bool
    condition: float
    detail: str = ""


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def nonsmooth_fixtures() -> dict:
    """Sliding fixtures whose partition and sliding directions are locally constant in mu."""
    return {
        "point-mass-oblique": point_mass_problem(20.0, (0.6, -0.8)),
        "two-contact-decoupled": decoupled_problem(),
        "monoped-planar-slide": monoped_slide_problem(),
    }


def smoothed_fixtures() -> dict:
    """Fixtures with a smoothed solution at rho_t = 0.05 (enough normal impulse)."""
    return {
        "point-mass-oblique": point_mass_problem(20.0, (0.6, -0.8)),
        "two-contact-coupled": synthetic_problem([0.8, 0.3, -2.0, -0.5, 0.2, -2.4]),
        "edge-box": edge_box_problem(mu=0.5, mass=20.0),
    }


def check_nonsmooth(name: str, problem: ContactProblem, h: float = 1e-5, sign: float = 1.0) -> CheckResult:
    sol = solve_contacts(problem)
    g = nonsmooth_impulse_gradient(sol)
    fd = (solve_contacts(problem.with_mu(problem.mu + h)).stacked - solve_contacts(problem.with_mu(problem.mu - h)).stacked) / (2 * h)
    err = _rel(sign * g.dlambda_dmu, fd)
    return CheckResult(name, "nonsmooth-fd", err, NONSMOOTH_TOL, err < NONSMOOTH_TOL, g.condition, ",".join(sol.labels))


def check_smoothed(name: str, problem: ContactProblem, rho_t: float = 0.05, sign: float = 1.0) -> CheckResult:
    hard = solve_contacts(problem)
    dirs = {k: contact_direction(hard, k) for k in range(hard.n_contacts) if hard.labels[k] != OPEN}
    smooth = smoothed_solution_oracle(problem, hard, rho_t, directions=dirs)
    up = smoothed_solution_oracle(problem.with_mu(problem.mu + ORACLE_STEP), hard, rho_t, directions=dirs)
    dn = smoothed_solution_oracle(problem.with_mu(problem.mu - ORACLE_STEP), hard, rho_t, directions=dirs)
    fd = (up.stacked - dn.stacked) / (2 * ORACLE_STEP)
    g = smoothed_impulse_gradient(hard, rho_t=rho_t, impulses=smooth.impulses, directions=dirs, eps_den=0.0)
    err = _rel(sign * g.dlambda_dmu, fd)
    return CheckResult(name, "smoothed-oracle", err, SMOOTHED_TOL, err < SMOOTHED_TOL, g.condition, f"rho_t={rho_t:g}")


def check_dichotomy(rho_t: float = 0.05) -> list:
    """Clamping gives an exactly zero nonsmooth gradient but a nonzero smoothed one;
    sliding gives nonzero gradients from both."""
    out = []
    clamp = solve_contacts(point_mass_problem(20.0, (0.02, 0.0), mu=0.5))
    g_ns = nonsmooth_impulse_gradient(clamp)
    g_sm = smoothed_impulse_gradient(clamp, rho_t=rho_t)
    ok = clamp.labels == ["clamping"] and bool(np.all(g_ns.dlambda_dmu == 0.0)) and bool(np.any(g_sm.dlambda_dmu != 0.0))
    out.append(CheckResult("clamping: nonsmooth zero, smoothed nonzero", "dichotomy", float(ok), 1.0, ok, g_ns.condition, ",".join(clamp.labels)))
    slide = solve_contacts(point_mass_problem(20.0, (0.6, -0.8)))
    g_ns = nonsmooth_impulse_gradient(slide)
    g_sm = smoothed_impulse_gradient(slide, rho_t=rho_t)
    ok = slide.labels == ["sliding"] and bool(np.any(g_ns.dlambda_dmu != 0.0)) and bool(np.any(g_sm.dlambda_dmu != 0.0))
    out.append(CheckResult("sliding: both nonzero", "dichotomy", float(ok), 1.0, ok, g_ns.condition, ",".join(slide.labels)))
    return out


def run_gradcheck(rho_t: float = 0.05, h: float = 1e-5, sign: float = 1.0) -> list:
    """All checks; ``sign`` multiplies the analytic gradients (a test hook for the failure path)."""
    results = [check_nonsmooth(n, p, h, sign) for n, p in nonsmooth_fixtures().items()]
    results += [check_smoothed(n, p, rho_t, sign) for n, p in smoothed_fixtures().items()]
    return results + check_dichotomy(rho_t)
