import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from frictionid.contact_solver import CLAMPING, SLIDING, assemble_problem, solve_contacts, step_dynamics
from frictionid.contact_solver import SPECULATIVE_SPEED
from frictionid.fixtures import decoupled_problem, point_mass_problem, synthetic_problem
from frictionid.gradcheck import check_dichotomy, check_nonsmooth, check_smoothed, nonsmooth_fixtures, run_gradcheck, smoothed_fixtures
from frictionid.gradients import (
    NONSMOOTH,
    SMOOTHED,
    ImpulseGradient,
    OracleError,
    build_stacked_system,
    contact_direction,
    finite_difference_gradient,
    impulse_gradient,
    nonsmooth_impulse_gradient,
    randomized_gradient,
    smoothed_impulse_gradient,
    smoothed_solution_oracle,
    smoothed_terms,
    state_gradient,
)
from frictionid.identifier import IdentifierConfig, apply_rejection, build_residual_system
from frictionid.rigid_model import build_monoped_model, evaluate, monoped_stance_state, state_from_parts


@pytest.mark.parametrize("name", list(nonsmooth_fixtures()))
def test_nonsmooth_matches_finite_differences(name):
    result = check_nonsmooth(name, nonsmooth_fixtures()[name])
    assert result.passed, result
    assert result.value < 1e-4


@pytest.mark.parametrize("name", list(smoothed_fixtures()))
def test_smoothed_matches_oracle_finite_differences(name):
    result = check_smoothed(name, smoothed_fixtures()[name])
    assert result.passed, result
    assert result.value < 1e-3


def test_clamping_sliding_dichotomy():
    results = check_dichotomy()
    assert all(r.passed for r in results)


def test_clamping_gradient_is_exact_zero():
    sol = solve_contacts(point_mass_problem(20.0, (0.02, 0.0), mu=0.5))
    assert sol.labels == [CLAMPING]
    g = nonsmooth_impulse_gradient(sol)
    assert np.all(g.dlambda_dmu == 0.0) and g.method_tag == NONSMOOTH
    s = smoothed_impulse_gradient(sol, rho_t=0.05)
    assert np.linalg.norm(s.dlambda_dmu) > 0 and s.method_tag == SMOOTHED


def test_single_sliding_point_mass_tangential_norm_derivative():
    problem = point_mass_problem(1.0, (1.0, 0.0), mu=0.19)
    g = nonsmooth_impulse_gradient(solve_contacts(problem))
    tnorm = lambda mu: np.linalg.norm(solve_contacts(problem.with_mu(mu)).impulses[0, :2])
    fd = finite_difference_gradient(tnorm, 0.19, 1e-4)
    # d|lam_t|/dmu = lam_n = 0.0981 here
    analytic = np.linalg.norm(g.per_contact[0, :2])
    assert abs(analytic - fd) / abs(fd) < 1e-4
    assert analytic == pytest.approx(0.0981, rel=1e-10)


def test_frictionless_sliding_gradient_is_direction_term():
    problem = point_mass_problem(1.0, (0.6, 0.8), mu=0.0)
    sol = solve_contacts(problem)
    assert sol.labels == [SLIDING]
    g = nonsmooth_impulse_gradient(sol).per_contact[0]
    lam_n = sol.impulses[0, 2]
    np.testing.assert_allclose(g[:2], -np.array([0.6, 0.8]) * lam_n, atol=1e-14)


def test_stacked_system_structure():
    sol = solve_contacts(decoupled_problem())
    sys = build_stacked_system(sol)
    assert sys.size == 3 * len(sys.clamping) + len(sys.sliding)
    assert np.all(sys.db_dmu == 0)
    assert np.isfinite(sys.condition)
    for j, k in enumerate(sys.sliding):
        c, s = np.cos(sol.theta[k]), np.sin(sol.theta[k])
        np.testing.assert_allclose(sys.E[j], [-sol.mu * c, -sol.mu * s, 1.0], atol=1e-15)


def test_smoothed_terms_structure():
    sol = solve_contacts(point_mass_problem(20.0, (0.02, 0.0), mu=0.5))
    terms = smoothed_terms(sol, 0.05)
    lam = sol.impulses[0]
    G = terms.Gamma
    np.testing.assert_array_equal(G[2], 0.0)
    den = (0.25 * lam[2] ** 2 - lam[:2] @ lam[:2]) ** 2
    rho_hat = 0.05 / den
    expected = np.outer(terms.Theta[0], rho_hat * np.r_[-2 * lam[:2], 2 * 0.25 * lam[2]])
    np.testing.assert_allclose(G[:2], expected, rtol=1e-12)
    assert np.all(np.isfinite(terms.rho_hat)) and np.all(terms.rho_hat >= 0)


def test_zero_tangential_impulse_drops_smoothed_terms():
    sol = solve_contacts(point_mass_problem(20.0, (0.0, 0.0), mu=0.5))
    assert sol.labels == [CLAMPING]
    assert contact_direction(sol, 0) is None
    g = smoothed_impulse_gradient(sol, rho_t=0.05)
    np.testing.assert_array_equal(g.dlambda_dmu, nonsmooth_impulse_gradient(sol).dlambda_dmu)


@pytest.mark.parametrize("mass,strict", [(20.0, True), (1.0, False)])
def test_sliding_denominator_floor_keeps_gradient_finite(mass, strict):
    # at the hard solution a sliding contact sits on the cone, so the floor is hit
    sol = solve_contacts(point_mass_problem(mass, (1.0, 0.0)))
    g = smoothed_impulse_gradient(sol, rho_t=0.05, strict=strict)
    assert np.all(np.isfinite(g.dlambda_dmu)) and np.any(g.dlambda_dmu != 0)
    assert g.diagnostics["n_clamped_den"] == 1
    assert np.all(np.isfinite(g.diagnostics["rho_hat"]))


def test_oracle_small_rho_approaches_hard_solution():
    problem = point_mass_problem(20.0, (0.6, -0.8))
    hard = solve_contacts(problem)
    smooth = smoothed_solution_oracle(problem, hard, 1e-8, newton_tol=1e-8)
    assert np.abs(smooth.impulses - hard.impulses).max() < 1e-4


def test_oracle_residual_and_strict_cone_interior():
    problem = point_mass_problem(20.0, (0.6, -0.8))
    hard = solve_contacts(problem)
    sol = smoothed_solution_oracle(problem, hard, 0.05, newton_tol=1e-12)
    lam, v = sol.impulses[0], sol.velocities[0]
    margin = 0.19**2 * lam[2] ** 2 - lam[:2] @ lam[:2]
    assert abs(np.hypot(*v[:2]) * margin - 0.05) < 1e-10
    assert abs(v[2]) < 1e-12
    assert np.linalg.norm(lam[:2]) < 0.19 * lam[2]


def test_oracle_rejects_light_fixture():
    # a 1 kg point mass carries too little normal impulse for rho_t = 0.05
    problem = point_mass_problem(1.0, (1.0, 0.0))
    with pytest.raises(OracleError):
        smoothed_solution_oracle(problem, solve_contacts(problem), 0.05)


def test_smoothed_gradient_vs_oracle_across_rho():
    problem = synthetic_problem([0.8, 0.3, -2.0, -0.5, 0.2, -2.4])
    for rho in (1e-3, 1e-2, 0.05):
        assert check_smoothed("coupled", problem, rho).passed


def test_gradcheck_sign_flip_fails():
    results = run_gradcheck(sign=-1.0)
    assert not all(r.passed for r in results)
    assert all(r.passed for r in run_gradcheck())


def test_impulse_gradient_dispatch():
    sol = solve_contacts(point_mass_problem(20.0, (0.6, -0.8)))
    assert impulse_gradient(sol, NONSMOOTH).method_tag == NONSMOOTH
    assert impulse_gradient(sol, SMOOTHED).method_tag == SMOOTHED
    with pytest.raises(ValueError):
        impulse_gradient(sol, "FiniteDiff")


def _monoped_sliding():
    model = build_monoped_model()
    base = monoped_stance_state(model)
    state = state_from_parts(base.q[:3], base.q[3:7], base.q[7:], velocity=[1.0, 0.0, 0.0])
    return model, state


def test_state_gradient_matches_step_dynamics():
    model, state = _monoped_sliding()
    dt, mu = 0.01, 0.19
    ev = evaluate(model, state, 1e-4 + SPECULATIVE_SPEED * dt)
    sol = solve_contacts(assemble_problem(ev, state, None, dt, mu))
    assert sol.labels == [SLIDING]
    ds = state_gradient(nonsmooth_impulse_gradient(sol), ev, dt)
    assert ds.shape == (2 * model.n_v,)
    vel = lambda m: step_dynamics(model, state, None, m, dt)[0].upsilon
    fd = finite_difference_gradient(vel, mu, 1e-5)
    assert np.linalg.norm(ds[model.n_v :] - fd) / np.linalg.norm(fd) < 1e-4
    np.testing.assert_allclose(ds[: model.n_v], dt * ds[model.n_v :])


def test_state_gradient_of_zero_is_zero():
    model, state = _monoped_sliding()
    ev = evaluate(model, state, 1e-3)
    grad = ImpulseGradient(np.zeros(3 * ev.n_active), NONSMOOTH)
    out = state_gradient(grad, ev, 0.01)
    assert out.shape == (2 * model.n_v,)
    np.testing.assert_array_equal(out, 0.0)


def test_randomized_constant_loss():
    est = randomized_gradient(lambda m: 3.0, 0.5, 50, 0.05, "zeroth", seed=1)
    assert est.value == 0.0  # the baseline cancels a constant exactly
    plain = randomized_gradient(lambda m: 3.0, 0.5, 50, 0.05, "zeroth", seed=1, baseline=False)
    assert abs(plain.value) < 3 / 0.05 / np.sqrt(50) * 3.0


def test_randomized_first_order_quadratic():
    est = randomized_gradient(None, 0.8, 50, 0.05, "first", seed=2, grad_fn=lambda m: 2 * (m - 0.2))
    assert est.value == pytest.approx(1.2, abs=0.05)
    assert abs(est.value - 1.2) < 3 * est.std_error


def test_randomized_determinism_and_projection():
    f = lambda m: (m - 0.2) ** 2
    a = randomized_gradient(f, 0.99, 50, 0.05, "zeroth", seed=3)
    b = randomized_gradient(f, 0.99, 50, 0.05, "zeroth", seed=3)
    assert a.value == b.value
    assert a.n_projected > 0
    c = randomized_gradient(f, 0.99, 50, 0.05, "zeroth", seed=4)
    assert c.value != a.value


def test_randomized_rejects_bad_arguments():
    with pytest.raises(ValueError):
        randomized_gradient(lambda m: m, 0.5, 0)
    with pytest.raises(ValueError):
        randomized_gradient(lambda m: m, 0.5, 10, sigma_rand=0.0)
    with pytest.raises(ValueError):
        randomized_gradient(lambda m: m, 0.5, 10, order="first")


def test_zeroth_order_converges_to_analytic_gradient():
    problem = decoupled_problem()
    loss = lambda mu: float(np.sum(solve_contacts(problem.with_mu(mu)).impulses[:, :2] ** 2))
    sol = solve_contacts(problem)
    dlam = nonsmooth_impulse_gradient(sol).per_contact
    analytic = float(2 * np.sum(sol.impulses[:, :2] * dlam[:, :2]))
    est = randomized_gradient(loss, problem.mu, 10_000, 1e-3, "zeroth", seed=0)
    assert abs(est.value - analytic) / abs(analytic) < 0.05


def test_descent_direction_on_slipping_buffers(short_slippery_stream):
    """With the estimate above the true value the smoothed loss gradient points it down."""
    stream = short_slippery_stream
    cfg = IdentifierConfig()
    entries = apply_rejection(stream.entries, cfg)
    signs = []
    for start in range(0, len(entries) - cfg.H, 10):
        system = build_residual_system(entries[start : start + cfg.H], stream.model, cfg)
        if system.n_pairs:
            r, J = system.residual_and_jacobian(0.8, SMOOTHED)
            signs.append(J @ r > 0)
    assert len(signs) >= 10
    assert np.mean(signs) >= 0.95


@settings(max_examples=40, deadline=None)
@given(direction=st.floats(0.0, 2 * np.pi), speed=st.floats(0.3, 2.0), mu=st.floats(0.05, 0.9), mass=st.floats(5.0, 50.0))
def test_nonsmooth_fd_on_random_point_mass(direction, speed, mu, mass):
    problem = point_mass_problem(mass, (speed * np.cos(direction), speed * np.sin(direction)), mu=mu)
    sol = solve_contacts(problem)
    if sol.labels != [SLIDING]:
        return
    assert check_nonsmooth("random", problem).passed
