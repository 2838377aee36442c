"""Small contact problems with known structure, shared by the gradient checks and tests."""
from __future__ import annotations

import numpy as np

from .contact_solver import ContactProblem, assemble_problem
from .rigid_model import build_box_model, evaluate, state_from_parts
from .rotations import axis_angle_matrix, matrix_to_quat

GRAVITY = 9.81


def point_mass_problem(mass: float, v_free_t=(1.0, 0.0), mu: float = 0.19, dt: float = 0.01, v_n: float = 0.0) -> ContactProblem:
    """One contact on a free point mass: D = I / m, gravity folded into the normal free velocity."""
    D = np.eye(3) / mass
    v_free = np.array([v_free_t[0], v_free_t[1], v_n - GRAVITY * dt])
    return ContactProblem(D, v_free, float(mu), float(dt), v_free.copy(), D.copy())


def edge_box_problem(mu: float = 0.19, tilt: float = 0.5, speed: float = 1.0, dt: float = 0.01, mass: float = 1.0) -> ContactProblem:
    """Box balanced on a bottom edge (two contacts) moving along the edge."""
    model = build_box_model(mass)
    R = axis_angle_matrix(np.array([1.0, 0.0, 0.0]), tilt)
    corners = np.array([cp.offset for cp in model.contact_points])
    height = -min((R @ c)[2] for c in corners)
    state = state_from_parts([0.0, 0.0, height], matrix_to_quat(R), velocity=[speed, 0.0, 0.0])
    ev = evaluate(model, state, 1e-6)
    return assemble_problem(ev, state, None, dt, mu)


def synthetic_problem(v_free, delassus=None, mu: float = 0.19, dt: float = 0.01, seed: int = 3, n_contacts: int = 2) -> ContactProblem:
    """Contacts with a random SPD Delassus matrix (coupled blocks) and given free velocity."""
    if delassus is None:
        rng = np.random.default_rng(seed)
        G = rng.normal(size=(3 * n_contacts, 3 * n_contacts))
        delassus = 0.2 * G @ G.T / (3 * n_contacts) + 0.5 * np.eye(3 * n_contacts)
    delassus = 0.5 * (delassus + delassus.T)
    v_free = np.asarray(v_free, dtype=float)
    return ContactProblem(delassus, v_free, float(mu), float(dt), v_free.copy(), np.eye(len(v_free)))


def decoupled_problem(mu: float = 0.19, dt: float = 0.01, direction: float = 0.7, speeds=(1.0, 0.6), coupling: float = 0.1) -> ContactProblem:
    """Two sliding contacts with isotropic tangential blocks and parallel free velocities.

    Only the normal rows are coupled, so each sliding direction stays fixed as
    mu varies and the partition is locally constant.
    """
    D = np.diag([0.8, 0.8, 0.6, 0.5, 0.5, 0.4])
    D[2, 5] = D[5, 2] = coupling
    c, s = np.cos(direction), np.sin(direction)
    v_free = np.array([speeds[0] * c, speeds[0] * s, -2.0, speeds[1] * c, speeds[1] * s, -1.5])
    return synthetic_problem(v_free, D, mu, dt)


def monoped_slide_problem(mu: float = 0.19, speed: float = 1.0, dt: float = 0.01) -> ContactProblem:
    """Monoped standing on its foot while the whole body slides along x (planar)."""
    from .rigid_model import build_monoped_model, monoped_stance_state

    model = build_monoped_model()
    state = monoped_stance_state(model)
    ups = state.upsilon.copy()
    ups[0] = speed
    state = state_from_parts(state.q[:3], state.q[3:7], state.q[7:], velocity=ups[:3], omega=ups[3:6], joint_rates=ups[6:])
    ev = evaluate(model, state, 1e-6)
    return assemble_problem(ev, state, None, dt, mu)
