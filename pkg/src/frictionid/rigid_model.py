"""Floating-base rigid-body models on flat ground.

Generalized coordinates are ``q = [p, quat(w, x, y, z), joints]`` and
``upsilon = [v, omega, joint rates]``; base linear and angular velocity are
expressed in the world frame. The ground is the plane ``z = 0`` and every
contact frame uses the world axes (tangent x, tangent y, normal z).
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .rotations import axis_angle_matrix, quat_exp, quat_mul, quat_to_matrix, skew

DEFAULT_GRAVITY = (0.0, 0.0, -9.81)


def _cross(a, b) -> np.ndarray:
    # np.cross carries heavy dispatch overhead for single 3-vectors
    return np.array([a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]])


class InvalidModelError(ValueError):
    pass


@dataclass(frozen=True)
class Body:
    name: str
    mass: float
    inertia: np.ndarray  # about the CoM, body frame
    com: np.ndarray = field(default_factory=lambda: np.zeros(3))
    parent: int = -1  # -1 marks the floating base
    joint_axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0, 0.0]))
    joint_origin: np.ndarray = field(default_factory=lambda: np.zeros(3))


@dataclass(frozen=True)
class ContactPoint:
    body: int
    offset: np.ndarray  # body frame


@dataclass(frozen=True)
class RobotModel:
    name: str
    bodies: tuple[Body, ...]
    actuated_joints: tuple[int, ...]
    contact_points: tuple[ContactPoint, ...]
    gravity: np.ndarray = field(default_factory=lambda: np.array(DEFAULT_GRAVITY))

    @property
    def n_joints(self) -> int:
        return len(self.bodies) - 1

    @property
    def n_v(self) -> int:
        return 6 + self.n_joints

    @property
    def n_q(self) -> int:
        return 7 + self.n_joints

    @property
    def n_a(self) -> int:
        return len(self.actuated_joints)

    @property
    def n_contacts(self) -> int:
        return len(self.contact_points)

    def input_matrix(self) -> np.ndarray:
        B = np.zeros((self.n_v, self.n_a))
        for col, j in enumerate(self.actuated_joints):
            B[6 + j, col] = 1.0
        return B


@dataclass
class GeneralizedState:
    q: np.ndarray
    upsilon: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        self.upsilon = np.asarray(self.upsilon, dtype=float)
        if self.q.shape[0] != self.upsilon.shape[0] + 1:
            raise ValueError(f"dim(q)={self.q.shape[0]} must equal dim(upsilon)+1={self.upsilon.shape[0] + 1}")
        if abs(np.linalg.norm(self.q[3:7]) - 1.0) > 1e-9:
            raise ValueError("base quaternion is not unit norm")

    @property
    def position(self) -> np.ndarray:
        return self.q[:3]

    @property
    def quaternion(self) -> np.ndarray:
        return self.q[3:7]

    @property
    def rotation(self) -> np.ndarray:
        return quat_to_matrix(self.q[3:7])

    @property
    def joints(self) -> np.ndarray:
        return self.q[7:]

    @property
    def linear_velocity(self) -> np.ndarray:
        return self.upsilon[:3]

    @property
    def angular_velocity(self) -> np.ndarray:
        return self.upsilon[3:6]

    @property
    def joint_rates(self) -> np.ndarray:
        return self.upsilon[6:]

    def copy(self) -> "GeneralizedState":
        return GeneralizedState(self.q.copy(), self.upsilon.copy(), self.time)


@dataclass
class ModelEval:
    """Dynamics quantities at one state, restricted to the active contacts."""

    M: np.ndarray
    h: np.ndarray
    B: np.ndarray
    J: np.ndarray  # (3 * n_active, n_v), rows per contact: tx, ty, n
    gaps: np.ndarray
    active: np.ndarray  # indices into model.contact_points

    @property
    def n_active(self) -> int:
        return len(self.active)

    def contact_jacobian(self, k: int) -> np.ndarray:
        return self.J[3 * k : 3 * k + 3]


def state_from_parts(position, quaternion, joints=(), velocity=(0, 0, 0), omega=(0, 0, 0), joint_rates=None, time=0.0):
    joints = np.asarray(joints, dtype=float)
    if joint_rates is None:
        joint_rates = np.zeros_like(joints)
    q = np.concatenate([np.asarray(position, float), np.asarray(quaternion, float), joints])
    v = np.concatenate([np.asarray(velocity, float), np.asarray(omega, float), np.asarray(joint_rates, float)])
    return GeneralizedState(q, v, time)


def _check_inertia(inertia: np.ndarray, label: str) -> np.ndarray:
    inertia = np.asarray(inertia, dtype=float)
    if inertia.shape == (3,):
        inertia = np.diag(inertia)
    if inertia.shape != (3, 3):
        raise InvalidModelError(f"{label}: inertia must be a 3-vector or 3x3 matrix")
    if not np.allclose(inertia, inertia.T, atol=1e-12):
        raise InvalidModelError(f"{label}: inertia not symmetric")
    if np.linalg.eigvalsh(inertia).min() <= 0:
        raise InvalidModelError(f"{label}: inertia not positive definite")
    return inertia


def build_box_model(mass: float = 1.0, half_extents: Sequence[float] = (0.1, 0.1, 0.1), inertia=None) -> RobotModel:
    """Free box with its four bottom corners as contact candidates."""
    if not mass > 0:
        raise InvalidModelError(f"box mass must be positive, got {mass}")
    a, b, c = (float(x) for x in half_extents)
    if min(a, b, c) <= 0:
        raise InvalidModelError(f"box half extents must be positive, got {half_extents}")
    if inertia is None:
        inertia = mass / 3.0 * np.array([b * b + c * c, a * a + c * c, a * a + b * b])
    base = Body("box", float(mass), _check_inertia(inertia, "box"))
    corners = tuple(
        ContactPoint(0, np.array([sx * a, sy * b, -c])) for sx, sy in ((1, 1), (-1, 1), (-1, -1), (1, -1))
    )
    return RobotModel("box", (base,), (), corners)


@dataclass(frozen=True)
class MonopedParams:
    thigh_length: float = 0.25
    shank_length: float = 0.25
    thigh_mass: float = 1.0
    shank_mass: float = 0.6
    hip_offset: float = 0.05  # hip sits this far below the base CoM
    # large roll/pitch inertia stands in for the attitude support of the other legs
    base_inertia: tuple[float, float, float] = (1000.0, 1000.0, 100.0)
    nominal_hip: float = 0.5  # rad; knee = -2 * hip keeps the foot under the hip


def build_monoped_model(base_mass: float = 10.0, link_params: Optional[MonopedParams] = None) -> RobotModel:
    """Floating base with a planar hip-knee leg (both joints about base y) and a point foot."""
    p = link_params or MonopedParams()
    if not base_mass > 0 or p.thigh_mass <= 0 or p.shank_mass <= 0:
        raise InvalidModelError("monoped masses must be positive")
    if p.thigh_length <= 0 or p.shank_length <= 0 or p.hip_offset < 0:
        raise InvalidModelError("monoped link lengths must be positive")

    def rod(m, length):
        # thin rod along z plus a small radial term so the inertia is positive definite
        lateral = m * length**2 / 12.0
        return np.diag([lateral, lateral, 1e-3 * m * length**2 + 1e-6])

    y = np.array([0.0, 1.0, 0.0])
    base = Body("base", float(base_mass), _check_inertia(p.base_inertia, "base"))
    thigh = Body(
        "thigh",
        p.thigh_mass,
        rod(p.thigh_mass, p.thigh_length),
        com=np.array([0.0, 0.0, -0.5 * p.thigh_length]),
        parent=0,
        joint_axis=y,
        joint_origin=np.array([0.0, 0.0, -p.hip_offset]),
    )
    shank = Body(
        "shank",
        p.shank_mass,
        rod(p.shank_mass, p.shank_length),
        com=np.array([0.0, 0.0, -0.5 * p.shank_length]),
        parent=1,
        joint_axis=y,
        joint_origin=np.array([0.0, 0.0, -p.thigh_length]),
    )
    foot = ContactPoint(2, np.array([0.0, 0.0, -p.shank_length]))
    return RobotModel("monoped", (base, thigh, shank), (0, 1), (foot,))


def monoped_stance_state(model: RobotModel, hip: float = 0.5, base_x: float = 0.0, time: float = 0.0) -> GeneralizedState:
    """Upright base with the foot touching the ground directly below the hip."""
    l1 = -model.bodies[2].joint_origin[2]
    l2 = -model.contact_points[0].offset[2]
    hip_offset = -model.bodies[1].joint_origin[2]
    knee = -2.0 * hip if np.isclose(l1, l2) else -np.arcsin(np.clip(l1 * np.sin(hip) / l2, -1, 1)) - hip
    height = hip_offset + l1 * np.cos(hip) + l2 * np.cos(hip + knee)
    return state_from_parts([base_x, 0.0, height], [1.0, 0.0, 0.0, 0.0], [hip, knee], time=time)


@dataclass
class _Kinematics:
    R: list
    origin: list
    omega: list
    J_origin: list  # 3 x n_v, velocity of body frame origin
    J_omega: list
    acc_bias: list  # origin acceleration at zero generalized acceleration
    alpha_bias: list


def _kinematics(model: RobotModel, state: GeneralizedState) -> _Kinematics:
    n = model.n_v
    q, v = state.q, state.upsilon
    R0 = quat_to_matrix(q[3:7])
    J_o0 = np.zeros((3, n))
    J_o0[:, 0:3] = np.eye(3)
    J_w0 = np.zeros((3, n))
    J_w0[:, 3:6] = np.eye(3)
    kin = _Kinematics([R0], [q[:3].copy()], [v[3:6].copy()], [J_o0], [J_w0], [np.zeros(3)], [np.zeros(3)])
    for b, body in enumerate(model.bodies[1:], start=1):
        a = body.parent
        j = b - 1
        Ra = kin.R[a]
        axis_w = Ra @ body.joint_axis
        r = Ra @ body.joint_origin
        w_a = kin.omega[a]
        qd = v[6 + j]
        J_w = kin.J_omega[a].copy()
        J_w[:, 6 + j] += axis_w
        J_o = kin.J_origin[a] - skew(r) @ kin.J_omega[a]
        kin.R.append(Ra @ axis_angle_matrix(body.joint_axis, q[7 + j]))
        kin.origin.append(kin.origin[a] + r)
        kin.omega.append(w_a + axis_w * qd)
        kin.J_omega.append(J_w)
        kin.J_origin.append(J_o)
        kin.alpha_bias.append(kin.alpha_bias[a] + _cross(w_a, axis_w * qd))
        kin.acc_bias.append(kin.acc_bias[a] + _cross(kin.alpha_bias[a], r) + _cross(w_a, _cross(w_a, r)))
    return kin


def _point(kin: _Kinematics, body: int, offset: np.ndarray):
    """World position, Jacobian and bias acceleration of a body-fixed point."""
    r = kin.R[body] @ offset
    x = kin.origin[body] + r
    J = kin.J_origin[body] - skew(r) @ kin.J_omega[body]
    w = kin.omega[body]
    bias = kin.acc_bias[body] + _cross(kin.alpha_bias[body], r) + _cross(w, _cross(w, r))
    return x, J, bias


def mass_matrix_and_bias(model: RobotModel, state: GeneralizedState):
    kin = _kinematics(model, state)
    n = model.n_v
    M = np.zeros((n, n))
    h = np.zeros(n)
    for b, body in enumerate(model.bodies):
        _, J_c, a_c = _point(kin, b, body.com)
        J_w = kin.J_omega[b]
        Iw = kin.R[b] @ body.inertia @ kin.R[b].T
        w = kin.omega[b]
        M += body.mass * J_c.T @ J_c + J_w.T @ Iw @ J_w
        h += J_c.T @ (body.mass * (a_c - model.gravity)) + J_w.T @ (Iw @ kin.alpha_bias[b] + _cross(w, Iw @ w))
    return 0.5 * (M + M.T), h


def contact_kinematics(model: RobotModel, state: GeneralizedState):
    """World positions (n_c, 3), velocities (n_c, 3) and Jacobians (n_c, 3, n_v) of all contact points."""
    kin = _kinematics(model, state)
    pos, jac = [], []
    for cp in model.contact_points:
        x, J, _ = _point(kin, cp.body, cp.offset)
        pos.append(x)
        jac.append(J)
    jac = np.array(jac)
    return np.array(pos), jac @ state.upsilon, jac


def body_frames(model: RobotModel, state: GeneralizedState):
    """World rotation and CoM position of every body."""
    kin = _kinematics(model, state)
    return [(kin.R[b], kin.origin[b] + kin.R[b] @ body.com) for b, body in enumerate(model.bodies)]


def evaluate(model: RobotModel, state: GeneralizedState, contact_activation_threshold: float = 1e-4) -> ModelEval:
    M, h = mass_matrix_and_bias(model, state)
    pos, _, jac = contact_kinematics(model, state)
    gaps = pos[:, 2]
    active = np.flatnonzero(gaps < contact_activation_threshold)
    J = jac[active].reshape(3 * len(active), model.n_v) if len(active) else np.zeros((0, model.n_v))
    return ModelEval(M, h, model.input_matrix(), J, gaps[active], active)


def integrate(state: GeneralizedState, upsilon_next: np.ndarray, dt: float) -> GeneralizedState:
    """Semi-implicit Euler step with an exponential-map quaternion update."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    v = np.asarray(upsilon_next, dtype=float)
    q = state.q.copy()
    q[:3] += dt * v[:3]
    quat = quat_mul(quat_exp(dt * v[3:6]), state.q[3:7])
    q[3:7] = quat / np.linalg.norm(quat)
    q[7:] += dt * v[6:]
    return GeneralizedState(q, v.copy(), state.time + dt)


def kinetic_energy(model: RobotModel, state: GeneralizedState) -> float:
    M, _ = mass_matrix_and_bias(model, state)
    return 0.5 * float(state.upsilon @ M @ state.upsilon)


def potential_energy(model: RobotModel, state: GeneralizedState) -> float:
    return -sum(body.mass * float(model.gravity @ c) for body, (_, c) in zip(model.bodies, body_frames(model, state)))


def with_gravity(model: RobotModel, gravity) -> RobotModel:
    return replace(model, gravity=np.asarray(gravity, dtype=float))
