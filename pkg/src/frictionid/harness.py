"""Synthetic ground truth and identification experiments.

A scenario simulates a model on a terrain whose friction switches over time,
samples noisy buffer entries every ``dt_buffer`` and keeps the ground truth
alongside.  Experiments replay a stream through the online identifier and
summarise how fast and how well each gradient method tracks the true value.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .contact_solver import step_dynamics
from .identifier import (
    METHODS,
    BufferEntry,
    CycleRecord,
    FrictionIdentifier,
    IdentifierConfig,
    build_residual_system,
)
from .rigid_model import (
    GeneralizedState,
    MonopedParams,
    RobotModel,
    build_box_model,
    build_monoped_model,
    contact_kinematics,
    mass_matrix_and_bias,
    monoped_stance_state,
    state_from_parts,
)
from .rotations import so3_exp

CONVERGENCE_TOL = 0.05
SLIPPERY_BELOW = 0.5  # segments with a lower true mu count as slippery
CONTACT_FLAG_GAP = 1e-3


class ScenarioError(RuntimeError):
    def __init__(self, message: str, step: int = -1):
        super().__init__(message)
        self.step = step


@dataclass(frozen=True)
class TerrainSchedule:
    segments: tuple  # ((start, end, mu_true), ...)

    def __post_init__(self):
        segs = tuple((float(a), float(b), float(m)) for a, b, m in self.segments)
        if not segs:
            raise ValueError("terrain schedule needs at least one segment")
        for (a, b, m), nxt in zip(segs, segs[1:] + (None,)):
            if not b > a:
                raise ValueError(f"segment [{a}, {b}] is empty")
            if not 0 < m <= 2:
                raise ValueError(f"segment friction {m} outside (0, 2]")
            if nxt is not None and abs(nxt[0] - b) > 1e-9:
                raise ValueError("terrain segments must be contiguous")
        object.__setattr__(self, "segments", segs)

    @classmethod
    def constant(cls, mu: float, duration: float) -> "TerrainSchedule":
        return cls(((0.0, duration, mu),))

    @property
    def end(self) -> float:
        return self.segments[-1][1]

    def segment_index(self, t: float) -> int:
        for i, (a, b, _) in enumerate(self.segments):
            if t < b - 1e-9:
                return i
        return len(self.segments) - 1

    def mu_at(self, t: float) -> float:
        return self.segments[self.segment_index(t)][2]

    def slippery(self, t: float) -> bool:
        return self.mu_at(t) < SLIPPERY_BELOW

    def window_uniform(self, t0: float, t1: float) -> Optional[bool]:
        """Slipperiness shared by the whole window ``[t0, t1]``, or None if it changes."""
        i0, i1 = self.segment_index(max(t0, 0.0)), self.segment_index(t1)
        flags = {self.segments[i][2] < SLIPPERY_BELOW for i in range(i0, i1 + 1)}
        return flags.pop() if len(flags) == 1 else None


@dataclass(frozen=True)
class NoiseModel:
    position_std: float = 1e-4
    velocity_std: float = 1e-3

    @classmethod
    def none(cls) -> "NoiseModel":
        return cls(0.0, 0.0)


@dataclass(frozen=True)
class GaitParams:
    amplitude: float = 0.2  # rad, hip oscillation
    frequency: float = 2.0  # Hz
    kp: float = 80.0
    kd: float = 4.0
    hip: float = 0.5


@dataclass(frozen=True)
class HopParams:
    thrust: float = 300.0  # N, extra vertical ground force during take-off
    thrust_duration: float = 0.05
    period: float = 0.5
    swing: float = 0.3  # rad, hip swing amplitude in flight
    kp: float = 30.0  # flight joint gains
    kd: float = 0.5
    stance_kp: tuple = (200.0, 800.0)  # N/m, base over foot (x) and height (z)
    stance_kd: tuple = (40.0, 80.0)
    liftoff_speed: float = 0.2  # m/s base rise that ends stance after the push
    retract: float = 0.4  # rad of extra knee flexion at lift-off
    hip: float = 0.5


@dataclass(frozen=True)
class PushParams:
    force: float = 5.0  # N along x, sign alternates
    period: float = 2.0


@dataclass(frozen=True)
class ScenarioConfig:
    model: str = "monoped"  # monoped | box
    control: str = "gait"  # gait | hop | push | rest
    terrain: TerrainSchedule = field(default_factory=lambda: TerrainSchedule.constant(0.19, 3.0))
    sim_dt: float = 0.001
    dt_buffer: float = 0.01
    duration: float = 3.0
    noise: NoiseModel = field(default_factory=NoiseModel)
    flag_corruption: float = 0.0
    seed: int = 0
    gait: GaitParams = field(default_factory=GaitParams)
    hop: HopParams = field(default_factory=HopParams)
    push: PushParams = field(default_factory=PushParams)
    base_mass: float = 10.0

    def __post_init__(self):
        if self.model not in ("monoped", "box"):
            raise ValueError(f"unknown model {self.model!r}")
        if self.control not in ("gait", "hop", "push", "rest"):
            raise ValueError(f"unknown control script {self.control!r}")
        if self.model == "box" and self.control in ("gait", "hop"):
            raise ValueError("the box has no joints to drive")
        if not self.duration > 0 or not self.sim_dt > 0:
            raise ValueError("duration and sim_dt must be positive")
        ratio = self.dt_buffer / self.sim_dt
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("sim_dt must divide dt_buffer")
        if not 0 <= self.flag_corruption <= 1:
            raise ValueError("flag_corruption must be a probability")
        if self.terrain.end < self.duration - 1e-9:
            raise ValueError("terrain schedule shorter than the scenario")

    @property
    def substeps(self) -> int:
        return int(round(self.dt_buffer / self.sim_dt))


def build_model(config: ScenarioConfig) -> RobotModel:
    if config.model == "box":
        return build_box_model(1.0)
    return build_monoped_model(config.base_mass, MonopedParams())


def initial_state(model: RobotModel, config: ScenarioConfig) -> GeneralizedState:
    if config.model == "box":
        return state_from_parts([0.0, 0.0, 0.1], [1.0, 0.0, 0.0, 0.0])
    hip = config.hop.hip if config.control == "hop" else config.gait.hip
    return monoped_stance_state(model, hip)


def _gravity_feedforward(model: RobotModel, state: GeneralizedState) -> np.ndarray:
    """Joint torques that hold the whole weight on the foot at zero velocity."""
    _, h = mass_matrix_and_bias(model, GeneralizedState(state.q, np.zeros(model.n_v)))
    _, _, jac = contact_kinematics(model, state)
    weight = -sum(b.mass for b in model.bodies) * model.gravity
    return h[6:] - jac[0][:, 6:].T @ weight


class Controller:
    """Torque (and push) generator evaluated at the buffer rate and held in between."""

    def __init__(self, model: RobotModel, config: ScenarioConfig, state0: GeneralizedState):
        self.model = model
        self.config = config
        self.hip0 = float(state0.joints[0]) if model.n_joints else 0.0
        self.knee0 = float(state0.joints[1]) if model.n_joints > 1 else 0.0
        self.height0 = float(state0.q[2])

    def _hop(self, state: GeneralizedState, t: float) -> np.ndarray:
        """Joint PD with a swinging hip in flight; in stance a Cartesian spring
        holds the base over the foot so the ground force stays well inside the cone."""
        h = self.config.hop
        q, qd = state.joints, state.joint_rates
        pos, _, jac = contact_kinematics(self.model, state)
        base, vel = state.q[:3], state.upsilon[:3]
        thrusting = t % h.period < h.thrust_duration - 1e-12
        if pos[0, 2] >= CONTACT_FLAG_GAP or (not thrusting and vel[2] > h.liftoff_speed):
            # flight, or unloading after the push: pick the foot up instead of dragging it
            stance = pos[0, 2] < CONTACT_FLAG_GAP
            hd = self.hip0 if stance else self.hip0 + h.swing * math.sin(2.0 * math.pi * t / h.period)
            kd = self.knee0 - (h.retract if stance else 0.0)
            return np.array([h.kp * (hd - q[0]) - h.kd * qd[0], h.kp * (kd - q[1]) - h.kd * qd[1]])
        weight = -sum(b.mass for b in self.model.bodies) * self.model.gravity
        force = weight + np.array(
            [
                h.stance_kp[0] * (pos[0, 0] - base[0]) - h.stance_kd[0] * vel[0],
                -h.stance_kd[0] * vel[1],
                h.stance_kp[1] * (self.height0 - base[2]) - h.stance_kd[1] * vel[2],
            ]
        )
        if thrusting:
            force[2] += h.thrust
        force[2] = max(force[2], 0.0)
        force[:2] = np.clip(force[:2], -0.3 * force[2], 0.3 * force[2])
        _, bias = mass_matrix_and_bias(self.model, GeneralizedState(state.q, np.zeros(self.model.n_v)))
        return bias[6:] - jac[0][:, 6:].T @ force

    def __call__(self, state: GeneralizedState, t: float):
        cfg = self.config
        tau = np.zeros(self.model.n_a)
        f_ext = None
        if cfg.control == "gait":
            g = cfg.gait
            w = 2.0 * math.pi * g.frequency
            hd = self.hip0 + g.amplitude * math.sin(w * t)
            hdd = g.amplitude * w * math.cos(w * t)
            q, qd = state.joints, state.joint_rates
            tau = _gravity_feedforward(self.model, state) + np.array(
                [g.kp * (hd - q[0]) + g.kd * (hdd - qd[0]), g.kp * (self.knee0 - q[1]) - g.kd * qd[1]]
            )
        elif cfg.control == "hop":
            tau = self._hop(state, t)
        elif cfg.control == "push":
            p = cfg.push
            sign = 1.0 if (t % p.period) < 0.5 * p.period else -1.0
            f_ext = np.zeros(self.model.n_v)
            f_ext[0] = sign * p.force
        return tau, f_ext


@dataclass
class ScenarioStream:
    """Noisy buffer entries plus the ground truth they were sampled from."""

    config: ScenarioConfig
    model: RobotModel
    entries: list
    times: np.ndarray
    mu_true: np.ndarray
    states: list
    foot_velocity: np.ndarray  # (n, n_c, 3) true backward-difference velocity
    foot_velocity_now: np.ndarray  # (n, n_c, 3) true instantaneous velocity
    contact_true: np.ndarray  # (n, n_c) bool
    labels: list  # contact labels of the last sim step before each sample
    sim_wall_s: float = 0.0


def run_scenario(config: ScenarioConfig, model: Optional[RobotModel] = None) -> ScenarioStream:
    """Simulate the scenario and sample one buffer entry every ``dt_buffer``."""
    model = model or build_model(config)
    rng = np.random.default_rng(config.seed)
    state = initial_state(model, config)
    controller = Controller(model, config, state)
    n_samples = int(round(config.duration / config.dt_buffer)) + 1
    noise = config.noise
    entries, states, times, mus = [], [], [], []
    fv_diff, fv_now, flags_true, labels = [], [], [], []
    prev_pos, _, _ = contact_kinematics(model, state)
    last_labels: list = []
    t_start = time.perf_counter()
    for i in range(n_samples):
        t = i * config.dt_buffer
        state = GeneralizedState(state.q, state.upsilon, t)
        pos, vel, _ = contact_kinematics(model, state)
        diff = vel if i == 0 else (pos - prev_pos) / config.dt_buffer
        contact = pos[:, 2] < CONTACT_FLAG_GAP
        tau, f_ext = controller(state, t)
        entries.append(_noisy_entry(state, tau, contact, diff, f_ext, noise, config.flag_corruption, rng))
        states.append(state)
        times.append(t)
        mus.append(config.terrain.mu_at(t))
        fv_diff.append(diff)
        fv_now.append(vel)
        flags_true.append(contact)
        labels.append(list(last_labels))
        if i == n_samples - 1:
            break
        prev_pos = pos
        mu = config.terrain.mu_at(t)
        for j in range(config.substeps):
            try:
                state, sol = step_dynamics(model, state, tau, mu, config.sim_dt, f_ext=f_ext)
            except Exception as exc:  # surface where the simulation broke
                raise ScenarioError(f"simulation failed at step {i * config.substeps + j}: {exc}", i * config.substeps + j) from exc
            if not np.all(np.isfinite(state.upsilon)):
                raise ScenarioError(f"simulation diverged at step {i * config.substeps + j}", i * config.substeps + j)
        last_labels = _labels_by_point(sol, model)
    return ScenarioStream(
        config,
        model,
        entries,
        np.array(times),
        np.array(mus),
        states,
        np.array(fv_diff),
        np.array(fv_now),
        np.array(flags_true),
        labels,
        time.perf_counter() - t_start,
    )


def _labels_by_point(solution, model: RobotModel) -> list:
    out = ["open"] * model.n_contacts
    if solution.problem is not None and solution.problem.eval is not None:
        for k, idx in enumerate(solution.problem.eval.active):
            out[int(idx)] = solution.labels[k]
    return out


def _noisy_entry(state, tau, contact, foot_velocity, f_ext, noise: NoiseModel, corruption: float, rng) -> BufferEntry:
    # draw every channel unconditionally so streams with and without noise share the rng sequence
    n_j = state.joints.size
    dp, dr, dj = rng.normal(size=3), rng.normal(size=3), rng.normal(size=n_j)
    dv, dw, dqd = rng.normal(size=3), rng.normal(size=3), rng.normal(size=n_j)
    dfv = rng.normal(size=foot_velocity.shape)
    flips = rng.random(contact.shape) < corruption
    ps, vs = noise.position_std, noise.velocity_std
    return BufferEntry(
        float(state.time),
        so3_exp(ps * dr) @ state.rotation,
        state.position + ps * dp,
        state.angular_velocity + vs * dw,
        state.linear_velocity + vs * dv,
        state.joints + ps * dj,
        state.joint_rates + vs * dqd,
        np.asarray(tau, dtype=float).copy(),
        np.logical_xor(contact, flips),
        foot_velocity + vs * dfv,
        None if f_ext is None else np.asarray(f_ext, dtype=float).copy(),
    )


@dataclass
class RunMetrics:
    method: str
    mu_init: float
    records: list  # CycleRecord per 10 Hz cycle
    mu_true: np.ndarray  # at cycle times
    convergence_times: list  # per slippery segment; None if never converged
    average_loss: float  # mean per-pair loss at the current estimate over slippery cycles
    false_updates: int
    wall_ms_per_solve: float
    n_solves: int

    @property
    def times(self) -> np.ndarray:
        return np.array([r.t for r in self.records])

    @property
    def mu_hat(self) -> np.ndarray:
        return np.array([r.mu_hat for r in self.records])

    @property
    def eta(self) -> np.ndarray:
        return np.array([r.eta for r in self.records])

    @property
    def final_mu(self) -> float:
        return self.records[-1].mu_hat if self.records else self.mu_init

    @property
    def convergence_time(self) -> Optional[float]:
        return self.convergence_times[0] if self.convergence_times else None

    def summary(self) -> dict:
        return {
            "method": self.method,
            "mu_init": self.mu_init,
            "final_mu": self.final_mu,
            "convergence_time": self.convergence_time,
            "average_loss": self.average_loss,
            "false_updates": self.false_updates,
            "wall_ms_per_solve": self.wall_ms_per_solve,
            "n_solves": self.n_solves,
            "max_eta": float(self.eta.max()) if self.records else 0.0,
        }


def run_identification_experiment(
    scenario,
    method: str = "smoothed",
    config: Optional[IdentifierConfig] = None,
    mu_init: Optional[float] = None,
    record_loss: bool = True,
) -> RunMetrics:
    """Replay a stream (or a scenario, simulated first) through the online identifier at 10 Hz."""
    stream = scenario if isinstance(scenario, ScenarioStream) else run_scenario(scenario)
    config = replace(config or IdentifierConfig(), gradient_method=method)
    if abs(config.dt_buffer - stream.config.dt_buffer) > 1e-12:
        raise ValueError("identifier and scenario disagree on dt_buffer")
    ident = FrictionIdentifier(stream.model, config, mu_init)
    per_cycle = int(round(config.dt_bound / config.dt_buffer))
    terrain = stream.config.terrain
    records, mus, losses = [], [], []
    false_updates = 0
    window = config.H * config.dt_buffer
    for i, entry in enumerate(stream.entries):
        ident.push(entry)
        if i == 0 or i % per_cycle:
            continue
        now = entry.timestamp
        rec = ident.cycle(now)
        records.append(rec)
        mus.append(terrain.mu_at(now))
        uniform = terrain.window_uniform(now - window, now)
        if rec.updated and uniform is False:
            false_updates += 1
        if record_loss and uniform is True:
            system = build_residual_system(ident.buffer.snapshot(), stream.model, config, ident.cache)
            if system.n_pairs:
                losses.append(system.loss(rec.mu_hat) / system.n_pairs)
    conv = _convergence_times(records, terrain, mu_init if mu_init is not None else config.mu_def)
    solves = [r.wall_ms for r in records if r.solved]
    return RunMetrics(
        METHODS[method],
        float(mu_init if mu_init is not None else config.mu_def),
        records,
        np.array(mus),
        conv,
        float(np.mean(losses)) if losses else float("nan"),
        false_updates,
        float(np.mean(solves)) if solves else 0.0,
        len(solves),
    )


def _convergence_times(records: Sequence[CycleRecord], terrain: TerrainSchedule, mu_init: float) -> list:
    out = []
    for k, (a, b, mu) in enumerate(terrain.segments):
        if mu >= SLIPPERY_BELOW:
            continue
        prev = [r for r in records if r.t < a - 1e-9]
        start_mu = prev[-1].mu_hat if prev else mu_init
        if abs(start_mu - mu) < CONVERGENCE_TOL:
            out.append(0.0)
            continue
        hit = next((r.t - a for r in records if a - 1e-9 <= r.t <= b + 1e-9 and abs(r.mu_hat - mu) < CONVERGENCE_TOL), None)
        out.append(hit)
    return out


def sweep_initials(scenario, method: str, initials: Sequence[float], config: Optional[IdentifierConfig] = None) -> list:
    """One run per initial estimate, with the reset policy disabled."""
    if len(initials) == 0:
        raise ValueError("need at least one initial value")
    stream = scenario if isinstance(scenario, ScenarioStream) else run_scenario(scenario)
    config = replace(config or IdentifierConfig(), reset_enabled=False)
    return [run_identification_experiment(stream, method, config, float(m0)) for m0 in initials]


def sweep_rho(scenario, rho_values: Sequence[float], config: Optional[IdentifierConfig] = None, mu_init: Optional[float] = None, method: str = "smoothed") -> list:
    """Average loss at the tracked estimate for each smoothing parameter."""
    if len(rho_values) == 0 or min(rho_values) <= 0:
        raise ValueError("rho values must be positive")
    stream = scenario if isinstance(scenario, ScenarioStream) else run_scenario(scenario)
    config = config or IdentifierConfig()
    rows = []
    for rho in rho_values:
        m = run_identification_experiment(stream, method, replace(config, rho_t=float(rho)), mu_init)
        rows.append({"rho_t": float(rho), "average_loss": m.average_loss, "final_mu": m.final_mu, "convergence_time": m.convergence_time})
    return rows


def bench_methods(
    scenario: ScenarioConfig,
    methods: Sequence[str] = ("nonsmooth", "smoothed", "rand0", "rand1"),
    n_trials: int = 7,
    config: Optional[IdentifierConfig] = None,
    init_range: tuple = (0.05, 1.0),
) -> list:
    """Per-method solve times and final estimates over seeded trials.

    Trial ``k`` re-simulates the scenario with seed ``scenario.seed + k`` (fresh
    sensor noise) and starts from an initial estimate drawn from ``init_range``
    with the same seed.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be at least 1")
    config = replace(config or IdentifierConfig(), reset_enabled=False)
    rows = []
    for k in range(n_trials):
        seed = scenario.seed + k
        stream = run_scenario(replace(scenario, seed=seed))
        mu0 = float(np.round(np.random.default_rng([seed, 7]).uniform(*init_range), 4))
        for method in methods:
            m = run_identification_experiment(stream, method, replace(config, seed=seed), mu0)
            rows.append(
                {
                    "method": METHODS[method],
                    "trial": k,
                    "seed": seed,
                    "mu_init": mu0,
                    "final_mu": m.final_mu,
                    "wall_ms": m.wall_ms_per_solve,
                    "n_solves": m.n_solves,
                    "average_loss": m.average_loss,
                }
            )
    return rows


def config_hash(*objects) -> str:
    """Stable short hash of nested dataclasses / dicts."""
    def plain(o):
        if hasattr(o, "__dataclass_fields__"):
            return {k: plain(v) for k, v in asdict(o).items()}
        if isinstance(o, dict):
            return {str(k): plain(v) for k, v in o.items()}
        if isinstance(o, (list, tuple)):
            return [plain(v) for v in o]
        if isinstance(o, np.ndarray):
            return o.tolist()
        return o

    blob = json.dumps([plain(o) for o in objects], sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def write_csv(path: str, header: Sequence[str], rows: Sequence[Sequence], chash: str) -> str:
    """Write rows with a trailing ``config_hash`` column."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(header) + ["config_hash"])
        for row in rows:
            w.writerow([_fmt(v) for v in row] + [chash])
    return path


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return "nan" if math.isnan(v) else repr(float(v))
    return v


STREAM_HEADER = (
    ["t", "mu_true", "px", "py", "pz", "qw", "qx", "qy", "qz"]
    + ["vx", "vy", "vz", "wx", "wy", "wz"]
)


def stream_rows(stream: ScenarioStream):
    """Header and rows of the sampled (noisy) stream, one row per entry."""
    from .rotations import matrix_to_quat

    n_j = stream.model.n_joints
    n_c = stream.model.n_contacts
    header = list(STREAM_HEADER)
    header += [f"q{j}" for j in range(n_j)] + [f"qd{j}" for j in range(n_j)] + [f"tau{j}" for j in range(stream.model.n_a)]
    header += ["fx_ext"]
    for k in range(n_c):
        header += [f"c{k}", f"v{k}x", f"v{k}y", f"v{k}z", f"v{k}x_true", f"v{k}y_true", f"v{k}z_true"]
    rows = []
    for i, e in enumerate(stream.entries):
        row = [e.timestamp, stream.mu_true[i], *e.p, *matrix_to_quat(e.R), *e.p_dot, *e.omega, *e.q_jnt, *e.qdot_jnt, *e.tau]
        row.append(0.0 if e.f_ext is None else float(e.f_ext[0]))
        for k in range(n_c):
            row += [bool(e.contact[k]), *e.foot_velocity[k], *stream.foot_velocity[i, k]]
        rows.append(row)
    return header, rows


ESTIMATE_HEADER = ["t", "mu_hat", "mu_star", "eta", "loss", "method", "wall_ms", "n_rejected"]


def estimate_rows(metrics: RunMetrics):
    return ESTIMATE_HEADER, [[r.t, r.mu_hat, r.mu_star, r.eta, r.loss, r.method, r.wall_ms, r.n_rejected] for r in metrics.records]


def standard_scenario(name: str, seed: int = 0, **overrides) -> ScenarioConfig:
    """Named scenarios used by the experiments and the CLI."""
    presets = {
        # gait on slippery ground throughout
        "slippery": dict(control="gait", terrain=TerrainSchedule.constant(0.19, 3.0), duration=3.0),
        # non-slippery -> slippery -> alternating
        "switching": dict(
            control="gait",
            terrain=TerrainSchedule(((0.0, 2.0, 1.0), (2.0, 5.0, 0.19), (5.0, 7.0, 1.0), (7.0, 10.0, 0.19))),
            duration=10.0,
        ),
        # hopping with touchdown impacts on non-slippery ground
        "hopping": dict(control="hop", terrain=TerrainSchedule.constant(1.0, 4.0), duration=4.0),
        # slip episode followed by firm ground, for the reset policy
        "slip_then_firm": dict(
            control="gait", terrain=TerrainSchedule(((0.0, 2.5, 0.19), (2.5, 5.0, 1.0))), duration=5.0
        ),
        # pushed box on switching terrain
        "push": dict(
            model="box", control="push", terrain=TerrainSchedule(((0.0, 2.0, 1.0), (2.0, 4.0, 0.19))), duration=4.0
        ),
        "rest": dict(model="box", control="rest", terrain=TerrainSchedule.constant(1.0, 1.0), duration=1.0),
    }
    if name not in presets:
        raise ValueError(f"unknown scenario {name!r}; choose from {sorted(presets)}")
    kw = dict(presets[name])
    kw.update(overrides)
    return ScenarioConfig(seed=seed, **kw)


SCENARIOS = ("slippery", "switching", "hopping", "slip_then_firm", "push", "rest")
