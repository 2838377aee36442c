"""Online friction identification from a short buffer of proprioceptive data.

Each cycle the identifier takes a snapshot of the buffer, drops samples
around touchdown impacts, scores how much tangential slip the remaining data
contains, and, if the score is high enough, fits mu by a bound-constrained
Gauss-Newton solve of the one-step prediction error.
"""
from __future__ import annotations

import math
import threading
import time
from collections import OrderedDict, deque
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .contact_solver import ContactProblem, ContactSolution, ContactSolverError, assemble_problem, solve_contacts
from .gradients import (
    NONSMOOTH,
    RAND_FIRST,
    RAND_ZEROTH,
    SMOOTHED,
    GradientError,
    impulse_gradient,
    randomized_gradient,
)
from .rigid_model import GeneralizedState, RobotModel, evaluate
from .rotations import left_jacobian, left_jacobian_inv, matrix_to_quat, so3_exp, so3_log

METHODS = {"nonsmooth": NONSMOOTH, "smoothed": SMOOTHED, "rand0": RAND_ZEROTH, "rand1": RAND_FIRST}
CONTACT_SPECULATION = 10.0  # m/s, same reach as the simulator's contact window
NO_UPDATE_CURVATURE = 1e-12


class BufferError(ValueError):
    pass


class IdentificationError(ValueError):
    pass


@dataclass(frozen=True)
class IdentifierConfig:
    alpha_rej: float = 5.0
    gamma_rej: float = 0.4
    dt_buffer: float = 0.01
    dt_bound: float = 0.1
    sigma_slip: float = 30.0
    sigma_q_base: float = 1e-4
    sigma_q_jnt: float = 20.0
    alpha_conf: float = 3.0
    gamma_conf: float = 0.58
    epsilon: float = 0.1
    H: int = 50
    rho_t: float = 0.05
    sigma_qdot_base: float = 1e-4
    sigma_qdot_jnt: float = 1.0
    mu_def: float = 0.8
    mu_min: float = 0.01
    mu_max: float = 1.0
    reset_hold: float = 0.5
    slip_threshold: float = 0.4
    gradient_method: str = "smoothed"
    use_rejection: bool = True
    reset_enabled: bool = True
    speed_floor: float = 0.01  # tangential speeds below this count as zero (noise level)
    max_iters: int = 20
    step_tol: float = 1e-4
    loss_tol: float = 1e-8  # relative decrease
    lm_damping: float = 1e-8
    enforce_time_budget: bool = False
    n_rand_samples: int = 50
    sigma_rand: float = 0.05
    seed: int = 0

    def __post_init__(self):
        positive = (
            "alpha_rej gamma_rej dt_buffer dt_bound sigma_slip alpha_conf epsilon rho_t "
            "mu_def mu_min mu_max reset_hold slip_threshold sigma_rand"
        ).split()
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("sigma_q_base", "sigma_q_jnt", "sigma_qdot_base", "sigma_qdot_jnt", "speed_floor"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if not 0 < self.gamma_conf < 1:
            raise ValueError("gamma_conf must lie in (0, 1)")
        if self.H < 2 or self.max_iters < 1 or self.n_rand_samples < 1:
            raise ValueError("H >= 2, max_iters >= 1 and n_rand_samples >= 1 are required")
        if not self.mu_min <= self.mu_def <= self.mu_max:
            raise ValueError("mu_def must lie within [mu_min, mu_max]")
        if self.gradient_method not in METHODS:
            raise ValueError(f"unknown gradient method {self.gradient_method!r}; choose from {sorted(METHODS)}")

    @property
    def method_tag(self) -> str:
        return METHODS[self.gradient_method]

    def clip(self, mu: float) -> float:
        return float(min(max(mu, self.mu_min), self.mu_max))


@dataclass(frozen=True)
class BufferEntry:
    timestamp: float
    R: np.ndarray
    p: np.ndarray
    omega: np.ndarray
    p_dot: np.ndarray
    q_jnt: np.ndarray
    qdot_jnt: np.ndarray
    tau: np.ndarray
    contact: np.ndarray  # (n_c,) bool
    foot_velocity: np.ndarray  # (n_c, 3) estimated contact point velocity
    f_ext: Optional[np.ndarray] = None  # known generalized force held over the interval
    rejected: Optional[np.ndarray] = None

    def __post_init__(self):
        R = np.asarray(self.R, dtype=float)
        if R.shape != (3, 3) or np.abs(R.T @ R - np.eye(3)).max() > 1e-9:
            raise BufferError("entry rotation is not orthonormal")

    @property
    def n_contacts(self) -> int:
        return len(self.contact)

    def rejected_mask(self) -> np.ndarray:
        return np.zeros(self.n_contacts, dtype=bool) if self.rejected is None else np.asarray(self.rejected, bool)

    def to_state(self) -> GeneralizedState:
        q = np.concatenate([self.p, matrix_to_quat(self.R), self.q_jnt])
        v = np.concatenate([self.p_dot, self.omega, self.qdot_jnt])
        return GeneralizedState(q, v, self.timestamp)

    @classmethod
    def from_state(cls, state: GeneralizedState, tau, contact, foot_velocity, f_ext=None) -> "BufferEntry":
        return cls(
            float(state.time),
            state.rotation,
            state.position.copy(),
            state.angular_velocity.copy(),
            state.linear_velocity.copy(),
            state.joints.copy(),
            state.joint_rates.copy(),
            np.asarray(tau, dtype=float).copy(),
            np.asarray(contact, dtype=bool).copy(),
            np.asarray(foot_velocity, dtype=float).reshape(-1, 3).copy(),
            None if f_ext is None else np.asarray(f_ext, dtype=float).copy(),
        )


class DataBuffer:
    """FIFO ring of the last ``H`` entries with snapshot reads.

    One producer pushes while the identifier reads; ``snapshot`` returns an
    immutable copy taken under the lock.
    """

    def __init__(self, capacity: int = 50, dt_buffer: float = 0.01, jitter: float = 1e-6):
        if capacity < 1:
            raise BufferError("buffer capacity must be positive")
        self.capacity = int(capacity)
        self.dt_buffer = float(dt_buffer)
        self.jitter = float(jitter)
        self._entries: deque = deque(maxlen=self.capacity)
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._entries)

    def push(self, entry: BufferEntry) -> None:
        with self._lock:
            if self._entries and not entry.timestamp > self._entries[-1].timestamp:
                raise BufferError(
                    f"timestamp {entry.timestamp} does not follow the last entry ({self._entries[-1].timestamp})"
                )
            self._entries.append(entry)

    def snapshot(self) -> tuple:
        with self._lock:
            return tuple(self._entries)

    def clear(self) -> None:
        with self._lock:
            self._entries.clear()


def push_entry(buffer: DataBuffer, entry: BufferEntry) -> DataBuffer:
    buffer.push(entry)
    return buffer


@dataclass(frozen=True)
class LossWeights:
    sigma_q_base: float = 1e-4
    sigma_q_jnt: float = 20.0
    sigma_qdot_base: float = 1e-4
    sigma_qdot_jnt: float = 1.0
    sigma_slip: float = 30.0
    slip_speed_threshold: float = 0.4

    def __post_init__(self):
        for name in ("sigma_q_base", "sigma_q_jnt", "sigma_qdot_base", "sigma_qdot_jnt", "sigma_slip", "slip_speed_threshold"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    @classmethod
    def from_config(cls, config: IdentifierConfig) -> "LossWeights":
        return cls(
            config.sigma_q_base,
            config.sigma_q_jnt,
            config.sigma_qdot_base,
            config.sigma_qdot_jnt,
            config.sigma_slip,
            config.slip_threshold,
        )

    def diagonal(self, n_jnt: int, slipping: bool) -> np.ndarray:
        """Weights in residual order: position, rotation, joints, linear, angular, joint rates."""
        s = self.sigma_slip if slipping else 1.0
        return np.concatenate(
            [
                np.full(6, self.sigma_q_base),
                np.full(n_jnt, self.sigma_q_jnt * s),
                np.full(6, self.sigma_qdot_base),
                np.full(n_jnt, self.sigma_qdot_jnt * s),
            ]
        )


def rejection_scores(entries: Sequence[BufferEntry], alpha_rej: float = 5.0, previous: Optional[BufferEntry] = None) -> np.ndarray:
    """Per-entry, per-contact score ``max(r1, r2)``.

    ``previous`` is the entry streamed just before ``entries[0]``; without it
    both terms are zero for the first entry.
    """
    n = len(entries)
    if n == 0:
        raise BufferError("rejection scores need a nonempty buffer")
    seq = ([previous] if previous is not None else []) + list(entries)
    n_c = entries[0].n_contacts
    r1 = np.zeros((len(seq), n_c))
    for i, e in enumerate(seq):
        v_n = np.abs(e.foot_velocity[:, 2])
        r1[i] = 1.0 - e.contact.astype(float) * np.exp(-alpha_rej * v_n)
    if previous is None:
        r1[0] = 0.0
    r2 = np.zeros_like(r1)
    r2[1:] = np.abs(np.diff(r1, axis=0))
    scores = np.maximum(r1, r2)
    return scores[len(seq) - n :]


def apply_rejection(entries: Sequence[BufferEntry], config: IdentifierConfig, previous: Optional[BufferEntry] = None) -> list:
    """Entries with their ``rejected`` flags set (all False when rejection is disabled)."""
    if not entries:
        return []
    if config.use_rejection:
        flags = rejection_scores(entries, config.alpha_rej, previous) > config.gamma_rej
    else:
        flags = np.zeros((len(entries), entries[0].n_contacts), dtype=bool)
    return [replace(e, rejected=f) for e, f in zip(entries, flags)]


def confidence_score(entries: Sequence[BufferEntry], alpha_conf: float = 3.0, speed_floor: float = 0.01):
    """``eta = 1 - exp(-alpha v_mean)`` over the nonzero tangential foot speeds that survive rejection.

    Only samples flagged in contact enter the average.  Returns ``(eta, v_mean)``.
    """
    speeds = []
    for e in entries:
        keep = e.contact & ~e.rejected_mask()
        if keep.any():
            s = np.hypot(e.foot_velocity[keep, 0], e.foot_velocity[keep, 1])
            speeds.extend(s[s > speed_floor].tolist())
    if not speeds:
        return 0.0, 0.0
    v_mean = float(np.mean(speeds))
    return 1.0 - math.exp(-alpha_conf * v_mean), v_mean


@dataclass
class _Pair:
    """Everything about one (entry, next entry) pair that does not depend on mu."""

    state: GeneralizedState
    R0: np.ndarray
    D: np.ndarray
    v_free: np.ndarray
    upsilon_free: np.ndarray
    Minv_JT: np.ndarray
    eval: object
    dt: float
    meas_p: np.ndarray
    meas_R: np.ndarray
    meas_q: np.ndarray
    meas_v: np.ndarray
    slipping: bool
    grad_mask: np.ndarray  # (3 n_active,) zero on rows of rejected contacts


def _prepare_pair(model: RobotModel, e0: BufferEntry, e1: BufferEntry, weights: LossWeights, dt: float) -> _Pair:
    state = e0.to_state()
    ev = evaluate(model, state, 1e-4 + CONTACT_SPECULATION * dt)
    problem = assemble_problem(ev, state, e0.tau, dt, 1.0, e0.f_ext)
    keep1 = e1.contact & ~e1.rejected_mask()
    slipping = bool(
        keep1.any() and np.hypot(e1.foot_velocity[keep1, 0], e1.foot_velocity[keep1, 1]).max() > weights.slip_speed_threshold
    )
    rej = e0.rejected_mask()
    mask = np.repeat(~rej[ev.active], 3).astype(float)
    return _Pair(
        state,
        e0.R,
        problem.delassus,
        problem.v_free,
        problem.upsilon_free,
        problem.Minv_JT,
        ev,
        dt,
        e1.p,
        e1.R,
        e1.q_jnt,
        np.concatenate([e1.p_dot, e1.omega, e1.qdot_jnt]),
        slipping,
        mask,
    )


def _usable_pair(model: RobotModel, e0: BufferEntry, e1: BufferEntry, weights: LossWeights, dt: float, probe_mu) -> Optional[_Pair]:
    """The prepared pair, or None if its contact problem is not solvable across the bounds.

    Noisy poses can leave redundant contacts (four coplanar corners) with
    inconsistent targets on which Gauss-Seidel cycles; such pairs are dropped
    up front rather than in the middle of a solve.
    """
    try:
        pair = _prepare_pair(model, e0, e1, weights, dt)
        for mu in probe_mu:
            solve_contacts(ContactProblem(pair.D, pair.v_free, mu, dt, pair.upsilon_free, pair.Minv_JT, pair.eval))
    except (np.linalg.LinAlgError, ContactSolverError):
        return None
    return pair


@dataclass
class PairEvaluation:
    residual: np.ndarray
    jacobian: Optional[np.ndarray]
    labels: list
    solution: Optional[ContactSolution] = None


def _predict(pair: _Pair, lam: np.ndarray):
    ups = pair.upsilon_free + (pair.Minv_JT @ lam if lam.size else 0.0)
    dt = pair.dt
    p = pair.state.position + dt * ups[:3]
    phi = dt * ups[3:6]
    R = so3_exp(phi) @ pair.R0
    q = pair.state.joints + dt * ups[6:]
    return ups, p, R, q, phi


def _pair_residual(
    pair: _Pair, mu: float, sqrt_w: np.ndarray, method: Optional[str], rho_t: float, sol: Optional[ContactSolution] = None
) -> PairEvaluation:
    if sol is None:
        problem = ContactProblem(pair.D, pair.v_free, mu, pair.dt, pair.upsilon_free, pair.Minv_JT, pair.eval)
        sol = solve_contacts(problem)
    lam = sol.stacked
    ups, p, R, q, phi = _predict(pair, lam)
    rot = so3_log(R.T @ pair.meas_R)
    diff = np.concatenate([p - pair.meas_p, rot, q - pair.meas_q, ups - pair.meas_v])
    res = sqrt_w * diff
    if method is None:
        return PairEvaluation(res, None, sol.labels, sol)
    n_v = ups.size
    if sol.n_contacts:
        g = impulse_gradient(sol, method, rho_t=rho_t, strict=False).dlambda_dmu * pair.grad_mask
        dups = pair.Minv_JT @ g
    else:
        dups = np.zeros(n_v)
    # d log(R^T R_meas): R = Exp(phi) R0, so R^T R_meas = Exp(-R0^T phi) R0^T R_meas
    psi = pair.R0.T @ phi
    drot = -left_jacobian_inv(rot) @ left_jacobian(-psi) @ pair.R0.T @ (pair.dt * dups[3:6])
    dq = pair.dt * dups
    ddiff = np.concatenate([dq[:3], drot, dq[6:], dups])
    return PairEvaluation(res, sqrt_w * ddiff, sol.labels, sol)


class PairCache:
    """mu-independent pair data keyed by the pair's timestamps (bounded LRU)."""

    def __init__(self, maxsize: int = 512):
        self.maxsize = maxsize
        self._data: OrderedDict = OrderedDict()

    def get(self, key, build):
        if key in self._data:
            self._data.move_to_end(key)
            return self._data[key]
        value = build()
        self._data[key] = value
        if len(self._data) > self.maxsize:
            self._data.popitem(last=False)
        return value


@dataclass
class ResidualSystem:
    """The usable pairs of one buffer snapshot, ready for repeated evaluation over mu."""

    pairs: list
    sqrt_weights: list
    n_skipped: int
    config: IdentifierConfig
    revision: int = 0  # bumped whenever a pair is dropped mid-solve
    _last_mu: Optional[float] = field(default=None, repr=False)
    _last_solutions: Optional[list] = field(default=None, repr=False)

    @property
    def n_pairs(self) -> int:
        return len(self.pairs)

    def residual(self, mu: float) -> np.ndarray:
        return self._eval(mu, None)[0]

    def loss(self, mu: float) -> float:
        r = self.residual(mu)
        return float(r @ r)

    def residual_and_jacobian(self, mu: float, method: Optional[str] = None):
        method = method or self.config.method_tag
        if method in (NONSMOOTH, SMOOTHED):
            return self._eval(mu, method)
        while True:
            rev = self.revision
            try:
                r, g = self._randomized(mu, method)
            except ValueError:
                if rev == self.revision:
                    raise
                continue  # samples of different lengths after a drop
            if rev == self.revision:  # every sample saw the same pairs
                return r, g

    def _randomized(self, mu: float, method: str):
        cfg = self.config
        r = self.residual(mu)
        seed = _cycle_seed(cfg.seed, self.pairs)
        if method == RAND_ZEROTH:
            est = randomized_gradient(self.residual, mu, cfg.n_rand_samples, cfg.sigma_rand, "zeroth", seed, bounds=(cfg.mu_min, cfg.mu_max))
        elif method == RAND_FIRST:
            est = randomized_gradient(
                None, mu, cfg.n_rand_samples, cfg.sigma_rand, "first", seed,
                grad_fn=lambda m: self._eval(m, NONSMOOTH)[1], bounds=(cfg.mu_min, cfg.mu_max),
            )
        else:
            raise ValueError(f"unknown gradient method {method!r}")
        return r, est.value

    def _eval(self, mu: float, method: Optional[str]):
        while True:
            try:
                return self._eval_once(mu, method)
            except _PairFailure as exc:
                # the contact solve of this pair failed at this mu: drop the pair for good
                del self.pairs[exc.index], self.sqrt_weights[exc.index]
                self.n_skipped += 1
                self.revision += 1
                self._last_mu, self._last_solutions = None, None

    def _eval_once(self, mu: float, method: Optional[str]):
        # the line search usually ends where the next Jacobian is needed
        reuse = self._last_solutions if self._last_mu == mu else None
        res, jac, sols = [], [], []
        for i, (pair, w) in enumerate(zip(self.pairs, self.sqrt_weights)):
            try:
                out = _pair_residual(pair, mu, w, method, self.config.rho_t, reuse[i] if reuse else None)
            except ContactSolverError as exc:
                raise _PairFailure(i) from exc
            res.append(out.residual)
            sols.append(out.solution)
            if method is not None:
                jac.append(out.jacobian)
        self._last_mu, self._last_solutions = mu, sols
        r = np.concatenate(res) if res else np.zeros(0)
        J = (np.concatenate(jac) if jac else np.zeros(0)) if method is not None else None
        return r, J


class _PairFailure(Exception):
    def __init__(self, index: int):
        super().__init__(index)
        self.index = index


def _cycle_seed(seed: int, pairs: list) -> int:
    # tie randomized samples to the data so a cycle is reproducible in isolation
    stamp = int(round(pairs[0].state.time / 1e-4)) if pairs else 0
    return int(seed) * 1_000_003 + stamp


def build_residual_system(
    entries: Sequence[BufferEntry],
    model: RobotModel,
    config: IdentifierConfig,
    cache: Optional[PairCache] = None,
) -> ResidualSystem:
    """Usable consecutive pairs: spaced by ``dt_buffer`` and free of rejected contacts."""
    weights = LossWeights.from_config(config)
    dt = config.dt_buffer
    probe = (config.mu_min, config.mu_def, config.mu_max)
    pairs, sqrt_w = [], []
    skipped = 0
    for e0, e1 in zip(entries[:-1], entries[1:]):
        if abs(e1.timestamp - e0.timestamp - dt) > 1e-6:
            skipped += 1
            continue
        if config.use_rejection and (e0.rejected_mask().any() or e1.rejected_mask().any()):
            skipped += 1
            continue
        key = (round(e0.timestamp, 9), round(e1.timestamp, 9), config.use_rejection)
        build = lambda e0=e0, e1=e1: _usable_pair(model, e0, e1, weights, dt, probe)
        pair = cache.get(key, build) if cache is not None else build()
        if pair is None:
            skipped += 1
            continue
        pairs.append(pair)
        sqrt_w.append(np.sqrt(weights.diagonal(model.n_joints, pair.slipping)))
    return ResidualSystem(pairs, sqrt_w, skipped, config)


def residual_and_jacobian(
    entries: Sequence[BufferEntry],
    mu: float,
    weights: Optional[LossWeights] = None,
    model: Optional[RobotModel] = None,
    config: Optional[IdentifierConfig] = None,
    method: Optional[str] = None,
):
    """Stacked weighted one-step residual and its derivative with respect to mu."""
    if model is None:
        raise ValueError("a robot model is required")
    config = config or IdentifierConfig()
    if weights is not None:
        config = replace(
            config,
            sigma_q_base=weights.sigma_q_base,
            sigma_q_jnt=weights.sigma_q_jnt,
            sigma_qdot_base=weights.sigma_qdot_base,
            sigma_qdot_jnt=weights.sigma_qdot_jnt,
            sigma_slip=weights.sigma_slip,
            slip_threshold=weights.slip_speed_threshold,
        )
    system = build_residual_system(entries, model, config)
    return system.residual_and_jacobian(mu, METHODS.get(method, method))


@dataclass
class IdentificationResult:
    mu_star: float
    loss: float
    initial_loss: float
    iterations: int
    no_update: bool
    status: str
    wall_ms: float
    n_pairs: int
    n_skipped: int
    history: list = field(default_factory=list)


def solve_identification(
    entries: Sequence[BufferEntry],
    mu_hat: float,
    config: IdentifierConfig,
    model: RobotModel,
    cache: Optional[PairCache] = None,
    system: Optional[ResidualSystem] = None,
) -> IdentificationResult:
    """Projected Gauss-Newton on the weighted one-step prediction error.

    ``mu <- clip(mu - J^T r / J^T J)`` with backtracking until the loss
    strictly decreases.  A vanishing ``J^T J`` at the start returns ``mu_hat``
    flagged ``no_update``.
    """
    t0 = time.perf_counter()
    if system is None:
        if len(entries) < 2:
            raise IdentificationError("identification needs at least two buffer entries")
        system = build_residual_system(entries, model, config, cache)
    if system.n_pairs == 0:
        raise IdentificationError("no usable entry pairs in the buffer")
    mu = config.clip(mu_hat)
    r, J = system.residual_and_jacobian(mu)
    loss = float(r @ r)
    initial = loss
    revision = system.revision
    history = [(mu, loss)]
    status = "max-iters"
    no_update = False
    it = 0
    for it in range(1, config.max_iters + 1):
        g = float(J @ r)
        H = float(J @ J)
        if H < NO_UPDATE_CURVATURE:
            status = "no-update"
            no_update = it == 1
            it -= 1
            break
        step = -g / H
        accepted = None
        for damping in (0.0, config.lm_damping):
            if damping:
                step = -g / (H + damping)
            t = 1.0
            for _ in range(12):
                trial = config.clip(mu + t * step)
                if trial == mu:
                    break
                trial_loss = system.loss(trial)
                if trial_loss < loss:
                    accepted = (trial, trial_loss)
                    break
                t *= 0.5
            if accepted is not None:
                break
        if system.revision != revision:
            # a pair was dropped during the line search: losses are no longer comparable
            if system.n_pairs == 0:
                status = "no-pairs"
                break
            r, J = system.residual_and_jacobian(mu)
            loss, revision = float(r @ r), system.revision
            continue
        if accepted is None:
            status = "line-search-stall"
            break
        new_mu, new_loss = accepted
        delta = abs(new_mu - mu)
        rel_dec = (loss - new_loss) / max(loss, 1e-300)
        mu, loss = new_mu, new_loss
        history.append((mu, loss))
        if delta < config.step_tol:
            status = "step-tol"
            break
        if rel_dec < config.loss_tol:
            status = "loss-tol"
            break
        if config.enforce_time_budget and time.perf_counter() - t0 > config.dt_bound:
            status = "time-budget"
            break
        if it < config.max_iters:
            r, J = system.residual_and_jacobian(mu)
            if system.revision != revision:
                loss, revision = float(r @ r), system.revision
    return IdentificationResult(
        mu, loss, initial, it, no_update, status, 1e3 * (time.perf_counter() - t0), system.n_pairs, system.n_skipped, history
    )


@dataclass
class EstimateState:
    mu_hat: float = 0.8
    eta: float = 0.0
    eta_prev: float = 0.0
    last_above_threshold: float = 0.0
    mu_star: float = float("nan")
    loss: float = float("nan")
    iterations: int = 0
    wall_ms: float = 0.0
    n_rejected: int = 0
    eta_at_last_update: float = 0.0
    last_rule: str = "init"


def update_estimate(state: EstimateState, mu_star: float, eta: float, config: IdentifierConfig, now: float) -> EstimateState:
    """Gated update: jump to ``mu_star`` when far, otherwise blend with the previous cycle's score."""
    new = replace(state, eta=eta, eta_prev=eta)
    if not eta > config.gamma_conf:
        new.last_rule = "gated"
        return new
    new.last_above_threshold = now
    if abs(state.mu_hat - mu_star) > config.epsilon:
        new.mu_hat = config.clip(mu_star)
        new.last_rule = "direct"
    else:
        w = state.eta_prev
        new.mu_hat = config.clip((1.0 - w) * state.mu_hat + w * mu_star)
        new.last_rule = "weighted"
    new.eta_at_last_update = eta
    return new


def apply_reset(state: EstimateState, config: IdentifierConfig, now: float) -> EstimateState:
    """Fall back to ``mu_def`` once the score has stayed at or below the gate for ``reset_hold``."""
    if config.reset_enabled and now - state.last_above_threshold >= config.reset_hold - 1e-9:
        return replace(state, mu_hat=config.mu_def, last_rule="reset")
    return state


@dataclass
class CycleRecord:
    t: float
    mu_hat: float
    mu_star: float
    eta: float
    loss: float
    method: str
    wall_ms: float
    n_rejected: int
    solved: bool
    updated: bool
    no_update: bool
    rule: str
    n_pairs: int


class FrictionIdentifier:
    """Online loop: snapshot, reject, score, solve when confident, update, reset."""

    def __init__(self, model: RobotModel, config: Optional[IdentifierConfig] = None, mu_init: Optional[float] = None, t0: float = 0.0):
        self.model = model
        self.config = config or IdentifierConfig()
        self.buffer = DataBuffer(self.config.H, self.config.dt_buffer)
        mu0 = self.config.mu_def if mu_init is None else self.config.clip(mu_init)
        self.state = EstimateState(mu_hat=mu0, last_above_threshold=t0)
        self.cache = PairCache()
        self.last_system: Optional[ResidualSystem] = None
        self._previous: Optional[BufferEntry] = None

    def push(self, entry: BufferEntry) -> None:
        """Score the entry against its stream predecessor, then buffer it.

        Scoring at arrival keeps an impact rejected even when it later becomes
        the oldest entry of the window.
        """
        scored = apply_rejection([entry], self.config, self._previous)[0]
        self.buffer.push(scored)
        self._previous = entry

    def cycle(self, now: float) -> CycleRecord:
        cfg = self.config
        entries = self.buffer.snapshot()
        n_rej = int(sum(int(e.rejected_mask().sum()) for e in entries))
        eta, _ = confidence_score(entries, cfg.alpha_conf, cfg.speed_floor)
        mu_star, loss, wall, solved, no_update, iters, n_pairs = float("nan"), float("nan"), 0.0, False, False, 0, 0
        if eta > cfg.gamma_conf and len(entries) >= 2:
            system = build_residual_system(entries, self.model, cfg, self.cache)
            self.last_system = system
            if system.n_pairs:
                res = solve_identification(entries, self.state.mu_hat, cfg, self.model, system=system)
                mu_star, loss, wall, no_update, iters, n_pairs = res.mu_star, res.loss, res.wall_ms, res.no_update, res.iterations, res.n_pairs
                solved = True
        before = self.state.mu_hat
        if solved:
            self.state = update_estimate(self.state, mu_star, eta, cfg, now)
        else:
            # no solve this cycle: keep the estimate, only track the score
            self.state = replace(self.state, eta=eta, eta_prev=eta, last_rule="gated")
            if eta > cfg.gamma_conf:
                self.state.last_above_threshold = now
        self.state = apply_reset(self.state, cfg, now)
        self.state.mu_star, self.state.loss, self.state.iterations = mu_star, loss, iters
        self.state.wall_ms, self.state.n_rejected = wall, n_rej
        return CycleRecord(
            now, self.state.mu_hat, mu_star, eta, loss, cfg.method_tag, wall, n_rej,
            solved, solved and not no_update, no_update, self.state.last_rule, n_pairs,
        )
