"""Experiment configuration files: YAML parsed into strict pydantic models.

Unknown keys are errors and missing keys take the defaults below; identifier
defaults come from :class:`IdentifierConfig`.
"""
from __future__ import annotations

import dataclasses
from typing import List, Literal, Optional, Tuple

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .harness import (
    GaitParams,
    HopParams,
    NoiseModel,
    PushParams,
    ScenarioConfig,
    TerrainSchedule,
    standard_scenario,
)
from .identifier import METHODS, IdentifierConfig

_ID_DEFAULTS = IdentifierConfig()


class ConfigError(ValueError):
    """Bad configuration file; the message names the offending key or line."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ModelSection(_Strict):
    kind: Literal["monoped", "box"] = "monoped"
    base_mass: float = Field(10.0, gt=0)


class NoiseSection(_Strict):
    position_std: float = Field(1e-4, ge=0)
    velocity_std: float = Field(1e-3, ge=0)


class GaitSection(_Strict):
    amplitude: float = GaitParams.amplitude
    frequency: float = Field(GaitParams.frequency, gt=0)
    kp: float = GaitParams.kp
    kd: float = GaitParams.kd
    hip: float = GaitParams.hip


class HopSection(_Strict):
    thrust: float = HopParams.thrust
    thrust_duration: float = Field(HopParams.thrust_duration, gt=0)
    period: float = Field(HopParams.period, gt=0)
    swing: float = HopParams.swing
    kp: float = HopParams.kp
    kd: float = HopParams.kd
    hip: float = HopParams.hip


class PushSection(_Strict):
    force: float = PushParams.force
    period: float = Field(PushParams.period, gt=0)


class ScenarioSection(_Strict):
    name: str = "slippery"  # preset filling in everything not given here
    control: Optional[Literal["gait", "hop", "push", "rest"]] = None
    duration: Optional[float] = Field(None, gt=0)
    sim_dt: Optional[float] = Field(None, gt=0)
    dt_buffer: Optional[float] = Field(None, gt=0)
    terrain: Optional[List[Tuple[float, float, float]]] = None  # [start, end, mu] segments
    noise: Optional[NoiseSection] = None
    flag_corruption: Optional[float] = Field(None, ge=0, le=1)
    gait: Optional[GaitSection] = None
    hop: Optional[HopSection] = None
    push: Optional[PushSection] = None


class IdentifierSection(_Strict):
    alpha_rej: float = _ID_DEFAULTS.alpha_rej
    gamma_rej: float = _ID_DEFAULTS.gamma_rej
    dt_buffer: float = _ID_DEFAULTS.dt_buffer
    dt_bound: float = _ID_DEFAULTS.dt_bound
    sigma_slip: float = _ID_DEFAULTS.sigma_slip
    sigma_q_base: float = _ID_DEFAULTS.sigma_q_base
    sigma_q_jnt: float = _ID_DEFAULTS.sigma_q_jnt
    alpha_conf: float = _ID_DEFAULTS.alpha_conf
    gamma_conf: float = _ID_DEFAULTS.gamma_conf
    epsilon: float = _ID_DEFAULTS.epsilon
    H: int = _ID_DEFAULTS.H
    rho_t: float = _ID_DEFAULTS.rho_t
    sigma_qdot_base: float = _ID_DEFAULTS.sigma_qdot_base
    sigma_qdot_jnt: float = _ID_DEFAULTS.sigma_qdot_jnt
    mu_def: float = _ID_DEFAULTS.mu_def
    mu_min: float = _ID_DEFAULTS.mu_min
    mu_max: float = _ID_DEFAULTS.mu_max
    reset_hold: float = _ID_DEFAULTS.reset_hold
    slip_threshold: float = _ID_DEFAULTS.slip_threshold
    use_rejection: bool = _ID_DEFAULTS.use_rejection
    reset_enabled: bool = _ID_DEFAULTS.reset_enabled
    speed_floor: float = _ID_DEFAULTS.speed_floor
    max_iters: int = _ID_DEFAULTS.max_iters
    step_tol: float = _ID_DEFAULTS.step_tol
    loss_tol: float = _ID_DEFAULTS.loss_tol
    lm_damping: float = _ID_DEFAULTS.lm_damping
    enforce_time_budget: bool = _ID_DEFAULTS.enforce_time_budget
    mu_init: Optional[float] = None  # start estimate; mu_def when absent


class GradientSection(_Strict):
    method: Literal["nonsmooth", "smoothed", "rand0", "rand1"] = "smoothed"
    n_rand_samples: int = Field(_ID_DEFAULTS.n_rand_samples, ge=1)
    sigma_rand: float = Field(_ID_DEFAULTS.sigma_rand, gt=0)
    fd_step: float = Field(1e-5, gt=0)  # gradcheck central-difference step


class SweepSection(_Strict):
    initials: List[float] = Field(default_factory=lambda: [round(0.05 * k, 2) for k in range(1, 21)])
    rho_values: List[float] = Field(default_factory=lambda: [1e-6, 1e-3, 0.05, 1.0, 10.0])

    @field_validator("initials", "rho_values")
    @classmethod
    def _nonempty(cls, v):
        if not v:
            raise ValueError("must not be empty")
        return v


class BenchSection(_Strict):
    methods: List[Literal["nonsmooth", "smoothed", "rand0", "rand1"]] = Field(
        default_factory=lambda: ["nonsmooth", "smoothed", "rand0", "rand1"]
    )
    n_trials: int = Field(7, ge=1)
    init_range: Tuple[float, float] = (0.05, 1.0)


class OutputSection(_Strict):
    dir: str = "out"


class ExperimentConfig(_Strict):
    seed: int = 0
    model: ModelSection = Field(default_factory=ModelSection)
    scenario: ScenarioSection = Field(default_factory=ScenarioSection)
    identifier: IdentifierSection = Field(default_factory=IdentifierSection)
    gradient: GradientSection = Field(default_factory=GradientSection)
    sweep: SweepSection = Field(default_factory=SweepSection)
    bench: BenchSection = Field(default_factory=BenchSection)
    output: OutputSection = Field(default_factory=OutputSection)

    def scenario_config(self) -> ScenarioConfig:
        s = self.scenario
        kw = {"base_mass": self.model.base_mass}
        if self.model.kind == "box":
            kw["model"] = "box"
        for name in ("control", "duration", "sim_dt", "dt_buffer", "flag_corruption"):
            value = getattr(s, name)
            if value is not None:
                kw[name] = value
        if s.terrain is not None:
            kw["terrain"] = TerrainSchedule(tuple(tuple(map(float, seg)) for seg in s.terrain))
        if s.noise is not None:
            kw["noise"] = NoiseModel(**s.noise.model_dump())
        if s.gait is not None:
            kw["gait"] = GaitParams(**s.gait.model_dump())
        if s.hop is not None:
            kw["hop"] = dataclasses.replace(HopParams(), **s.hop.model_dump())
        if s.push is not None:
            kw["push"] = PushParams(**s.push.model_dump())
        try:
            return standard_scenario(s.name, self.seed, **kw)
        except ValueError as exc:
            raise ConfigError(f"scenario: {exc}") from exc

    def identifier_config(self, method: Optional[str] = None) -> IdentifierConfig:
        values = self.identifier.model_dump(exclude={"mu_init"})
        values.update(
            gradient_method=method or self.gradient.method,
            n_rand_samples=self.gradient.n_rand_samples,
            sigma_rand=self.gradient.sigma_rand,
            seed=self.seed,
        )
        try:
            return IdentifierConfig(**values)
        except ValueError as exc:
            raise ConfigError(f"identifier: {exc}") from exc

    def dump(self) -> str:
        """Fully resolved configuration as YAML, for provenance."""
        return yaml.safe_dump(self.model_dump(mode="json"), sort_keys=False)


def _format_validation(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        key = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{key}: {err['msg']}")
    return "; ".join(lines)


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" line {mark.line + 1}, column {mark.column + 1}" if mark is not None else ""
        raise ConfigError(f"{source}:{where} invalid YAML: {getattr(exc, 'problem', exc)}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"{source}: {_format_validation(exc)}") from exc


def load_config(path: Optional[str]) -> ExperimentConfig:
    """Read a config file; ``None`` gives all defaults."""
    if path is None:
        return ExperimentConfig()
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    return parse_config(text, path)


__all__ = ["ConfigError", "ExperimentConfig", "load_config", "parse_config", "METHODS"]
