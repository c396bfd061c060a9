"""Experiment configuration: a flat validated record with JSON round-trip.

Unknown keys are rejected rather than ignored so typos fail loudly.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from typing import Union

from .memory import MemoryParams
from .decision import CredibilityParams
from .policies import ScriptConfig
from .world import GeneratorParams

LEARNING_TYPES = ("rule", "imitation", "qlearning", "scripted")
MEMORY_MODELS = ("none", "episodic", "replay", "mmdm")


class ConfigError(ValueError):
    """Invalid or malformed experiment configuration."""


@dataclass
class ExperimentConfig:
    seed: int = 0
    n_agents: int = 50
    steps: int = 3600
    steps_per_day: int = 360
    width: int = 786
    height: int = 890
    speed: float = 10.0
    scope: float = 100.0
    survival_cost: float = 10.0
    # one learning type for every agent, or {type: count} summing to n_agents
    learning: Union[str, dict] = "rule"
    memory_model: str = "mmdm"

    # order generation
    alpha: float = 0.05

    # memory construction and decay
    gamma: float = 0.8
    theta_value: float = 0.9
    theta_rare: float = 0.6
    k: int = 4000
    lam: float = 0.9
    discard_floor: float = 0.1

    # memory-learning arbitration
    w1: float = 0.6
    w2: float = 0.2
    w3: float = 0.2
    theta_memory: float = 0.7

    # Q-learning
    q_alpha: float = 0.1
    q_gamma: float = 0.8
    epsilon_start: float = 0.3
    epsilon_end: float = 0.05
    epsilon_anneal_fraction: float = 0.2

    # agent constraints
    daily_active_budget: int = 120
    daily_change_budget: int = 2

    # environment events (both off by default)
    congestion_prob: float = 0.0
    weather_flip_prob: float = 0.0

    # scripted-policy knobs
    accept_min_density_bucket: int = 2
    relocate_when_empty: bool = True

    # execution and logging
    n_threads: int = 1
    decision_log: bool = False
    log_triples: bool = False

    def __post_init__(self) -> None:
        self.validate()

    # -- derived parameter bundles

    def memory_params(self) -> MemoryParams:
        return MemoryParams(gamma=self.gamma, theta_value=self.theta_value,
                            theta_rare=self.theta_rare, k=self.k, lam=self.lam,
                            discard_floor=self.discard_floor,
                            steps_per_day=self.steps_per_day)

    def credibility_params(self) -> CredibilityParams:
        return CredibilityParams(w1=self.w1, w2=self.w2, w3=self.w3,
                                 lam=self.lam, theta_memory=self.theta_memory,
                                 steps_per_day=self.steps_per_day)

    def generator_params(self) -> GeneratorParams:
        return GeneratorParams(alpha=self.alpha)

    def script_config(self) -> ScriptConfig:
        sc = ScriptConfig(accept_min_density_bucket=self.accept_min_density_bucket,
                          relocate_when_empty=self.relocate_when_empty)
        sc.validate()
        return sc

    def learning_per_agent(self) -> list[str]:
        if isinstance(self.learning, str):
            return [self.learning] * self.n_agents
        out: list[str] = []
        for kind in LEARNING_TYPES:  # fixed order keeps agent ids stable
            out.extend([kind] * int(self.learning.get(kind, 0)))
        return out

    # -- validation

    def validate(self) -> None:
        if self.n_agents < 1:
            raise ConfigError("n_agents must be >= 1")
        if self.steps < 1:
            raise ConfigError("steps must be >= 1")
        if self.steps_per_day < 3:
            raise ConfigError("steps_per_day must be >= 3")
        if self.width < 1 or self.height < 1:
            raise ConfigError("grid dimensions must be positive")
        if self.speed <= 0 or self.scope <= 0:
            raise ConfigError("speed and scope must be positive")
        if self.memory_model not in MEMORY_MODELS:
            raise ConfigError(f"unknown memory_model: {self.memory_model!r}")
        if isinstance(self.learning, str):
            if self.learning not in LEARNING_TYPES:
                raise ConfigError(f"unknown learning type: {self.learning!r}")
        elif isinstance(self.learning, dict):
            bad = set(self.learning) - set(LEARNING_TYPES)
            if bad:
                raise ConfigError(f"unknown learning types: {sorted(bad)}")
            total = sum(int(v) for v in self.learning.values())
            if total != self.n_agents:
                raise ConfigError(
                    f"learning counts sum to {total}, expected {self.n_agents}")
        else:
            raise ConfigError("learning must be a string or a count mapping")
        if not (0.0 < self.gamma <= 1.0):
            raise ConfigError("gamma must be in (0, 1]")
        if not (0.0 < self.lam < 1.0):
            raise ConfigError("lam must be in (0, 1)")
        if not (0.0 < self.discard_floor < 1.0):
            raise ConfigError("discard_floor must be in (0, 1)")
        if self.k < 0:
            raise ConfigError("k must be nonnegative")
        if abs(self.w1 + self.w2 + self.w3 - 1.0) > 1e-12:
            raise ConfigError("credibility weights must sum to 1")
        if not (0.0 <= self.theta_memory <= 1.0):
            raise ConfigError("theta_memory must be in [0, 1]")
        if not (0.0 < self.q_alpha <= 1.0):
            raise ConfigError("q_alpha must be in (0, 1]")
        if not (0.0 < self.q_gamma < 1.0):
            raise ConfigError("q_gamma must be in (0, 1)")
        if not (0.0 <= self.epsilon_end <= self.epsilon_start <= 1.0):
            raise ConfigError("need 0 <= epsilon_end <= epsilon_start <= 1")
        if not (0.0 < self.epsilon_anneal_fraction <= 1.0):
            raise ConfigError("epsilon_anneal_fraction must be in (0, 1]")
        if self.daily_active_budget < 1:
            raise ConfigError("daily_active_budget must be >= 1")
        # working windows may span at most a third of the day
        if self.daily_active_budget > self.steps_per_day // 3:
            raise ConfigError(
                "daily_active_budget exceeds a third of the day "
                f"({self.daily_active_budget} > {self.steps_per_day // 3})")
        if self.daily_change_budget < 0:
            raise ConfigError("daily_change_budget must be >= 0")
        if not (0.0 <= self.congestion_prob <= 1.0):
            raise ConfigError("congestion_prob must be in [0, 1]")
        if not (0.0 <= self.weather_flip_prob <= 1.0):
            raise ConfigError("weather_flip_prob must be in [0, 1]")
        if self.alpha < 0:
            raise ConfigError("alpha must be nonnegative")
        if self.n_threads < 1:
            raise ConfigError("n_threads must be >= 1")
        try:
            self.script_config()
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    # -- serialization

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config root must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
    return ExperimentConfig.from_dict(data)


def desk_config(**overrides) -> ExperimentConfig:
    """Small profile sized for a workstation: 50 agents, 10 days."""
    base = dict(n_agents=50, steps=3600)
    base.update(overrides)
    return ExperimentConfig(**base)
