"""Experiment configuration: defaults, validation, and YAML round-trips.

An :class:`ExperimentConfig` bundles everything one multi-seed run
needs: the task, the epoch budget, the planner settings, and the model
training settings.  Defaults reproduce the reference hyper-parameter
table; a YAML file overrides any subset of fields and round-trips
exactly.  Two profiles rescale the budget: ``desk`` (20 epochs, 3
seeds) finishes on a laptop, ``paper`` (40 epochs, 10 seeds) matches
the published evaluation scale.
"""

from dataclasses import asdict, dataclass, field, replace
from typing import Tuple

import yaml

from .envs import ENV_CLASSES
from .model import TrainConfig
from .planners import PLANNER_KINDS, PlannerConfig

__all__ = [
    "ExperimentConfig",
    "PROFILES",
    "apply_profile",
    "config_from_dict",
    "load_config",
    "save_config",
    "validate_config",
]

PROFILES = {
    "desk": {"epochs": 20, "seeds": (0, 1, 2)},
    "paper": {"epochs": 40, "seeds": tuple(range(10))},
}


@dataclass
class ExperimentConfig:
    """One experiment: a task, a planner, a model, and a seed list."""

    env: str = "safe_pendulum"
    epochs: int = 20                 # planned epochs after the random one
    episode_length: int = 200        # steps per epoch
    seeds: Tuple[int, ...] = (0, 1, 2)
    output_dir: str = "runs/experiment"
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    model: TrainConfig = field(default_factory=TrainConfig)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["seeds"] = [int(s) for s in self.seeds]
        return d


def validate_config(cfg: ExperimentConfig) -> ExperimentConfig:
    """Raise ValueError on any inconsistent field; return the config."""
    if cfg.env not in ENV_CLASSES:
        raise ValueError(f"unknown environment {cfg.env!r}; "
                         f"choose from {sorted(ENV_CLASSES)}")
    if cfg.epochs < 0:
        raise ValueError("epochs must be >= 0")
    if cfg.episode_length < 1:
        raise ValueError("episode_length must be >= 1")
    seeds = list(cfg.seeds)
    if not seeds:
        raise ValueError("need at least one seed")
    if any(int(s) != s or s < 0 for s in seeds):
        raise ValueError("seeds must be non-negative integers")
    if len(set(seeds)) != len(seeds):
        raise ValueError("seeds must be distinct")

    p = cfg.planner
    if p.kind not in PLANNER_KINDS:
        raise ValueError(f"unknown planner kind {p.kind!r}; "
                         f"choose from {sorted(PLANNER_KINDS)}")
    if p.horizon < 1:
        raise ValueError("planner horizon must be >= 1")
    if not 0.0 < p.discount <= 1.0:
        raise ValueError("discount must lie in (0, 1]")
    for name in ("n_sequences", "n_policies", "n_initial_policies",
                 "policies_per_iteration", "grid_size", "cem_sequences"):
        if getattr(p, name) < 1:
            raise ValueError(f"planner {name} must be >= 1")
    if not 0 < p.cem_elites <= p.cem_sequences:
        raise ValueError("cem_elites must lie in [1, cem_sequences]")
    if p.cem_iterations < 0:
        raise ValueError("cem_iterations must be >= 0")
    if p.n_initial_policies > p.n_policies:
        raise ValueError("n_initial_policies cannot exceed n_policies")
    if p.descriptor_mode not in ("final", "mean"):
        raise ValueError("descriptor_mode must be 'final' or 'mean'")
    if p.variation_std < 0:
        raise ValueError("variation_std must be >= 0")

    m = cfg.model
    if m.loss not in ("nll", "mse"):
        raise ValueError("model loss must be 'nll' or 'mse'")
    if m.hidden_layers < 1 or m.hidden_units < 1:
        raise ValueError("model needs at least one hidden layer and unit")
    if m.learning_rate <= 0:
        raise ValueError("learning_rate must be positive")
    if m.batch_size < 1 or m.passes < 1:
        raise ValueError("batch_size and passes must be >= 1")
    if not 0.0 <= m.holdout_fraction < 1.0:
        raise ValueError("holdout_fraction must lie in [0, 1)")
    return cfg


def _build(cls, data: dict, where: str):
    fields = {f.name for f in cls.__dataclass_fields__.values()}
    unknown = set(data) - fields
    if unknown:
        raise ValueError(f"unknown {where} fields: {sorted(unknown)}")
    return cls(**data)


def config_from_dict(data: dict) -> ExperimentConfig:
    """Build a validated config from a (possibly partial) plain dict."""
    data = dict(data or {})
    planner = _build(PlannerConfig, data.pop("planner", {}) or {}, "planner")
    model = _build(TrainConfig, data.pop("model", {}) or {}, "model")
    if "seeds" in data:
        data["seeds"] = tuple(int(s) for s in data["seeds"])
    cfg = _build(ExperimentConfig, data, "experiment")
    cfg = replace(cfg, planner=planner, model=model)
    return validate_config(cfg)


def apply_profile(cfg: ExperimentConfig, profile: str) -> ExperimentConfig:
    """Rescale epoch and seed budgets to a named profile."""
    if profile not in PROFILES:
        raise ValueError(f"unknown profile {profile!r}; "
                         f"choose from {sorted(PROFILES)}")
    return validate_config(replace(cfg, **PROFILES[profile]))


def load_config(path) -> ExperimentConfig:
    with open(path) as f:
        data = yaml.safe_load(f)
    return config_from_dict(data)


def save_config(cfg: ExperimentConfig, path) -> None:
    with open(path, "w") as f:
        yaml.safe_dump(cfg.to_dict(), f, sort_keys=False)
