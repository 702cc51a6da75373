"""Safe model-based planning on classic control tasks.

The package couples learned dynamics models with planners that treat
safety as a first-class objective: every candidate plan is scored both
by predicted return and by predicted safety-constraint violations, and
the safe planner variants only fall back to reward once predicted cost
is minimized.
"""

from .envs import (
    ContinuousActions,
    DiscreteActions,
    EnvSpec,
    EnvState,
    SafeAcrobot,
    SafePendulum,
    StepOutcome,
    make_env,
    wrap_angle,
)
from .model import DynamicsModel, ModelDivergenceError, TrainConfig
from .planners import PlannerConfig, non_dominated_sort, plan_action
from .config import ExperimentConfig, load_config, save_config
from .harness import compare_runs, compute_run_metrics, run_experiment

__version__ = "0.1.0"
