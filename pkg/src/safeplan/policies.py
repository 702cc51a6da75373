"""Small neural-network policies and behavior descriptors.

Policies are tiny sigmoid MLPs over flat parameter vectors, searched by
parameter-space sampling and Gaussian variation rather than gradient
training.  A policy's *behavior descriptor* summarizes where a
simulated rollout ended up: the final (or mean) predicted state is
projected to the task's 2-D behavior coordinates and binned into a
square grid cell.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .envs import EnvSpec


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


@dataclass(frozen=True)
class PolicyArchitecture:
    """Layer layout and output head of a task policy."""

    input_dim: int
    hidden: tuple                 # hidden layer widths
    output_kind: str              # "continuous" or "discrete"
    output_low: float = 0.0      # continuous head: affine range
    output_high: float = 0.0
    output_values: tuple = ()    # discrete head: action values, ascending

    @property
    def output_dim(self) -> int:
        return 1 if self.output_kind == "continuous" else len(self.output_values)

    def layer_sizes(self):
        dims = (self.input_dim,) + self.hidden + (self.output_dim,)
        return list(zip(dims[:-1], dims[1:]))

    @property
    def param_count(self) -> int:
        return sum(i * o + o for i, o in self.layer_sizes())

    @classmethod
    def for_env(cls, spec: EnvSpec) -> "PolicyArchitecture":
        if spec.actions.kind == "continuous":
            return cls(input_dim=spec.observation_dim, hidden=spec.policy_hidden,
                       output_kind="continuous",
                       output_low=spec.actions.low, output_high=spec.actions.high)
        return cls(input_dim=spec.observation_dim, hidden=spec.policy_hidden,
                   output_kind="discrete", output_values=spec.actions.values)


@dataclass(frozen=True)
class Policy:
    params: np.ndarray
    arch: PolicyArchitecture

    def act(self, obs) -> float:
        return float(act_batch(self.arch, self.params[None, :],
                               np.asarray(obs, dtype=float)[None, :])[0])


def _unpack(arch: PolicyArchitecture, params: np.ndarray):
    """params (P, n) -> list of (W (P, i, o), b (P, o)) layer tensors."""
    layers = []
    pos = 0
    n_pol = params.shape[0]
    for i, o in arch.layer_sizes():
        w = params[:, pos:pos + i * o].reshape(n_pol, i, o)
        pos += i * o
        b = params[:, pos:pos + o]
        pos += o
        layers.append((w, b))
    return layers


def act_batch(arch: PolicyArchitecture, params: np.ndarray, obs: np.ndarray) -> np.ndarray:
    """Evaluate many policies on their paired observations.

    params: (P, n_params); obs: (P, input_dim).  Returns actions (P,).
    Hidden layers use sigmoid; a continuous head maps its sigmoid output
    affinely onto the action range, a discrete head returns the value of
    its argmax logit (ties resolved to the lowest index).
    """
    params = np.asarray(params, dtype=float)
    if params.shape[1] != arch.param_count:
        raise ValueError(f"expected {arch.param_count} params, got {params.shape[1]}")
    h = obs[:, None, :]
    layers = _unpack(arch, params)
    for w, b in layers[:-1]:
        h = _sigmoid(h @ w + b[:, None, :])
    w, b = layers[-1]
    out = (h @ w + b[:, None, :])[:, 0, :]
    if arch.output_kind == "continuous":
        squashed = _sigmoid(out[:, 0])
        return arch.output_low + squashed * (arch.output_high - arch.output_low)
    values = np.asarray(arch.output_values, dtype=float)
    return values[np.argmax(out, axis=1)]


def sample_policy(rng: np.random.Generator, arch: PolicyArchitecture) -> Policy:
    """Fresh policy with params i.i.d. uniform in [-1, 1]."""
    return Policy(rng.uniform(-1.0, 1.0, size=arch.param_count), arch)


def vary(rng: np.random.Generator, policy: Policy, std: float = 0.1) -> Policy:
    """Gaussian parameter perturbation; the parent is left untouched."""
    noise = rng.normal(0.0, std, size=policy.params.shape) if std > 0 \
        else np.zeros_like(policy.params)
    return Policy(policy.params + noise, policy.arch)


# ---------------------------------------------------------------------------
# behavior descriptors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BehaviorDescriptor:
    b: np.ndarray            # clamped 2-D behavior coordinates
    cell: Tuple[int, int]    # grid indices


def bin_coordinate(x: float, lo: float, hi: float, n_bins: int) -> int:
    """Uniform binning with clamping; the upper bound joins the last bin."""
    x = min(max(x, lo), hi)
    i = int((x - lo) / (hi - lo) * n_bins)
    return min(i, n_bins - 1)


def behavior_descriptor(env, states: np.ndarray, grid_size: int = 50,
                        mode: str = "final") -> BehaviorDescriptor:
    """Descriptor of a simulated trajectory.

    states: (h, observation_dim) predicted observations, in order.  mode
    "final" projects the last state; "mean" averages the projections of
    all states.  Coordinates are clamped into the task's behavior bounds
    before binning, so out-of-range trajectories land in edge cells.
    """
    states = np.atleast_2d(np.asarray(states, dtype=float))
    if len(states) == 0:
        raise ValueError("cannot describe an empty trajectory")
    if mode == "final":
        coords = env.project_behavior(states[-1])
    elif mode == "mean":
        coords = env.project_behavior(states).mean(axis=0)
    else:
        raise ValueError(f"unknown descriptor mode {mode!r}")
    bounds = env.spec().behavior_bounds
    clamped = np.array([min(max(float(coords[k]), bounds[k][0]), bounds[k][1])
                        for k in range(2)])
    cell = tuple(bin_coordinate(clamped[k], bounds[k][0], bounds[k][1], grid_size)
                 for k in range(2))
    return BehaviorDescriptor(b=clamped, cell=cell)
