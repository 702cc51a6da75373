"""Deterministic simulated control tasks with safety costs.

Two classic systems are provided, each augmented with a binary safety
cost: a torque-limited pendulum whose unsafe region is an angular band
near the upright goal, and a two-link underactuated acrobot whose
unsafe region is any configuration swinging the tip above a height
threshold.

Both expose the same functional surface: ``reset`` draws an initial
state, ``step`` advances the true system one step and returns the new
state with its reward and safety cost, and ``reward_cost`` evaluates
the same analytic reward/cost on arbitrary observation vectors so that
planners can score model-predicted observations identically to the
real system.  Reward and cost for a step are always evaluated on the
*resulting* observation (the action's consequence), paired with the
action that produced it.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

TWO_PI = 2.0 * np.pi


def wrap_angle(theta):
    """Wrap angles into [-pi, pi).

    Accepts scalars or arrays; pi maps to -pi (half-open convention,
    irrelevant in practice since trajectories never hit it exactly).
    """
    return (np.asarray(theta) + np.pi) % TWO_PI - np.pi


def _as_rng(seed_or_rng) -> np.random.Generator:
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)


# ---------------------------------------------------------------------------
# Action spaces
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ContinuousActions:
    """A one-dimensional bounded continuous action space."""

    low: float
    high: float

    kind = "continuous"

    def sample(self, rng: np.random.Generator, size=None):
        return rng.uniform(self.low, self.high, size=size)

    def clamp(self, a):
        return np.clip(a, self.low, self.high)

    def contains(self, a) -> bool:
        a = np.asarray(a, dtype=float)
        return bool(np.all((a >= self.low) & (a <= self.high)))

    @property
    def encoded_dim(self) -> int:
        return 1

    def encode(self, a) -> np.ndarray:
        """Encode actions as model inputs: shape (..., 1), raw value."""
        return np.asarray(a, dtype=float)[..., None]

    def to_dict(self) -> dict:
        return {"kind": "continuous", "low": self.low, "high": self.high}


@dataclass(frozen=True)
class DiscreteActions:
    """A finite action set (numeric values, ascending)."""

    values: tuple

    kind = "discrete"

    def sample(self, rng: np.random.Generator, size=None):
        vals = np.asarray(self.values)
        return vals[rng.integers(0, len(vals), size=size)]

    def clamp(self, a):
        # snap to the nearest member, lowest value winning ties
        vals = np.asarray(self.values, dtype=float)
        a = np.asarray(a, dtype=float)
        idx = np.argmin(np.abs(a[..., None] - vals), axis=-1)
        return vals[idx]

    def contains(self, a) -> bool:
        vals = np.asarray(self.values, dtype=float)
        a = np.atleast_1d(np.asarray(a, dtype=float))
        return bool(np.all(np.isin(a, vals)))

    @property
    def encoded_dim(self) -> int:
        return len(self.values)

    def encode(self, a) -> np.ndarray:
        """One-hot encode actions: shape (..., n_values)."""
        vals = np.asarray(self.values, dtype=float)
        a = np.asarray(a, dtype=float)
        onehot = (a[..., None] == vals).astype(float)
        if not np.all(onehot.sum(axis=-1) == 1.0):
            raise ValueError(f"action outside discrete set {self.values}")
        return onehot

    def to_dict(self) -> dict:
        return {"kind": "discrete", "values": list(self.values)}


ActionSpace = Union[ContinuousActions, DiscreteActions]


def action_space_from_dict(d: dict) -> ActionSpace:
    if d["kind"] == "continuous":
        return ContinuousActions(low=float(d["low"]), high=float(d["high"]))
    if d["kind"] == "discrete":
        return DiscreteActions(values=tuple(d["values"]))
    raise ValueError(f"unknown action space kind {d['kind']!r}")


# ---------------------------------------------------------------------------
# Core state/outcome types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EnvState:
    """Full simulator state plus the observation derived from it."""

    internal: np.ndarray      # generalized coordinates and velocities
    observation: np.ndarray   # what models, policies and planners see


@dataclass(frozen=True)
class StepOutcome:
    state: EnvState           # state after the transition
    reward: float             # reward of the resulting observation
    cost: int                 # 1 iff the resulting state is unsafe


@dataclass(frozen=True)
class EnvSpec:
    """Static description of a task, consumed by models and planners."""

    name: str
    actions: ActionSpace
    observation_dim: int
    episode_length: int
    reward_bounds: tuple          # (min, max) achievable step reward
    behavior_bounds: tuple        # ((lo0, hi0), (lo1, hi1)) for 2-D behavior
    policy_hidden: tuple          # hidden layer widths for task policies
    reward_threshold: float       # episode mean-reward convergence level


# ---------------------------------------------------------------------------
# Pendulum
# ---------------------------------------------------------------------------

class SafePendulum:
    """Torque-limited pendulum swing-up with an unsafe angular band.

    Dynamics follow the standard frictionless point-mass pendulum with
    semi-implicit Euler integration: the angular velocity is updated
    (and clamped) first, then the angle is advanced with the *new*
    velocity.  Angle 0 is upright; positive angles are measured
    counter-clockwise.  The observation is ``[cos th, sin th, thdot]``.

    Reward is the negated quadratic ``-(th^2 + 0.1 thdot^2 + 0.001 a^2)``
    with ``th`` the wrapped angle, so the optimum is balancing upright
    at zero torque.  The unsafe region is the closed band
    ``unsafe_low_deg <= th_deg <= unsafe_high_deg`` on one side of the
    upright position, directly in the path of a clockwise swing-up.
    """

    name = "safe_pendulum"

    def __init__(self, gravity: float = 10.0, mass: float = 1.0,
                 length: float = 1.0, dt: float = 0.05,
                 max_torque: float = 2.0, max_speed: float = 8.0,
                 episode_length: int = 200,
                 unsafe_low_deg: float = 20.0, unsafe_high_deg: float = 30.0):
        self.gravity = gravity
        self.mass = mass
        self.length = length
        self.dt = dt
        self.max_torque = max_torque
        self.max_speed = max_speed
        self.episode_length = episode_length
        self.unsafe_low = np.deg2rad(unsafe_low_deg)
        self.unsafe_high = np.deg2rad(unsafe_high_deg)

    def spec(self) -> EnvSpec:
        worst = np.pi ** 2 + 0.1 * self.max_speed ** 2 + 0.001 * self.max_torque ** 2
        return EnvSpec(
            name=self.name,
            actions=ContinuousActions(-self.max_torque, self.max_torque),
            observation_dim=3,
            episode_length=self.episode_length,
            reward_bounds=(-worst, 0.0),
            behavior_bounds=((-np.pi, np.pi), (-self.max_speed, self.max_speed)),
            policy_hidden=(5,),
            reward_threshold=-2.5,
        )

    # -- state helpers ------------------------------------------------

    def _make_state(self, th: float, thdot: float) -> EnvState:
        obs = np.array([np.cos(th), np.sin(th), thdot])
        return EnvState(internal=np.array([th, thdot]), observation=obs)

    def state_from_internal(self, internal) -> EnvState:
        th, thdot = np.asarray(internal, dtype=float)
        return self._make_state(th, thdot)

    def reset(self, seed_or_rng=None) -> EnvState:
        """Draw th ~ U(-pi, pi), thdot ~ U(-1, 1)."""
        rng = _as_rng(seed_or_rng)
        th = rng.uniform(-np.pi, np.pi)
        thdot = rng.uniform(-1.0, 1.0)
        return self._make_state(th, thdot)

    # -- dynamics -----------------------------------------------------

    def step(self, state: EnvState, action) -> StepOutcome:
        u = float(np.clip(action, -self.max_torque, self.max_torque))
        th, thdot = state.internal
        g, m, l, dt = self.gravity, self.mass, self.length, self.dt

        newthdot = thdot + (3.0 * g / (2.0 * l) * np.sin(th)
                            + 3.0 / (m * l ** 2) * u) * dt
        newthdot = np.clip(newthdot, -self.max_speed, self.max_speed)
        newth = th + newthdot * dt

        nxt = self._make_state(newth, newthdot)
        r, c = self.reward_cost(nxt.observation, u)
        return StepOutcome(nxt, float(r), int(c))

    # -- analytic reward / cost ----------------------------------------

    def reward_cost(self, obs, action):
        """Reward and safety cost of observation vectors.

        Works on a single observation (3,) with a scalar action, or on
        batches (n, 3) with actions (n,).  The angle is recovered from
        the cos/sin components, which wraps it into [-pi, pi] for free.
        """
        obs = np.asarray(obs, dtype=float)
        a = np.asarray(action, dtype=float)
        th = np.arctan2(obs[..., 1], obs[..., 0])
        thdot = obs[..., 2]
        r = -(th ** 2 + 0.1 * thdot ** 2 + 0.001 * a ** 2)
        c = ((th >= self.unsafe_low) & (th <= self.unsafe_high)).astype(int)
        if obs.ndim == 1:
            return float(r), int(c)
        return r, c

    def unsafe(self, state: EnvState) -> int:
        th = wrap_angle(state.internal[0])
        return int(self.unsafe_low <= th <= self.unsafe_high)

    def project_behavior(self, obs) -> np.ndarray:
        """2-D behavior coordinates (wrapped angle, angular velocity)."""
        obs = np.asarray(obs, dtype=float)
        th = np.arctan2(obs[..., 1], obs[..., 0])
        return np.stack([th, obs[..., 2]], axis=-1)


# ---------------------------------------------------------------------------
# Acrobot
# ---------------------------------------------------------------------------

class SafeAcrobot:
    """Two-link acrobot with reward for tip height and a height safety cap.

    Dynamics are the standard two-link underactuated pendulum (torque on
    the second joint only) integrated with a single fourth-order
    Runge-Kutta step per control interval.  Angle ``th0`` is measured
    from the downward vertical; the tip height above the lowest point is
    ``2 - cos th0 - cos(th0 + th1)`` in [0, 4].  Reward is the tip
    height itself; states with tip height strictly above ``unsafe_height``
    are unsafe, so the best safe behavior rides just under the cap.
    """

    name = "safe_acrobot"

    def __init__(self, link_mass_1: float = 1.0, link_mass_2: float = 1.0,
                 link_length_1: float = 1.0, link_com_1: float = 0.5,
                 link_com_2: float = 0.5, link_moi: float = 1.0,
                 gravity: float = 9.8, dt: float = 0.2,
                 max_vel_1: float = 4 * np.pi, max_vel_2: float = 9 * np.pi,
                 episode_length: int = 200, unsafe_height: float = 3.0):
        self.m1 = link_mass_1
        self.m2 = link_mass_2
        self.l1 = link_length_1
        self.lc1 = link_com_1
        self.lc2 = link_com_2
        self.moi = link_moi
        self.gravity = gravity
        self.dt = dt
        self.max_vel_1 = max_vel_1
        self.max_vel_2 = max_vel_2
        self.episode_length = episode_length
        self.unsafe_height = unsafe_height

    def spec(self) -> EnvSpec:
        return EnvSpec(
            name=self.name,
            actions=DiscreteActions((-1, 0, 1)),
            observation_dim=6,
            episode_length=self.episode_length,
            reward_bounds=(0.0, 4.0),
            behavior_bounds=((-np.pi, np.pi), (-np.pi, np.pi)),
            policy_hidden=(5, 5),
            reward_threshold=1.6,
        )

    # -- state helpers ------------------------------------------------

    def _make_state(self, internal: np.ndarray) -> EnvState:
        th0, th1, dth0, dth1 = internal
        obs = np.array([np.cos(th0), np.sin(th0),
                        np.cos(th1), np.sin(th1), dth0, dth1])
        return EnvState(internal=np.asarray(internal, dtype=float),
                        observation=obs)

    def state_from_internal(self, internal) -> EnvState:
        return self._make_state(np.asarray(internal, dtype=float))

    def reset(self, seed_or_rng=None) -> EnvState:
        """All four state variables drawn from U(-0.1, 0.1)."""
        rng = _as_rng(seed_or_rng)
        return self._make_state(rng.uniform(-0.1, 0.1, size=4))

    # -- dynamics -----------------------------------------------------

    def _dsdt(self, s_aug: np.ndarray) -> np.ndarray:
        m1, m2 = self.m1, self.m2
        l1 = self.l1
        lc1, lc2 = self.lc1, self.lc2
        i1 = i2 = self.moi
        g = self.gravity
        th1, th2, dth1, dth2, a = s_aug

        d1 = (m1 * lc1 ** 2
              + m2 * (l1 ** 2 + lc2 ** 2 + 2 * l1 * lc2 * np.cos(th2))
              + i1 + i2)
        d2 = m2 * (lc2 ** 2 + l1 * lc2 * np.cos(th2)) + i2
        phi2 = m2 * lc2 * g * np.cos(th1 + th2 - np.pi / 2.0)
        phi1 = (-m2 * l1 * lc2 * dth2 ** 2 * np.sin(th2)
                - 2 * m2 * l1 * lc2 * dth2 * dth1 * np.sin(th2)
                + (m1 * lc1 + m2 * l1) * g * np.cos(th1 - np.pi / 2.0)
                + phi2)
        ddth2 = ((a + d2 / d1 * phi1
                  - m2 * l1 * lc2 * dth1 ** 2 * np.sin(th2) - phi2)
                 / (m2 * lc2 ** 2 + i2 - d2 ** 2 / d1))
        ddth1 = -(d2 * ddth2 + phi1) / d1
        return np.array([dth1, dth2, ddth1, ddth2, 0.0])

    def step(self, state: EnvState, action) -> StepOutcome:
        a = float(action)
        if not self.spec().actions.contains(a):
            raise ValueError(f"acrobot action must be one of (-1, 0, 1), got {action!r}")

        s_aug = np.append(state.internal, a)
        dt = self.dt
        k1 = self._dsdt(s_aug)
        k2 = self._dsdt(s_aug + dt / 2.0 * k1)
        k3 = self._dsdt(s_aug + dt / 2.0 * k2)
        k4 = self._dsdt(s_aug + dt * k3)
        ns = s_aug + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)

        th0 = wrap_angle(ns[0])
        th1 = wrap_angle(ns[1])
        dth0 = np.clip(ns[2], -self.max_vel_1, self.max_vel_1)
        dth1 = np.clip(ns[3], -self.max_vel_2, self.max_vel_2)

        nxt = self._make_state(np.array([th0, th1, dth0, dth1]))
        r, c = self.reward_cost(nxt.observation, a)
        return StepOutcome(nxt, float(r), int(c))

    # -- analytic reward / cost ----------------------------------------

    def tip_height(self, obs) -> np.ndarray:
        obs = np.asarray(obs, dtype=float)
        cos0, sin0 = obs[..., 0], obs[..., 1]
        cos1, sin1 = obs[..., 2], obs[..., 3]
        # cos(th0 + th1) expanded so it works straight off the observation
        cos_sum = cos0 * cos1 - sin0 * sin1
        return 2.0 - cos0 - cos_sum

    def reward_cost(self, obs, action):
        """Tip-height reward and above-cap cost; scalar or batched."""
        obs = np.asarray(obs, dtype=float)
        h = self.tip_height(obs)
        c = (h > self.unsafe_height).astype(int)
        if obs.ndim == 1:
            return float(h), int(c)
        return h, c

    def unsafe(self, state: EnvState) -> int:
        return int(self.tip_height(state.observation) > self.unsafe_height)

    def project_behavior(self, obs) -> np.ndarray:
        """2-D behavior coordinates: the two joint angles."""
        obs = np.asarray(obs, dtype=float)
        th0 = np.arctan2(obs[..., 1], obs[..., 0])
        th1 = np.arctan2(obs[..., 3], obs[..., 2])
        return np.stack([th0, th1], axis=-1)


# ---------------------------------------------------------------------------

ENV_CLASSES = {
    SafePendulum.name: SafePendulum,
    SafeAcrobot.name: SafeAcrobot,
}


def make_env(name: str, **overrides):
    """Instantiate a task by name, optionally overriding physics constants."""
    try:
        cls = ENV_CLASSES[name]
    except KeyError:
        raise ValueError(f"unknown environment {name!r}; "
                         f"choose from {sorted(ENV_CLASSES)}") from None
    return cls(**overrides)
