"""Tests for the simulated tasks: dynamics, rewards, safety predicates."""
import numpy as np
import pytest

from safeplan.envs import (
    ContinuousActions,
    DiscreteActions,
    SafeAcrobot,
    SafePendulum,
    make_env,
    wrap_angle,
)


# ---------------------------------------------------------------------------
# pendulum
# ---------------------------------------------------------------------------

def _pendulum_reference_step(th, thdot, u, g=10.0, m=1.0, l=1.0, dt=0.05,
                             max_speed=8.0, max_torque=2.0):
    u = np.clip(u, -max_torque, max_torque)
    newthdot = thdot + (3 * g / (2 * l) * np.sin(th) + 3.0 / (m * l ** 2) * u) * dt
    newthdot = np.clip(newthdot, -max_speed, max_speed)
    newth = th + newthdot * dt
    return newth, newthdot


def test_pendulum_step_matches_reference_formula():
    env = SafePendulum()
    rng = np.random.default_rng(0)
    for _ in range(200):
        th = rng.uniform(-2 * np.pi, 2 * np.pi)
        thdot = rng.uniform(-8, 8)
        u = rng.uniform(-3, 3)  # beyond the clamp on purpose
        out = env.step(env.state_from_internal([th, thdot]), u)
        ref = _pendulum_reference_step(th, thdot, u)
        assert out.state.internal[0] == ref[0]
        assert out.state.internal[1] == ref[1]


def test_pendulum_upright_rest_is_zero_reward():
    env = SafePendulum()
    r, c = env.reward_cost(np.array([1.0, 0.0, 0.0]), 0.0)
    assert r == 0.0
    assert c == 0


def test_pendulum_step_inside_band_costs_one_for_any_action():
    env = SafePendulum()
    start = env.state_from_internal([np.deg2rad(25.0), 0.0])
    for u in (-2.0, 0.0, 2.0):
        out = env.step(start, u)
        assert out.cost == 1


def test_pendulum_unsafe_band_boundaries():
    env = SafePendulum()

    def unsafe_at(deg):
        return env.unsafe(env.state_from_internal([np.deg2rad(deg), 0.0]))

    assert unsafe_at(19.99) == 0
    assert unsafe_at(20.0) == 1
    assert unsafe_at(25.0) == 1
    assert unsafe_at(30.0) == 1
    assert unsafe_at(30.01) == 0
    assert unsafe_at(-25.0) == 0  # band is one-sided


def test_pendulum_reward_cost_on_observation_vectors():
    env = SafePendulum()
    th = np.deg2rad(25.0)
    obs = np.array([np.cos(th), np.sin(th), 0.0])
    r, c = env.reward_cost(obs, 0.0)
    assert c == 1
    assert r == pytest.approx(-th ** 2)
    # wrapped-angle recovery: theta beyond pi comes back wrapped
    th = 3.5  # wraps to 3.5 - 2pi
    obs = np.array([np.cos(th), np.sin(th), 1.0])
    r, _ = env.reward_cost(obs, 0.5)
    want = -(wrap_angle(th) ** 2 + 0.1 * 1.0 + 0.001 * 0.25)
    assert r == pytest.approx(want)


# ---------------------------------------------------------------------------
# acrobot
# ---------------------------------------------------------------------------

def test_acrobot_tip_height_landmarks():
    env = SafeAcrobot()
    obs_up = env.state_from_internal([np.pi, 0.0, 0.0, 0.0]).observation
    r, c = env.reward_cost(obs_up, 0)
    assert r == pytest.approx(4.0)
    assert c == 1

    obs_down = env.state_from_internal([0.0, 0.0, 0.0, 0.0]).observation
    r, c = env.reward_cost(obs_down, 0)
    assert r == 0.0
    assert c == 0

    obs_half = env.state_from_internal([np.pi / 2, 0.0, 0.0, 0.0]).observation
    r, _ = env.reward_cost(obs_half, 0)
    assert r == pytest.approx(2.0)


def test_acrobot_unsafe_threshold_is_strict():
    env = SafeAcrobot()
    # tip height exactly 3: cos th0 + cos(th0+th1) = -1, e.g. th0 = 2pi/3, th1 = 0
    boundary = env.state_from_internal([2 * np.pi / 3, 0.0, 0.0, 0.0])
    assert env.tip_height(boundary.observation) == pytest.approx(3.0)
    assert env.unsafe(boundary) == 0
    above = env.state_from_internal([2 * np.pi / 3 + 0.05, 0.0, 0.0, 0.0])
    assert env.unsafe(above) == 1


def test_acrobot_invalid_action_raises():
    env = SafeAcrobot()
    state = env.reset(0)
    for bad in (0.5, 2, -3, 1.0001):
        with pytest.raises(ValueError):
            env.step(state, bad)


def test_acrobot_velocity_clamps_and_angle_wrap():
    env = SafeAcrobot()
    state = env.reset(3)
    for k in range(300):
        state = env.step(state, (-1, 0, 1)[k % 3]).state
        th0, th1, dth0, dth1 = state.internal
        assert -np.pi <= th0 <= np.pi
        assert -np.pi <= th1 <= np.pi
        assert abs(dth0) <= env.max_vel_1
        assert abs(dth1) <= env.max_vel_2


def _acrobot_energy(env, internal):
    th1, th2, w1, w2 = internal
    m1, m2, l1 = env.m1, env.m2, env.l1
    lc1, lc2 = env.lc1, env.lc2
    i1 = i2 = env.moi
    g = env.gravity
    d1 = m1 * lc1 ** 2 + m2 * (l1 ** 2 + lc2 ** 2 + 2 * l1 * lc2 * np.cos(th2)) + i1 + i2
    d2 = m2 * (lc2 ** 2 + l1 * lc2 * np.cos(th2)) + i2
    kinetic = 0.5 * d1 * w1 ** 2 + d2 * w1 * w2 + 0.5 * (m2 * lc2 ** 2 + i2) * w2 ** 2
    potential = g * (m1 * (-lc1 * np.cos(th1)) + m2 * (-l1 * np.cos(th1) - lc2 * np.cos(th1 + th2)))
    return kinetic + potential


@pytest.mark.parametrize("dt,rel_tol", [(0.2, 1e-2), (0.02, 1e-4)])
def test_acrobot_zero_torque_conserves_energy(dt, rel_tol):
    env = SafeAcrobot(dt=dt)
    rng = np.random.default_rng(7)
    for _ in range(3):
        internal = np.array([rng.uniform(-1, 1), rng.uniform(-1, 1),
                             rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)])
        state = env.state_from_internal(internal)
        e0 = _acrobot_energy(env, state.internal)
        bound = rel_tol * max(abs(e0), 1.0)
        for _ in range(env.episode_length):
            state = env.step(state, 0).state
            assert abs(_acrobot_energy(env, state.internal) - e0) <= bound


# ---------------------------------------------------------------------------
# shared invariants
# ---------------------------------------------------------------------------

def _random_state(env, rng):
    if isinstance(env, SafePendulum):
        return env.state_from_internal([rng.uniform(-2 * np.pi, 2 * np.pi),
                                        rng.uniform(-8, 8)])
    return env.state_from_internal([rng.uniform(-np.pi, np.pi),
                                    rng.uniform(-np.pi, np.pi),
                                    rng.uniform(-4 * np.pi, 4 * np.pi),
                                    rng.uniform(-9 * np.pi, 9 * np.pi)])


@pytest.mark.parametrize("name", ["safe_pendulum", "safe_acrobot"])
def test_random_pairs_reward_cost_invariants(name):
    env = make_env(name)
    rng = np.random.default_rng(123)
    n = 10_000
    for _ in range(n):
        state = _random_state(env, rng)
        action = env.spec().actions.sample(rng)
        out = env.step(state, action)
        assert out.cost in (0, 1)
        assert out.cost == env.unsafe(out.state)
        if name == "safe_pendulum":
            assert out.reward <= 0.0
        else:
            assert 0.0 <= out.reward <= 4.0


@pytest.mark.parametrize("name", ["safe_pendulum", "safe_acrobot"])
def test_step_is_deterministic_bit_exact(name):
    env = make_env(name)
    rng = np.random.default_rng(9)
    for _ in range(50):
        state = _random_state(env, rng)
        action = env.spec().actions.sample(rng)
        a = env.step(state, action)
        b = env.step(state, action)
        assert a.state.internal.tobytes() == b.state.internal.tobytes()
        assert a.state.observation.tobytes() == b.state.observation.tobytes()
        assert repr(a.reward) == repr(b.reward)
        assert a.cost == b.cost


@pytest.mark.parametrize("name", ["safe_pendulum", "safe_acrobot"])
def test_batched_reward_cost_matches_scalar(name):
    env = make_env(name)
    rng = np.random.default_rng(11)
    obs = np.stack([_random_state(env, rng).observation for _ in range(64)])
    actions = env.spec().actions.sample(rng, size=64)
    r_b, c_b = env.reward_cost(obs, actions)
    for i in range(64):
        r_i, c_i = env.reward_cost(obs[i], actions[i])
        assert r_b[i] == r_i
        assert c_b[i] == c_i


def test_reset_distributions_and_seeding():
    pend = SafePendulum()
    acb = SafeAcrobot()
    ths, thdots = [], []
    for seed in range(500):
        s = pend.reset(seed)
        ths.append(s.internal[0])
        thdots.append(s.internal[1])
        sa = acb.reset(seed)
        assert np.all(np.abs(sa.internal) <= 0.1)
    assert -np.pi <= min(ths) and max(ths) <= np.pi
    assert -1 <= min(thdots) and max(thdots) <= 1
    assert max(ths) - min(ths) > 5.0  # actually spreads over the range
    # same seed, same state; generators are also accepted
    assert np.array_equal(pend.reset(42).internal, pend.reset(42).internal)
    g1, g2 = np.random.default_rng(5), np.random.default_rng(5)
    assert np.array_equal(pend.reset(g1).internal, pend.reset(g2).internal)


def test_observation_layout():
    pend = SafePendulum()
    s = pend.state_from_internal([1.2, -3.4])
    assert np.allclose(s.observation, [np.cos(1.2), np.sin(1.2), -3.4])
    acb = SafeAcrobot()
    s = acb.state_from_internal([0.3, -0.7, 1.5, -2.5])
    want = [np.cos(0.3), np.sin(0.3), np.cos(-0.7), np.sin(-0.7), 1.5, -2.5]
    assert np.allclose(s.observation, want)


def test_wrap_angle():
    assert wrap_angle(0.0) == 0.0
    assert wrap_angle(2 * np.pi) == pytest.approx(0.0)
    assert wrap_angle(np.pi) == pytest.approx(-np.pi)  # half-open convention
    assert wrap_angle(-np.pi) == pytest.approx(-np.pi)
    assert wrap_angle(3 * np.pi / 2) == pytest.approx(-np.pi / 2)
    assert np.allclose(wrap_angle(np.array([7.0, -7.0])),
                       [7.0 - 2 * np.pi, 2 * np.pi - 7.0])


# ---------------------------------------------------------------------------
# action spaces / behavior projections / factory
# ---------------------------------------------------------------------------

def test_continuous_action_space():
    space = ContinuousActions(-2.0, 2.0)
    rng = np.random.default_rng(0)
    draws = space.sample(rng, size=1000)
    assert np.all((draws >= -2) & (draws <= 2))
    assert space.contains(1.5) and not space.contains(2.5)
    assert space.clamp(7.0) == 2.0
    enc = space.encode(draws)
    assert enc.shape == (1000, 1)
    assert space.encoded_dim == 1


def test_discrete_action_space():
    space = DiscreteActions((-1, 0, 1))
    rng = np.random.default_rng(0)
    draws = space.sample(rng, size=1000)
    assert set(np.unique(draws)) == {-1, 0, 1}
    assert space.contains(0) and space.contains(-1.0) and not space.contains(0.5)
    enc = space.encode(np.array([-1, 0, 1, 1]))
    assert enc.shape == (4, 3)
    assert np.array_equal(enc, [[1, 0, 0], [0, 1, 0], [0, 0, 1], [0, 0, 1]])
    with pytest.raises(ValueError):
        space.encode(np.array([0.25]))
    assert space.encoded_dim == 3


def test_behavior_projection():
    pend = SafePendulum()
    obs = pend.state_from_internal([1.0, 2.0]).observation
    assert np.allclose(pend.project_behavior(obs), [1.0, 2.0])
    acb = SafeAcrobot()
    obs = acb.state_from_internal([0.4, -1.1, 3.0, 2.0]).observation
    assert np.allclose(acb.project_behavior(obs), [0.4, -1.1])
    batch = np.stack([obs, obs])
    assert acb.project_behavior(batch).shape == (2, 2)


def test_make_env_factory():
    env = make_env("safe_pendulum", dt=0.01, gravity=9.81)
    assert env.dt == 0.01 and env.gravity == 9.81
    env = make_env("safe_acrobot", unsafe_height=2.5)
    assert env.unsafe_height == 2.5
    with pytest.raises(ValueError):
        make_env("cartpole")
