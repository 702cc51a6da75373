"""Tour of the two safety-constrained tasks.

Both tasks pair a classic control problem with a binary safety
indicator evaluated on every visited state: the pendulum has an unsafe
angular band near the upright goal, the acrobot an unsafe tip height
just below its maximum.  Rewards and costs are functions of the
observation, so planners can score imagined states exactly the same
way the real system does.
"""
import numpy as np

from safeplan.envs import make_env, wrap_angle

rng = np.random.default_rng(0)

# -- pendulum -------------------------------------------------------------

env = make_env("safe_pendulum")
spec = env.spec()
print("pendulum:", spec.observation_dim, "obs dims, torque in",
      (spec.actions.low, spec.actions.high))

# observation is [cos th, sin th, thdot]; reward peaks (at 0) upright
for deg in (0, 25, 90, 180):
    th = np.deg2rad(deg)
    obs = np.array([np.cos(th), np.sin(th), 0.0])
    r, c = env.reward_cost(obs, 0.0)
    print(f"  th={deg:>3}deg  reward={r:+.4f}  unsafe={c}")
# the 20..30 degree band is the only unsafe region; 25deg sits inside

# a torque-limited swing: velocity is updated before the angle
state = env.reset(rng)
for t in range(5):
    out = env.step(state, 2.0)      # constant full torque
    th, thdot = out.state.internal
    print(f"  t={t}  th={np.rad2deg(wrap_angle(th)):+7.2f}deg  "
          f"thdot={thdot:+.3f}  r={out.reward:+.3f}  c={out.cost}")
    state = out.state

# -- acrobot --------------------------------------------------------------

env = make_env("safe_acrobot")
spec = env.spec()
print("\nacrobot:", spec.observation_dim, "obs dims, torques",
      spec.actions.values)

# reward is the tip height in [0, 4]; above 3.0 is unsafe
hang = np.array([1.0, 0.0, 1.0, 0.0, 0.0, 0.0])       # both links down
up = np.array([-1.0, 0.0, 1.0, 0.0, 0.0, 0.0])        # both links up
for name, obs in (("hanging", hang), ("inverted", up)):
    r, c = env.reward_cost(obs, 0)
    print(f"  {name:>8}: tip height={r:.1f}  unsafe={c}")

# the same seed reproduces the same episode exactly
def short_episode(seed):
    rng = np.random.default_rng(seed)
    state = env.reset(rng)
    rewards = []
    for _ in range(50):
        out = env.step(state, int(spec.actions.sample(rng)))
        rewards.append(out.reward)
        state = out.state
    return np.array(rewards)

a, b = short_episode(7), short_episode(7)
print("  deterministic replay:", np.array_equal(a, b),
      f" mean tip height {a.mean():.3f}")
