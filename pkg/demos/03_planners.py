"""Planning through the learned model, with and without the cost signal.

All planners here share one trained model and one decision budget; they
differ only in how candidates are generated and which one is picked.
The reward-only variants take whatever scores highest, the safe
variants rank by predicted cost first, and the elite-grid family keeps
a whole behavior archive per decision instead of a single winner.
"""
import numpy as np

from safeplan.envs import EnvState, make_env
from safeplan.harness import run_episode_random
from safeplan.model import DynamicsModel, TrainConfig
from safeplan.planners import (PlannerConfig, non_dominated_sort, plan_action,
                               plan_me_family)

env = make_env("safe_pendulum")
spec = env.spec()

# -- fit a model on three random episodes ------------------------------------
s, a, s_next = [], [], []
for episode in range(3):
    for t in run_episode_random(env, np.random.default_rng(episode)):
        s.append(t.s), a.append(t.a), s_next.append(t.s_next)
model = DynamicsModel(spec.observation_dim, spec.actions,
                      TrainConfig(passes=300), init_seed=0)
report = model.train(np.array(s), np.array(a), np.array(s_next),
                     np.random.default_rng(9))
print(f"model: {report.n_samples} transitions, "
      f"holdout one-step MSE {report.holdout_mse:.2e}\n")

# -- one decision, seven planners --------------------------------------------
# start just below the unsafe band [20 deg, 30 deg], drifting into it
th, thdot = np.deg2rad(12.0), 1.2
obs = np.array([np.cos(th), np.sin(th), thdot])

print(f"{'planner':<10} {'action':>8} {'pred return':>12} "
      f"{'pred cost':>10} {'fill':>6}")
for kind in ("rs", "safe_rs", "cem", "safe_cem", "me", "safe_me", "pareto_me"):
    cfg = PlannerConfig(kind=kind)
    action, info = plan_action(model, env, obs, cfg, np.random.default_rng(7))
    fill = "" if np.isnan(info.archive_fill) else f"{info.archive_fill:.3f}"
    print(f"{kind:<10} {float(action):>8.3f} {info.reward:>12.3f} "
          f"{info.cost:>10.2f} {fill:>6}")

# -- closed loop: does the safe pick matter on the real system? --------------
for kind in ("rs", "safe_rs"):
    cfg = PlannerConfig(kind=kind)
    state = EnvState(internal=np.array([th, thdot]), observation=obs.copy())
    hits, total = 0, 0.0
    for step in range(60):
        action, _ = plan_action(model, env, state.observation, cfg,
                                np.random.default_rng(100 + step))
        out = env.step(state, action)
        hits += out.cost
        total += out.reward
        state = out.state
    print(f"\n{kind}: 60 real steps, {hits} unsafe, return {total:.2f}",
          end="")

# -- inside the elite grid ----------------------------------------------------
# each cell of the behavior grid keeps its best policy; sorting the
# occupants by (cost up, reward down) exposes the safety/return trade-off
cfg = PlannerConfig(kind="safe_me")
_, info, archive = plan_me_family(model, env, obs, cfg,
                                  np.random.default_rng(7))
elites = archive.elites()
fronts = non_dominated_sort([(e.cost, e.reward) for e in elites])
print(f"\n\narchive: {len(elites)} occupied cells "
      f"(fill {info.archive_fill:.3f}), {len(fronts)} fronts")
print("first front (cost, return):")
for i in fronts[0]:
    print(f"  cost {elites[i].cost:5.2f}  return {elites[i].reward:8.3f}")
