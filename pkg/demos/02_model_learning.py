"""Learning the transition model from logged episodes.

The model predicts each observation dimension with its own small
network, conditioning later dimensions on the earlier predictions, and
is trained on normalized one-step state deltas.  This script grows the
dataset episode by episode and watches the held-out one-step error
fall, then checks how far multi-step rollouts can be trusted.
"""
import numpy as np

from safeplan.envs import make_env
from safeplan.harness import run_episode_random
from safeplan.model import DynamicsModel, TrainConfig
rng = np.random.default_rng(1)

env = make_env("safe_pendulum")
spec = env.spec()
model = DynamicsModel(spec.observation_dim, spec.actions,
                      TrainConfig(passes=150), init_seed=0)

# -- one-step error vs data volume -----------------------------------------
# the final 10% of rows (most recent steps) are held out from training
s, a, s_next = [], [], []
for episode in range(4):
    for t in run_episode_random(env, np.random.default_rng(episode)):
        s.append(t.s), a.append(t.a), s_next.append(t.s_next)
    report = model.train(np.array(s), np.array(a), np.array(s_next), rng)
    print(f"episodes={episode + 1}  rows={report.n_samples:>4}  "
          f"holdout one-step MSE {report.holdout_mse:.2e}  "
          f"(before this fit: {report.initial_holdout_mse:.2e})")

# -- multi-step rollout drift ----------------------------------------------
# predictions feed back into themselves; error compounds with depth
state = env.reset(np.random.default_rng(42))
obs = state.observation
pred = obs.copy()
torques = spec.actions.sample(np.random.default_rng(43), size=20)
print("\nrollout depth vs prediction error:")
for j, u in enumerate(torques):
    out = env.step(state, u)
    pred = model.predict(pred, u)
    err = float(np.max(np.abs(pred - out.state.observation)))
    if j in (0, 1, 4, 9, 19):
        print(f"  depth {j + 1:>2}  max abs error {err:.4f}")
    state = out.state

# -- checkpoints round-trip -------------------------------------------------
model.save("/tmp/pendulum_model.npz")
clone = DynamicsModel.load("/tmp/pendulum_model.npz")
same = np.allclose(clone.predict(obs, 1.0), model.predict(obs, 1.0),
                   rtol=0, atol=0)
print("\ncheckpoint reload reproduces predictions exactly:", same)
