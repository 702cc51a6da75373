"""Fast self-contained checks of the load-bearing invariants.

Run via ``safeplan selftest``.  Each check either passes silently or
fails with a message; the command prints one line per check and exits
nonzero on any failure.  Everything here finishes in well under a
minute on one core.
"""

import numpy as np

from .envs import SafeAcrobot, SafePendulum, make_env
from .metrics import (
    EpochSeries,
    mean_asymptotic_reward,
    steps_to_threshold,
    transient_unsafe_percentage,
    unsafe_percentage,
)
from .model import DynamicsModel, TrainConfig, gradient_check
from .planners import (
    PlannerConfig,
    non_dominated_sort,
    plan_me_family,
    replay_log_violations,
    safe_replacement,
)
from .policies import PolicyArchitecture

__all__ = ["run_selftest", "CHECKS"]


def _brute_force_fronts(points):
    """O(n^3) reference non-dominated sort over (cost, reward) points."""
    def dominates(p, q):
        return (p[0] <= q[0] and p[1] >= q[1]
                and (p[0] < q[0] or p[1] > q[1]))

    remaining = list(range(len(points)))
    fronts = []
    while remaining:
        front = [i for i in remaining
                 if not any(dominates(points[j], points[i])
                            for j in remaining if j != i)]
        fronts.append(sorted(front))
        remaining = [i for i in remaining if i not in front]
    return fronts


def check_sort_matches_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(200):
        n = int(rng.integers(1, 50))
        pts = np.column_stack([rng.integers(0, 6, n), rng.integers(0, 6, n)])
        pts = pts.astype(float)
        got = non_dominated_sort(pts)
        want = _brute_force_fronts([tuple(p) for p in pts])
        assert got == want, f"front mismatch on {pts.tolist()}"


def check_policy_parameter_counts():
    pend = PolicyArchitecture.for_env(SafePendulum().spec())
    acro = PolicyArchitecture.for_env(SafeAcrobot().spec())
    assert pend.param_count == 26, pend.param_count
    assert acro.param_count == 83, acro.param_count


def check_model_gradients():
    env = SafePendulum()
    for loss in ("nll", "mse"):
        model = DynamicsModel(3, env.spec().actions,
                              TrainConfig(hidden_units=8, loss=loss),
                              init_seed=3)
        err = gradient_check(model, n_samples=10)
        assert err <= 1e-4, f"{loss} gradient error {err}"


def check_metric_formulas():
    s = EpochSeries([1.0, 2.0, 3.0, 4.0], [0.0] * 4, 200, 200)
    assert mean_asymptotic_reward(s) == 3.5
    s = EpochSeries([0.0, 0.0, 6.0], [0.0] * 3, 200, 200)
    assert mean_asymptotic_reward(s) == 3.0
    s = EpochSeries([-5.0, -3.0, -2.0], [0.0] * 3, 200, 200)
    assert steps_to_threshold(s, -2.5) == 600
    assert steps_to_threshold(s, 0.0) is None
    s = EpochSeries([0.0] * 10, [10.0] + [0.0] * 9, 200, 200)
    assert transient_unsafe_percentage(s) == 5.0
    assert unsafe_percentage([[0] * 198 + [1] * 2]) == 1.0


def check_archive_insertion_invariants():
    env = make_env("safe_pendulum")
    rng = np.random.default_rng(5)
    state = env.reset(rng)
    s, a, s_next = [], [], []
    for _ in range(120):
        act = env.spec().actions.sample(rng)
        out = env.step(state, act)
        s.append(state.observation)
        a.append(act)
        s_next.append(out.state.observation)
        state = out.state
    model = DynamicsModel(3, env.spec().actions, TrainConfig(passes=20),
                          init_seed=1)
    model.train(np.array(s), np.array(a), np.array(s_next),
                np.random.default_rng(2))
    cfg = PlannerConfig(kind="safe_me", horizon=5, n_policies=40,
                        n_initial_policies=10)
    _, _, archive = plan_me_family(model, env, s[0], cfg,
                                   np.random.default_rng(9))
    violations = replay_log_violations(archive, safe_replacement)
    assert violations == [], violations


def check_environment_determinism():
    for env in (SafePendulum(), SafeAcrobot()):
        rolls = []
        for _ in range(2):
            rng = np.random.default_rng(12)
            state = env.reset(rng)
            obs = [state.observation]
            for _ in range(50):
                out = env.step(state, env.spec().actions.sample(rng))
                state = out.state
                obs.append(state.observation)
            rolls.append(np.array(obs).tobytes())
        assert rolls[0] == rolls[1], f"{env.name} replay differs"


CHECKS = [
    ("non-dominated sort matches brute force", check_sort_matches_brute_force),
    ("policy parameter counts", check_policy_parameter_counts),
    ("model gradients match finite differences", check_model_gradients),
    ("metric formulas on hand-computed cases", check_metric_formulas),
    ("elite-archive insertion invariants", check_archive_insertion_invariants),
    ("environment determinism", check_environment_determinism),
]


def run_selftest() -> int:
    failures = 0
    for name, fn in CHECKS:
        try:
            fn()
        except Exception as exc:   # report every failure, keep going
            failures += 1
            print(f"FAIL {name}: {exc}")
        else:
            print(f"PASS {name}")
    print(f"{len(CHECKS) - failures}/{len(CHECKS)} checks passed")
    return 0 if failures == 0 else 1
