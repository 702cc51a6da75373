"""Acceptance criteria: one test per criterion, one PASS/FAIL line each.

Criteria 6 and 7 run full desk-scale experiments (20 epochs, 200-step
episodes, 3 seeds per method) and dominate the suite's runtime; the
other criteria finish in seconds.  Each test appends its verdict to
``CRITERION_LINES``, echoed in the terminal summary by conftest.
"""
import json
import time

import numpy as np
import pytest

from safeplan.config import config_from_dict
from safeplan.envs import ContinuousActions, SafeAcrobot, SafePendulum, make_env
from safeplan.harness import run_episode_random, run_experiment
from safeplan.metrics import (
    EpochSeries,
    mean_asymptotic_reward,
    steps_to_threshold,
    transient_unsafe_percentage,
)
from safeplan.model import DynamicsModel, TrainConfig, gradient_check
from safeplan.planners import (
    PlannerConfig,
    non_dominated_sort,
    plan_me_family,
    plan_rs,
    plan_srs,
    replay_log_violations,
    rollout_sequences,
    safe_replacement,
)
from safeplan.policies import PolicyArchitecture

from _fixtures import METRIC_CASES
from _oracles import brute_force_fronts

CRITERION_LINES = []


def _report(num: int, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {num}: {detail}"
    CRITERION_LINES.append(line)
    print(line)
    assert ok, line


# ---------------------------------------------------------------------------
# shared fixtures
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def trained_pendulum():
    """A transition model fitted to 2000 random-torque pendulum steps."""
    env = make_env("safe_pendulum")
    transitions = run_episode_random(env, np.random.default_rng(55),
                                     n_steps=2000)
    s = np.array([t.s for t in transitions])
    a = np.array([t.a for t in transitions])
    s_next = np.array([t.s_next for t in transitions])
    model = DynamicsModel(3, env.spec().actions, TrainConfig(), init_seed=6)
    model.train(s, a, s_next, np.random.default_rng(56))
    return env, model


@pytest.fixture(scope="module")
def desk_runs(tmp_path_factory):
    """Full desk-scale experiments: 20 epochs, T=200, seeds 0-2 each."""
    root = tmp_path_factory.mktemp("desk")
    groups = {
        "pendulum": [("safe_pendulum", "safe_rs"), ("safe_pendulum", "rs")],
        "acrobot": [("safe_acrobot", "rs"), ("safe_acrobot", "safe_rs"),
                    ("safe_acrobot", "me"), ("safe_acrobot", "safe_me")],
    }
    results = {"elapsed": {}}
    for group, combos in groups.items():
        t0 = time.perf_counter()
        for env_name, kind in combos:
            out = root / f"{env_name}_{kind}"
            cfg = config_from_dict({
                "env": env_name, "epochs": 20, "episode_length": 200,
                "seeds": [0, 1, 2], "output_dir": str(out),
                "planner": {"kind": kind},
            })
            records = run_experiment(cfg)
            assert all(r.status == "ok" for r in records), \
                f"{env_name}/{kind} seeds failed"
            results[(env_name, kind)] = json.loads(
                (out / "metrics.json").read_text())
        results["elapsed"][group] = time.perf_counter() - t0
    return results


# ---------------------------------------------------------------------------
# the criteria
# ---------------------------------------------------------------------------

def test_criterion_01_sort_matches_brute_force_oracle():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    mismatches = 0
    for i in range(1000):
        n = int(rng.integers(1, 101))
        if i % 2:   # heavy ties
            pts = np.column_stack([rng.integers(0, 8, n),
                                   rng.integers(0, 8, n)]).astype(float)
        else:       # generic position
            pts = rng.normal(size=(n, 2))
        if non_dominated_sort(pts) != brute_force_fronts([tuple(p) for p in pts]):
            mismatches += 1
    elapsed = time.perf_counter() - t0
    _report(1, mismatches == 0 and elapsed < 10.0,
            f"non-dominated sort vs O(n^3) oracle: {mismatches} mismatches "
            f"on 1000 instances in {elapsed:.1f}s (budget 10s)")


def test_criterion_02_policy_parameter_counts():
    pend = PolicyArchitecture.for_env(SafePendulum().spec()).param_count
    acro = PolicyArchitecture.for_env(SafeAcrobot().spec()).param_count
    _report(2, (pend, acro) == (26, 83),
            f"policy parameter counts: pendulum {pend} (want 26), "
            f"acrobot {acro} (want 83)")


def test_criterion_03_analytic_gradients_match_finite_differences():
    worst = 0.0
    for loss in ("nll", "mse"):
        model = DynamicsModel(3, SafePendulum().spec().actions,
                              TrainConfig(loss=loss), init_seed=11)
        worst = max(worst, gradient_check(model, n_samples=10))
    _report(3, worst <= 1e-4,
            f"max relative gradient error {worst:.2e} over both losses "
            f"on 10 samples (bound 1e-4)")


def test_criterion_04_linear_system_learnable():
    rng = np.random.default_rng(4)
    s = rng.uniform(-1.0, 1.0, size=(2000, 1))
    a = rng.uniform(-1.0, 1.0, size=2000)
    s_next = 0.9 * s + 0.1 * a[:, None]
    model = DynamicsModel(1, ContinuousActions(-1.0, 1.0), TrainConfig(),
                          init_seed=5)
    t0 = time.perf_counter()
    report = model.train(s, a, s_next, rng)
    elapsed = time.perf_counter() - t0
    _report(4, report.holdout_mse <= 1e-3 and elapsed < 120.0,
            f"linear system s' = 0.9s + 0.1a: holdout MSE "
            f"{report.holdout_mse:.2e} after 300 passes in {elapsed:.0f}s "
            f"(bounds 1e-3, 120s)")


def test_criterion_05_safety_filter_paired_property(trained_pendulum):
    env, model = trained_pendulum
    cfg = PlannerConfig(kind="safe_rs", n_sequences=100, horizon=10)
    space = env.spec().actions
    higher, strict, unsafe_cases = 0, 0, 0
    for i in range(100):
        # states drawn over the full angle/velocity ranges so that the
        # unsafe band is reachable within the planning horizon
        srng = np.random.default_rng(np.random.SeedSequence([600, i]))
        th = srng.uniform(-np.pi, np.pi)
        thdot = srng.uniform(-8.0, 8.0)
        obs = np.array([np.cos(th), np.sin(th), thdot])
        key = np.random.SeedSequence([601, i])
        _, srs = plan_srs(model, env, obs, cfg, np.random.default_rng(key))
        _, rs = plan_rs(model, env, obs, cfg, np.random.default_rng(key))
        # replay the identical candidate draw to inspect the whole set
        seqs = space.sample(np.random.default_rng(key), size=(100, 10))
        _, costs, _ = rollout_sequences(model, env, obs, seqs, cfg.discount)
        if srs.cost > rs.cost:
            higher += 1
        if (costs > 0).any():
            unsafe_cases += 1
            if srs.cost < rs.cost:
                strict += 1
    _report(5, higher == 0 and strict >= 10,
            f"paired filter on shared candidates: S-RS rollout cost higher "
            f"in {higher}/100 states (want 0), strictly lower in {strict} of "
            f"{unsafe_cases} unsafe-candidate states (want >= 10)")


def test_criterion_06_pendulum_desk_reproduction(desk_runs):
    srs = desk_runs[("safe_pendulum", "safe_rs")]
    rs = desk_runs[("safe_pendulum", "rs")]
    elapsed = desk_runs["elapsed"]["pendulum"]
    ok = (srs["mar"] >= -3.5
          and srs["unsafe_pct"] <= 0.5 * rs["unsafe_pct"]
          and elapsed < 1800.0)
    _report(6, ok,
            f"pendulum desk scale: filtered-shooting MAR {srs['mar']:.3f} "
            f"(want >= -3.5), unsafe {srs['unsafe_pct']:.3f}% vs unfiltered "
            f"{rs['unsafe_pct']:.3f}% (want <= half) in {elapsed:.0f}s "
            f"(budget 1800s)")


def test_criterion_07_acrobot_desk_ordering(desk_runs):
    rs = desk_runs[("safe_acrobot", "rs")]
    srs = desk_runs[("safe_acrobot", "safe_rs")]
    me = desk_runs[("safe_acrobot", "me")]
    sme = desk_runs[("safe_acrobot", "safe_me")]
    elapsed = desk_runs["elapsed"]["acrobot"]
    ok = (rs["mar"] > srs["mar"]
          and rs["unsafe_pct"] >= 3.0 * srs["unsafe_pct"]
          and me["mar"] > sme["mar"]
          and me["unsafe_pct"] >= 3.0 * sme["unsafe_pct"]
          and elapsed < 3600.0)
    _report(7, ok,
            f"acrobot desk scale: shooting MAR {rs['mar']:.3f}/"
            f"{srs['mar']:.3f} unsafe {rs['unsafe_pct']:.2f}%/"
            f"{srs['unsafe_pct']:.2f}%, elite-grid MAR {me['mar']:.3f}/"
            f"{sme['mar']:.3f} unsafe {me['unsafe_pct']:.2f}%/"
            f"{sme['unsafe_pct']:.2f}% (unsafe/safe pairs; want higher MAR "
            f"and >= 3x unsafe) in {elapsed:.0f}s (budget 3600s)")


def test_criterion_08_metric_formulas_exact():
    bad = []
    for k, case in enumerate(METRIC_CASES):
        s = EpochSeries(case["mr"], case["p_unsafe"],
                        episode_length=case["episode_length"],
                        initial_steps=case["initial_steps"])
        got = (mean_asymptotic_reward(s),
               steps_to_threshold(s, case["r_thr"]),
               float(np.mean(s.p_unsafe)),
               transient_unsafe_percentage(s))
        want = (case["mar"], case["steps"], case["unsafe"], case["transient"])
        if got != want:
            bad.append((k, got, want))
    _report(8, not bad,
            f"all four metrics exact on {len(METRIC_CASES)} hand-computed "
            f"series" + (f"; mismatches: {bad}" if bad else ""))


def test_criterion_09_reruns_byte_identical(tmp_path):
    base = {
        "env": "safe_pendulum", "epochs": 3, "episode_length": 50,
        "seeds": [0],
        "planner": {"kind": "safe_rs", "n_sequences": 50, "horizon": 10},
        "model": {"passes": 100},
    }
    for d in ("a", "b"):
        cfg = config_from_dict({**base, "output_dir": str(tmp_path / d)})
        run_experiment(cfg)
    files = ("seed_0/trace.csv", "seed_0/metrics.json", "metrics.json")
    differing = [rel for rel in files
                 if (tmp_path / "a" / rel).read_bytes()
                 != (tmp_path / "b" / rel).read_bytes()]
    _report(9, not differing,
            "rerun with identical config and seed: trace.csv and "
            "metrics.json byte-identical"
            + (f"; differing: {differing}" if differing else ""))


def test_criterion_10_archive_replay_clean(trained_pendulum):
    env, model = trained_pendulum
    cfg = PlannerConfig(kind="safe_me", horizon=10)
    obs = env.reset(np.random.default_rng(77)).observation
    _, _, archive = plan_me_family(model, env, obs, cfg,
                                   np.random.default_rng(78))
    violations = replay_log_violations(archive, safe_replacement)
    _report(10, violations == [] and len(archive.log) == 100,
            f"elite-archive insertion replay: {len(violations)} violations "
            f"over {len(archive.log)} logged insertions "
            f"({len(archive.cells)} occupied cells)")
