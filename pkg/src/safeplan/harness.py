"""Experiment driver: the iterated-batch loop, persistence, comparison.

One run proceeds per seed as: collect an initial episode under uniform
random actions, then repeat for the configured number of epochs (train
the transition model on everything logged so far; run one episode on
the real system, choosing each action with the configured planner on
the current state).  All randomness flows from per-concern generators
keyed by ``(seed, stream, epoch, step)``, so reruns are bit-identical
and streams never interfere.

Each seed writes into its own directory, flushed after every epoch so
interrupted runs keep their finished epochs:

* ``trace.csv``     every real transition (epoch, step, state, action,
                    reward, cost, next state)
* ``epochs.csv``    per-epoch mean reward and unsafe percentage
* ``plan_log.csv``  per-step planner diagnostics
* ``metrics.json``  the four run metrics for this seed
* ``model.npz``     final model checkpoint
* ``run.json``      status, epochs completed, divergence info
* ``timings.json``  wall-clock timings (excluded from determinism)

The run root holds the config snapshot (``config.yaml``) and the
cross-seed aggregate (``metrics.json``).  Floats are written with
``repr`` so identical runs produce identical bytes.  A model that
diverges aborts its seed with a recorded error; other seeds continue.
"""

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from .config import ExperimentConfig, load_config, save_config, validate_config
from .envs import make_env
from .metrics import (
    EpochSeries,
    epoch_series_from_trace,
    exploration_summary,
    mean_asymptotic_reward,
    method_pareto_labels,
    report_from_series,
    steps_to_threshold,
    transient_unsafe_percentage,
)
from .model import DynamicsModel, ModelDivergenceError, Trace, Transition
from .planners import plan_action

__all__ = [
    "RunRecord",
    "run_episode_random",
    "run_seed",
    "run_experiment",
    "compute_run_metrics",
    "compare_runs",
    "write_exploration",
    "read_trace_csv",
    "stream_rng",
]

# one independent generator per source of randomness
STREAM_RESET, STREAM_RANDOM, STREAM_MODEL, STREAM_TRAIN, STREAM_PLAN = range(5)


def stream_rng(*key) -> np.random.Generator:
    """Generator keyed by a tuple of integers under one master seed."""
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in key]))


def _stream_seed(*key) -> int:
    return int(np.random.SeedSequence([int(k) for k in key]).generate_state(1)[0])


# ---------------------------------------------------------------------------
# formatting and file helpers
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    """Shortest-roundtrip text for a number; reruns reproduce it exactly."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_rows(path, header: str, rows, mode: str = "w") -> None:
    with open(path, mode) as f:
        if mode == "w":
            f.write(header + "\n")
        for row in rows:
            f.write(",".join(row) + "\n")
        f.flush()


class _TraceLog:
    """trace.csv writer: header once, then appended per epoch."""

    def __init__(self, path, observation_dim: int, discrete: bool):
        self.path = path
        self.d = observation_dim
        self.discrete = discrete
        cols = (["epoch", "step"]
                + [f"s{i}" for i in range(self.d)]
                + ["action", "reward", "cost"]
                + [f"n{i}" for i in range(self.d)])
        _write_rows(path, ",".join(cols), [])

    def append(self, epoch: int, transitions) -> None:
        rows = []
        for step, t in enumerate(transitions):
            a = str(int(t.a)) if self.discrete else repr(float(t.a))
            rows.append([str(epoch), str(step)]
                        + [repr(float(v)) for v in t.s]
                        + [a, repr(float(t.r)), str(int(t.c))]
                        + [repr(float(v)) for v in t.s_next])
        _write_rows(self.path, "", rows, mode="a")


def read_trace_csv(path) -> Trace:
    """Rebuild a transition trace from ``trace.csv``."""
    lines = Path(path).read_text().splitlines()
    cols = lines[0].split(",")
    d = (len(cols) - 5) // 2
    trace = Trace(observation_dim=d)
    for line in lines[1:]:
        v = line.split(",")
        trace.append(int(v[0]),
                     [float(x) for x in v[2:2 + d]],
                     float(v[2 + d]),
                     float(v[3 + d]),
                     int(v[4 + d]),
                     [float(x) for x in v[5 + d:5 + 2 * d]])
    return trace


def _write_epochs_csv(path, series: EpochSeries) -> None:
    rows = [[str(e + 1), _fmt(mr), _fmt(pu)]
            for e, (mr, pu) in enumerate(zip(series.mr, series.p_unsafe))]
    _write_rows(path, "epoch,mr,p_unsafe", rows)


# ---------------------------------------------------------------------------
# running
# ---------------------------------------------------------------------------

@dataclass
class RunRecord:
    """Everything one seed produced, as returned to callers."""

    seed: int
    status: str                       # "ok" or "diverged"
    config: dict
    trace: Trace
    series: EpochSeries
    metrics: dict
    timings: dict = field(default_factory=dict)
    diverged_at: Optional[int] = None
    error: Optional[str] = None


def run_episode_random(env, rng: np.random.Generator, n_steps: int = None,
                       state=None) -> list:
    """One episode under uniform random actions; returns its transitions."""
    spec = env.spec()
    n = spec.episode_length if n_steps is None else n_steps
    if state is None:
        state = env.reset(rng)
    out = []
    for _ in range(n):
        a = spec.actions.sample(rng)
        o = env.step(state, a)
        out.append(Transition(state.observation, a, o.reward, o.cost,
                              o.state.observation))
        state = o.state
    return out


def _series_metrics(series: EpochSeries, r_thr: float) -> dict:
    """The four run metrics, with None where too few epochs exist."""
    m = {"mar": None, "unsafe_pct": None, "transient_unsafe_pct": None,
         "steps_to_threshold": None}
    if len(series) >= 1:
        m["unsafe_pct"] = float(np.mean(series.p_unsafe))
        m["transient_unsafe_pct"] = transient_unsafe_percentage(series)
        m["steps_to_threshold"] = steps_to_threshold(series, r_thr)
    if len(series) >= 2:
        m["mar"] = mean_asymptotic_reward(series)
    return m


def run_seed(cfg: ExperimentConfig, seed: int, seed_dir, env=None) -> RunRecord:
    """Run the full iterated-batch loop for one seed, flushing per epoch."""
    if env is None:
        env = make_env(cfg.env, episode_length=cfg.episode_length)
    spec = env.spec()
    T = cfg.episode_length
    seed_dir = Path(seed_dir)
    seed_dir.mkdir(parents=True, exist_ok=True)

    trace = Trace(spec.observation_dim)
    trace_log = _TraceLog(seed_dir / "trace.csv", spec.observation_dim,
                          discrete=spec.actions.kind == "discrete")
    _write_rows(seed_dir / "plan_log.csv",
                "epoch,step,reward,cost,archive_fill", [])
    status, diverged_at, error = "ok", None, None
    timings = {"train_s": [], "plan_s": []}
    t_start = time.perf_counter()

    def checkpoint(epochs_done: int, running: bool) -> None:
        _write_json(seed_dir / "run.json", {
            "seed": int(seed),
            "status": "running" if running else status,
            "epochs_completed": epochs_done,
            "diverged_at": diverged_at,
            "error": error,
        })

    # initial episode under the random policy
    state = env.reset(stream_rng(seed, STREAM_RESET, 0))
    randoms = run_episode_random(env, stream_rng(seed, STREAM_RANDOM), T, state)
    trace.extend(0, randoms)
    trace_log.append(0, randoms)
    checkpoint(0, running=cfg.epochs > 0)

    model = DynamicsModel(spec.observation_dim, spec.actions, cfg.model,
                          init_seed=_stream_seed(seed, STREAM_MODEL))
    for epoch in range(1, cfg.epochs + 1):
        t0 = time.perf_counter()
        s, a, r, c, s_next = trace.transitions()
        try:
            model.train(s, a, s_next, stream_rng(seed, STREAM_TRAIN, epoch))
        except ModelDivergenceError as exc:
            status, diverged_at, error = "diverged", epoch, str(exc)
            break
        t1 = time.perf_counter()
        timings["train_s"].append(t1 - t0)

        state = env.reset(stream_rng(seed, STREAM_RESET, epoch))
        episode, plan_rows = [], []
        for step in range(T):
            action, info = plan_action(model, env, state.observation,
                                       cfg.planner,
                                       stream_rng(seed, STREAM_PLAN, epoch, step))
            o = env.step(state, action)
            episode.append(Transition(state.observation, action, o.reward,
                                      o.cost, o.state.observation))
            plan_rows.append([str(epoch), str(step), _fmt(info.reward),
                              _fmt(info.cost), _fmt(info.archive_fill)])
            state = o.state
        timings["plan_s"].append(time.perf_counter() - t1)

        trace.extend(epoch, episode)
        trace_log.append(epoch, episode)
        _write_rows(seed_dir / "plan_log.csv", "", plan_rows, mode="a")
        _write_epochs_csv(seed_dir / "epochs.csv",
                          epoch_series_from_trace(trace, env))
        checkpoint(epoch, running=epoch < cfg.epochs)

    series = epoch_series_from_trace(trace, env)
    _write_epochs_csv(seed_dir / "epochs.csv", series)
    metrics = {
        "env": cfg.env,
        "planner": cfg.planner.kind,
        "seed": int(seed),
        "status": status,
        "diverged_at": diverged_at,
        "epochs_completed": len(series),
        "r_thr": spec.reward_threshold,
        **_series_metrics(series, spec.reward_threshold),
    }
    _write_json(seed_dir / "metrics.json", metrics)
    if model.trained:
        model.save(seed_dir / "model.npz")
    timings["total_s"] = time.perf_counter() - t_start
    _write_json(seed_dir / "timings.json", timings)
    checkpoint(len(series), running=False)
    return RunRecord(seed=int(seed), status=status, config=cfg.to_dict(),
                     trace=trace, series=series, metrics=metrics,
                     timings=timings, diverged_at=diverged_at, error=error)


def _aggregate(cfg: ExperimentConfig, r_thr: float, series_by_seed: dict,
               statuses: dict) -> dict:
    """Cross-seed aggregate written to the run root's metrics.json."""
    ok = sorted(s for s, st in statuses.items() if st == "ok")
    usable = {s: ser for s, ser in series_by_seed.items()
              if statuses[s] == "ok" and len(ser) >= 2}
    agg = {
        "env": cfg.env,
        "planner": cfg.planner.kind,
        "r_thr": r_thr,
        "seeds": sorted(int(s) for s in statuses),
        "completed_seeds": [int(s) for s in ok],
        "failed_seeds": [int(s) for s in sorted(statuses) if statuses[s] != "ok"],
    }
    if usable:
        agg.update(report_from_series(usable, r_thr).to_dict())
    else:
        agg.update({"mar": None, "mar_ci": None, "unsafe_pct": None,
                    "unsafe_pct_ci": None, "transient_unsafe_pct": None,
                    "transient_unsafe_pct_ci": None,
                    "steps_to_threshold": None, "threshold_reached": 0,
                    "n_seeds": 0, "per_seed": {}})
    return agg


def run_experiment(cfg: ExperimentConfig, output_dir=None) -> List[RunRecord]:
    """Run every seed sequentially and write the cross-seed aggregate."""
    validate_config(cfg)
    out = Path(output_dir if output_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_config(cfg, out / "config.yaml")
    env = make_env(cfg.env, episode_length=cfg.episode_length)
    r_thr = env.spec().reward_threshold

    records = []
    for seed in cfg.seeds:
        records.append(run_seed(cfg, seed, out / f"seed_{seed}", env=env))
    agg = _aggregate(cfg, r_thr,
                     {r.seed: r.series for r in records},
                     {r.seed: r.status for r in records})
    _write_json(out / "metrics.json", agg)
    return records


# ---------------------------------------------------------------------------
# post-hoc analysis of persisted runs
# ---------------------------------------------------------------------------

def _seed_dirs(run_dir: Path) -> list:
    """(seed, directory) pairs found under a run root."""
    found = []
    for p in sorted(run_dir.glob("seed_*")):
        if (p / "trace.csv").exists():
            found.append((int(p.name.split("_", 1)[1]), p))
    if not found and (run_dir / "trace.csv").exists():
        seed = 0
        run_json = run_dir / "run.json"
        if run_json.exists():
            seed = int(json.loads(run_json.read_text())["seed"])
        found = [(seed, run_dir)]
    return found


def _load_run(run_dir) -> tuple:
    """(config, env, {seed: series}, {seed: status}) from persisted files."""
    run_dir = Path(run_dir)
    cfg_path = run_dir / "config.yaml"
    if not cfg_path.exists():
        cfg_path = run_dir.parent / "config.yaml"
    if not cfg_path.exists():
        raise FileNotFoundError(f"no config.yaml under {run_dir}")
    cfg = load_config(cfg_path)
    env = make_env(cfg.env, episode_length=cfg.episode_length)
    series, statuses = {}, {}
    for seed, d in _seed_dirs(run_dir):
        series[seed] = epoch_series_from_trace(read_trace_csv(d / "trace.csv"),
                                               env)
        status = "ok"
        run_json = d / "run.json"
        if run_json.exists():
            status = json.loads(run_json.read_text())["status"]
        statuses[seed] = status
    if not series:
        raise FileNotFoundError(f"no trace.csv found under {run_dir}")
    return cfg, env, series, statuses


def compute_run_metrics(run_dir, write: bool = True) -> dict:
    """Recompute a run's aggregate metrics from its persisted traces."""
    run_dir = Path(run_dir)
    cfg, env, series, statuses = _load_run(run_dir)
    agg = _aggregate(cfg, env.spec().reward_threshold, series, statuses)
    if write:
        _write_json(run_dir / "metrics.json", agg)
    return agg


def compare_runs(run_dirs, out_dir) -> dict:
    """Summary table over several runs; one method per run directory.

    Emits ``comparison.csv`` and ``comparison.txt`` under ``out_dir``.
    Directories without readable runs are reported, not fatal.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows, missing = [], []
    names = set()
    for d in run_dirs:
        d = Path(d)
        try:
            agg = compute_run_metrics(d, write=False)
        except (FileNotFoundError, ValueError) as exc:
            missing.append(f"{d}: {exc}")
            continue
        name = agg.get("planner") or d.name
        if name in names:
            name = f"{name}:{d.name}"
        names.add(name)
        rows.append({"method": name, "dir": str(d), **agg})

    scored = [i for i, r in enumerate(rows) if r["mar"] is not None]
    labels = method_pareto_labels([(rows[i]["mar"], rows[i]["unsafe_pct"])
                                   for i in scored])
    for i, lab in zip(scored, labels):
        rows[i]["front"] = lab
    for r in rows:
        r.setdefault("front", None)

    cols = ["method", "n_seeds", "mar", "mar_ci", "steps_to_threshold",
            "threshold_reached", "unsafe_pct", "unsafe_pct_ci",
            "transient_unsafe_pct", "transient_unsafe_pct_ci", "front"]
    csv_rows = [["" if r[c] is None else _fmt(r[c]) if isinstance(r[c], (int, float)) else str(r[c])
                 for c in cols] for r in rows]
    _write_rows(out_dir / "comparison.csv", ",".join(cols), csv_rows)

    lines = [" | ".join(f"{c:>22}" for c in cols)]
    for row in csv_rows:
        lines.append(" | ".join(f"{v:>22}" for v in row))
    if missing:
        lines.append("")
        lines.append("missing or unreadable runs:")
        lines.extend(f"  {m}" for m in missing)
    (out_dir / "comparison.txt").write_text("\n".join(lines) + "\n")
    return {"rows": rows, "missing": missing}


def write_exploration(run_dir) -> list:
    """Emit coverage.csv and reward_bins.csv per seed plus run totals."""
    run_dir = Path(run_dir)
    cfg, env, _, _ = _load_run(run_dir)
    written = []
    total_grid, total_bins = None, None
    for seed, d in _seed_dirs(run_dir):
        trace = read_trace_csv(d / "trace.csv")
        grid, bins = exploration_summary(trace, env)
        total_grid = grid if total_grid is None else total_grid + grid
        total_bins = bins if total_bins is None else total_bins + bins
        _write_coverage(d / "coverage.csv", grid)
        _write_bins(d / "reward_bins.csv", bins)
        written += [d / "coverage.csv", d / "reward_bins.csv"]
    if total_grid is not None and Path(run_dir / "config.yaml").exists():
        _write_coverage(run_dir / "coverage.csv", total_grid)
        _write_bins(run_dir / "reward_bins.csv", total_bins)
        written += [run_dir / "coverage.csv", run_dir / "reward_bins.csv"]
    return written


def _write_coverage(path, grid) -> None:
    rows = [[str(i), str(j), str(int(grid[i, j]))]
            for i in range(grid.shape[0]) for j in range(grid.shape[1])]
    _write_rows(path, "i,j,count", rows)


def _write_bins(path, bins) -> None:
    rows = [[str(b), str(int(n))] for b, n in enumerate(bins)]
    _write_rows(path, "bucket,count", rows)
