"""Evaluation metrics and exploration summaries over logged run data.

Four scalar metrics describe a run:

* mean asymptotic reward (MAR): mean per-epoch reward over the second
  half of training, where the learner is assumed converged;
* steps to threshold: real-system steps consumed before the per-epoch
  mean reward first reaches a task-specific threshold (``None`` when it
  never does);
* unsafe percentage: average share of episode steps spent in unsafe
  states, in percent;
* transient unsafe percentage: the same share restricted to the first
  15% of epochs, where exploration is most aggressive.

Aggregation across seeds reports 90% Gaussian confidence intervals, and
methods are ranked into optimality fronts on the (unsafe percentage,
MAR) plane.  Exploration summaries histogram the visited real states on
the task's 2-D behavior grid and the observed step rewards into ten
buckets spanning the achievable range.

Everything here is a pure function over logged data.
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .planners import non_dominated_sort
from .policies import bin_coordinate

__all__ = [
    "EpochSeries",
    "MetricsReport",
    "mean_asymptotic_reward",
    "steps_to_threshold",
    "unsafe_percentage",
    "transient_unsafe_percentage",
    "gaussian_confidence_interval",
    "method_pareto_labels",
    "exploration_summary",
    "epoch_series_from_trace",
    "report_from_series",
]

CI_Z = 1.645  # two-sided 90% Gaussian quantile


# ---------------------------------------------------------------------------
# per-run series
# ---------------------------------------------------------------------------

@dataclass
class EpochSeries:
    """Per-epoch summary of one training run.

    ``mr[t]`` is the mean step reward of epoch ``t`` and ``p_unsafe[t]``
    the percentage of that epoch's steps spent in unsafe states.  The
    epoch length and the length of the initial random episode convert
    epoch indices into real-system step counts.
    """

    mr: np.ndarray
    p_unsafe: np.ndarray
    episode_length: int
    initial_steps: int

    def __post_init__(self):
        self.mr = np.asarray(self.mr, dtype=float)
        self.p_unsafe = np.asarray(self.p_unsafe, dtype=float)
        if self.mr.ndim != 1 or self.mr.shape != self.p_unsafe.shape:
            raise ValueError("mr and p_unsafe must be 1-D and equal length")
        if len(self.p_unsafe) and (self.p_unsafe.min() < 0.0
                                   or self.p_unsafe.max() > 100.0):
            raise ValueError("p_unsafe entries must lie in [0, 100]")

    def __len__(self) -> int:
        return len(self.mr)


def epoch_series_from_trace(trace, env) -> EpochSeries:
    """Collapse a transition trace into per-epoch reward/safety series.

    Epoch 0 is the initial random episode; it sets ``initial_steps`` and
    is excluded from the series, which covers planned epochs only.
    """
    ids = trace.epoch_ids()
    if not ids or ids[0] != 0:
        raise ValueError("trace must start with the random episode (epoch 0)")
    initial_steps = int(np.sum(trace.epochs() == 0))
    mr, pu = [], []
    for e in ids[1:]:
        _, _, r, c, _ = trace.epoch_slice(e)
        mr.append(float(np.mean(r)))
        pu.append(100.0 * float(np.mean(c)))
    return EpochSeries(np.array(mr), np.array(pu),
                       episode_length=env.spec().episode_length,
                       initial_steps=initial_steps)


# ---------------------------------------------------------------------------
# scalar metrics
# ---------------------------------------------------------------------------

def mean_asymptotic_reward(series: EpochSeries) -> float:
    """Mean of the per-epoch reward over the last ``ceil(N/2)`` epochs."""
    n = len(series)
    if n < 2:
        raise ValueError("need at least two epochs for an asymptotic mean")
    half = math.ceil(n / 2)
    return float(np.mean(series.mr[n - half:]))


def steps_to_threshold(series: EpochSeries, r_thr: float) -> Optional[int]:
    """Real-system steps until the per-epoch reward first reaches r_thr.

    Counts the initial random episode plus every planned epoch before
    the first epoch whose mean reward meets the threshold; ``None`` when
    the threshold is never reached.
    """
    hits = np.nonzero(series.mr >= r_thr)[0]
    if len(hits) == 0:
        return None
    return int(hits[0]) * series.episode_length + series.initial_steps


def unsafe_percentage(costs_per_epoch) -> float:
    """Mean over epochs of the per-epoch percentage of unsafe steps."""
    per_epoch = [100.0 * float(np.mean(np.asarray(c, dtype=float)))
                 for c in costs_per_epoch]
    if not per_epoch:
        raise ValueError("no epochs given")
    return float(np.mean(per_epoch))


def transient_unsafe_percentage(series: EpochSeries) -> float:
    """Mean per-epoch unsafe percentage over the first ``ceil(0.15 N)``
    epochs."""
    n = len(series)
    if n < 1:
        raise ValueError("need at least one epoch")
    k = math.ceil(0.15 * n)
    return float(np.mean(series.p_unsafe[:k]))


def gaussian_confidence_interval(values) -> tuple:
    """(mean, halfwidth) of the 90% Gaussian interval over seed values.

    Uses the z = 1.645 normal quantile regardless of sample size; a
    single value has zero halfwidth.
    """
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("no values")
    if v.size == 1:
        return float(v[0]), 0.0
    half = CI_Z * float(np.std(v, ddof=1)) / math.sqrt(v.size)
    return float(np.mean(v)), half


def method_pareto_labels(summaries) -> List[int]:
    """Optimality-front index per method from (MAR, unsafe-pct) pairs.

    Front 0 is the non-dominated set under (maximize MAR, minimize
    unsafe percentage); higher labels are successively dominated.
    """
    pts = [(p_unsafe, mar) for mar, p_unsafe in summaries]
    labels = [0] * len(pts)
    for k, front in enumerate(non_dominated_sort(pts)):
        for i in front:
            labels[i] = k
    return labels


# ---------------------------------------------------------------------------
# cross-seed report
# ---------------------------------------------------------------------------

@dataclass
class MetricsReport:
    """Per-method metrics aggregated over seeds, with 90% CIs.

    ``steps_to_threshold`` is the mean over the seeds that reached the
    threshold and ``None`` when no seed did; ``threshold_reached``
    counts how many seeds did.
    """

    mar: float
    mar_ci: float
    unsafe_pct: float
    unsafe_pct_ci: float
    transient_unsafe_pct: float
    transient_unsafe_pct_ci: float
    steps_to_threshold: Optional[float]
    threshold_reached: int
    n_seeds: int
    per_seed: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "mar": self.mar,
            "mar_ci": self.mar_ci,
            "unsafe_pct": self.unsafe_pct,
            "unsafe_pct_ci": self.unsafe_pct_ci,
            "transient_unsafe_pct": self.transient_unsafe_pct,
            "transient_unsafe_pct_ci": self.transient_unsafe_pct_ci,
            "steps_to_threshold": self.steps_to_threshold,
            "threshold_reached": self.threshold_reached,
            "n_seeds": self.n_seeds,
            "per_seed": self.per_seed,
        }


def report_from_series(series_by_seed: dict, r_thr: float) -> MetricsReport:
    """Aggregate per-seed epoch series into one cross-seed report."""
    if not series_by_seed:
        raise ValueError("no seeds given")
    per_seed = {}
    mars, unsafes, transients, steps = [], [], [], []
    for seed in sorted(series_by_seed):
        s = series_by_seed[seed]
        mar = mean_asymptotic_reward(s)
        pu = float(np.mean(s.p_unsafe))
        trans = transient_unsafe_percentage(s)
        stt = steps_to_threshold(s, r_thr)
        per_seed[int(seed)] = {"mar": mar, "unsafe_pct": pu,
                               "transient_unsafe_pct": trans,
                               "steps_to_threshold": stt}
        mars.append(mar)
        unsafes.append(pu)
        transients.append(trans)
        if stt is not None:
            steps.append(stt)
    mar, mar_ci = gaussian_confidence_interval(mars)
    pu, pu_ci = gaussian_confidence_interval(unsafes)
    tr, tr_ci = gaussian_confidence_interval(transients)
    return MetricsReport(
        mar=mar, mar_ci=mar_ci,
        unsafe_pct=pu, unsafe_pct_ci=pu_ci,
        transient_unsafe_pct=tr, transient_unsafe_pct_ci=tr_ci,
        steps_to_threshold=float(np.mean(steps)) if steps else None,
        threshold_reached=len(steps),
        n_seeds=len(series_by_seed),
        per_seed=per_seed,
    )


# ---------------------------------------------------------------------------
# exploration summaries
# ---------------------------------------------------------------------------

def exploration_summary(trace, env, grid_size: int = 50,
                        n_buckets: int = 10) -> tuple:
    """Visit-count grid and reward histogram of the real states reached.

    Every transition contributes its successor state: the grid counts
    behavior-space visits on a ``grid_size`` x ``grid_size`` lattice
    (coordinates clamped into the task's behavior bounds) and the
    histogram buckets the logged step rewards uniformly over the task's
    achievable reward range, upper bound inclusive.
    """
    spec = env.spec()
    _, _, r, _, s_next = trace.transitions()
    grid = np.zeros((grid_size, grid_size), dtype=int)
    if len(s_next):
        coords = env.project_behavior(s_next)
        (lo0, hi0), (lo1, hi1) = spec.behavior_bounds
        for b0, b1 in coords:
            grid[bin_coordinate(b0, lo0, hi0, grid_size),
                 bin_coordinate(b1, lo1, hi1, grid_size)] += 1
    bins = np.zeros(n_buckets, dtype=int)
    rmin, rmax = spec.reward_bounds
    for rew in r:
        bins[bin_coordinate(rew, rmin, rmax, n_buckets)] += 1
    return grid, bins
