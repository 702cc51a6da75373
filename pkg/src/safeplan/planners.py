"""Model-predictive planners with safety-aware candidate selection.

Every planner shares the same skeleton: propose candidate action
sequences or policies, roll each through the learned model for a short
horizon while scoring discounted return and discounted safety cost with
the task's analytic reward/cost functions, then pick a winner and
return its first action.  The *safe* variants rank candidates by lowest
predicted cost before reward; the unsafe baselines rank by reward only.

Candidate proposal comes in three flavors:

- random shooting: i.i.d. uniform action sequences;
- an elite-grid loop over small policies: a fresh behavior-space
  archive per planning call, iterated by select/vary/insert with
  pluggable selection (reward-weighted, safe reward-weighted, or
  non-dominated-front filling) and replacement rules;
- the cross-entropy method: a sampling distribution over sequences
  refit to the best-ranked candidates for a few iterations.

All tie-breaking is deterministic (first index / lowest grid cell), so
a planner is a pure function of (model, state, rng state).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from .policies import (
    BehaviorDescriptor,
    Policy,
    PolicyArchitecture,
    act_batch,
    behavior_descriptor,
    sample_policy,
    vary,
)


@dataclass
class PlannerConfig:
    kind: str = "safe_rs"
    horizon: int = 10
    discount: float = 1.0
    n_sequences: int = 100          # random shooting candidates
    n_policies: int = 100           # elite-loop total evaluation budget
    n_initial_policies: int = 25    # evaluated before any selection
    policies_per_iteration: int = 5
    variation_std: float = 0.1
    grid_size: int = 50
    descriptor_mode: str = "final"
    selection_temperature: float = 1.0
    cem_sequences: int = 20
    cem_elites: int = 10
    cem_iterations: int = 5
    cem_std_floor: float = 1e-3
    cem_smoothing: float = 1e-3
    cost_tie_tol: float = 1e-12


@dataclass
class RolloutResult:
    total_reward: float
    total_cost: float
    trace: list  # [(predicted observation, action)] of length horizon


@dataclass
class PlanInfo:
    """Per-step planning diagnostics for the run logs."""
    reward: float                 # rollout return of the chosen candidate
    cost: float                   # rollout cost of the chosen candidate
    archive_fill: float = float("nan")  # elite-grid occupancy, when applicable


# ---------------------------------------------------------------------------
# rollouts
# ---------------------------------------------------------------------------

def rollout(model, env, obs, action_source, horizon: int,
            discount: float = 1.0) -> RolloutResult:
    """Score one candidate through the model.

    action_source is either a Policy (queried on each predicted state)
    or an indexable action sequence of length >= horizon.  Rewards and
    costs are evaluated on the predicted next observations, discounted
    from the first transition.
    """
    s = np.asarray(obs, dtype=float)
    total_r = 0.0
    total_c = 0.0
    trace = []
    g = 1.0
    for j in range(horizon):
        a = action_source.act(s) if isinstance(action_source, Policy) else action_source[j]
        s = model.predict(s, a)
        r, c = env.reward_cost(s, a)
        total_r += g * r
        total_c += g * c
        g *= discount
        trace.append((s, a))
    return RolloutResult(total_reward=float(total_r), total_cost=float(total_c),
                         trace=trace)


def rollout_sequences(model, env, obs, sequences: np.ndarray,
                      discount: float = 1.0):
    """Batched rollout of fixed action sequences (n, horizon).

    Returns (returns (n,), costs (n,), states (n, horizon, obs_dim)).
    """
    sequences = np.asarray(sequences)
    n, horizon = sequences.shape
    cur = np.repeat(np.asarray(obs, dtype=float)[None, :], n, axis=0)
    returns = np.zeros(n)
    costs = np.zeros(n)
    states = np.empty((n, horizon, cur.shape[1]))
    g = 1.0
    for j in range(horizon):
        a = sequences[:, j]
        cur = model.predict(cur, a)
        states[:, j] = cur
        r, c = env.reward_cost(cur, a)
        returns += g * r
        costs += g * c
        g *= discount
    return returns, costs, states


def rollout_policies(model, env, obs, params: np.ndarray,
                     arch: PolicyArchitecture, horizon: int,
                     discount: float = 1.0):
    """Batched rollout of policies (params (n, n_params)); see rollout_sequences."""
    params = np.asarray(params, dtype=float)
    n = len(params)
    cur = np.repeat(np.asarray(obs, dtype=float)[None, :], n, axis=0)
    returns = np.zeros(n)
    costs = np.zeros(n)
    states = np.empty((n, horizon, cur.shape[1]))
    actions = np.empty((n, horizon))
    g = 1.0
    for j in range(horizon):
        a = act_batch(arch, params, cur)
        actions[:, j] = a
        cur = model.predict(cur, a)
        states[:, j] = cur
        r, c = env.reward_cost(cur, a)
        returns += g * r
        costs += g * c
        g *= discount
    return returns, costs, states, actions


# ---------------------------------------------------------------------------
# elite archive
# ---------------------------------------------------------------------------

@dataclass
class Elite:
    policy: Policy
    reward: float
    cost: float
    descriptor: BehaviorDescriptor


def safe_replacement(challenger: Elite, incumbent: Elite) -> bool:
    """Lowest cost wins; equal cost falls back to highest reward."""
    if challenger.cost != incumbent.cost:
        return challenger.cost < incumbent.cost
    return challenger.reward > incumbent.reward


def reward_replacement(challenger: Elite, incumbent: Elite) -> bool:
    """Highest reward wins, costs ignored."""
    return challenger.reward > incumbent.reward


class Archive:
    """Behavior-grid elite store with an auditable insertion log.

    Each cell keeps at most one Elite; whether a challenger evicts the
    incumbent is decided by the replacement rule passed to insert.
    Every attempt is appended to ``log`` as (cell, cost, reward,
    accepted) so the decision sequence can be replayed and audited.
    """

    def __init__(self, grid_size: int = 50):
        self.grid_size = grid_size
        self.cells: dict = {}
        self.log: list = []

    def __len__(self) -> int:
        return len(self.cells)

    def insert(self, elite: Elite, replace_fn: Callable[[Elite, Elite], bool]) -> bool:
        cell = elite.descriptor.cell
        incumbent = self.cells.get(cell)
        accepted = incumbent is None or replace_fn(elite, incumbent)
        if accepted:
            self.cells[cell] = elite
        self.log.append((cell, float(elite.cost), float(elite.reward), accepted))
        return accepted

    def elites(self) -> List[Elite]:
        """Occupants in ascending cell order (deterministic iteration)."""
        return [self.cells[c] for c in sorted(self.cells)]

    def fill_ratio(self) -> float:
        return len(self.cells) / float(self.grid_size ** 2)


def replay_log_violations(archive: Archive, replace_fn) -> List[str]:
    """Re-run the insertion log and report every inconsistency.

    Verifies that each logged accept/reject matches what the replacement
    rule dictates given the cell's occupant at that point, and that the
    final occupants (one per cell by construction) carry the scores the
    log says they should.
    """
    violations = []
    shadow: dict = {}
    for k, (cell, cost, reward, accepted) in enumerate(archive.log):
        incumbent = shadow.get(cell)
        challenger = Elite(policy=None, reward=reward, cost=cost, descriptor=None)
        expected = incumbent is None or replace_fn(challenger, incumbent)
        if accepted != expected:
            violations.append(f"log entry {k}: cell {cell} accepted={accepted}, "
                              f"rule says {expected}")
        if expected:
            shadow[cell] = challenger
    if set(shadow) != set(archive.cells):
        violations.append("replayed occupancy differs from archive cells")
    else:
        for cell, elite in archive.cells.items():
            ghost = shadow[cell]
            if ghost.cost != elite.cost or ghost.reward != elite.reward:
                violations.append(f"cell {cell}: final occupant scores "
                                  f"({elite.cost}, {elite.reward}) != replayed "
                                  f"({ghost.cost}, {ghost.reward})")
    return violations


# ---------------------------------------------------------------------------
# non-dominated sorting (minimize cost, maximize reward)
# ---------------------------------------------------------------------------

def non_dominated_sort(points) -> List[List[int]]:
    """Sort (cost, reward) points into fronts, best first.

    p dominates q iff p.cost <= q.cost and p.reward >= q.reward with at
    least one strict.  Returns index lists; each front is ascending.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    n = len(pts)
    if n == 0:
        return []
    c, r = pts[:, 0], pts[:, 1]
    weak = (c[:, None] <= c[None, :]) & (r[:, None] >= r[None, :])
    strict = (c[:, None] < c[None, :]) | (r[:, None] > r[None, :])
    dominates = weak & strict
    n_dominators = dominates.sum(axis=0)
    fronts = []
    current = np.flatnonzero(n_dominators == 0)
    while current.size:
        fronts.append(current.tolist())
        n_dominators[current] = -1
        n_dominators -= dominates[current].sum(axis=0)
        current = np.flatnonzero(n_dominators == 0)
    return fronts


# ---------------------------------------------------------------------------
# archive selection strategies
# ---------------------------------------------------------------------------

def _softmax(rewards: np.ndarray, temperature: float) -> np.ndarray:
    z = rewards / max(temperature, 1e-12)
    z = np.maximum(z - z.max(), -700.0)  # keep every weight strictly positive
    w = np.exp(z)
    return w / w.sum()


def _fresh(rng, arch, k):
    return [sample_policy(rng, arch) for _ in range(k)]


def select_safe(archive: Archive, k: int, rng: np.random.Generator,
                arch: PolicyArchitecture, temperature: float = 1.0,
                cost_tol: float = 1e-12) -> List[Policy]:
    """Zero-cost elites, reward-weighted; short rosters padded randomly."""
    safe = [e for e in archive.elites() if e.cost <= cost_tol]
    if len(safe) >= k:
        w = _softmax(np.array([e.reward for e in safe]), temperature)
        idx = rng.choice(len(safe), size=k, replace=False, p=w)
        return [safe[i].policy for i in idx]
    return [e.policy for e in safe] + _fresh(rng, arch, k - len(safe))


def select_weighted(archive: Archive, k: int, rng: np.random.Generator,
                    arch: PolicyArchitecture, temperature: float = 1.0) -> List[Policy]:
    """Reward-weighted over all elites, costs ignored."""
    elites = archive.elites()
    if len(elites) >= k:
        w = _softmax(np.array([e.reward for e in elites]), temperature)
        idx = rng.choice(len(elites), size=k, replace=False, p=w)
        return [elites[i].policy for i in idx]
    return [e.policy for e in elites] + _fresh(rng, arch, k - len(elites))


def select_pareto(archive: Archive, k: int, rng: np.random.Generator,
                  arch: PolicyArchitecture) -> List[Policy]:
    """Fill the roster front by front; the overflowing front is sampled."""
    elites = archive.elites()
    if not elites:
        return _fresh(rng, arch, k)
    fronts = non_dominated_sort([(e.cost, e.reward) for e in elites])
    roster: List[int] = []
    for front in fronts:
        if len(roster) + len(front) <= k:
            roster.extend(front)
        else:
            need = k - len(roster)
            picked = rng.choice(len(front), size=need, replace=False)
            roster.extend(front[i] for i in sorted(picked))
        if len(roster) == k:
            break
    out = [elites[i].policy for i in roster]
    if len(out) < k:
        out += _fresh(rng, arch, k - len(out))
    return out


# ---------------------------------------------------------------------------
# the elite-grid planning loop
# ---------------------------------------------------------------------------

def me_loop(model, env, obs, cfg: PlannerConfig, rng: np.random.Generator,
            select_fn, replace_fn,
            arch: Optional[PolicyArchitecture] = None) -> Archive:
    """Grow a fresh archive for one planning call.

    Evaluates ``n_initial_policies`` random policies, then repeats
    (select parents, vary, evaluate, insert) in batches of
    ``policies_per_iteration`` until ``n_policies`` total evaluations.
    select_fn(archive, k, rng) -> policies; replace_fn decides evictions.
    """
    arch = arch if arch is not None else PolicyArchitecture.for_env(env.spec())
    archive = Archive(cfg.grid_size)

    def evaluate_and_insert(policies):
        params = np.stack([p.params for p in policies])
        rewards, costs, states, _ = rollout_policies(
            model, env, obs, params, arch, cfg.horizon, cfg.discount)
        for i, policy in enumerate(policies):
            desc = behavior_descriptor(env, states[i], cfg.grid_size,
                                       cfg.descriptor_mode)
            archive.insert(Elite(policy, float(rewards[i]), float(costs[i]), desc),
                           replace_fn)

    budget = cfg.n_policies
    n_init = min(cfg.n_initial_policies, budget)
    if n_init > 0:
        evaluate_and_insert(_fresh(rng, arch, n_init))
    evaluated = n_init
    while evaluated < budget:
        k = min(cfg.policies_per_iteration, budget - evaluated)
        parents = select_fn(archive, k, rng)
        children = [vary(rng, p, cfg.variation_std) for p in parents]
        evaluate_and_insert(children)
        evaluated += k
    return archive


# ---------------------------------------------------------------------------
# planners
# ---------------------------------------------------------------------------

def _best_safe_index(returns: np.ndarray, costs: np.ndarray, tol: float) -> int:
    """Lowest cost (within tol), then highest reward, then lowest index."""
    candidates = np.flatnonzero(costs <= costs.min() + tol)
    return int(candidates[np.argmax(returns[candidates])])


def _sample_sequences(actions, rng: np.random.Generator, n: int, horizon: int):
    return actions.sample(rng, size=(n, horizon))


def plan_rs(model, env, obs, cfg: PlannerConfig, rng: np.random.Generator):
    """Random shooting ranked by predicted return only."""
    seqs = _sample_sequences(env.spec().actions, rng, cfg.n_sequences, cfg.horizon)
    returns, costs, _ = rollout_sequences(model, env, obs, seqs, cfg.discount)
    best = int(np.argmax(returns))
    return seqs[best, 0], PlanInfo(reward=float(returns[best]), cost=float(costs[best]))


def plan_srs(model, env, obs, cfg: PlannerConfig, rng: np.random.Generator):
    """Random shooting filtered to the lowest-cost sequences first."""
    seqs = _sample_sequences(env.spec().actions, rng, cfg.n_sequences, cfg.horizon)
    returns, costs, _ = rollout_sequences(model, env, obs, seqs, cfg.discount)
    best = _best_safe_index(returns, costs, cfg.cost_tie_tol)
    return seqs[best, 0], PlanInfo(reward=float(returns[best]), cost=float(costs[best]))


def _best_elite(archive: Archive, safe: bool, tol: float) -> Elite:
    elites = archive.elites()  # ascending cell order fixes all ties
    if safe:
        cmin = min(e.cost for e in elites)
        elites = [e for e in elites if e.cost <= cmin + tol]
    return max(elites, key=lambda e: e.reward)  # first max: lowest cell


def plan_me_family(model, env, obs, cfg: PlannerConfig, rng: np.random.Generator):
    """Elite-grid planners: reward-only, safe, and front-filling variants."""
    arch = PolicyArchitecture.for_env(env.spec())
    temp = cfg.selection_temperature
    if cfg.kind == "me":
        select_fn = lambda a, k, r: select_weighted(a, k, r, arch, temp)
        replace_fn = reward_replacement
        safe_pick = False
    elif cfg.kind == "safe_me":
        select_fn = lambda a, k, r: select_safe(a, k, r, arch, temp, cfg.cost_tie_tol)
        replace_fn = safe_replacement
        safe_pick = True
    elif cfg.kind == "pareto_me":
        select_fn = lambda a, k, r: select_pareto(a, k, r, arch)
        replace_fn = safe_replacement
        safe_pick = True
    else:
        raise ValueError(f"not an elite-grid planner: {cfg.kind!r}")
    archive = me_loop(model, env, obs, cfg, rng, select_fn, replace_fn, arch)
    best = _best_elite(archive, safe_pick, cfg.cost_tie_tol)
    action = best.policy.act(np.asarray(obs, dtype=float))
    info = PlanInfo(reward=best.reward, cost=best.cost,
                    archive_fill=archive.fill_ratio())
    return action, info, archive


def _rank(returns, costs, safe: bool, tol: float) -> np.ndarray:
    n = len(returns)
    if safe:
        return np.lexsort((np.arange(n), -returns, costs))
    return np.lexsort((np.arange(n), -returns))


def plan_cem(model, env, obs, cfg: PlannerConfig, rng: np.random.Generator,
             safe: bool):
    """Cross-entropy planning over action sequences.

    Continuous actions: per-timestep Gaussians, clipped samples, refit
    to the elites with a std floor.  Discrete actions: per-timestep
    categoricals refit by smoothed elite frequencies.  With 0 iterations
    this degenerates to ranked shooting over one sampled batch.
    """
    space = env.spec().actions
    n, n_elite, h = cfg.cem_sequences, cfg.cem_elites, cfg.horizon

    def evaluate(seqs):
        return rollout_sequences(model, env, obs, seqs, cfg.discount)[:2]

    if space.kind == "continuous":
        mean = np.zeros(h)
        std = np.full(h, (space.high - space.low) / 2.0)
        if cfg.cem_iterations == 0:
            seqs = np.clip(rng.normal(mean, std, size=(n, h)), space.low, space.high)
            returns, costs = evaluate(seqs)
            best = _best_safe_index(returns, costs, cfg.cost_tie_tol) if safe \
                else int(np.argmax(returns))
            return seqs[best, 0], PlanInfo(float(returns[best]), float(costs[best]))
        for _ in range(cfg.cem_iterations):
            seqs = np.clip(rng.normal(mean, std, size=(n, h)), space.low, space.high)
            returns, costs = evaluate(seqs)
            order = _rank(returns, costs, safe, cfg.cost_tie_tol)
            elite = seqs[order[:n_elite]]
            mean = elite.mean(axis=0)
            std = np.maximum(elite.std(axis=0), cfg.cem_std_floor)
        top = order[0]
        action = float(np.clip(mean[0], space.low, space.high))
        return action, PlanInfo(float(returns[top]), float(costs[top]))

    values = np.asarray(space.values, dtype=float)
    m = len(values)
    probs = np.full((h, m), 1.0 / m)

    def sample_idx():
        idx = np.empty((n, h), dtype=int)
        for t in range(h):
            idx[:, t] = rng.choice(m, size=n, p=probs[t])
        return idx

    if cfg.cem_iterations == 0:
        idx = sample_idx()
        seqs = values[idx]
        returns, costs = evaluate(seqs)
        best = _best_safe_index(returns, costs, cfg.cost_tie_tol) if safe \
            else int(np.argmax(returns))
        return seqs[best, 0], PlanInfo(float(returns[best]), float(costs[best]))
    for _ in range(cfg.cem_iterations):
        idx = sample_idx()
        seqs = values[idx]
        returns, costs = evaluate(seqs)
        order = _rank(returns, costs, safe, cfg.cost_tie_tol)
        elite_idx = idx[order[:n_elite]]
        counts = np.stack([np.bincount(elite_idx[:, t], minlength=m)
                           for t in range(h)]).astype(float)
        probs = (counts + cfg.cem_smoothing) / (n_elite + m * cfg.cem_smoothing)
    top = order[0]
    action = float(values[int(np.argmax(probs[0]))])
    return action, PlanInfo(float(returns[top]), float(costs[top]))


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

PLANNER_KINDS = ("rs", "safe_rs", "me", "safe_me", "pareto_me", "cem", "safe_cem")


def plan_action(model, env, obs, cfg: PlannerConfig,
                rng: np.random.Generator) -> Tuple[object, PlanInfo]:
    """Run the configured planner for one step; returns (action, PlanInfo)."""
    kind = cfg.kind
    if kind == "rs":
        return plan_rs(model, env, obs, cfg, rng)
    if kind == "safe_rs":
        return plan_srs(model, env, obs, cfg, rng)
    if kind in ("me", "safe_me", "pareto_me"):
        action, info, _ = plan_me_family(model, env, obs, cfg, rng)
        return action, info
    if kind == "cem":
        return plan_cem(model, env, obs, cfg, rng, safe=False)
    if kind == "safe_cem":
        return plan_cem(model, env, obs, cfg, rng, safe=True)
    raise ValueError(f"unknown planner kind {kind!r}; choose from {PLANNER_KINDS}")
