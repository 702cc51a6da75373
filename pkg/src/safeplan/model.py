"""Learned one-step dynamics models.

The model maps (observation, action) to the next observation with one
small fully connected subnetwork per output dimension.  Subnetworks are
evaluated in a fixed autoregressive order: the net for the k-th output
dimension additionally receives the (normalized) values of the k
previously ordered target dimensions — true values during training
(teacher forcing), previously predicted values at prediction time.

Each subnetwork emits a mean and a log-variance for its dimension's
*state delta*; the deterministic prediction uses the mean only, while
the default training loss is the Gaussian negative log-likelihood with
the learned per-sample variance (an MSE loss is selectable).  Training
is plain minibatch Adam on hand-rolled gradients; all subnetworks are
stacked into (n_dims, ...) weight tensors so a whole training step is a
handful of batched matmuls.

Inputs and delta targets are standardized with statistics of the
training split; predicted observations are clamped to a widened hull of
the training observations so that an immature model cannot launch a
planner into absurd state regions.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .envs import ActionSpace, action_space_from_dict


class ModelDivergenceError(RuntimeError):
    """Raised when the training loss stops being finite."""


@dataclass
class TrainConfig:
    hidden_layers: int = 2
    hidden_units: int = 50
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 64
    passes: int = 300              # full sweeps over the training split
    holdout_fraction: float = 0.1  # final fraction of the data, by time
    loss: str = "nll"              # "nll" or "mse"
    logvar_clamp: float = 10.0
    from_scratch: bool = False     # reinitialize weights on every train call
    output_clamp_factor: float = 10.0


@dataclass
class TrainReport:
    n_samples: int
    n_train: int
    n_holdout: int
    train_mse: float
    holdout_mse: float          # nan when no holdout rows exist
    initial_holdout_mse: float  # holdout MSE of the pre-call weights
    pass_losses: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# transition storage
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Transition:
    s: np.ndarray
    a: object
    r: float
    c: int
    s_next: np.ndarray


class Trace:
    """Columnar store of real-system transitions, labeled by epoch."""

    def __init__(self, observation_dim: int):
        self.observation_dim = observation_dim
        self._epoch: list = []
        self._s: list = []
        self._a: list = []
        self._r: list = []
        self._c: list = []
        self._s_next: list = []

    def __len__(self) -> int:
        return len(self._s)

    def append(self, epoch: int, s, a, r: float, c: int, s_next) -> None:
        s = np.asarray(s, dtype=float)
        s_next = np.asarray(s_next, dtype=float)
        if s.shape != (self.observation_dim,) or s_next.shape != (self.observation_dim,):
            raise ValueError("transition observation dim mismatch")
        if c not in (0, 1):
            raise ValueError("cost must be 0 or 1")
        self._epoch.append(int(epoch))
        self._s.append(s)
        self._a.append(a)
        self._r.append(float(r))
        self._c.append(int(c))
        self._s_next.append(s_next)

    def extend(self, epoch: int, transitions) -> None:
        for t in transitions:
            self.append(epoch, t.s, t.a, t.r, t.c, t.s_next)

    def transitions(self):
        """All stored columns as arrays: (s, a, r, c, s_next)."""
        return (np.asarray(self._s, dtype=float),
                np.asarray(self._a),
                np.asarray(self._r, dtype=float),
                np.asarray(self._c, dtype=int),
                np.asarray(self._s_next, dtype=float))

    def epochs(self) -> np.ndarray:
        return np.asarray(self._epoch, dtype=int)

    def epoch_ids(self) -> list:
        return sorted(set(self._epoch))

    def epoch_slice(self, epoch: int):
        """(s, a, r, c, s_next) arrays restricted to one epoch."""
        mask = self.epochs() == epoch
        s, a, r, c, s_next = self.transitions()
        return s[mask], a[mask], r[mask], c[mask], s_next[mask]


# ---------------------------------------------------------------------------
# the model
# ---------------------------------------------------------------------------

class DynamicsModel:
    """Autoregressive per-dimension transition model (see module docs).

    The public surface is ``train(s, a, s_next, rng)``, ``predict(s, a)``
    (single observation or batch), ``loss_and_grads`` for gradient
    diagnostics, and ``save``/``load`` for checkpoints.  Weights live in
    ``self.weights``: a list of ``[W, b]`` pairs with ``W`` of shape
    ``(n_dims, fan_in, fan_out)`` — one slice per output dimension.
    """

    def __init__(self, observation_dim: int, action_space: ActionSpace,
                 cfg: Optional[TrainConfig] = None, dim_order=None,
                 init_seed: int = 0):
        self.cfg = cfg if cfg is not None else TrainConfig()
        if self.cfg.loss not in ("nll", "mse"):
            raise ValueError(f"unknown loss {self.cfg.loss!r}")
        self.obs_dim = int(observation_dim)
        self.action_space = action_space
        self.act_dim = action_space.encoded_dim
        order = np.arange(self.obs_dim) if dim_order is None else np.asarray(dim_order, dtype=int)
        if sorted(order.tolist()) != list(range(self.obs_dim)):
            raise ValueError("dim_order must be a permutation of output dims")
        self.dim_order = order
        self.base_dim = self.obs_dim + self.act_dim
        self.in_max = self.base_dim + self.obs_dim - 1  # widest subnet input

        self.x_mean = self.x_std = None   # stats over (s, encoded a)
        self.y_mean = self.y_std = None   # stats over deltas s_next - s
        self.clamp_lo = self.clamp_hi = None
        self.trained = False
        self.weights: list = []
        self._init_weights(np.random.default_rng(init_seed))

    # -- weights --------------------------------------------------------

    def _layer_sizes(self):
        h = self.cfg.hidden_units
        sizes = [(self.in_max, h)]
        sizes += [(h, h)] * (self.cfg.hidden_layers - 1)
        sizes.append((h, 2))  # mean and log-variance heads
        return sizes

    def _init_weights(self, rng: np.random.Generator) -> None:
        self.weights = []
        for fan_in, fan_out in self._layer_sizes():
            lim = np.sqrt(6.0 / (fan_in + fan_out))
            w = rng.uniform(-lim, lim, size=(self.obs_dim, fan_in, fan_out))
            b = np.zeros((self.obs_dim, fan_out))
            self.weights.append([w, b])

    def parameter_count(self) -> int:
        return sum(w.size + b.size for w, b in self.weights)

    # -- normalization ----------------------------------------------------

    def _base_features(self, s: np.ndarray, a) -> np.ndarray:
        enc = self.action_space.encode(a)
        x = np.concatenate([s, enc.reshape(len(s), self.act_dim)], axis=1)
        return (x - self.x_mean) / self.x_std

    # -- stacked forward/backward ------------------------------------------

    def _forward(self, x: np.ndarray):
        """x: (n_dims, batch, in_max) -> (activations list, output (n_dims, batch, 2))."""
        acts = [x]
        for w, b in self.weights[:-1]:
            acts.append(np.tanh(acts[-1] @ w + b[:, None, :]))
        w, b = self.weights[-1]
        out = acts[-1] @ w + b[:, None, :]
        return acts, out

    def loss_and_grads(self, x: np.ndarray, y: np.ndarray):
        """Mean training loss and its parameter gradients.

        x: (n_dims, batch, in_max) subnet inputs; y: (n_dims, batch)
        normalized delta targets.  Returns (loss, grads) with grads
        shaped like ``self.weights``.
        """
        acts, out = self._forward(x)
        n_total = y.size
        mu = out[..., 0]
        err = mu - y
        if self.cfg.loss == "nll":
            cl = self.cfg.logvar_clamp
            raw_lv = out[..., 1]
            lv = np.clip(raw_lv, -cl, cl)
            inv_var = np.exp(-lv)
            loss = float(np.mean(0.5 * lv + 0.5 * err ** 2 * inv_var))
            dmu = err * inv_var / n_total
            dlv = (0.5 - 0.5 * err ** 2 * inv_var) / n_total
            dlv *= (np.abs(raw_lv) < cl)  # clamp kills the gradient outside
        else:
            loss = float(np.mean(0.5 * err ** 2))
            dmu = err / n_total
            dlv = np.zeros_like(mu)

        dout = np.stack([dmu, dlv], axis=-1)
        grads = [None] * len(self.weights)
        da = dout
        for i in range(len(self.weights) - 1, -1, -1):
            w, _ = self.weights[i]
            if i < len(self.weights) - 1:
                da = da * (1.0 - acts[i + 1] ** 2)  # tanh'
            grads[i] = [acts[i].transpose(0, 2, 1) @ da, da.sum(axis=1)]
            if i > 0:
                da = da @ w.transpose(0, 2, 1)
        return loss, grads

    def _adam_step(self, grads) -> None:
        c = self.cfg
        self._adam_t += 1
        t = self._adam_t
        lr = c.learning_rate * np.sqrt(1 - c.adam_beta2 ** t) / (1 - c.adam_beta1 ** t)
        for (pair, gpair, mpair, vpair) in zip(self.weights, grads, self._adam_m, self._adam_v):
            for j in range(2):
                g = gpair[j]
                mpair[j] = c.adam_beta1 * mpair[j] + (1 - c.adam_beta1) * g
                vpair[j] = c.adam_beta2 * vpair[j] + (1 - c.adam_beta2) * g * g
                pair[j] -= lr * mpair[j] / (np.sqrt(vpair[j]) + c.adam_eps)

    # -- training ---------------------------------------------------------

    def _stacked_inputs(self, base: np.ndarray, y_norm: np.ndarray) -> np.ndarray:
        """Teacher-forced subnet inputs (n_dims, n, in_max) from normalized data."""
        n = len(base)
        x = np.zeros((self.obs_dim, n, self.in_max))
        x[:, :, :self.base_dim] = base
        for pos in range(1, self.obs_dim):
            cond = y_norm[:, self.dim_order[:pos]]
            x[pos, :, self.base_dim:self.base_dim + pos] = cond
        return x

    def train(self, s, a, s_next, rng=None) -> TrainReport:
        """Fit the model to one-step transitions.

        s, s_next: (n, obs_dim); a: (n,) raw actions.  The final
        ``holdout_fraction`` of the rows (temporal order preserved) is
        held out and never trained on.  Deterministic given ``rng``.
        """
        rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        cfg = self.cfg
        s = np.asarray(s, dtype=float)
        s_next = np.asarray(s_next, dtype=float)
        a = np.asarray(a)
        n = len(s)
        if n == 0:
            raise ValueError("cannot train on an empty trace")
        n_hold = int(n * cfg.holdout_fraction)
        n_train = n - n_hold
        if n_train == 0:
            raise ValueError("holdout fraction leaves no training rows")

        s_tr, a_tr, sn_tr = s[:n_train], a[:n_train], s_next[:n_train]

        # normalization and clamp statistics come from the training split
        enc_tr = self.action_space.encode(a_tr).reshape(n_train, self.act_dim)
        x_raw = np.concatenate([s_tr, enc_tr], axis=1)
        self.x_mean = x_raw.mean(axis=0)
        self.x_std = np.maximum(x_raw.std(axis=0), 1e-8)
        delta_tr = sn_tr - s_tr
        self.y_mean = delta_tr.mean(axis=0)
        self.y_std = np.maximum(delta_tr.std(axis=0), 1e-8)

        seen = np.concatenate([s_tr, sn_tr], axis=0)
        lo, hi = seen.min(axis=0), seen.max(axis=0)
        mid, half = 0.5 * (lo + hi), np.maximum(0.5 * (hi - lo), 1e-8)
        self.clamp_lo = mid - cfg.output_clamp_factor * half
        self.clamp_hi = mid + cfg.output_clamp_factor * half

        initial_holdout = self._eval_mse(s[n_train:], a[n_train:], s_next[n_train:]) \
            if n_hold else float("nan")

        if cfg.from_scratch:
            self._init_weights(rng)
        self._adam_m = [[np.zeros_like(w), np.zeros_like(b)] for w, b in self.weights]
        self._adam_v = [[np.zeros_like(w), np.zeros_like(b)] for w, b in self.weights]
        self._adam_t = 0

        y_norm = (delta_tr - self.y_mean) / self.y_std
        x_full = self._stacked_inputs(self._base_features(s_tr, a_tr), y_norm)
        y_full = y_norm[:, self.dim_order].T.copy()  # (n_dims, n_train)

        pass_losses = []
        bs = cfg.batch_size
        for p in range(cfg.passes):
            perm = rng.permutation(n_train)
            total = 0.0
            for start in range(0, n_train, bs):
                idx = perm[start:start + bs]
                loss, grads = self.loss_and_grads(x_full[:, idx], y_full[:, idx])
                if not np.isfinite(loss):
                    raise ModelDivergenceError(
                        f"non-finite training loss at pass {p}, "
                        f"batch starting {start} (n_train={n_train})")
                self._adam_step(grads)
                total += loss * len(idx)
            pass_losses.append(total / n_train)

        self.trained = True
        train_mse = self._eval_mse(s_tr, a_tr, sn_tr)
        holdout_mse = self._eval_mse(s[n_train:], a[n_train:], s_next[n_train:]) \
            if n_hold else float("nan")
        return TrainReport(n_samples=n, n_train=n_train, n_holdout=n_hold,
                           train_mse=train_mse, holdout_mse=holdout_mse,
                           initial_holdout_mse=initial_holdout,
                           pass_losses=pass_losses)

    # -- prediction ---------------------------------------------------------

    def _predict_core(self, s2: np.ndarray, a) -> np.ndarray:
        n = len(s2)
        x = np.zeros((n, self.in_max))
        x[:, :self.base_dim] = self._base_features(s2, a)
        mu_norm = np.zeros((n, self.obs_dim))
        for pos, dim in enumerate(self.dim_order):
            if pos:
                x[:, self.base_dim + pos - 1] = mu_norm[:, self.dim_order[pos - 1]]
            h = x
            for w, b in self.weights[:-1]:
                h = np.tanh(h @ w[pos] + b[pos])
            w, b = self.weights[-1]
            mu_norm[:, dim] = h @ w[pos, :, 0] + b[pos, 0]
        delta = mu_norm * self.y_std + self.y_mean
        return np.clip(s2 + delta, self.clamp_lo, self.clamp_hi)

    def predict(self, s, a) -> np.ndarray:
        """Deterministic next-observation prediction.

        Accepts a single observation (obs_dim,) with a scalar action, or
        a batch (n, obs_dim) with actions (n,).
        """
        if not self.trained:
            raise RuntimeError("model must be trained before predict")
        s = np.asarray(s, dtype=float)
        if s.ndim == 1:
            return self._predict_core(s[None, :], np.atleast_1d(a))[0]
        return self._predict_core(s, a)

    def _eval_mse(self, s, a, s_next) -> float:
        pred = self._predict_core(np.asarray(s, dtype=float), a)
        return float(np.mean((pred - np.asarray(s_next, dtype=float)) ** 2))

    # -- persistence -------------------------------------------------------

    def save(self, path) -> None:
        data = {
            "version": np.int64(1),
            "obs_dim": np.int64(self.obs_dim),
            "dim_order": self.dim_order,
            "hidden_layers": np.int64(self.cfg.hidden_layers),
            "hidden_units": np.int64(self.cfg.hidden_units),
            "loss_kind": np.bytes_(self.cfg.loss.encode()),
            "action_space": np.bytes_(json.dumps(self.action_space.to_dict()).encode()),
            "trained": np.int64(self.trained),
            "x_mean": self.x_mean, "x_std": self.x_std,
            "y_mean": self.y_mean, "y_std": self.y_std,
            "clamp_lo": self.clamp_lo, "clamp_hi": self.clamp_hi,
        }
        for i, (w, b) in enumerate(self.weights):
            data[f"w{i}"] = w
            data[f"b{i}"] = b
        with open(path, "wb") as f:
            np.savez(f, **data)

    @classmethod
    def load(cls, path, cfg: Optional[TrainConfig] = None) -> "DynamicsModel":
        with np.load(path) as z:
            version = int(z["version"])
            if version != 1:
                raise ValueError(f"unsupported checkpoint version {version}")
            space = action_space_from_dict(json.loads(z["action_space"].item().decode()))
            cfg = cfg if cfg is not None else TrainConfig()
            cfg.hidden_layers = int(z["hidden_layers"])
            cfg.hidden_units = int(z["hidden_units"])
            cfg.loss = z["loss_kind"].item().decode()
            model = cls(int(z["obs_dim"]), space, cfg=cfg,
                        dim_order=z["dim_order"])
            model.weights = []
            for i in range(cfg.hidden_layers + 1):
                model.weights.append([z[f"w{i}"], z[f"b{i}"]])
            if int(z["trained"]):
                model.x_mean, model.x_std = z["x_mean"], z["x_std"]
                model.y_mean, model.y_std = z["y_mean"], z["y_std"]
                model.clamp_lo, model.clamp_hi = z["clamp_lo"], z["clamp_hi"]
                model.trained = True
        return model


# ---------------------------------------------------------------------------
# gradient diagnostics
# ---------------------------------------------------------------------------

def finite_difference_grads(model: DynamicsModel, x: np.ndarray, y: np.ndarray,
                            step: float = 1e-5):
    """Central finite-difference gradients of the training loss."""
    grads = []
    for pair in model.weights:
        gpair = []
        for arr in pair:
            g = np.zeros_like(arr)
            flat = arr.reshape(-1)
            gflat = g.reshape(-1)
            for k in range(flat.size):
                orig = flat[k]
                flat[k] = orig + step
                hi, _ = model.loss_and_grads(x, y)
                flat[k] = orig - step
                lo, _ = model.loss_and_grads(x, y)
                flat[k] = orig
                gflat[k] = (hi - lo) / (2 * step)
            gpair.append(g)
        grads.append(gpair)
    return grads


def max_relative_grad_error(model: DynamicsModel, x: np.ndarray, y: np.ndarray,
                            step: float = 1e-5) -> float:
    _, analytic = model.loss_and_grads(x, y)
    numeric = finite_difference_grads(model, x, y, step)
    worst = 0.0
    for ga, gn in zip(analytic, numeric):
        for a_arr, n_arr in zip(ga, gn):
            denom = np.maximum(np.maximum(np.abs(a_arr), np.abs(n_arr)), 1e-6)
            worst = max(worst, float(np.max(np.abs(a_arr - n_arr) / denom)))
    return worst


def gradient_check(model: DynamicsModel, n_samples: int = 10,
                   step: float = 1e-5, seed: int = 0) -> float:
    """Max relative error between analytic and finite-difference gradients.

    Evaluated at a random (inputs, targets) point drawn from the given
    seed, using the model's current weights; deterministic per seed.
    """
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(model.obs_dim, n_samples, model.in_max))
    y = rng.normal(size=(model.obs_dim, n_samples))
    return max_relative_grad_error(model, x, y, step)
