"""Shared-trunk two-head classifier trained on pooled clips.

The model is ``hidden = relu(x @ W1 + b1)`` followed by two affine heads,
one over spatial classes and one over temporal classes. The objective is
the unweighted sum of the two heads' cross-entropies, averaged over the
batch, plus optional L2 weight decay on the weight matrices (biases
excluded). Everything runs in float64.

Weights and biases are initialised uniform in ``[-1/sqrt(fan_in), 1/sqrt(fan_in)]``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch

PARAM_NAMES = ("W1", "b1", "WS", "bS", "WT", "bT")
POOL_GRID = (4, 8, 8)


def _bins(n: int, k: int) -> np.ndarray:
    """Start offsets splitting ``n`` items into ``k`` near-equal contiguous bins."""
    if k > n:
        raise DimensionMismatch(f"cannot pool {n} samples into {k} bins")
    return (np.arange(k) * n) // k


def pool_clip(clip: np.ndarray, grid: tuple[int, int, int] = POOL_GRID) -> np.ndarray:
    """Average-pool a ``(T, H, W, C)`` clip to ``grid`` and flatten it."""
    clip = np.asarray(clip, dtype=np.float64)
    out = clip
    for axis, k in enumerate(grid):
        starts = _bins(out.shape[axis], k)
        counts = np.diff(np.append(starts, out.shape[axis]))
        out = np.add.reduceat(out, starts, axis=axis)
        shape = [1] * out.ndim
        shape[axis] = k
        out = out / counts.reshape(shape)
    return out.reshape(-1)


@dataclass
class Standardizer:
    """Per-feature affine normalisation fitted on training inputs."""
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, x: np.ndarray, floor: float = 1e-8) -> "Standardizer":
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or len(x) == 0:
            raise DimensionMismatch("standardizer needs a non-empty (N, D) array")
        return cls(x.mean(axis=0), x.std(axis=0) + floor)

    @classmethod
    def identity(cls, dim: int) -> "Standardizer":
        return cls(np.zeros(dim), np.ones(dim))

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != len(self.mean):
            raise DimensionMismatch(f"input has {x.shape[-1]} features, standardizer expects {len(self.mean)}")
        return (x - self.mean) / self.scale


@dataclass
class ProbeModel:
    params: dict[str, np.ndarray]

    @property
    def input_dim(self) -> int:
        return self.params["W1"].shape[0]

    @property
    def hidden(self) -> int:
        return self.params["W1"].shape[1]

    @property
    def n_spatial(self) -> int:
        return self.params["WS"].shape[1]

    @property
    def n_temporal(self) -> int:
        return self.params["WT"].shape[1]

    def copy(self) -> "ProbeModel":
        return ProbeModel({k: v.copy() for k, v in self.params.items()})


def init_model(input_dim: int, hidden: int, n_spatial: int, n_temporal: int, seed: int = 0) -> ProbeModel:
    rng = np.random.default_rng(seed)

    def uni(fan_in, shape):
        bound = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-bound, bound, shape)

    return ProbeModel({
        "W1": uni(input_dim, (input_dim, hidden)),
        "b1": uni(input_dim, (hidden,)),
        "WS": uni(hidden, (hidden, n_spatial)),
        "bS": uni(hidden, (n_spatial,)),
        "WT": uni(hidden, (hidden, n_temporal)),
        "bT": uni(hidden, (n_temporal,)),
    })


def _check_input(model: ProbeModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None]
    if x.shape[-1] != model.input_dim:
        raise DimensionMismatch(f"input has {x.shape[-1]} features, model expects {model.input_dim}")
    return x


def hidden_features(model: ProbeModel, x: np.ndarray) -> np.ndarray:
    x = _check_input(model, x)
    return np.maximum(x @ model.params["W1"] + model.params["b1"], 0.0)


def forward(model: ProbeModel, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Logits of both heads for a batch ``(N, D)`` (or a single ``(D,)`` input)."""
    h = hidden_features(model, x)
    p = model.params
    return h @ p["WS"] + p["bS"], h @ p["WT"] + p["bT"]


def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(probs: np.ndarray, true_class) -> np.ndarray:
    """``-log(p_true)`` with ``p_true`` clamped at 1e-12; batched over leading axes."""
    probs = np.asarray(probs, dtype=np.float64)
    true_class = np.asarray(true_class)
    p = np.take_along_axis(probs, true_class[..., None], axis=-1)[..., 0]
    return -np.log(np.maximum(p, 1e-12))


def head_losses(model: ProbeModel, x, y_spatial, y_temporal) -> tuple[np.ndarray, np.ndarray]:
    ls, lt = forward(model, x)
    return cross_entropy(softmax(ls), y_spatial), cross_entropy(softmax(lt), y_temporal)


def joint_loss(model: ProbeModel, x, y_spatial, y_temporal, weight_decay: float = 0.0) -> float:
    """Mean over the batch of spatial loss + temporal loss (+ L2 term)."""
    l_s, l_t = head_losses(model, x, y_spatial, y_temporal)
    loss = float(np.mean(l_s + l_t))
    if weight_decay:
        loss += 0.5 * weight_decay * sum(float(np.sum(model.params[k] ** 2)) for k in ("W1", "WS", "WT"))
    return loss


def grad(model: ProbeModel, x, y_spatial, y_temporal, weight_decay: float = 0.0) -> dict[str, np.ndarray]:
    """Analytic gradient of :func:`joint_loss` w.r.t. every parameter."""
    x = _check_input(model, x)
    p = model.params
    n = x.shape[0]
    pre = x @ p["W1"] + p["b1"]
    h = np.maximum(pre, 0.0)
    ds = softmax(h @ p["WS"] + p["bS"])
    ds[np.arange(n), np.asarray(y_spatial)] -= 1.0
    ds /= n
    dt = softmax(h @ p["WT"] + p["bT"])
    dt[np.arange(n), np.asarray(y_temporal)] -= 1.0
    dt /= n
    dh = ds @ p["WS"].T + dt @ p["WT"].T
    dpre = dh * (pre > 0)
    g = {
        "W1": x.T @ dpre, "b1": dpre.sum(axis=0),
        "WS": h.T @ ds, "bS": ds.sum(axis=0),
        "WT": h.T @ dt, "bT": dt.sum(axis=0),
    }
    if weight_decay:
        for k in ("W1", "WS", "WT"):
            g[k] = g[k] + weight_decay * p[k]
    return g


def numerical_grad(model: ProbeModel, x, y_spatial, y_temporal, weight_decay: float = 0.0,
                   eps: float = 1e-5) -> dict[str, np.ndarray]:
    """Central finite differences of :func:`joint_loss`, one coordinate at a time."""
    m = model.copy()
    out = {}
    for name in PARAM_NAMES:
        arr = m.params[name]
        g = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            orig = arr[idx]
            arr[idx] = orig + eps
            up = joint_loss(m, x, y_spatial, y_temporal, weight_decay)
            arr[idx] = orig - eps
            down = joint_loss(m, x, y_spatial, y_temporal, weight_decay)
            arr[idx] = orig
            g[idx] = (up - down) / (2 * eps)
        out[name] = g
    return out


def relative_error(analytic: dict, numeric: dict, floor: float = 1e-6) -> float:
    """Largest ``|a - n| / max(|a|, |n|, floor)`` over all parameter entries."""
    worst = 0.0
    for name in PARAM_NAMES:
        a, n = analytic[name], numeric[name]
        err = np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        worst = max(worst, float(err.max(initial=0.0)))
    return worst


def gradient_check(n_configs: int = 20, seed: int = 0, eps: float = 1e-5) -> list[float]:
    """Relative errors of analytic vs finite-difference gradients on random problems."""
    rng = np.random.default_rng(seed)
    errors = []
    for i in range(n_configs):
        d, hd = int(rng.integers(2, 9)), int(rng.integers(2, 9))
        ns, nt = int(rng.integers(2, 6)), int(rng.integers(2, 6))
        n = int(rng.integers(1, 7))
        model = init_model(d, hd, ns, nt, seed=int(rng.integers(0, 2**31)))
        x = rng.uniform(0.0, 1.0, (n, d))
        ys, yt = rng.integers(0, ns, n), rng.integers(0, nt, n)
        wd = float(rng.choice([0.0, 1e-3]))
        errors.append(relative_error(grad(model, x, ys, yt, wd), numerical_grad(model, x, ys, yt, wd, eps)))
    return errors


@dataclass
class TrainConfig:
    lr: float = 0.01
    momentum: float = 0.9
    batch_size: int = 32
    epochs: int = 30
    seed: int = 0
    weight_decay: float = 0.0

    def __post_init__(self):
        if self.lr < 0:
            raise ValueError(f"learning rate must be non-negative, got {self.lr}")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.batch_size < 1:
            raise ValueError("batch size must be positive")


@dataclass
class EpochStats:
    epoch: int
    loss: float
    loss_spatial: float
    loss_temporal: float
    acc_spatial: float
    acc_temporal: float


def evaluate(model: ProbeModel, x, y_spatial, y_temporal) -> tuple[float, float, float, float]:
    ls, lt = forward(model, x)
    l_s = float(np.mean(cross_entropy(softmax(ls), y_spatial)))
    l_t = float(np.mean(cross_entropy(softmax(lt), y_temporal)))
    acc_s = float(np.mean(ls.argmax(axis=1) == np.asarray(y_spatial)))
    acc_t = float(np.mean(lt.argmax(axis=1) == np.asarray(y_temporal)))
    return l_s, l_t, acc_s, acc_t


def _stats(epoch, model, x, ys, yt) -> EpochStats:
    l_s, l_t, a_s, a_t = evaluate(model, x, ys, yt)
    return EpochStats(epoch, l_s + l_t, l_s, l_t, a_s, a_t)


def train(model: ProbeModel, x, y_spatial, y_temporal, config: TrainConfig) -> tuple[ProbeModel, list[EpochStats]]:
    """Minibatch SGD with classical momentum (``v = mu*v + g; w -= lr*v``).

    History entry 0 is the untrained model; entry ``e`` is measured on the
    full training set after epoch ``e``. The shuffle order of each epoch is
    derived from ``config.seed``.
    """
    x = _check_input(model, x)
    ys, yt = np.asarray(y_spatial), np.asarray(y_temporal)
    if len(x) == 0:
        raise ValueError("cannot train on an empty dataset")
    model = model.copy()
    velocity = {k: np.zeros_like(v) for k, v in model.params.items()}
    rng = np.random.default_rng(config.seed)
    history = [_stats(0, model, x, ys, yt)]
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(x))
        for start in range(0, len(x), config.batch_size):
            batch = order[start:start + config.batch_size]
            g = grad(model, x[batch], ys[batch], yt[batch], config.weight_decay)
            for k, v in velocity.items():
                v *= config.momentum
                v += g[k]
                model.params[k] -= config.lr * v
        history.append(_stats(epoch, model, x, ys, yt))
    return model, history
