"""Small fully connected classifier with hand-written backprop.

ReLU hidden layers, identity output layer, float64 throughout.  No autodiff:
the loss modules supply analytic logit gradients and this module chains them
through the layers.  Training is bit-for-bit reproducible for a given seed.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .loss import LossConfig, cross_entropy_loss, dappr_loss, softplus
from .possibility import DirichletParams

OPTIMIZERS = ("adam", "sgd")
LOSS_KINDS = ("dappr", "cross_entropy")


@dataclass(eq=False)
class NetworkParams:
    layer_sizes: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    seed: int
    loss_kind: str


@dataclass(frozen=True)
class TrainConfig:
    layer_sizes: tuple[int, ...]
    epochs: int
    batch_size: int
    seed: int
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    loss_kind: str = "dappr"
    loss: LossConfig = field(default_factory=LossConfig)
    early_stopping: bool = False
    weight_decay: float = 0.0

    def __post_init__(self):
        if len(self.layer_sizes) < 2:
            raise ValueError("need at least input and output layer sizes")
        if any(s < 1 for s in self.layer_sizes):
            raise ValueError(f"layer sizes must be positive, got {self.layer_sizes}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate <= 0.0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")
        if self.loss_kind not in LOSS_KINDS:
            raise ValueError(f"loss_kind must be one of {LOSS_KINDS}")
        if self.weight_decay < 0.0:
            raise ValueError(f"weight_decay must be >= 0, got {self.weight_decay}")


@dataclass(eq=False)
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_accuracy: list[float] = field(default_factory=list)
    val_mean_alpha0: list[float] = field(default_factory=list)


def init_network(layer_sizes, seed: int, loss_kind: str = "dappr") -> NetworkParams:
    """Fan-in scaled uniform init, U(-sqrt(6/fan_in), sqrt(6/fan_in)); zero biases."""
    sizes = tuple(int(s) for s in layer_sizes)
    if len(sizes) < 2 or any(s < 1 for s in sizes):
        raise ValueError(f"bad layer sizes {sizes}")
    if loss_kind not in LOSS_KINDS:
        raise ValueError(f"loss_kind must be one of {LOSS_KINDS}")
    rng = np.random.default_rng([seed, 0])
    weights, biases = [], []
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        bound = np.sqrt(6.0 / n_in)
        weights.append(rng.uniform(-bound, bound, size=(n_in, n_out)))
        biases.append(np.zeros(n_out))
    return NetworkParams(sizes, weights, biases, int(seed), loss_kind)


def _forward_cached(params: NetworkParams, x: np.ndarray):
    acts = [x]
    pre = []
    h = x
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w + b
        pre.append(z)
        h = z if i == last else np.maximum(z, 0.0)
        acts.append(h)
    return pre, acts


def forward(params: NetworkParams, x) -> np.ndarray:
    """Logits for a batch of feature rows."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.layer_sizes[0]:
        raise ValueError(
            f"expected inputs of shape (batch, {params.layer_sizes[0]}), got {x.shape}"
        )
    return _forward_cached(params, x)[0][-1]


def backward(params: NetworkParams, pre, acts, grad_logits):
    """Weight and bias gradients from a logit gradient (chain rule only)."""
    grads_w = [None] * len(params.weights)
    grads_b = [None] * len(params.biases)
    delta = grad_logits
    for i in range(len(params.weights) - 1, -1, -1):
        grads_w[i] = acts[i].T @ delta
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ params.weights[i].T) * (pre[i - 1] > 0.0)
    return grads_w, grads_b


class _Adam:
    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = [np.zeros_like(a) for a in params]
        self.v = [np.zeros_like(a) for a in params]

    def step(self, params, grads):
        self.t += 1
        for i, (p, g) in enumerate(zip(params, grads)):
            self.m[i] = self.b1 * self.m[i] + (1 - self.b1) * g
            self.v[i] = self.b2 * self.v[i] + (1 - self.b2) * g * g
            m_hat = self.m[i] / (1 - self.b1**self.t)
            v_hat = self.v[i] / (1 - self.b2**self.t)
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class _Sgd:
    def __init__(self, params, lr):
        self.lr = lr

    def step(self, params, grads):
        for p, g in zip(params, grads):
            p -= self.lr * g


_LOSS_FNS = {"dappr": dappr_loss, "cross_entropy": cross_entropy_loss}


def train(train_x, train_y, val_x, val_y, cfg: TrainConfig):
    """Mini-batch training; returns (params, history).

    Shuffling is Fisher-Yates with a per-epoch derived seed, so runs are
    reproducible.  The loss schedule horizon is pinned to cfg.epochs.  With
    early stopping enabled the returned params are the best-validation-
    accuracy snapshot, otherwise the final ones; epochs=0 returns the freshly
    initialized network.
    """
    train_x = np.asarray(train_x, dtype=np.float64)
    train_y = np.asarray(train_y)
    val_x = np.asarray(val_x, dtype=np.float64)
    val_y = np.asarray(val_y)
    if train_x.shape[0] != train_y.shape[0]:
        raise ValueError("train features and labels disagree on length")
    if train_x.shape[0] == 0:
        raise ValueError("training set is empty")

    params = init_network(cfg.layer_sizes, cfg.seed, cfg.loss_kind)
    history = TrainHistory()
    loss_fn = _LOSS_FNS[cfg.loss_kind]
    loss_cfg = replace(cfg.loss, total_epochs=max(cfg.epochs, 1))

    flat = params.weights + params.biases
    opt = _Adam(flat, cfg.learning_rate) if cfg.optimizer == "adam" else _Sgd(flat, cfg.learning_rate)

    n = train_x.shape[0]
    best = None
    best_acc = -1.0
    for epoch in range(cfg.epochs):
        perm = np.random.default_rng([cfg.seed, 1, epoch]).permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = perm[start:start + cfg.batch_size]
            pre, acts = _forward_cached(params, train_x[idx])
            out = loss_fn(pre[-1], train_y[idx], loss_cfg, epoch)
            grads_w, grads_b = backward(params, pre, acts, out.grad_logits)
            if cfg.weight_decay > 0.0:
                for w, gw in zip(params.weights, grads_w):
                    gw += cfg.weight_decay * w
            opt.step(flat, grads_w + grads_b)
            epoch_loss += out.value * idx.size
        history.train_loss.append(epoch_loss / n)

        logits = forward(params, val_x)
        acc = float(np.mean(np.argmax(logits, axis=1) == val_y)) if val_y.size else 0.0
        history.val_accuracy.append(acc)
        history.val_mean_alpha0.append(float(np.mean(np.sum(softplus(logits) + 1.0, axis=1))) if val_y.size else 0.0)
        if cfg.early_stopping and acc > best_acc:
            best_acc = acc
            best = copy.deepcopy(params)

    if cfg.early_stopping and best is not None:
        return best, history
    return params, history


def predict_logits(params: NetworkParams, x) -> np.ndarray:
    return forward(params, x)


def predict_labels(params: NetworkParams, x) -> np.ndarray:
    return np.argmax(forward(params, x), axis=1)


def predict_alpha(params: NetworkParams, x) -> list[DirichletParams]:
    """Concentration parameters (softplus(z) + 1) for each input row."""
    logits = forward(params, x)
    return [DirichletParams(row) for row in softplus(logits) + 1.0]


def save_checkpoint(params: NetworkParams, path) -> None:
    """JSON checkpoint: layer sizes, weights (with biases), seed, loss kind."""
    doc = {
        "layer_sizes": list(params.layer_sizes),
        "weights": [[w.tolist(), b.tolist()] for w, b in zip(params.weights, params.biases)],
        "seed": params.seed,
        "loss_kind": params.loss_kind,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_checkpoint(path) -> NetworkParams:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    try:
        sizes = tuple(int(s) for s in doc["layer_sizes"])
        weights = [np.asarray(pair[0], dtype=np.float64) for pair in doc["weights"]]
        biases = [np.asarray(pair[1], dtype=np.float64) for pair in doc["weights"]]
        seed = int(doc["seed"])
        loss_kind = doc["loss_kind"]
    except (KeyError, IndexError, TypeError) as exc:
        raise ValueError(f"malformed checkpoint {path}: {exc}") from exc
    if loss_kind not in LOSS_KINDS:
        raise ValueError(f"malformed checkpoint {path}: bad loss_kind {loss_kind!r}")
    for i, (w, b) in enumerate(zip(weights, biases)):
        if w.shape != (sizes[i], sizes[i + 1]) or b.shape != (sizes[i + 1],):
            raise ValueError(f"malformed checkpoint {path}: layer {i} shape mismatch")
    return NetworkParams(sizes, weights, biases, seed, loss_kind)
