"""Dense feed-forward networks with exact backpropagation.

Weights live in one flat vector laid out layer by layer; each layer stores its
``(n_in, n_out)`` weight matrix row-major followed by its ``n_out`` biases.
Hidden layers use the configured nonlinearity, the output layer is linear.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from geese.errors import InputShapeError, TrainingDivergedError

ACTIVATIONS = ("relu", "tanh")


def n_weights(layer_sizes: Sequence[int]) -> int:
    return sum(a * b + b for a, b in zip(layer_sizes[:-1], layer_sizes[1:]))


@dataclass
class DenseNet:
    layer_sizes: list[int]
    weights: np.ndarray
    activation: str = "relu"

    def __post_init__(self):
        self.layer_sizes = [int(n) for n in self.layer_sizes]
        if len(self.layer_sizes) < 2 or min(self.layer_sizes) < 1:
            raise ValueError(f"bad layer sizes {self.layer_sizes}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        self.weights = np.asarray(self.weights, dtype=float)
        expected = n_weights(self.layer_sizes)
        if self.weights.shape != (expected,):
            raise ValueError(
                f"weight vector has shape {self.weights.shape}, expected ({expected},)"
            )

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_dim(self) -> int:
        return self.layer_sizes[-1]

    def copy(self) -> "DenseNet":
        return DenseNet(list(self.layer_sizes), self.weights.copy(), self.activation)

    def layers(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """Views ``(W, b)`` into the flat weight vector, one per layer."""
        out = []
        pos = 0
        for n_in, n_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            W = self.weights[pos : pos + n_in * n_out].reshape(n_in, n_out)
            pos += n_in * n_out
            b = self.weights[pos : pos + n_out]
            pos += n_out
            out.append((W, b))
        return out


def init_net(
    layer_sizes: Sequence[int],
    rng: np.random.Generator,
    activation: str = "relu",
) -> DenseNet:
    """Glorot-uniform weights, zero biases."""
    chunks = []
    for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        limit = np.sqrt(6.0 / (n_in + n_out))
        chunks.append(rng.uniform(-limit, limit, size=n_in * n_out))
        chunks.append(np.zeros(n_out))
    return DenseNet(list(layer_sizes), np.concatenate(chunks), activation)


def _act(name, z):
    if name == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _act_grad(name, z, a):
    if name == "relu":
        return (z > 0).astype(float)
    return 1.0 - a * a


def _as_batch(net: DenseNet, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.ndim != 2 or X.shape[1] != net.input_dim:
        raise InputShapeError(
            f"input has shape {x.shape}, network expects last dimension {net.input_dim}"
        )
    return X, single


def forward_cache(net: DenseNet, X: np.ndarray):
    """Batched forward pass returning the output and a cache for ``backward``."""
    cache = []
    a = X
    layers = net.layers()
    for i, (W, b) in enumerate(layers):
        z = a @ W + b
        if i < len(layers) - 1:
            h = _act(net.activation, z)
        else:
            h = z
        cache.append((a, z, h))
        a = h
    return a, cache


def backward(net: DenseNet, cache, grad_out: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vector-Jacobian product of the batched forward pass.

    ``grad_out`` has the shape of the batched output. Returns the gradient with
    respect to the flat weight vector (summed over the batch) and with respect
    to every input row.
    """
    layers = net.layers()
    grads: list[np.ndarray] = [None] * (2 * len(layers))  # type: ignore[list-item]
    g = grad_out
    for i in range(len(layers) - 1, -1, -1):
        W, _ = layers[i]
        a_in, z, h = cache[i]
        if i < len(layers) - 1:
            g = g * _act_grad(net.activation, z, h)
        grads[2 * i] = (a_in.T @ g).ravel()
        grads[2 * i + 1] = g.sum(axis=0)
        g = g @ W.T
    return np.concatenate(grads), g


def forward(net: DenseNet, x) -> np.ndarray:
    """Evaluate the network on one state (1-D) or a batch of states (2-D)."""
    X, single = _as_batch(net, x)
    out, _ = forward_cache(net, X)
    return out[0] if single else out


def input_grad(net: DenseNet, x, grad_out) -> tuple[np.ndarray, np.ndarray]:
    """Forward output and the input gradient of ``sum(grad_out * output)``."""
    X, single = _as_batch(net, x)
    out, cache = forward_cache(net, X)
    g = np.broadcast_to(np.asarray(grad_out, dtype=float), out.shape)
    _, gx = backward(net, cache, g)
    if single:
        return out[0], gx[0]
    return out, gx


def _targets(net: DenseNet, X, T) -> tuple[np.ndarray, np.ndarray]:
    X, _ = _as_batch(net, X)
    T = np.asarray(T, dtype=float).reshape(len(X), -1) if len(X) else np.zeros((0, net.output_dim))
    if len(X) == 0:
        raise ValueError("empty batch")
    if T.shape != (len(X), net.output_dim):
        raise InputShapeError(f"targets have shape {T.shape}, expected {(len(X), net.output_dim)}")
    return X, T


def loss_and_grads(net: DenseNet, X, T) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean squared L2 distance between outputs and targets, with exact gradients.

    Returns ``(loss, grad_w, grad_X)``.
    """
    X, T = _targets(net, X, T)
    out, cache = forward_cache(net, X)
    diff = out - T
    loss = float(np.mean(np.sum(diff * diff, axis=1)))
    gw, gx = backward(net, cache, 2.0 * diff / len(X))
    return loss, gw, gx


def batch_loss(net: DenseNet, X, T) -> float:
    X, T = _targets(net, X, T)
    diff = forward(net, X) - T
    return float(np.mean(np.sum(diff * diff, axis=1)))


def finite_diff_grad(net: DenseNet, X, T, step: float = 1e-5) -> np.ndarray:
    """Central-difference estimate of the weight gradient of ``batch_loss``."""
    if step <= 0:
        raise ValueError("step must be positive")
    X, T = _targets(net, X, T)
    probe = net.copy()
    grad = np.empty_like(net.weights)
    for i in range(len(grad)):
        orig = probe.weights[i]
        probe.weights[i] = orig + step
        up = batch_loss(probe, X, T)
        probe.weights[i] = orig - step
        down = batch_loss(probe, X, T)
        probe.weights[i] = orig
        grad[i] = (up - down) / (2.0 * step)
    return grad


@dataclass
class GradCheckReport:
    max_relative_error: float
    per_weight_errors: np.ndarray


def grad_check(net: DenseNet, X, T, step: float = 1e-5, floor: float = 1e-6) -> GradCheckReport:
    """Compare backprop against central differences.

    Relative error per weight is ``|a - n| / max(|a|, |n|, floor)``; the floor
    keeps weights with vanishing gradient from dividing noise by zero.
    """
    _, analytic, _ = loss_and_grads(net, X, T)
    numeric = finite_diff_grad(net, X, T, step)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    errs = np.abs(analytic - numeric) / denom
    return GradCheckReport(float(errs.max(initial=0.0)), errs)


def min_preactivation(net: DenseNet, X) -> float:
    """Smallest hidden pre-activation magnitude over a batch (kink distance)."""
    X, _ = _as_batch(net, X)
    _, cache = forward_cache(net, X)
    hidden = [np.abs(z).min() for _, z, _ in cache[:-1]]
    return float(min(hidden)) if hidden else np.inf


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    max_iters: int = 40
    early_stop_threshold: float = 1e-4
    batch_size: int = 64

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size <= 0:
            raise ValueError("learning_rate and batch_size must be positive")
        if self.max_iters < 0 or self.early_stop_threshold < 0:
            raise ValueError("max_iters and early_stop_threshold must be nonnegative")


@dataclass
class Adam:
    """Adaptive-moment optimizer over a flat parameter vector."""

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: np.ndarray | None = field(default=None, repr=False)
    v: np.ndarray | None = field(default=None, repr=False)

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        if self.m is None or self.m.shape != params.shape:
            self.m = np.zeros_like(params)
            self.v = np.zeros_like(params)
            self.t = 0
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1**self.t)
        v_hat = self.v / (1 - self.beta2**self.t)
        return params - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass
class TrainResult:
    net: DenseNet
    early_stopped: bool
    final_loss: float
    iterations: int


def train(
    net: DenseNet,
    X,
    T,
    cfg: TrainConfig,
    rng: np.random.Generator | None = None,
) -> TrainResult:
    """Fit ``net`` to ``(X, T)`` with Adam, stopping once the batch loss < threshold.

    The loss is checked before each update, so data the network already fits
    stops at iteration 0 without touching the weights. When the data is larger
    than ``cfg.batch_size`` a fresh minibatch is drawn each step from ``rng``.
    The input network is not modified.
    """
    X, T = _targets(net, X, T)
    net = net.copy()
    n = len(X)
    if cfg.max_iters == 0:
        return TrainResult(net, False, batch_loss(net, X, T), 0)
    if n > cfg.batch_size and rng is None:
        rng = np.random.default_rng(0)
    opt = Adam(cfg.learning_rate)
    loss = np.nan
    for it in range(cfg.max_iters):
        if n > cfg.batch_size:
            idx = rng.choice(n, size=cfg.batch_size, replace=False)
            xb, tb = X[idx], T[idx]
        else:
            xb, tb = X, T
        loss, gw, _ = loss_and_grads(net, xb, tb)
        if not np.isfinite(loss) or not np.all(np.isfinite(gw)):
            raise TrainingDivergedError(it, loss)
        if loss < cfg.early_stop_threshold:
            return TrainResult(net, True, loss, it)
        net.weights = opt.step(net.weights, gw)
    return TrainResult(net, False, float(loss), cfg.max_iters)
