"""Twin state selection: exploitation and exploration candidate generators.

Both generators emit points in the unit search cube. For problems with ordered
coordinates the points pass through the monotone post-processing before they
are scored, and gradients flow back through it.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from geese.errors import InvalidEnsembleError, TrainingDivergedError
from geese.evaluators import postprocess_monotone, postprocess_monotone_vjp
from geese.netcore import Adam, DenseNet, backward, forward_cache, init_net
from geese.surrogate import (
    Ensemble,
    HybridErrorModel,
    hybrid_error,
    weighted_disagreement,
    weighted_disagreement_grad,
)

SIGMA_MIN = 0.0288


@dataclass
class LatentSpec:
    """Latent sampling for both generators.

    ``dim=None`` means "same as the state dimension". Exploration latents are
    one-dimensional and drawn from ``[-explore_range, explore_range]``.
    """

    dim: int | None = None
    range: float = 5.0
    n_exploit: int = 64
    n_explore: int = 64
    explore_range: float = 5.0

    def __post_init__(self):
        if self.dim is not None and self.dim < 1:
            raise ValueError("latent dimension must be >= 1")
        if self.range <= 0 or self.explore_range <= 0:
            raise ValueError("latent range must be positive")
        if self.n_exploit < 1 or self.n_explore < 1:
            raise ValueError("candidate counts must be >= 1")


@dataclass
class Selection:
    index: int
    state: np.ndarray  # normalized state that gets scored / queried
    search_point: np.ndarray
    score: float


def _sigmoid(s):
    return 0.5 * (1.0 + np.tanh(0.5 * s))


def _to_state(U, monotone):
    return postprocess_monotone(U) if monotone else U


def _state_vjp(U, G, monotone):
    return postprocess_monotone_vjp(U, G) if monotone else G


# -- regularizer --------------------------------------------------------------


def diversity_regularizer(states, sigma_min: float = SIGMA_MIN) -> float:
    """Hinge ``max(sigma_min - std(first coordinate), 0)`` over a batch."""
    return diversity_regularizer_grad(states, sigma_min)[0]


def diversity_regularizer_grad(states, sigma_min: float = SIGMA_MIN) -> tuple[float, np.ndarray]:
    V = np.asarray(states, dtype=float)
    if V.ndim != 2 or len(V) < 2:
        raise ValueError("diversity regularizer needs a batch of at least two states")
    first = V[:, 0]
    sd = float(first.std())
    grad = np.zeros_like(V)
    value = max(sigma_min - sd, 0.0)
    if value > 0 and sd > 0:
        grad[:, 0] = -(first - first.mean()) / (len(V) * sd)
    return value, grad


# -- exploitation ---------------------------------------------------------------


@dataclass
class ExploitGenerator:
    """Exploitation candidate source.

    ``mode="network"`` maps the fixed latents through ``net`` and a sigmoid;
    ``mode="direct_state"`` treats the candidate points themselves as the
    trainable parameters (the fixed latents are their starting values).
    """

    mode: str
    fixed_latents: np.ndarray
    net: DenseNet | None = None
    states: np.ndarray | None = None
    monotone: bool = False
    opt: Adam = field(default_factory=lambda: Adam(1e-2))

    def copy(self) -> "ExploitGenerator":
        return replace(
            self,
            fixed_latents=self.fixed_latents,
            net=None if self.net is None else self.net.copy(),
            states=None if self.states is None else self.states.copy(),
            opt=replace(
                self.opt,
                m=None if self.opt.m is None else self.opt.m.copy(),
                v=None if self.opt.v is None else self.opt.v.copy(),
            ),
        )

    def search_points(self) -> np.ndarray:
        if self.mode == "network":
            out, _ = forward_cache(self.net, self.fixed_latents)
            return _sigmoid(out)
        return self.states

    def candidates(self) -> np.ndarray:
        return _to_state(self.search_points(), self.monotone)


def make_exploit_generator(
    state_dim: int,
    latent: LatentSpec,
    rng: np.random.Generator,
    mode: str = "direct_state",
    hidden=(32, 64, 32),
    lr: float = 1e-2,
    monotone: bool = False,
    initial_points: np.ndarray | None = None,
) -> ExploitGenerator:
    """Sample the fixed latents once and build the generator around them."""
    if mode == "network":
        d = latent.dim or state_dim
        Z = rng.uniform(-latent.range, latent.range, size=(latent.n_exploit, d))
        net = init_net([d, *hidden, state_dim], rng)
        return ExploitGenerator("network", Z, net=net, monotone=monotone, opt=Adam(lr))
    if mode != "direct_state":
        raise ValueError(f"unknown exploitation mode {mode!r}")
    if initial_points is None:
        initial_points = rng.uniform(size=(latent.n_exploit, state_dim))
    Z = np.clip(np.asarray(initial_points, dtype=float), 0.0, 1.0)
    return ExploitGenerator("direct_state", Z, states=Z.copy(), monotone=monotone, opt=Adam(lr))


def _exploit_loss(gen, model, U, reg):
    V = _to_state(U, gen.monotone)
    values, gV = hybrid_error(model, V)
    loss = float(values.mean())
    gV = gV / len(V)
    if reg is not None and len(V) >= 2:  # a single candidate has no spread to regularize
        r, gr = diversity_regularizer_grad(V, reg)
        loss += r
        gV = gV + gr
    return loss, _state_vjp(U, gV, gen.monotone)


def train_exploit(
    gen: ExploitGenerator,
    model: HybridErrorModel,
    steps: int,
    lr: float | None = None,
    reg: float | None = None,
) -> ExploitGenerator:
    """Descend the mean surrogate error over the fixed latents (network mode).

    ``reg`` is the diversity floor ``sigma_min``; ``None`` disables the
    regularizer. Surrogate weights are read, never written.
    """
    if gen.mode != "network":
        raise ValueError("train_exploit needs a network-mode generator")
    gen = gen.copy()
    if lr is not None:
        gen.opt.lr = lr
    for it in range(steps):
        out, cache = forward_cache(gen.net, gen.fixed_latents)
        U = _sigmoid(out)
        loss, gU = _exploit_loss(gen, model, U, reg)
        if not np.isfinite(loss):
            raise TrainingDivergedError(it, loss)
        gw, _ = backward(gen.net, cache, gU * U * (1.0 - U))
        gen.net.weights = gen.opt.step(gen.net.weights, gw)
    return gen


def direct_state_step(
    gen: ExploitGenerator,
    model: HybridErrorModel,
    steps: int,
    lr: float | None = None,
    reg: float | None = None,
) -> ExploitGenerator:
    """Move the stored candidate points downhill on the surrogate, clipped to the box."""
    if gen.mode != "direct_state":
        raise ValueError("direct_state_step needs a direct_state generator")
    gen = gen.copy()
    if lr is not None:
        gen.opt.lr = lr
    for it in range(steps):
        loss, gU = _exploit_loss(gen, model, gen.states, reg)
        if not np.isfinite(loss):
            raise TrainingDivergedError(it, loss)
        moved = gen.opt.step(gen.states.ravel(), gU.ravel()).reshape(gen.states.shape)
        # points with zero gradient stay put even when Adam carries momentum
        still = np.all(gU == 0, axis=1)
        moved[still] = gen.states[still]
        gen.states = np.clip(moved, 0.0, 1.0)
    return gen


def update_exploit(gen, model, steps, lr=None, reg=None) -> ExploitGenerator:
    if gen.mode == "network":
        return train_exploit(gen, model, steps, lr, reg)
    return direct_state_step(gen, model, steps, lr, reg)


def select_exploit(gen: ExploitGenerator, model: HybridErrorModel) -> Selection:
    """Candidate with the lowest surrogate error; ties go to the lowest index."""
    U = gen.search_points()
    V = _to_state(U, gen.monotone)
    values, _ = hybrid_error(model, V)
    i = int(np.argmin(values))
    return Selection(i, V[i].copy(), U[i].copy(), float(values[i]))


# -- exploration ----------------------------------------------------------------


@dataclass
class ExploreGenerator:
    """Randomly weighted perceptron from a scalar latent to the search cube."""

    net: DenseNet
    latents: np.ndarray
    latent_range: float = 5.0
    monotone: bool = False
    opt: Adam = field(default_factory=lambda: Adam(1e-2))

    def search_points(self) -> np.ndarray:
        out, _ = forward_cache(self.net, self.latents)
        return _sigmoid(out)

    def candidates(self) -> np.ndarray:
        return _to_state(self.search_points(), self.monotone)


def make_explore_generator(
    state_dim: int,
    latent: LatentSpec,
    rng: np.random.Generator,
    hidden=(),
    monotone: bool = False,
    lr: float = 1e-2,
) -> ExploreGenerator:
    net = init_net([1, *hidden, state_dim], rng)
    gen = ExploreGenerator(net, np.zeros((latent.n_explore, 1)), latent.explore_range, monotone, Adam(lr))
    return resample_explore(gen, rng)


def resample_explore(gen: ExploreGenerator, rng: np.random.Generator) -> ExploreGenerator:
    """Fresh standard-normal weights and fresh latents."""
    net = DenseNet(gen.net.layer_sizes, rng.standard_normal(len(gen.net.weights)), gen.net.activation)
    Z = rng.uniform(-gen.latent_range, gen.latent_range, size=gen.latents.shape)
    return replace(gen, net=net, latents=Z)


def redraw_latents(gen: ExploreGenerator, rng: np.random.Generator) -> ExploreGenerator:
    Z = rng.uniform(-gen.latent_range, gen.latent_range, size=gen.latents.shape)
    return replace(gen, latents=Z)


def select_explore(gen: ExploreGenerator, ens: Ensemble, w_implicit) -> Selection:
    """Candidate with the largest weighted ensemble disagreement (first on ties)."""
    if ens.size < 2:
        raise InvalidEnsembleError("exploration needs at least two ensemble members")
    U = gen.search_points()
    V = _to_state(U, gen.monotone)
    scores = np.atleast_1d(weighted_disagreement(ens, V, w_implicit))
    i = int(np.argmax(scores))
    return Selection(i, V[i].copy(), U[i].copy(), float(scores[i]))


def train_explore(gen: ExploreGenerator, ens: Ensemble, w_implicit, steps: int) -> ExploreGenerator:
    """Push the exploration generator toward high disagreement.

    Only used by the ablation that trains the exploration side instead of
    re-drawing its weights.
    """
    net = gen.net.copy()
    opt = gen.opt
    for it in range(steps):
        out, cache = forward_cache(net, gen.latents)
        U = _sigmoid(out)
        V = _to_state(U, gen.monotone)
        score, gV = weighted_disagreement_grad(ens, V, w_implicit)
        loss = -float(score.mean())
        if not np.isfinite(loss):
            raise TrainingDivergedError(it, loss)
        gU = _state_vjp(U, -gV / len(V), gen.monotone)
        gw, _ = backward(net, cache, gU * U * (1.0 - U))
        net.weights = opt.step(net.weights, gw)
    return replace(gen, net=net)
