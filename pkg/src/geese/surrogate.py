"""Hybrid surrogate error model.

An ensemble of base networks estimates the implicit (expensive) error terms;
explicit terms with closed forms are evaluated exactly. The weighted sum of
both is the surrogate accumulated error used to steer the generators, and the
spread of the ensemble members scores how informative a state would be.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from geese.errors import EvaluatorFaultError, InputShapeError, InvalidEnsembleError
from geese.netcore import DenseNet, TrainConfig, forward_cache, backward, init_net, train


@dataclass
class Ensemble:
    members: list[DenseNet]

    def __post_init__(self):
        if not self.members:
            raise InvalidEnsembleError("ensemble needs at least one member")
        sizes = self.members[0].layer_sizes
        if any(m.layer_sizes != sizes for m in self.members):
            raise InvalidEnsembleError("ensemble members must share layer sizes")

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def state_dim(self) -> int:
        return self.members[0].input_dim

    @property
    def implicit_count(self) -> int:
        return self.members[0].output_dim

    def copy(self) -> "Ensemble":
        return Ensemble([m.copy() for m in self.members])


def make_ensemble(
    state_dim: int,
    implicit_count: int,
    hidden: Sequence[int],
    size: int,
    rng: np.random.Generator,
    activation: str = "relu",
) -> Ensemble:
    sizes = [state_dim, *hidden, implicit_count]
    return Ensemble([init_net(sizes, rng, activation) for _ in range(size)])


def _batch(ens: Ensemble, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.ndim != 2 or X.shape[1] != ens.state_dim:
        raise InputShapeError(f"state has shape {x.shape}, ensemble expects dimension {ens.state_dim}")
    return X, single


def member_outputs(ens: Ensemble, x) -> np.ndarray:
    """Stacked member predictions, shape ``(L, B, k)`` (``(L, k)`` for one state)."""
    X, single = _batch(ens, x)
    outs = np.stack([forward_cache(m, X)[0] for m in ens.members])
    return outs[:, 0, :] if single else outs


def predict_implicit(ens: Ensemble, x) -> np.ndarray:
    """Ensemble-mean estimate of the implicit error vector."""
    return member_outputs(ens, x).mean(axis=0)


def disagreement(ens: Ensemble, x) -> np.ndarray:
    """Population standard deviation of member predictions, per error element."""
    if ens.size < 2:
        raise InvalidEnsembleError("disagreement needs at least two members")
    return member_outputs(ens, x).std(axis=0)


def weighted_disagreement(ens: Ensemble, x, w_implicit) -> np.ndarray | float:
    w = np.asarray(w_implicit, dtype=float)
    if w.shape != (ens.implicit_count,):
        raise InputShapeError(f"implicit weights must have length {ens.implicit_count}")
    s = disagreement(ens, x) @ w
    return float(s) if np.ndim(s) == 0 else s


def weighted_disagreement_grad(ens: Ensemble, X: np.ndarray, w_implicit) -> tuple[np.ndarray, np.ndarray]:
    """Batched weighted disagreement and its gradient w.r.t. the states."""
    if ens.size < 2:
        raise InvalidEnsembleError("disagreement needs at least two members")
    X, _ = _batch(ens, X)
    w = np.asarray(w_implicit, dtype=float)
    runs = [forward_cache(m, X) for m in ens.members]
    outs = np.stack([r[0] for r in runs])
    mean = outs.mean(axis=0)
    sd = outs.std(axis=0)
    score = sd @ w
    L = ens.size
    # d sd / d out_i = (out_i - mean) / (L sd); zero where all members agree
    safe = np.where(sd > 0, sd, 1.0)
    coef = np.where(sd > 0, w / (L * safe), 0.0)
    grad = np.zeros_like(X)
    for m, (out, cache), o in zip(ens.members, runs, outs):
        _, gx = backward(m, cache, (o - mean) * coef)
        grad += gx
    return score, grad


@dataclass
class ExplicitTerm:
    """A closed-form error term over a batch of states, with its gradient.

    ``value`` maps ``(B, D)`` to ``(B,)``; ``grad`` maps ``(B, D)`` to ``(B, D)``.
    """

    name: str
    value: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray]


@dataclass
class HybridErrorModel:
    """Weighted sum of ensemble-estimated implicit errors and exact explicit errors.

    ``mode="sum"`` replaces the element-wise estimate with a single-output
    ensemble trained on the weighted sum of the implicit errors; explicit terms
    are still added exactly. It exists only for ablation runs. With a single
    implicit error the two modes describe the same model.
    """

    ensemble: Ensemble
    explicit_terms: list[ExplicitTerm]
    weights: np.ndarray
    implicit_count: int
    mode: str = "elementwise"
    _w: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if self.mode not in ("elementwise", "sum"):
            raise ValueError(f"unknown surrogate mode {self.mode!r}")
        if len(self.weights) != self.implicit_count + len(self.explicit_terms):
            raise ValueError("weights must cover implicit and explicit terms")
        if np.any(self.weights < 0):
            raise ValueError("error weights must be nonnegative")
        expected = 1 if self.mode == "sum" else self.implicit_count
        if self.ensemble.implicit_count != expected:
            raise InputShapeError(
                f"ensemble has {self.ensemble.implicit_count} outputs, mode {self.mode} needs {expected}"
            )

    @property
    def implicit_weights(self) -> np.ndarray:
        """Weights used to score disagreement."""
        if self.mode == "sum":
            return np.ones(1)
        return self.weights[: self.implicit_count]

    def training_targets(self, errors: np.ndarray) -> np.ndarray:
        """Ensemble regression targets for rows of full error vectors."""
        errors = np.atleast_2d(np.asarray(errors, dtype=float))
        if self.mode == "sum":
            k = self.implicit_count
            return (errors[:, :k] @ self.weights[:k])[:, None]
        return errors[:, : self.implicit_count]


def hybrid_error(model: HybridErrorModel, x) -> tuple:
    """Surrogate accumulated error and its exact gradient w.r.t. the state.

    Accepts one state (returns ``(float, (D,))``) or a batch (returns
    ``((B,), (B, D))``).
    """
    ens = model.ensemble
    X, single = _batch(ens, x)
    L = ens.size
    w_out = model.implicit_weights / L
    value = np.zeros(len(X))
    grad = np.zeros_like(X)
    for m in ens.members:
        out, cache = forward_cache(m, X)
        value += out @ w_out
        _, gx = backward(m, cache, np.broadcast_to(w_out, out.shape))
        grad += gx
    for w, term in zip(model.weights[model.implicit_count :], model.explicit_terms):
        if w == 0:
            continue
        v = np.asarray(term.value(X), dtype=float)
        if not np.all(np.isfinite(v)):
            raise EvaluatorFaultError(f"explicit term {term.name} is not finite")
        value += w * v
        grad += w * term.grad(X)
    if single:
        return float(value[0]), grad[0]
    return value, grad


def _bootstrap_fit(member, X, Y, idx, cfg, rng):
    res = train(member, X[idx], Y[idx], cfg, rng)
    if cfg.max_iters == 0:
        # no step was allowed, but a member that already fits still counts
        return res.net, res.final_loss < cfg.early_stop_threshold
    return res.net, res.early_stopped


def fit_ensemble_initial(
    ens: Ensemble,
    X,
    Y,
    cfg: TrainConfig,
    rng: np.random.Generator,
) -> tuple[Ensemble, int]:
    """Train each member on its own bootstrap resample of ``(X, Y)``.

    Returns the trained ensemble and the number of members that early-stopped.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float).reshape(len(X), -1)
    if len(X) == 0:
        raise ValueError("cannot fit on an empty dataset")
    members = []
    n_early = 0
    for m in ens.members:
        idx = rng.integers(0, len(X), size=len(X))
        net, stopped = _bootstrap_fit(m, X, Y, idx, cfg, rng)
        members.append(net)
        n_early += stopped
    return Ensemble(members), n_early


def member_training_sets(
    n_members: int,
    n_new: int,
    archive_size: int,
    n_sample: int,
    rng: np.random.Generator,
) -> list[np.ndarray]:
    """Row indices for each member's fine-tuning set.

    Rows ``0..n_new-1`` refer to the new pairs; rows from ``n_new`` on index
    the archive. Each set holds every new pair plus ``n_sample`` archive rows
    drawn uniformly with replacement.
    """
    if archive_size == 0 and n_sample > 0:
        raise ValueError("cannot sample from an empty archive")
    if n_new + n_sample == 0:
        raise ValueError("fine-tuning set would be empty")
    sets = []
    for _ in range(n_members):
        drawn = rng.integers(0, archive_size, size=n_sample) if n_sample else np.zeros(0, int)
        sets.append(np.concatenate([np.arange(n_new), n_new + drawn]))
    return sets


def fit_ensemble_update(
    ens: Ensemble,
    new_X,
    new_Y,
    archive_X,
    archive_Y,
    n_sample: int,
    cfg: TrainConfig,
    rng: np.random.Generator,
    reinit: bool = False,
) -> tuple[Ensemble, int]:
    """Fine-tune every member on the new pairs plus ``n_sample`` archive draws.

    ``reinit=True`` re-draws member weights before training; it is an
    experiment switch, the default keeps the previous weights.
    """
    new_X = np.asarray(new_X, dtype=float).reshape(-1, ens.state_dim)
    archive_X = np.asarray(archive_X, dtype=float).reshape(-1, ens.state_dim)
    k = ens.implicit_count
    new_Y = np.asarray(new_Y, dtype=float).reshape(-1, k)
    archive_Y = np.asarray(archive_Y, dtype=float).reshape(-1, k)
    if len(archive_X) == 0:
        raise ValueError("archive is empty")
    sets = member_training_sets(ens.size, len(new_X), len(archive_X), n_sample, rng)
    X = np.concatenate([new_X, archive_X])
    Y = np.concatenate([new_Y, archive_Y])
    members = []
    n_early = 0
    for m, idx in zip(ens.members, sets):
        if reinit:
            m = init_net(m.layer_sizes, rng, m.activation)
        net, stopped = _bootstrap_fit(m, X, Y, idx, cfg, rng)
        members.append(net)
        n_early += stopped
    return Ensemble(members), n_early
