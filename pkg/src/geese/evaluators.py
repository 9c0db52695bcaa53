"""Physical evaluation layer: error components, built-in problems, query ledger.

States handed to :func:`evaluate` are in physical units. Optimizers work in the
unit cube; :meth:`ProblemSpec.from_unit` / :meth:`ProblemSpec.to_unit` convert
between the two, and :meth:`ProblemSpec.search_to_unit` applies the monotone
post-processing used by problems with ordered coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from typing import Callable

import numpy as np

from geese.errors import (
    BudgetExceededError,
    ConfigError,
    InputShapeError,
    InvalidStateError,
    InvalidTargetError,
)
from geese.surrogate import ExplicitTerm

PROBLEMS = ("S1", "S2", "S3")
DEFAULT_EPSILON = 0.075


# -- error components ---------------------------------------------------------


def reconstruction_error(F, y) -> np.ndarray | float:
    """Mean relative absolute deviation of reconstructed observations.

    ``sum_i |F_i - y_i| / (m |y_i|)``; ``F`` may be a batch of shape ``(B, m)``.
    """
    y = np.asarray(y, dtype=float)
    F = np.asarray(F, dtype=float)
    if y.ndim != 1 or len(y) < 1:
        raise InputShapeError("target must be a nonempty vector")
    if np.any(y == 0):
        raise InvalidTargetError("target components must be nonzero")
    if F.shape[-1] != len(y):
        raise InputShapeError(f"observation has {F.shape[-1]} entries, target has {len(y)}")
    out = np.sum(np.abs(F - y) / (len(y) * np.abs(y)), axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def normalize(x, bounds) -> np.ndarray:
    lower, upper = (np.asarray(b, dtype=float) for b in bounds)
    return (np.asarray(x, dtype=float) - lower) / (upper - lower)


def _unit_feasible_domain(v: np.ndarray) -> np.ndarray:
    return np.mean(np.maximum(v - 1.0, 0.0) + np.maximum(-v, 0.0), axis=-1)


def _unit_feasible_domain_grad(v: np.ndarray) -> np.ndarray:
    return ((v > 1.0).astype(float) - (v < 0.0).astype(float)) / v.shape[-1]


def feasible_domain_error(x, bounds) -> np.ndarray | float:
    """Mean distance of normalized coordinates outside ``[0, 1]``."""
    out = _unit_feasible_domain(normalize(x, bounds))
    return float(out) if np.ndim(out) == 0 else out


def _unit_balance(v: np.ndarray) -> np.ndarray:
    return np.std(v, axis=-1)


def _unit_balance_grad(v: np.ndarray) -> np.ndarray:
    D = v.shape[-1]
    sd = np.std(v, axis=-1, keepdims=True)
    safe = np.where(sd > 0, sd, 1.0)
    return np.where(sd > 0, (v - v.mean(axis=-1, keepdims=True)) / (D * safe), 0.0)


def balance_error(x, bounds) -> np.ndarray | float:
    """Population standard deviation of the normalized coordinates."""
    v = normalize(x, bounds)
    if v.shape[-1] < 2:
        raise ValueError("balance error needs at least two coordinates")
    out = _unit_balance(v)
    return float(out) if np.ndim(out) == 0 else out


def inequality_error(c) -> np.ndarray | float:
    """Mean positive part of constraint values ``c_i <= 0``."""
    c = np.asarray(c, dtype=float)
    if c.shape[-1] < 1:
        raise ValueError("need at least one constraint value")
    out = np.mean(np.maximum(c, 0.0), axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def _sigmoid(s):
    return 0.5 * (1.0 + np.tanh(0.5 * s))


def postprocess_monotone(x_raw) -> np.ndarray:
    """Map raw coordinates in ``[0, 1]`` to a nondecreasing state.

    The first coordinate is kept as the anchor; coordinate ``i`` becomes
    ``x_1 + sigmoid(x_1 + ... + x_i) * (1 - x_1)``. Works on batches.
    """
    r = np.asarray(x_raw, dtype=float)
    s = _sigmoid(np.cumsum(r, axis=-1))
    x1 = r[..., :1]
    out = x1 + s * (1.0 - x1)
    out[..., 0] = r[..., 0]
    return out


def postprocess_monotone_vjp(x_raw, grad_out) -> np.ndarray:
    """Gradient of ``sum(grad_out * postprocess_monotone(x_raw))`` w.r.t. ``x_raw``."""
    r = np.atleast_2d(np.asarray(x_raw, dtype=float))
    g = np.atleast_2d(np.asarray(grad_out, dtype=float))
    s = _sigmoid(np.cumsum(r, axis=1))
    ds = s * (1.0 - s)
    x1 = r[:, :1]
    g_tail = g[:, 1:]
    # out_i (i >= 2) depends on r_j for all j <= i through the partial sum
    through_sum = g_tail * ds[:, 1:] * (1.0 - x1)
    rev = np.cumsum(through_sum[:, ::-1], axis=1)[:, ::-1]
    grad = np.zeros_like(r)
    grad[:, 1:] = rev
    grad[:, 0] = g[:, 0] + np.sum(g_tail * (1.0 - s[:, 1:]), axis=1) + rev[:, 0]
    return grad.reshape(np.shape(x_raw))


# -- problems -----------------------------------------------------------------


@dataclass
class ProblemSpec:
    """A black-box inverse problem with its weighted error structure.

    The first ``implicit_count`` entries of the error vector come from
    ``implicit_fn`` (physical states, treated as opaque); the remaining entries
    are the ``explicit_terms`` evaluated on normalized states.
    """

    name: str
    lower: np.ndarray
    upper: np.ndarray
    target: np.ndarray
    weights: np.ndarray
    implicit_count: int
    implicit_fn: Callable[[np.ndarray], np.ndarray]
    explicit_terms: list[ExplicitTerm]
    error_names: list[str]
    epsilon: float = DEFAULT_EPSILON
    monotone_constraints: bool = False
    forward_model: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False)
    reference_state: np.ndarray | None = None

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        self.target = np.asarray(self.target, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.epsilon <= 0:
            raise ConfigError("feasibility threshold must be positive")
        if self.lower.shape != self.upper.shape or np.any(self.lower >= self.upper):
            raise ConfigError("bounds need lower < upper in every dimension")
        if self.implicit_count > len(self.weights):
            raise ConfigError("more implicit errors than total errors")
        if len(self.weights) != self.implicit_count + len(self.explicit_terms):
            raise ConfigError("weight count does not match error terms")

    @property
    def state_dim(self) -> int:
        return len(self.lower)

    @property
    def obs_dim(self) -> int:
        return len(self.target)

    @property
    def total_errors(self) -> int:
        return len(self.weights)

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.lower, self.upper

    def with_epsilon(self, epsilon: float) -> "ProblemSpec":
        from dataclasses import replace

        return replace(self, epsilon=float(epsilon))

    def to_unit(self, x) -> np.ndarray:
        return normalize(x, self.bounds)

    def from_unit(self, v) -> np.ndarray:
        return self.lower + np.asarray(v, dtype=float) * (self.upper - self.lower)

    def search_to_unit(self, u) -> np.ndarray:
        """Map search-space points (unit cube) to normalized states."""
        return postprocess_monotone(u) if self.monotone_constraints else np.asarray(u, dtype=float)

    def search_vjp(self, u, grad_v) -> np.ndarray:
        if self.monotone_constraints:
            return postprocess_monotone_vjp(u, grad_v)
        return np.asarray(grad_v, dtype=float)

    def error_vectors(self, X) -> np.ndarray:
        """Error vectors for a batch of physical states, shape ``(B, h)``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        V = self.to_unit(X)
        cols = [np.asarray(self.implicit_fn(X), dtype=float).reshape(len(X), -1)]
        cols += [np.asarray(t.value(V), dtype=float).reshape(-1, 1) for t in self.explicit_terms]
        return np.concatenate(cols, axis=1)

    def accumulated(self, X) -> np.ndarray:
        return self.error_vectors(X) @ self.weights


@dataclass
class EvalResult:
    error_vector: np.ndarray
    accumulated: float
    feasible: bool


@dataclass
class QueryRecord:
    index: int
    state: np.ndarray
    error_vector: np.ndarray
    accumulated: float


@dataclass
class QueryLedger:
    """Append-only record of physical evaluations against a fixed budget."""

    budget: int
    log: list[QueryRecord] = field(default_factory=list)

    def __post_init__(self):
        if self.budget < 1:
            raise ConfigError("budget must be positive")

    @property
    def count(self) -> int:
        return len(self.log)

    @property
    def remaining(self) -> int:
        return self.budget - len(self.log)


def evaluate(problem: ProblemSpec, ledger: QueryLedger, x) -> EvalResult:
    """Query the physical error of one state and record it in ``ledger``."""
    if ledger.count >= ledger.budget:
        raise BudgetExceededError(f"query budget of {ledger.budget} exhausted")
    x = np.asarray(x, dtype=float)
    if x.shape != (problem.state_dim,):
        raise InputShapeError(f"state has shape {x.shape}, expected ({problem.state_dim},)")
    if not np.all(np.isfinite(x)):
        raise InvalidStateError("state contains non-finite values")
    e = problem.error_vectors(x[None, :])[0]
    acc = float(e @ problem.weights)
    ledger.log.append(QueryRecord(ledger.count, x.copy(), e.copy(), acc))
    return EvalResult(e, acc, acc <= problem.epsilon)


def feasible_fraction(problem: ProblemSpec, n_samples: int = 100_000, seed: int = 0, epsilon=None) -> float:
    """Monte Carlo share of uniform in-box search points that are feasible."""
    eps = problem.epsilon if epsilon is None else epsilon
    acc = _uniform_accumulated(problem, n_samples, seed)
    return float(np.mean(acc <= eps))


def calibrate_epsilon(problem: ProblemSpec, fraction: float, n_samples: int = 100_000, seed: int = 0) -> float:
    """Threshold at which ``fraction`` of uniform search points are feasible."""
    if not 0 < fraction < 1:
        raise ValueError("fraction must lie in (0, 1)")
    acc = _uniform_accumulated(problem, n_samples, seed)
    return float(np.quantile(acc, fraction))


def _uniform_accumulated(problem, n_samples, seed):
    rng = np.random.default_rng(seed)
    out = []
    for start in range(0, n_samples, 20_000):
        n = min(20_000, n_samples - start)
        U = rng.uniform(size=(n, problem.state_dim))
        out.append(problem.accumulated(problem.from_unit(problem.search_to_unit(U))))
    return np.concatenate(out)


# -- fixtures and built-in problems ------------------------------------------


def read_table(text: str) -> np.ndarray:
    """Parse the fixture format: ``rows cols`` header, then row-major values."""
    tokens = text.split()
    if len(tokens) < 2:
        raise ValueError("fixture is missing its header")
    rows, cols = int(tokens[0]), int(tokens[1])
    values = np.array([float(t) for t in tokens[2:]])
    if values.size != rows * cols:
        raise ValueError(f"fixture declares {rows}x{cols} but holds {values.size} values")
    return values.reshape(rows, cols)


def write_table(arr) -> str:
    arr = np.atleast_2d(np.asarray(arr, dtype=float))
    lines = [f"{arr.shape[0]} {arr.shape[1]}"]
    lines += [" ".join(repr(float(v)) for v in row) for row in arr]
    return "\n".join(lines) + "\n"


def load_fixture(name: str) -> np.ndarray:
    try:
        text = resources.files("geese.fixtures").joinpath(name).read_text()
    except FileNotFoundError as exc:
        raise ConfigError(f"missing fixture {name}") from exc
    return read_table(text)


def sine_features(V: np.ndarray) -> np.ndarray:
    return np.sin(0.5 * np.pi * V)


def _forward_family(A, b, lower, upper):
    def F(X):
        V = normalize(X, (lower, upper))
        return sine_features(V) @ A.T + b

    return F


def feasible_domain_term() -> ExplicitTerm:
    return ExplicitTerm("feasible_domain", _unit_feasible_domain, _unit_feasible_domain_grad)


def balance_term() -> ExplicitTerm:
    return ExplicitTerm("balance", _unit_balance, _unit_balance_grad)


def ordering_term(lower: np.ndarray, upper: np.ndarray) -> ExplicitTerm:
    """Inequality error for ``x_i - x_{i+1} < 0`` in physical units."""
    lower = np.asarray(lower, dtype=float)
    span = np.asarray(upper, dtype=float) - lower

    def value(V):
        X = lower + V * span
        return np.mean(np.maximum(X[..., :-1] - X[..., 1:], 0.0), axis=-1)

    def grad(V):
        X = lower + V * span
        active = (X[..., :-1] - X[..., 1:] > 0).astype(float) / (X.shape[-1] - 1)
        g = np.zeros_like(X)
        g[..., :-1] += active
        g[..., 1:] -= active
        return g * span

    return ExplicitTerm("ordering", value, grad)


def builtin_problem(name: str, epsilon: float | None = None) -> ProblemSpec:
    """Synthetic stand-ins for the turbofan, actuator and inverter problems.

    ``S1``: 11 states, error vector ``[reconstruction, feasible_domain,
    balance]`` weighted ``[1, 0.1, 0.1]``. ``S2``: 20 states, ``[reconstruction,
    constraint, feasible_domain]`` weighted ``[1, 1, 0.1]`` with seven opaque
    constraints. ``S3``: 30 ordered states searched through the monotone
    post-processing, ``[reconstruction, feasible_domain, ordering]`` weighted
    ``[1, 0.1, 10]``.
    """
    if name not in PROBLEMS:
        raise ConfigError(f"unknown problem {name!r}; choose from {', '.join(PROBLEMS)}")
    eps = DEFAULT_EPSILON if epsilon is None else float(epsilon)
    A = load_fixture(f"{name}.A")
    b = load_fixture(f"{name}.b").ravel()
    xstar = load_fixture(f"{name}.xstar").ravel()
    bounds = load_fixture(f"{name}.bounds")
    lower, upper = bounds[0], bounds[1]
    F = _forward_family(A, b, lower, upper)
    y = F(xstar[None, :])[0]

    def recon(X):
        return reconstruction_error(F(X), y)

    if name == "S1":
        return ProblemSpec(
            name, lower, upper, y, [1.0, 0.1, 0.1], 1, recon,
            [feasible_domain_term(), balance_term()],
            ["reconstruction", "feasible_domain", "balance"],
            eps, False, F, xstar,
        )
    if name == "S2":
        C = load_fixture("S2.C")
        d = load_fixture("S2.d").ravel()

        def implicit(X):
            V = normalize(X, (lower, upper))
            c = sine_features(V) ** 2 @ C.T + d
            return np.column_stack([recon(X), inequality_error(c)])

        return ProblemSpec(
            name, lower, upper, y, [1.0, 1.0, 0.1], 2, implicit,
            [feasible_domain_term()],
            ["reconstruction", "constraint", "feasible_domain"],
            eps, False, F, xstar,
        )
    return ProblemSpec(
        name, lower, upper, y, [1.0, 0.1, 10.0], 1, recon,
        [feasible_domain_term(), ordering_term(lower, upper)],
        ["reconstruction", "feasible_domain", "ordering"],
        eps, True, F, xstar,
    )
