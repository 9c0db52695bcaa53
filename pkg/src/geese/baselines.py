"""Reference optimizers sharing the query ledger: random search, GA and PSO.

All three search the unit cube and go through the problem's search transform,
so they see exactly the states GEESE would. Population methods evaluate a full
generation before checking feasibility.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from geese.errors import BudgetExceededError, ConfigError
from geese.evaluators import ProblemSpec, QueryLedger, evaluate
from geese.optimizer import RunOutcome, outcome_from_ledger

ALGORITHMS = ("random", "ga", "pso")


@dataclass
class BaselineConfig:
    algo: str = "random"
    population: int = 64
    tournament_size: int = 2
    crossover_prob: float = 0.9
    mutation_std: float = 0.1
    mutation_prob: float | None = None  # per gene; default 1/D
    inertia: float = 0.729
    cognitive: float = 1.49445
    social: float = 1.49445
    seed: int = 0

    def __post_init__(self):
        if self.algo not in ALGORITHMS:
            raise ConfigError(f"unknown baseline {self.algo!r}")
        if self.algo != "random" and self.population < 2:
            raise ConfigError("population must be >= 2")


class _Stop(Exception):
    def __init__(self, record):
        self.record = record


def _eval_batch(problem, ledger, U):
    """Evaluate search points in order; returns accumulated errors."""
    V = problem.search_to_unit(U)
    acc = np.empty(len(U))
    for i, v in enumerate(V):
        acc[i] = evaluate(problem, ledger, problem.from_unit(v)).accumulated
    return acc


def _first_feasible(problem, ledger, start):
    for rec in ledger.log[start:]:
        if rec.accumulated <= problem.epsilon:
            return rec
    return None


def _init_points(problem, cfg, rng, init_points, n):
    pts = np.zeros((0, problem.state_dim)) if init_points is None else np.asarray(init_points, float)[:n]
    if len(pts) < n:
        pts = np.vstack([pts, rng.uniform(size=(n - len(pts), problem.state_dim))])
    return pts


def _random(problem, cfg, ledger, rng, init_points):
    pool = [] if init_points is None else list(np.asarray(init_points, float))
    while True:
        u = pool.pop(0) if pool else rng.uniform(size=problem.state_dim)
        _eval_batch(problem, ledger, u[None, :])
        if ledger.log[-1].accumulated <= problem.epsilon:
            raise _Stop(ledger.log[-1])


def _generation(problem, ledger, U, traces, gen):
    start = ledger.count
    exhausted = None
    try:
        acc = _eval_batch(problem, ledger, U)
    except BudgetExceededError as exc:
        exhausted = exc
    if ledger.log:
        traces.append({"generation": gen, "best_so_far": min(r.accumulated for r in ledger.log)})
    hit = _first_feasible(problem, ledger, start)
    if hit is not None:
        raise _Stop(hit)
    if exhausted is not None:
        raise exhausted
    return acc


def _ga(problem, cfg, ledger, rng, init_points, traces):
    P, D = cfg.population, problem.state_dim
    pm = cfg.mutation_prob if cfg.mutation_prob is not None else 1.0 / D
    pop = _init_points(problem, cfg, rng, init_points, P)
    fit = _generation(problem, ledger, pop, traces, 0)
    gen = 0
    while True:
        gen += 1
        elite = pop[np.argmin(fit)].copy()
        elite_fit = fit.min()
        children = []
        while len(children) < P - 1:
            a, b = (_tournament(fit, cfg.tournament_size, rng) for _ in range(2))
            child = pop[a].copy()
            if rng.random() < cfg.crossover_prob:
                mask = rng.random(D) < 0.5
                child[mask] = pop[b][mask]
            mut = rng.random(D) < pm
            child[mut] += rng.normal(0.0, cfg.mutation_std, size=mut.sum())
            children.append(np.clip(child, 0.0, 1.0))
        children = np.array(children)
        child_fit = _generation(problem, ledger, children, traces, gen)
        pop = np.vstack([elite[None, :], children])
        fit = np.concatenate([[elite_fit], child_fit])


def _tournament(fit, size, rng):
    idx = rng.integers(0, len(fit), size=size)
    return idx[np.argmin(fit[idx])]


def _reflect(x, v):
    """Reflect positions (and flip velocities) off the walls of the unit cube."""
    for _ in range(4):
        low, high = x < 0, x > 1
        if not (low.any() or high.any()):
            break
        x = np.where(low, -x, np.where(high, 2.0 - x, x))
        v = np.where(low | high, -v, v)
    return np.clip(x, 0.0, 1.0), v


def _pso(problem, cfg, ledger, rng, init_points, traces):
    P, D = cfg.population, problem.state_dim
    x = _init_points(problem, cfg, rng, init_points, P)
    v = rng.uniform(-0.1, 0.1, size=(P, D))
    fit = _generation(problem, ledger, x, traces, 0)
    pbest, pfit = x.copy(), fit.copy()
    gen = 0
    while True:
        gen += 1
        g = pbest[np.argmin(pfit)]
        r1, r2 = rng.random((P, D)), rng.random((P, D))
        v = cfg.inertia * v + cfg.cognitive * r1 * (pbest - x) + cfg.social * r2 * (g - x)
        x, v = _reflect(x + v, v)
        fit = _generation(problem, ledger, x, traces, gen)
        better = fit < pfit
        pbest[better], pfit[better] = x[better], fit[better]


def run_baseline(problem: ProblemSpec, cfg: BaselineConfig, budget: int, init_points=None) -> RunOutcome:
    """Run one baseline until the first feasible query or the budget runs out.

    ``init_points`` (unit search cube) seeds the initial population, or the
    first draws of random search, so every method starts from the same design.
    """
    if cfg.algo in ("ga", "pso") and budget < cfg.population:
        raise ConfigError(f"budget {budget} is smaller than the population {cfg.population}")
    if budget < 1:
        raise ConfigError("budget must be positive")
    rng = np.random.default_rng(cfg.seed)
    ledger = QueryLedger(budget)
    traces: list = []
    n_init = 0 if init_points is None else len(init_points)
    if cfg.algo in ("ga", "pso"):
        n_init = cfg.population
    try:
        if cfg.algo == "random":
            _random(problem, cfg, ledger, rng, init_points)
        elif cfg.algo == "ga":
            _ga(problem, cfg, ledger, rng, init_points, traces)
        else:
            _pso(problem, cfg, ledger, rng, init_points, traces)
    except _Stop as stop:
        return outcome_from_ledger(problem, ledger, True, n_init, traces, stop.record)
    except BudgetExceededError:
        pass
    return outcome_from_ledger(problem, ledger, False, n_init, traces)
