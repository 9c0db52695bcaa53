import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from geese.baselines import BaselineConfig, _reflect, run_baseline
from geese.errors import ConfigError
from geese.evaluators import QueryLedger, builtin_problem, evaluate

S1_SEED7_RANDOM_QUERIES = 33  # frozen from the independent loop below


def first_feasible_by_hand(problem, seed, budget):
    rng = np.random.default_rng(seed)
    for i in range(budget):
        x = problem.lower + rng.uniform(size=problem.state_dim) * (problem.upper - problem.lower)
        if problem.accumulated(x)[0] <= problem.epsilon:
            return i + 1
    return None


def test_random_search_matches_hand_loop():
    p = builtin_problem("S1")
    out = run_baseline(p, BaselineConfig("random", seed=7), 1000)
    assert out.success
    assert out.total_queries == first_feasible_by_hand(p, 7, 1000) == S1_SEED7_RANDOM_QUERIES


def test_random_search_everything_feasible():
    p = builtin_problem("S1", epsilon=100.0)
    out = run_baseline(p, BaselineConfig("random"), 10)
    assert out.success and out.total_queries == 1


def test_random_consumes_shared_initial_points_first():
    p = builtin_problem("S1", epsilon=1e-9)
    init = np.random.default_rng(0).uniform(size=(5, 11))
    out = run_baseline(p, BaselineConfig("random"), 8, init)
    assert not out.success and out.total_queries == 8
    for rec, u in zip(out.ledger.log, init):
        assert np.allclose(rec.state, p.from_unit(u))


def test_population_must_fit_budget():
    p = builtin_problem("S1")
    with pytest.raises(ConfigError):
        run_baseline(p, BaselineConfig("ga", population=64), 32)
    with pytest.raises(ConfigError):
        BaselineConfig("pso", population=1)
    with pytest.raises(ConfigError):
        BaselineConfig("cmaes")


@pytest.mark.parametrize("algo", ["random", "ga", "pso"])
def test_budget_respected_and_success_sound(algo):
    p = builtin_problem("S2", epsilon=0.03)
    for seed in range(3):
        out = run_baseline(p, BaselineConfig(algo, population=10, seed=seed), 95)
        assert out.total_queries <= 95
        if out.success:
            assert evaluate(p, QueryLedger(1), out.final_state).accumulated <= p.epsilon
        else:
            assert out.total_queries == 95


def test_ga_best_so_far_nonincreasing():
    p = builtin_problem("S1", epsilon=1e-6)
    out = run_baseline(p, BaselineConfig("ga", population=12, seed=3), 240)
    best = [t["best_so_far"] for t in out.traces]
    assert len(best) > 10
    assert all(b <= a for a, b in zip(best, best[1:]))


def test_pso_stays_in_box():
    p = builtin_problem("S1", epsilon=1e-6)
    out = run_baseline(p, BaselineConfig("pso", population=8, seed=5), 200)
    V = np.array([p.to_unit(r.state) for r in out.ledger.log])
    assert np.all((V >= 0) & (V <= 1))


@settings(max_examples=200)
@given(st.lists(st.floats(-3, 4), min_size=1, max_size=8))
def test_reflection_lands_in_box(xs):
    x = np.array(xs)
    y, v = _reflect(x, np.ones_like(x))
    assert np.all((y >= 0) & (y <= 1))
    inside = (x >= 0) & (x <= 1)
    assert np.array_equal(y[inside], x[inside])
    once = ((x < 0) & (x >= -1)) | ((x > 1) & (x <= 2))
    assert np.all(v[once] == -1)
