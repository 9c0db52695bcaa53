from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from geese.errors import (
    BudgetExceededError,
    ConfigError,
    InputShapeError,
    InvalidStateError,
    InvalidTargetError,
)
from geese.evaluators import (
    QueryLedger,
    balance_error,
    builtin_problem,
    calibrate_epsilon,
    evaluate,
    feasible_domain_error,
    feasible_fraction,
    inequality_error,
    load_fixture,
    postprocess_monotone,
    postprocess_monotone_vjp,
    read_table,
    reconstruction_error,
    write_table,
)


def test_reconstruction_worked_values():
    assert reconstruction_error([121.0, 10.63], [121.0, 10.63]) == 0.0
    assert reconstruction_error([133.1, 10.63], [121.0, 10.63]) == pytest.approx(0.05, abs=1e-12)
    assert reconstruction_error([2.0], [1.0]) == 1.0


def test_reconstruction_bad_target():
    with pytest.raises(InvalidTargetError):
        reconstruction_error([1.0, 2.0], [0.0, 1.0])
    with pytest.raises(InputShapeError):
        reconstruction_error([1.0], [1.0, 2.0])


def test_feasible_domain_worked_values():
    bounds = (np.zeros(3), np.full(3, 2.0))
    assert feasible_domain_error([0.0, 1.0, 2.0], bounds) == 0.0
    assert feasible_domain_error([1.5], ([0.0], [1.0])) == 0.5
    assert feasible_domain_error([-0.25], ([0.0], [1.0])) == 0.25


def test_balance_worked_values():
    assert balance_error([3.0, 3.0, 3.0], ([2.0] * 3, [4.0] * 3)) == 0.0
    assert balance_error([0.0, 1.0], ([0.0, 0.0], [1.0, 1.0])) == 0.5
    with pytest.raises(ValueError):
        balance_error([0.5], ([0.0], [1.0]))


def test_balance_matches_brute_force():
    rng = np.random.default_rng(0)
    lower, upper = rng.uniform(0, 1, 6), rng.uniform(2, 3, 6)
    x = rng.uniform(lower, upper)
    v = (x - lower) / (upper - lower)
    mu = sum(v) / len(v)
    sd = (sum((a - mu) ** 2 for a in v) / len(v)) ** 0.5
    assert balance_error(x, (lower, upper)) == pytest.approx(sd, abs=1e-14)


def test_inequality_worked_values():
    assert inequality_error([-1.0, -0.5, 0.0]) == 0.0
    assert inequality_error([-1, 2, -3, 4, 0, -1, -2]) == pytest.approx(6 / 7, abs=1e-15)
    assert inequality_error([0.3]) == pytest.approx(0.3)


@settings(max_examples=200)
@given(arrays(float, st.integers(1, 12), elements=st.floats(-3, 3)))
def test_explicit_terms_zero_only_on_their_sets(c):
    v = inequality_error(c)
    assert (v == 0) == bool(np.all(c <= 0))
    x = np.asarray(c)
    fd = feasible_domain_error(x, (np.full(len(x), -1.0), np.full(len(x), 1.0)))
    assert (fd == 0) == bool(np.all(np.abs(x) <= 1))


def test_postprocess_worked_values():
    out = postprocess_monotone([0.0, 0.0, 0.4])
    assert out[0] == 0.0 and out[1] == 0.5
    assert np.all(postprocess_monotone([1.0, 0.3, 0.2, 0.9]) == 1.0)


def test_postprocess_strictly_increasing_random():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        raw = rng.uniform(1e-3, 1.0, size=int(rng.integers(2, 31)))
        raw[0] = rng.uniform(0, 0.999)
        assert np.all(np.diff(postprocess_monotone(raw)) > 0)


def test_postprocess_batch_and_vjp():
    rng = np.random.default_rng(2)
    R = rng.uniform(size=(4, 6))
    assert np.allclose(postprocess_monotone(R), np.stack([postprocess_monotone(r) for r in R]))
    G = rng.normal(size=(4, 6))
    grad = postprocess_monotone_vjp(R, G)
    h = 1e-6
    for j in range(6):
        Rp, Rm = R.copy(), R.copy()
        Rp[:, j] += h
        Rm[:, j] -= h
        fd = np.sum((postprocess_monotone(Rp) - postprocess_monotone(Rm)) * G, axis=1) / (2 * h)
        assert np.allclose(grad[:, j], fd, rtol=1e-5, atol=1e-9)


def test_reference_state_is_feasible():
    for name in ("S1", "S2", "S3"):
        p = builtin_problem(name)
        res = evaluate(p, QueryLedger(5), p.reference_state)
        assert res.error_vector[0] == 0.0
        explicit = res.accumulated - p.weights[: p.implicit_count] @ res.error_vector[: p.implicit_count]
        assert res.accumulated == pytest.approx(explicit, abs=1e-15)
    s1 = builtin_problem("S1")
    res = evaluate(s1, QueryLedger(1), s1.reference_state)
    assert res.accumulated <= 0.1 * balance_error(s1.reference_state, s1.bounds) + 1e-15
    assert res.feasible


def test_builtin_shapes():
    shapes = {"S1": (11, 2, 1, 3), "S2": (20, 2, 2, 3), "S3": (30, 2, 1, 3)}
    for name, (D, m, k, h) in shapes.items():
        p = builtin_problem(name)
        assert (p.state_dim, p.obs_dim, p.implicit_count, p.total_errors) == (D, m, k, h)
    assert list(builtin_problem("S1").weights) == [1.0, 0.1, 0.1]
    assert list(builtin_problem("S3").weights) == [1.0, 0.1, 10.0]
    assert builtin_problem("S3").monotone_constraints
    with pytest.raises(ConfigError):
        builtin_problem("S9")


def test_s3_non_monotone_state_has_ordering_error():
    p = builtin_problem("S3")
    x = np.linspace(p.upper[0], p.lower[0], 30)
    assert p.error_vectors(x)[0, 2] > 0


def test_evaluate_ledger_accounting():
    p = builtin_problem("S1")
    ledger = QueryLedger(2)
    rng = np.random.default_rng(3)
    x = p.from_unit(rng.uniform(size=11))
    res = evaluate(p, ledger, x)
    assert ledger.count == 1
    assert res.accumulated == pytest.approx(float(np.dot(p.weights, res.error_vector)), abs=1e-15)
    evaluate(p, ledger, x)
    with pytest.raises(BudgetExceededError):
        evaluate(p, ledger, x)
    assert ledger.count == 2
    # replay reproduces the recorded vectors
    for rec in ledger.log:
        assert np.array_equal(p.error_vectors(rec.state)[0], rec.error_vector)


def test_evaluate_rejects_bad_states():
    p = builtin_problem("S1")
    with pytest.raises(InvalidStateError):
        evaluate(p, QueryLedger(3), np.full(11, np.nan))
    with pytest.raises(InputShapeError):
        evaluate(p, QueryLedger(3), np.zeros(10))


def test_weight_linearity():
    p = builtin_problem("S2")
    rng = np.random.default_rng(4)
    X = p.from_unit(rng.uniform(size=(20, 20)))
    doubled = replace(p, weights=2 * p.weights)
    assert np.allclose(doubled.accumulated(X), 2 * p.accumulated(X), rtol=1e-14)


def test_fixture_round_trip_and_missing():
    arr = np.arange(6, dtype=float).reshape(2, 3) / 7
    assert np.array_equal(read_table(write_table(arr)), arr)
    with pytest.raises(ConfigError):
        load_fixture("nope.A")


def test_calibration_hits_fraction():
    p = builtin_problem("S1")
    eps = calibrate_epsilon(p, 0.05, n_samples=20_000, seed=1)
    frac = feasible_fraction(p, n_samples=20_000, seed=1, epsilon=eps)
    assert abs(frac - 0.05) < 1e-3
    # an independent sample agrees up to Monte Carlo noise
    assert abs(feasible_fraction(p, n_samples=20_000, seed=2, epsilon=eps) - 0.05) < 0.01


def test_problem_validation():
    p = builtin_problem("S1")
    with pytest.raises(ConfigError):
        p.with_epsilon(0.0)
    with pytest.raises(ConfigError):
        replace(p, upper=p.lower.copy())
