import numpy as np
import pytest

from geese.netcore import DenseNet, init_net, min_preactivation


def smooth_net_and_batch(rng, max_layers=4, max_units=64, margin=1e-3, tries=50):
    """Random relu net and batch with every hidden pre-activation away from the kink."""
    for _ in range(tries):
        depth = int(rng.integers(1, max_layers + 1))
        sizes = [int(n) for n in rng.integers(1, max_units + 1, size=depth + 1)]
        sizes = [min(s, 12) if i in (0, depth) else s for i, s in enumerate(sizes)]
        net = init_net(sizes, rng)
        # random biases so the check also covers bias gradients
        net.weights = net.weights + 0.1 * rng.standard_normal(len(net.weights))
        B = int(rng.integers(1, 9))
        X = rng.normal(size=(B, sizes[0]))
        T = rng.normal(size=(B, sizes[-1]))
        if min_preactivation(net, X) > margin:
            return net, X, T
    raise RuntimeError("could not draw a kink-free sample")


def linear_net(W, b) -> DenseNet:
    W = np.atleast_2d(np.asarray(W, dtype=float))
    b = np.asarray(b, dtype=float).ravel()
    return DenseNet([W.shape[0], W.shape[1]], np.concatenate([W.ravel(), b]))


def constant_net(n_in, values) -> DenseNet:
    values = np.atleast_1d(np.asarray(values, dtype=float))
    return linear_net(np.zeros((n_in, len(values))), values)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import REPORT

    if REPORT:
        terminalreporter.section("acceptance criteria")
        for line in REPORT:
            terminalreporter.write_line(line)
