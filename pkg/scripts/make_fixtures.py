"""Generate the numeric fixtures behind the built-in problems S1-S3.

Run once from the repository root:

    python scripts/make_fixtures.py

Each problem gets ``<name>.A`` (observation sensitivities), ``<name>.b``
(offsets), ``<name>.bounds`` (row 0 lower, row 1 upper) and ``<name>.xstar``
(a feasible reference state). S2 also gets ``S2.C`` and ``S2.d`` for its seven
constraint functions. Offsets are chosen so the reference state reproduces a
fixed observation, which then serves as the problem target.
"""

from pathlib import Path

import numpy as np

from geese.evaluators import postprocess_monotone, sine_features, write_table

OUT = Path(__file__).resolve().parents[1] / "src" / "geese" / "fixtures"

# turbofan-like design ranges: bypass ratio, pressure ratios, burner temperature,
# component efficiencies
S1_LOWER = [5, 1.3, 1.2, 8, 1300, 0.85, 0.82, 0.84, 0.95, 0.86, 0.87]
S1_UPPER = [6, 2.5, 2.0, 15, 1800, 0.95, 0.92, 0.94, 0.995, 0.96, 0.97]
S1_TARGET = [121.0, 10.63]


def sensitivities(rng, m, D, decay, scale):
    """Rows of mixed-sign sensitivities whose magnitudes decay over coordinates."""
    mags = decay ** rng.permutation(D)
    signs = rng.choice([-1.0, 1.0], size=(m, D))
    A = signs * mags * rng.uniform(0.6, 1.4, size=(m, D))
    return A * (np.asarray(scale)[:, None] / np.linalg.norm(A, axis=1, keepdims=True))


def offsets(A, v_star, target):
    return np.asarray(target) - sine_features(v_star) @ A.T


def save(name, arr):
    (OUT / name).write_text(write_table(arr))


def main():
    rng = np.random.default_rng(20230817)
    OUT.mkdir(parents=True, exist_ok=True)

    # S1: 11 states, two observations near [121, 10.63]
    lower, upper = np.array(S1_LOWER, float), np.array(S1_UPPER, float)
    v_star = rng.uniform(0.35, 0.65, size=11)
    A = sensitivities(rng, 2, 11, 0.7, [118.0, 10.5])
    save("S1.A", A)
    save("S1.b", offsets(A, v_star, S1_TARGET))
    save("S1.bounds", np.vstack([lower, upper]))
    save("S1.xstar", lower + v_star * (upper - lower))

    # S2: 20 states, seven constraints with slack at the reference state
    lower = rng.uniform(1.0, 10.0, size=20)
    upper = lower * rng.uniform(1.5, 3.0, size=20)
    v_star = rng.uniform(0.3, 0.7, size=20)
    A = sensitivities(rng, 2, 20, 0.8, [40.0, 3.0])
    save("S2.A", A)
    save("S2.b", offsets(A, v_star, [250.0, 2.2]))
    save("S2.bounds", np.vstack([lower, upper]))
    save("S2.xstar", lower + v_star * (upper - lower))
    C = rng.normal(0.0, 0.5, size=(7, 20))
    slack = rng.uniform(0.05, 0.3, size=7)
    save("S2.C", C)
    save("S2.d", -slack - sine_features(v_star) ** 2 @ C.T)

    # S3: 30 ordered switching angles in [0, pi/2]
    lower, upper = np.zeros(30), np.full(30, np.pi / 2)
    raw_star = np.concatenate([[rng.uniform(0.05, 0.2)], rng.uniform(0.02, 0.25, size=29)])
    v_star = postprocess_monotone(raw_star)
    A = sensitivities(rng, 2, 30, 0.85, [3.0, 0.4])
    save("S3.A", A)
    save("S3.b", offsets(A, v_star, [0.12, 0.05]))
    save("S3.bounds", np.vstack([lower, upper]))
    save("S3.xstar", lower + v_star * (upper - lower))


if __name__ == "__main__":
    main()
