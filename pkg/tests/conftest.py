"""Shared synthetic-data builders for the tree and pipeline tests."""

import numpy as np
import pytest

N_FEATURES = 9
N_OUTPUTS = 5
CONTACT = 6


def region_coefficients():
    """Distinct affine models for the four (sign(x0), sign(x1)) quadrants.

    The sign(x0) contrast dominates so a greedy builder confidently splits
    x0 first; targets stay well inside [-1, 1].
    """
    W = np.zeros((2, 2, N_OUTPUTS, N_FEATURES + 1))
    for i, s0 in enumerate((-1.0, 1.0)):
        for j, s1 in enumerate((-1.0, 1.0)):
            for out in range(N_OUTPUTS):
                scale = 1.0 + 0.1 * out
                W[i, j, out, 0] = 0.10 * s0 * scale
                W[i, j, out, 1] = 0.08 * s1 * scale
                W[i, j, out, N_FEATURES] = 0.45 * s0 + 0.08 * s1 * scale
    return W


def four_region_data(n, seed=0, gap=0.1):
    """Exactly piecewise-linear targets over four (x0, x1) quadrants.

    No sample falls within `gap` of either region boundary, so any grid
    threshold inside the gap produces a perfect partition.
    """
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1.0, 1.0, size=(n, N_FEATURES))
    X[:, CONTACT] = 0.0
    for col in (0, 1):
        sign = np.where(X[:, col] >= 0.0, 1.0, -1.0)
        X[:, col] = sign * (gap + (1.0 - gap) * np.abs(X[:, col]))
    W = region_coefficients()
    i = (X[:, 0] > 0.0).astype(int)
    j = (X[:, 1] > 0.0).astype(int)
    Y = np.einsum("nok,nk->no", W[i, j, :, :N_FEATURES], X) + W[i, j, :, N_FEATURES]
    assert np.max(np.abs(Y)) <= 1.0
    return X, Y


def smooth_synthetic_data(n, seed=0, noise=0.0):
    """Mildly nonlinear smooth targets for generic build tests."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1.0, 1.0, size=(n, N_FEATURES))
    X[:, CONTACT] = 0.0
    Y = np.column_stack(
        [
            np.tanh(1.5 * X[:, 0] + 0.5 * X[:, 1]),
            np.tanh(X[:, 1] - 0.8 * X[:, 2]),
            0.5 * np.tanh(2.0 * X[:, 7]) + 0.3 * X[:, 3],
            np.tanh(X[:, 4] * 1.2 + 0.2),
            0.4 * X[:, 5] + 0.4 * np.tanh(X[:, 8]),
        ]
    )
    if noise:
        Y = np.clip(Y + rng.normal(0.0, noise, Y.shape), -1.0, 1.0)
    return X, Y


@pytest.fixture(scope="session")
def four_region_dataset():
    return four_region_data(20_000, seed=42)
