import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lmtdock.explain import (
    COMPRESSION_GROUPS,
    attribution_frame,
    attributions,
    combine,
    compress,
)


def leaf_matrix(weights_by_cell=None, intercepts=None):
    W = np.zeros((5, 10))
    for (out, col), w in (weights_by_cell or {}).items():
        W[out, col] = w
    if intercepts is not None:
        W[:, 9] = intercepts
    return W


class TestAttributions:
    def test_equal_contributions(self):
        W = leaf_matrix({(0, 0): 1.0, (0, 1): 1.0})
        x = np.zeros(9)
        x[0] = x[1] = 1.0
        raw = attributions(W, x)
        assert raw[0, 0] == pytest.approx(0.5)
        assert raw[0, 1] == pytest.approx(0.5)
        assert np.allclose(raw[0, 2:], 0.0)

    def test_hand_computed_signed_shares(self):
        # weights (2, -1) on features (0, 1), values (3, 4):
        # contributions (6, -4), normalizer 10 -> shares (0.6, -0.4)
        W = leaf_matrix({(0, 0): 2.0, (0, 1): -1.0})
        x = np.zeros(9)
        x[0], x[1] = 3.0, 4.0
        raw = attributions(W, x)
        assert raw[0, 0] == pytest.approx(0.6)
        assert raw[0, 1] == pytest.approx(-0.4)

    def test_constant_leaf_degenerate(self):
        W = leaf_matrix(intercepts=np.array([0.5, -0.2, 0.0, 1.0, 0.3]))
        frame = attribution_frame(W, np.ones(9))
        assert frame.degenerate
        assert np.all(frame.raw == 0.0)
        assert np.all(frame.combined == 0.0)
        assert all(v == 0.0 for v in frame.compressed.values())

    def test_zero_state_degenerate(self):
        rng = np.random.default_rng(0)
        W = rng.normal(0, 1, (5, 10))
        frame = attribution_frame(W, np.zeros(9))
        assert frame.degenerate

    def test_intercept_excluded(self):
        W = leaf_matrix({(0, 0): 1.0}, intercepts=np.full(5, 100.0))
        x = np.zeros(9)
        x[0] = 2.0
        raw = attributions(W, x)
        assert raw[0, 0] == pytest.approx(1.0)  # intercept plays no part

    def test_single_zero_row_not_degenerate(self):
        W = leaf_matrix({(0, 0): 1.0})  # outputs 1..4 constant
        x = np.ones(9)
        frame = attribution_frame(W, x)
        assert not frame.degenerate
        assert np.all(frame.raw[1:] == 0.0)
        assert frame.raw[0, 0] == pytest.approx(1.0)

    def test_l1_normalization(self):
        rng = np.random.default_rng(1)
        for _ in range(300):
            W = rng.normal(0, 1, (5, 10))
            x = rng.normal(0, 2, 9)
            raw = attributions(W, x)
            sums = np.sum(np.abs(raw), axis=1)
            assert np.allclose(sums, 1.0, atol=1e-9)

    def test_scale_covariance(self):
        # scaling one feature's weight up and its value down cancels out
        rng = np.random.default_rng(2)
        for _ in range(100):
            W = rng.normal(0, 1, (5, 10))
            x = rng.uniform(0.5, 2.0, 9)
            c = float(rng.uniform(0.1, 10.0))
            W2 = W.copy()
            W2[:, 3] *= c
            x2 = x.copy()
            x2[3] /= c
            assert np.allclose(attributions(W, x), attributions(W2, x2), atol=1e-12)


class TestCombine:
    def test_zero(self):
        assert np.all(combine(np.zeros((5, 9))) == 0.0)

    def test_single_action_absolute(self):
        raw = np.zeros((5, 9))
        raw[2, 0], raw[2, 1] = 0.6, -0.4
        assert np.allclose(combine(raw)[:2], [0.6, 0.4])

    def test_five_identical_rows(self):
        raw = np.zeros((5, 9))
        raw[:, 0], raw[:, 1] = 0.5, 0.5
        out = combine(raw)
        assert out[0] == pytest.approx(2.5)
        assert out[1] == pytest.approx(2.5)

    def test_direct_summation_oracle(self):
        rng = np.random.default_rng(3)
        raw = rng.normal(0, 1, (5, 9))
        out = combine(raw)
        for f in range(9):
            assert out[f] == pytest.approx(sum(abs(raw[a, f]) for a in range(5)))


class TestCompress:
    def test_distance_group(self):
        combined = np.zeros(9)
        combined[0] = combined[1] = 1.0
        c = compress(combined)
        assert c == {"distance": 2.0, "velocity": 0.0, "obstacle": 0.0, "heading": 0.0}

    def test_group_cardinalities(self):
        combined = np.ones(9)
        combined[6] = 0.0  # contact column is always zero in real frames
        c = compress(combined)
        assert c["distance"] == 2.0
        assert c["velocity"] == 3.0
        assert c["obstacle"] == 2.0
        assert c["heading"] == 1.0

    def test_zero(self):
        assert all(v == 0.0 for v in compress(np.zeros(9)).values())

    def test_partition_of_combined_mass(self):
        rng = np.random.default_rng(4)
        for _ in range(200):
            W = rng.normal(0, 1, (5, 10))
            W[:, 6] = 0.0
            x = rng.normal(0, 2, 9)
            comb = combine(attributions(W, x))
            c = compress(comb)
            assert sum(c.values()) == pytest.approx(float(np.sum(comb)), abs=1e-12)

    def test_group_keys_are_the_operator_labels(self):
        assert list(COMPRESSION_GROUPS) == ["distance", "velocity", "obstacle", "heading"]


def test_importance_tracks_influence_not_magnitude():
    # tiny velocity values with huge velocity weights dominate the shares
    W = leaf_matrix({(0, 3): 50.0, (0, 0): 0.1})
    x = np.zeros(9)
    x[3] = 0.01  # small speed
    x[0] = 100.0  # large distance
    frame = attribution_frame(W, x)
    c = frame.compressed
    assert c["velocity"] < c["distance"]
    x[3] = 0.5  # still modest speed, but weight 50 amplifies its influence
    frame = attribution_frame(W, x)
    c = frame.compressed
    assert c["velocity"] > c["distance"]
    assert abs(x[3]) < abs(x[0])


@settings(max_examples=200, deadline=None)
@given(
    st.integers(min_value=0, max_value=2**32 - 1),
    st.booleans(),
)
def test_frame_invariants_random(seed, zero_block):
    rng = np.random.default_rng(seed)
    W = rng.normal(0, 1, (5, 10))
    W[:, 6] = 0.0
    if zero_block:
        W[:, :9] = 0.0  # constant leaf
    x = rng.normal(0, 3, 9)
    frame = attribution_frame(W, x, leaf_id=3, step=1)
    for a in range(5):
        s = float(np.sum(np.abs(frame.raw[a])))
        assert s == pytest.approx(1.0, abs=1e-9) or s == 0.0
    assert np.allclose(frame.combined, np.abs(frame.raw).sum(axis=0), atol=1e-12)
    assert sum(frame.compressed.values()) == pytest.approx(float(frame.combined.sum()), abs=1e-12)
    if frame.degenerate:
        assert np.all(frame.raw == 0.0)
    if zero_block:
        assert frame.degenerate
    d = frame.to_json_dict()
    assert list(d["compressed"]) == ["distance", "velocity", "obstacle", "heading"]
