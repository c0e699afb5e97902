import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tree_sobolev.tree_core import TreeWeights, VertexRef, dlca
from tree_sobolev.walk import (MAX_STEPS, WalkProfile, averaging_profile, delta_profile,
                               hitting_minimum, hitting_minimum_recurrence,
                               increment_coeffs, leaf_hit_coeffs, q_from_transitions,
                               q_from_weights, simulate_walk, simulate_walks,
                               symmetric_profile, transitions_from_q, walk_stats,
                               wilson_interval, within_band)


def random_q(N, rng):
    q = np.ones(N + 1)
    q[1:N] = rng.uniform(0.05, 0.95, N - 1)
    return q


def direct_q(W, p):
    # the defining ratio, evaluated naively (fine for moderate inputs)
    N = len(W)
    terms = np.array([(2.0 ** k * W[k - 1]) ** (-1 / (p - 1)) for k in range(1, N + 1)])
    q = np.ones(N + 1)
    for s in range(1, N + 1):
        q[s] = terms[s - 1] / terms[s - 1:].sum()
    return q


def test_q_dyadic_example():
    for p in (1.2, 2.0, 5.0):
        q = q_from_weights(TreeWeights.dyadic(4), p)
        assert np.allclose(q, [1, 1 / 4, 1 / 3, 1 / 2, 1], rtol=0, atol=1e-15)


@settings(max_examples=40, deadline=None)
@given(N=st.integers(1, 10), p=st.floats(1.3, 8.0), seed=st.integers(0, 10**6))
def test_q_matches_direct_formula(N, p, seed):
    W = np.exp(np.random.default_rng(seed).uniform(-2, 2, N))
    q = q_from_weights(TreeWeights(W), p)
    assert np.allclose(q, direct_q(W, p), rtol=1e-12, atol=0)
    assert q[0] == q[N] == 1.0
    assert np.all((q > 0) & (q <= 1))


def test_q_extreme_inputs_stay_finite():
    w = TreeWeights(np.exp(np.linspace(-30, 30, 12)))
    for p in (1.001, 1.05, 50.0):
        q = q_from_weights(w, p)
        assert np.all(np.isfinite(q)) and np.all(q > 0) and np.all(q <= 1)


def test_q_errors():
    with pytest.raises(ValueError):
        q_from_weights(TreeWeights.unit(3), 1.0)
    with pytest.raises(ValueError):
        q_from_weights(TreeWeights.unit(3), np.inf)
    with pytest.raises(ValueError):
        q_from_weights((1.0, 0.0), 2.0)


def test_q_monte_carlo():
    # escape frequency of the simulated walk from each depth
    profile = WalkProfile.from_weights(TreeWeights((1.0, 0.5, 4.0)), 3.0)
    for s in (1, 2):
        stats = walk_stats(profile, VertexRef(s, 0), 100_000, seed=11 + s)
        hits = stats.min_depth_counts[s]
        assert within_band(profile.q[s], hits, stats.trials)


def test_transitions_examples():
    sym = symmetric_profile(6)
    assert sym.x[0] == 1.0
    assert np.allclose(sym.x[1:], 0.5, rtol=0, atol=1e-15)
    assert averaging_profile(4).x.tolist() == [1.0] * 4


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_transitions_round_trip(seed):
    q = random_q(6, np.random.default_rng(seed))
    x = transitions_from_q(q)
    assert np.all((x > 0) & (x <= 1)) and x[0] == 1
    # plug x back into q_s = x_s (q_{s+1} + (1 - q_{s+1}) q_s)
    assert np.allclose(x[1:] * (q[2:] + (1 - q[2:]) * q[1:-1]), q[1:-1], rtol=0, atol=1e-14)
    assert np.allclose(q_from_transitions(x), q, rtol=0, atol=1e-14)


def test_q_validation():
    with pytest.raises(ValueError):
        transitions_from_q([1.0, 0.5, 0.9])
    with pytest.raises(ValueError):
        transitions_from_q([1.0, 0.0, 1.0])


def test_hitting_minimum_examples():
    N = 6
    assert np.array_equal(averaging_profile(N).P, np.eye(N + 1))
    P = symmetric_profile(N).P
    for s in range(N):
        for r in range(s + 1):
            expected = (N - s) / (N - r) * (1.0 if r == 0 else 1.0 / (N - r + 1))
            assert abs(P[s, r] - expected) <= 1e-14
    assert np.array_equal(P[N], np.eye(N + 1)[N])


def test_hitting_minimum_delta_example():
    N, delta = 5, 1 / 3
    prof = delta_profile(N, delta)
    c = 1 / delta
    for s in range(1, N):
        assert abs(prof.q[s] - 1 / (N - s + c - 1)) <= 1e-14
    for s in range(N):
        for r in range(s + 1):
            tail = (N - s + c - 2) / (N - r + c - 2)
            expected = tail if r == 0 else tail / (N - r + c - 1)
            assert abs(prof.P[s, r] - expected) <= 1e-14
    # the last step down has probability delta
    assert abs(prof.x[N - 1] - delta) <= 1e-14
    assert np.allclose(prof.x[1:N - 1], 0.5, rtol=0, atol=1e-14)


@settings(max_examples=40, deadline=None)
@given(N=st.integers(1, 12), seed=st.integers(0, 10**6))
def test_hitting_minimum_identities(N, seed):
    q = random_q(N, np.random.default_rng(seed))
    P = hitting_minimum(q)
    assert np.allclose(P.sum(axis=1), 1.0, rtol=0, atol=1e-12)
    assert np.allclose(P, hitting_minimum_recurrence(q), rtol=0, atol=1e-14)
    for s in range(1, N + 1):
        # p_{s,k} - p_{s-1,k} = -q_s p_{s-1,k} for k <= s - 1
        if s < N:
            assert np.allclose(P[s, :s] - P[s - 1, :s], -q[s] * P[s - 1, :s],
                               rtol=0, atol=1e-14)
        for m in range(1, s + 1):
            lhs = P[s - 1, :m].sum()
            assert abs(lhs - np.prod(1 - q[m:s])) <= 1e-12


@settings(max_examples=30, deadline=None)
@given(N=st.integers(1, 8), seed=st.integers(0, 10**6))
def test_leaf_hit_normalization(N, seed):
    prof = WalkProfile(random_q(N, np.random.default_rng(seed)))
    B = prof.B
    assert np.array_equal(B[N], np.eye(N + 1)[N])
    for s in range(N + 1):
        total = 2.0 ** (N - s) * B[s, s] + sum(2.0 ** (N - r - 1) * B[s, r] for r in range(s))
        assert abs(total - 1) <= 1e-12
        # summing over the leaves of a fixed start vertex gives the same thing
        x = VertexRef(s, (1 << s) - 1)
        per_leaf = sum(B[s, dlca(x, VertexRef(N, j))] for j in range(1 << N))
        assert abs(per_leaf - 1) <= 1e-12


def test_increment_coeffs():
    N = 5
    avg = averaging_profile(N)
    for s in range(1, N + 1):
        assert abs(avg.A[s, s] - (2.0 ** (s - N) - 2.0 ** (s - 1 - N))) <= 1e-15
    prof = WalkProfile(random_q(N, np.random.default_rng(3)))
    P, q, A = prof.P, prof.q, prof.A
    for s in range(1, N + 1):
        for r in range(s):
            expected = -q[s] * sum(2.0 ** (k - N) * P[s - 1, k] for k in range(r + 1))
            assert abs(A[s, r] - expected) <= 1e-14
    assert abs(A[N, N] - (1 - prof.B[N - 1, N - 1])) <= 1e-15
    assert np.array_equal(increment_coeffs(leaf_hit_coeffs(P)), A)


def test_simulate_walk_trivial_starts():
    prof = WalkProfile(random_q(4, np.random.default_rng(0)))
    assert simulate_walk(prof, VertexRef(4, 9), seed=1) == (9, 4)
    for seed in range(20):
        leaf, low = simulate_walk(prof, VertexRef(0, 0), seed)
        assert low == 0 and 0 <= leaf < 16
    assert simulate_walk(prof, VertexRef(2, 1), 5) == simulate_walk(prof, VertexRef(2, 1), 5)
    with pytest.raises(ValueError):
        simulate_walk(prof, VertexRef(5, 0), 0)


def test_simulate_walk_terminal_leaf_in_reach():
    # the terminal leaf lies below the ancestor at the minimum depth visited
    prof = symmetric_profile(5)
    start = VertexRef(3, 6)
    for seed in range(200):
        leaf, low = simulate_walk(prof, start, seed)
        assert dlca(start, VertexRef(5, leaf)) >= low


def test_step_cap():
    prof = symmetric_profile(8)
    with pytest.raises(RuntimeError):
        simulate_walks(prof, VertexRef(1, 0), 10, seed=0, max_steps=2)
    assert MAX_STEPS == 10_000_000


def test_scalar_and_batch_simulators_agree_in_law():
    prof = WalkProfile(random_q(4, np.random.default_rng(4)))
    start = VertexRef(2, 1)
    lows = np.array([simulate_walk(prof, start, seed)[1] for seed in range(4000)])
    counts = np.bincount(lows, minlength=5)
    assert np.all(within_band(prof.P[2], counts, lows.size))


def test_min_depth_and_leaf_hits_monte_carlo():
    prof = WalkProfile(random_q(4, np.random.default_rng(8)))
    stats = walk_stats(prof, VertexRef(2, 1), 100_000, seed=21)
    assert np.all(within_band(prof.P[2], stats.min_depth_counts, stats.trials))
    # one fixed leaf with dlca 1 with the start vertex (depth 2, index 1): leaf 0b0000
    leaf = 0
    assert dlca(VertexRef(2, 1), VertexRef(4, leaf)) == 1
    assert within_band(prof.B[2, 1], stats.leaf_counts[leaf], stats.trials)
    assert np.allclose(stats.b_hat(), prof.B[2, :3], atol=4 * np.sqrt(prof.B[2, :3] / 1e5))


def test_walk_stats_merge_and_serialize():
    prof = symmetric_profile(3)
    a = walk_stats(prof, VertexRef(1, 0), 1000, 1)
    b = walk_stats(prof, VertexRef(1, 0), 500, 2)
    m = a.merge(b)
    assert m.trials == 1500
    assert np.array_equal(m.leaf_counts, a.leaf_counts + b.leaf_counts)
    assert abs(sum(m.to_dict()["p_hat"]) - 1) < 1e-12
    with pytest.raises(ValueError):
        a.merge(walk_stats(prof, VertexRef(2, 0), 10, 3))


def test_wilson_interval():
    lo, hi = wilson_interval(50, 100, z=3.0)
    assert lo < 0.5 < hi
    lo, hi = wilson_interval(0, 100)
    assert lo <= 0 < hi
    assert not within_band(0.0, 1, 100)
    assert within_band(1.0, 100, 100)
