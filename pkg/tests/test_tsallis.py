import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gbpa import rng
from gbpa.tsallis import (
    TsallisConfig,
    corollary_bound,
    exp3_eta,
    exp3_limit_bound,
    exp3_regret_bound,
    minimax_eta,
    overestimation_term,
    softmax_distribution,
    softmax_potential,
    tsallis_distribution,
    tsallis_entropy,
    tsallis_hessian_diag,
    tsallis_potential,
    tsallis_regret_bound,
)
from gbpa.verify import grid_maximizer, simplex_grid

SOFT = np.array([math.exp(-1), 1.0]) / (1 + math.exp(-1))

g_vectors = st.integers(2, 6).flatmap(
    lambda n: arrays(np.float64, n, elements=st.floats(-50, 0, allow_nan=False)))


# ---- config ----------------------------------------------------------------

@pytest.mark.parametrize("alpha,eta", [(0.0, 1.0), (1.0, 1.0), (1.2, 1.0), (0.5, 0.0), (0.5, -1.0)])
def test_config_rejects(alpha, eta):
    with pytest.raises(ValueError):
        TsallisConfig(alpha, eta)


# ---- distribution ------------------------------------------------------------

@pytest.mark.parametrize("alpha,eta", [(0.1, 0.3), (0.5, 1.0), (0.9, 20.0)])
def test_zero_gives_uniform(alpha, eta):
    np.testing.assert_allclose(tsallis_distribution(np.zeros(4), TsallisConfig(alpha, eta)), 0.25, atol=1e-14)


def test_two_arm_grid_oracle():
    cfg = TsallisConfig(0.5, 1.0)
    q, _ = grid_maximizer(np.array([-1.0, 0.0]), cfg, 1e-4)
    np.testing.assert_allclose(tsallis_distribution([-1.0, 0.0], cfg), q, atol=2e-4)


def test_three_arm_grid_oracle():
    cfg = TsallisConfig(0.3, 2.0)
    G = np.array([-1.0, -3.0, 0.0])
    q, _ = grid_maximizer(G, cfg, 1e-3)
    np.testing.assert_allclose(tsallis_distribution(G, cfg), q, atol=2e-3)


def test_simplex_grid_shape():
    grid = simplex_grid(3, 0.25)
    assert grid.shape == (3, 3)
    assert np.all(grid > 0)
    np.testing.assert_allclose(grid.sum(axis=1), 1.0)
    with pytest.raises(ValueError):
        simplex_grid(4, 0.1)


def test_near_one_alpha_matches_softmax():
    np.testing.assert_allclose(tsallis_distribution([-1.0, 0.0], TsallisConfig(1 - 1e-6, 1.0)), SOFT, atol=1e-4)


def test_limit_error_decreases():
    G = np.array([-1.0, -0.2, 0.0, -2.5])
    target = softmax_distribution(G, 1.0)
    errs = [np.abs(tsallis_distribution(G, TsallisConfig(a, 1.0)) - target).max()
            for a in (0.9, 0.99, 0.999, 1 - 1e-6)]
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 1e-5


def test_extreme_gap_stays_positive():
    p = tsallis_distribution([0.0, -1e6, -1e3], TsallisConfig(0.5, 1.0))
    assert np.all(p > 0)
    assert p.sum() == pytest.approx(1.0, abs=1e-12)


def test_only_differences_matter():
    cfg = TsallisConfig(0.4, 3.0)
    G = np.array([-2.0, -1.0, -5.0])
    np.testing.assert_allclose(tsallis_distribution(G, cfg), tsallis_distribution(G - 7.0, cfg), atol=1e-12)


@pytest.mark.parametrize("bad", [[], [np.nan, 0.0], [np.inf, 0.0]])
def test_rejects_bad_G(bad):
    with pytest.raises(ValueError):
        tsallis_distribution(bad, TsallisConfig(0.5, 1.0))


@settings(max_examples=80)
@given(g_vectors, st.floats(0.05, 0.95), st.floats(0.05, 100))
def test_simplex_invariant(G, alpha, eta):
    p = tsallis_distribution(G, TsallisConfig(alpha, eta))
    assert np.all(p > 0)
    assert abs(p.sum() - 1) <= 1e-10


@settings(max_examples=40)
@given(g_vectors, st.floats(0.1, 0.9), st.floats(0.2, 20))
def test_order_preserved(G, alpha, eta):
    p = tsallis_distribution(G, TsallisConfig(alpha, eta))
    order = np.argsort(G, kind="stable")
    assert np.all(np.diff(p[order]) >= -1e-12)


@settings(max_examples=40)
@given(g_vectors, st.floats(0.1, 0.9), st.floats(0.2, 20))
def test_finite_difference_gradient(G, alpha, eta):
    cfg = TsallisConfig(alpha, eta)
    h = 1e-6
    fd = np.array([(tsallis_potential(G + h * e, cfg) - tsallis_potential(G - h * e, cfg)) / (2 * h)
                   for e in np.eye(G.size)])
    assert np.abs(fd - tsallis_distribution(G, cfg)).max() <= 1e-6


def test_finite_difference_gradient_random_probes():
    gen = rng.generator(5, rng.ANALYSIS)
    for _ in range(100):
        N = int(gen.integers(2, 7))
        G = -10 * gen.random(N)
        cfg = TsallisConfig(float(gen.uniform(0.1, 0.9)), float(gen.uniform(0.3, 10)))
        fd = np.array([(tsallis_potential(G + 1e-6 * e, cfg) - tsallis_potential(G - 1e-6 * e, cfg)) / 2e-6
                       for e in np.eye(N)])
        assert np.abs(fd - tsallis_distribution(G, cfg)).max() <= 1e-6


def test_hessian_matches_finite_difference():
    cfg = TsallisConfig(0.5, 2.0)
    G = np.array([-1.0, -0.3, -4.0])
    h = 1e-5
    fd = np.array([(tsallis_distribution(G + h * e, cfg)[i] - tsallis_distribution(G - h * e, cfg)[i]) / (2 * h)
                   for i, e in enumerate(np.eye(3))])
    np.testing.assert_allclose(tsallis_hessian_diag(G, cfg), fd, atol=1e-8)


# ---- potential and entropy ------------------------------------------------------

@pytest.mark.parametrize("alpha,eta,N", [(0.5, 1.0, 2), (0.3, 2.5, 5), (0.9, 0.7, 10)])
def test_potential_at_zero(alpha, eta, N):
    cfg = TsallisConfig(alpha, eta)
    expect = eta * (N ** (1 - alpha) - 1) / (1 - alpha)
    assert tsallis_potential(np.zeros(N), cfg) == pytest.approx(expect, rel=1e-12)
    assert overestimation_term(alpha, eta, N) == pytest.approx(expect, rel=1e-12)


def test_potential_with_far_arms():
    cfg = TsallisConfig(0.5, 1.0)
    v = tsallis_potential([0.0, -1e6, -1e6], cfg)
    assert 0.0 <= v < 1e-2


@settings(max_examples=60)
@given(g_vectors, st.floats(0.05, 0.95), st.floats(0.05, 50))
def test_potential_dominates_max(G, alpha, eta):
    assert tsallis_potential(G, TsallisConfig(alpha, eta)) >= G.max() - 1e-9


def test_entropy_minimum_at_uniform():
    gen = rng.generator(9, rng.ANALYSIS)
    u = tsallis_entropy(np.full(5, 0.2), 0.5)
    for _ in range(50):
        p = gen.dirichlet(np.ones(5))
        assert tsallis_entropy(p, 0.5) >= u - 1e-12
    assert tsallis_entropy(np.array([1.0, 0, 0]), 0.5) == 0.0


# ---- softmax --------------------------------------------------------------------

def test_softmax_examples():
    np.testing.assert_allclose(softmax_distribution([-1.0, 0.0], 1.0), SOFT, atol=1e-15)
    np.testing.assert_allclose(softmax_distribution(np.full(3, -2.0), 5.0), 1 / 3)
    np.testing.assert_allclose(softmax_distribution([-100.0, 0.0, -3.0], 1e-12), 1 / 3, atol=1e-9)


def test_softmax_underflow_stays_positive():
    p = softmax_distribution([0.0, -1e5], 10.0)
    assert p[1] > 0 and p[0] == 1.0


def test_softmax_potential_gradient():
    G = np.array([-1.0, -0.5, -3.0])
    fd = np.array([(softmax_potential(G + 1e-6 * e, 2.0) - softmax_potential(G - 1e-6 * e, 2.0)) / 2e-6
                   for e in np.eye(3)])
    np.testing.assert_allclose(fd, softmax_distribution(G, 2.0), atol=1e-8)


def test_softmax_rejects_nonpositive_eta():
    with pytest.raises(ValueError):
        softmax_distribution([0.0, 1.0], 0.0)


# ---- bounds ---------------------------------------------------------------------

def test_minimax_bound_example():
    N, T = 10, 1000
    b = tsallis_regret_bound(0.5, minimax_eta(0.5, N, T), N, T)
    assert b <= 2 * math.sqrt(2 * T * N) + 1e-9
    assert corollary_bound(0.5, N, T) == pytest.approx(282.8427, abs=1e-4)


@pytest.mark.parametrize("alpha", [0.2, 0.5, 0.8])
def test_minimax_eta_minimizes_relaxed_bound(alpha):
    # minimax_eta balances eta N^(1-a)/(1-a) against N^a T/(2 eta a), dropping the -1
    N, T = 7, 5000

    def relaxed(eta):
        return eta * N ** (1 - alpha) / (1 - alpha) + N ** alpha * T / (2 * eta * alpha)

    eta = minimax_eta(alpha, N, T)
    assert relaxed(eta) <= min(relaxed(0.99 * eta), relaxed(1.01 * eta))
    assert relaxed(eta) == pytest.approx(corollary_bound(alpha, N, T), rel=1e-12)
    assert tsallis_regret_bound(alpha, eta, N, T) <= corollary_bound(alpha, N, T)


def test_zero_horizon_bound():
    assert tsallis_regret_bound(0.5, 3.0, 10, 0) == pytest.approx(overestimation_term(0.5, 3.0, 10))


def test_bound_rejects_bad_input():
    with pytest.raises(ValueError):
        tsallis_regret_bound(1.0, 1.0, 10, 10)


def test_alpha_to_one_bound_matches_softmax_convention():
    N, T = 10, 10_000
    lr = exp3_eta(N, T)
    assert lr == pytest.approx(math.sqrt(N * math.log(N) / T))
    limit = tsallis_regret_bound(1 - 1e-9, 1 / lr, N, T)
    assert limit == pytest.approx(exp3_regret_bound(lr, N, T), rel=1e-6)
    # best weight in the limit gives sqrt(2 T N log N), below the stated 2 sqrt(T N log N)
    w = math.sqrt(N * T / (2 * math.log(N)))
    assert tsallis_regret_bound(1 - 1e-9, w, N, T) == pytest.approx(math.sqrt(2 * T * N * math.log(N)), rel=1e-6)
    assert exp3_limit_bound(N, T) == pytest.approx(2 * math.sqrt(T * N * math.log(N)))


def test_bound_minimized_at_half():
    vals = [corollary_bound(a, 10, 10_000) for a in np.linspace(0.1, 0.9, 9)]
    assert int(np.argmin(vals)) == 4
