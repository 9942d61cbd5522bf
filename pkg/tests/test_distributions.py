import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from gbpa import rng
from gbpa.distributions import (
    EULER_GAMMA,
    PerturbationModel,
    condition_above,
    expected_max,
    expected_max_mc,
    expected_max_value,
    harmonic,
    mirror,
    model,
    numeric_sup_hazard,
    scaled,
    sup_hazard,
)
from gbpa.exceptions import UnavailableError
from gbpa.verify import family_zoo, support_grid

ZOO = family_zoo()


def ids(m):
    return m.label


# ---- pointwise examples ----------------------------------------------------

def test_exponential_median():
    assert model("exponential", rate=1.0).cdf(math.log(2)) == pytest.approx(0.5, abs=1e-15)


@pytest.mark.parametrize("alpha", [1.5, 2.0, 7.0])
def test_frechet_cdf_at_one(alpha):
    assert model("frechet", alpha=alpha).cdf(1.0) == pytest.approx(math.exp(-1), abs=1e-15)


@pytest.mark.parametrize("k", [0.25, 0.5, 1.0])
def test_weibull_modified_cdf(k):
    m = model("weibull_modified", k=k)
    assert m.cdf(0.0) == 0.0
    y = np.array([0.3, 1.0, 4.0])
    np.testing.assert_allclose(m.cdf(y), 1 - np.exp(-(y + 1) ** k + 1), rtol=1e-14)


def test_pareto_modified_hazard():
    m = model("pareto_modified", alpha=3.0)
    assert m.hazard(0.0) == pytest.approx(3.0)
    assert m.hazard(1.0) == pytest.approx(1.5)
    assert sup_hazard(m) == 3.0


def test_exponential_hazard_constant():
    x = np.linspace(0, 50, 101)
    np.testing.assert_allclose(model("exponential", rate=1.0).hazard(x), 1.0)


def test_frechet_sup_hazard_under_cap():
    m = model("frechet", alpha=2.0)
    h = sup_hazard(m)
    assert 0 < h <= 4.0
    assert numeric_sup_hazard(m) == pytest.approx(h, rel=1e-9)


def test_gumbel_hazard_tends_to_one_at_plus_infinity():
    m = model("gumbel")
    assert m.hazard(40.0) == pytest.approx(1.0, abs=1e-12)
    assert m.hazard(0.0) < m.hazard(2.0) < 1.0
    assert sup_hazard(m) == 1.0


# ---- adapters --------------------------------------------------------------

def test_mirror_exponential():
    Y = mirror(model("exponential", rate=1.0))
    assert Y.cdf(0.0) == 0.5
    y = np.linspace(-20, 20, 4001)
    assert np.nanmax(Y.hazard(y)) == pytest.approx(1.0, abs=1e-12)
    assert sup_hazard(Y) == 1.0


def test_mirror_density_and_cdf_formula():
    X = model("gamma", alpha=2.0, beta=1.5)
    Y = mirror(X)
    y = np.linspace(-6, 6, 121)
    np.testing.assert_allclose(Y.pdf(y), 0.5 * X.pdf(np.abs(y)), atol=1e-15)
    np.testing.assert_allclose(Y.cdf(y), 0.5 * (1 + np.sign(y) * X.cdf(np.abs(y))), atol=1e-15)


def test_mirror_reduces_expected_max():
    mc, se = expected_max_mc(mirror(model("exponential", rate=1.0)), 10, 10 ** 6, seed=3)
    assert mc + 3 * se <= harmonic(10)
    assert harmonic(10) == pytest.approx(2.9289682540, abs=1e-9)


def test_mirror_rejects_full_line_base():
    with pytest.raises(ValueError):
        mirror(model("gumbel"))


def test_condition_exponential_is_memoryless():
    e = model("exponential", rate=1.0)
    c = condition_above(e, 1.0)
    y = np.linspace(0, 10, 101)
    np.testing.assert_allclose(c.cdf(y), -np.expm1(-y), atol=2.3e-16)
    np.testing.assert_allclose(c.hazard(y), 1.0, rtol=0, atol=0)


@pytest.mark.parametrize("k", [0.5, 1 / 3, 1.0])
def test_weibull_modified_is_conditioned_weibull(k):
    y = np.array([0.5, 1.0, 2.0])
    a = model("weibull_modified", k=k).cdf(y)
    b = condition_above(model("weibull", k=k), 1.0).cdf(y)
    np.testing.assert_allclose(a, b, atol=1e-15)


def test_conditioned_pareto_hazard_at_zero():
    # hazard of the modified Pareto(2) at the threshold 1: alpha / (1 + 1)
    c = condition_above(model("pareto_modified", alpha=2.0), 1.0)
    assert c.hazard(0.0) == pytest.approx(1.0)
    assert sup_hazard(c) == pytest.approx(1.0)
    raw = condition_above(model("pareto", alpha=2.0, x_m=1.0), 1.0)
    assert raw.hazard(0.0) == pytest.approx(2.0)


@pytest.mark.parametrize("threshold", [math.inf, -1.0])
def test_condition_degenerate_threshold(threshold):
    with pytest.raises(ValueError):
        condition_above(model("exponential", rate=1.0), threshold)


def test_condition_no_mass_above():
    with pytest.raises(ValueError):
        condition_above(model("exponential", rate=1.0), 1e6)


def test_scale_rule():
    m = scaled(model("pareto_modified", alpha=3.0), 2.0)
    assert sup_hazard(m) == pytest.approx(1.5)
    assert m.hazard(0.0) == pytest.approx(1.5)
    assert expected_max(m, 4, "bound") == pytest.approx(2 * expected_max(model("pareto_modified", alpha=3.0), 4, "bound"))


# ---- invariants over the zoo -------------------------------------------------

@pytest.mark.parametrize("m", ZOO, ids=ids)
def test_inverse_cdf(m):
    u = np.concatenate([[1e-6], np.linspace(1e-4, 1 - 1e-4, 500), [1 - 1e-6]])
    np.testing.assert_allclose(m.cdf(m.quantile(u)), u, atol=1e-10, rtol=0)


@pytest.mark.parametrize("m", ZOO, ids=ids)
def test_hazard_identity(m):
    x = support_grid(m)
    keep = m.sf(x) > 1e-300
    lhs = m.hazard(x)[keep] * (1 - m.cdf(x)[keep])
    np.testing.assert_allclose(lhs, m.pdf(x)[keep], atol=1e-12, rtol=0)


@pytest.mark.parametrize("m", ZOO, ids=ids)
def test_pdf_cdf_basic_shape(m):
    x = support_grid(m, 800)
    f, F = m.pdf(x), m.cdf(x)
    assert np.all(f >= 0)
    assert np.all(np.diff(F) >= -1e-15)
    assert F[0] >= 0 and F[-1] <= 1
    np.testing.assert_allclose(F + m.sf(x), 1.0, atol=1e-14)


@pytest.mark.parametrize("m", ZOO, ids=ids)
def test_kolmogorov_smirnov(m):
    x = m.draw(100_000, rng.generator(17, rng.ANALYSIS))
    assert stats.kstest(x, lambda t: m.cdf(t)).pvalue >= 0.01


@pytest.mark.parametrize("m", ZOO, ids=ids)
def test_support_unbounded_above(m):
    assert math.isinf(m.support()[1])


@pytest.mark.parametrize("m", ZOO, ids=ids)
def test_serialization_round_trip(m):
    back = PerturbationModel.from_dict(m.to_dict())
    assert back == m
    np.testing.assert_array_equal(back.program(), m.program())


@pytest.mark.parametrize("family,params", [
    ("frechet", {"alpha": 1.0}), ("weibull_modified", {"k": 1.5}), ("weibull_modified", {"k": 0.0}),
    ("pareto_modified", {"alpha": 1.0}), ("gamma", {"alpha": 0.5, "beta": 1.0}), ("gamma", {"alpha": 2.0, "beta": 0.0}),
    ("exponential", {"rate": -1.0}), ("gaussian", {"mu": 0.0, "sigma": 0.0}),
])
def test_parameter_ranges(family, params):
    with pytest.raises(ValueError):
        model(family, **params)


def test_unknown_family():
    with pytest.raises(ValueError):
        model("cauchy")


# ---- sup-hazard column ---------------------------------------------------------

@pytest.mark.parametrize("m,value", [
    (model("pareto_modified", alpha=2.5), 2.5), (model("weibull_modified", k=0.5), 0.5),
    (model("exponential", rate=1.0), 1.0), (model("gamma", alpha=3.0, beta=2.0), 2.0),
    (model("gamma", alpha=1.0, beta=0.7), 0.7), (model("gumbel"), 1.0),
])
def test_numeric_sup_matches_analytic(m, value):
    assert sup_hazard(m) == value
    assert numeric_sup_hazard(m) == pytest.approx(value, rel=1e-3)


@pytest.mark.parametrize("alpha", [1.2, 2.0, 3.0, 10.0])
def test_frechet_numeric_sup_below_two_alpha(alpha):
    assert numeric_sup_hazard(model("frechet", alpha=alpha)) <= 2 * alpha


def test_gaussian_hazard_unbounded():
    m = model("gaussian", mu=0.0, sigma=1.0)
    assert sup_hazard(m) == math.inf
    assert m.hazard(30.0) > 30.0


# ---- expected maximum ----------------------------------------------------------

def test_gumbel_single_draw():
    assert expected_max(model("gumbel"), 1) == pytest.approx(0.5772156649, abs=1e-10)


def test_gumbel_location_shift():
    assert expected_max(model("gumbel", loc=1.0), 10) == pytest.approx(math.log(10) + EULER_GAMMA + 1.0)


def test_frechet_closed_form():
    assert expected_max(model("frechet", alpha=2.0), 4) == pytest.approx(2 * math.sqrt(math.pi), rel=1e-14)


def test_pareto_modified_bound_and_mc():
    m = model("pareto_modified", alpha=2.0)
    assert expected_max(m, 4, "bound") == pytest.approx(4.0)
    mc, se = expected_max_mc(m, 4, 10 ** 6, seed=1)
    # E[max of 4 Lomax(2)] = 4 B(4, 1/2) - 1 = 4 * 32/35 - 1
    assert abs(mc - (128 / 35 - 1)) <= 3 * se
    assert mc <= 4.0


def test_weibull_modified_bound():
    m = model("weibull_modified", k=0.5)
    assert expected_max(m, 10, "bound") == pytest.approx(10 * 2 * math.log(10) ** 2)
    with pytest.raises(UnavailableError):
        expected_max(model("weibull_modified", k=0.4), 10, "bound")


def test_closed_form_unavailable():
    with pytest.raises(UnavailableError):
        expected_max(model("pareto_modified", alpha=2.0), 10, "closed_form")
    with pytest.raises(UnavailableError):
        expected_max(model("gamma", alpha=2.0, beta=1.0), 10, "closed_form")


def test_gamma_asymptotic_is_flagged():
    value, method = expected_max_value(model("gamma", alpha=2.0, beta=1.0), 100)
    assert method == "asymptotic"
    n = 100
    assert value == pytest.approx(math.log(n) + math.log(math.log(n)) + EULER_GAMMA)


def test_gamma_shape_one_is_exponential():
    assert expected_max(model("gamma", alpha=1.0, beta=2.0), 10) == pytest.approx(harmonic(10) / 2)


def test_heavy_pareto_has_infinite_mean_max():
    assert expected_max(model("pareto", alpha=1.0, x_m=1.0), 5) == math.inf


@pytest.mark.parametrize("m", [model("gumbel"), model("frechet", alpha=3.0), model("exponential", rate=1.5),
                               model("pareto", alpha=3.0, x_m=1.0), model("gamma", alpha=1.0, beta=1.0)], ids=ids)
@pytest.mark.parametrize("N", [2, 10, 100])
def test_closed_forms_match_monte_carlo(m, N):
    mc, se = expected_max_mc(m, N, 10 ** 6, seed=N)
    assert abs(expected_max(m, N) - mc) <= 3 * se


def test_gaussian_two_draws():
    # E[max(Z1, Z2)] = 1/sqrt(pi) for standard normals
    assert expected_max(model("gaussian", mu=0.0, sigma=1.0), 2) == pytest.approx(1 / math.sqrt(math.pi))


# ---- properties ---------------------------------------------------------------

@given(st.floats(-5, 5), st.integers(2, 6), st.integers(0, 2 ** 32))
def test_gumbel_location_does_not_move_argmax(loc, N, seed):
    u = rng.generator(seed, rng.ANALYSIS).random((200, N))
    G = -np.linspace(0, 1, N)
    a = np.argmax(G + model("gumbel").quantile(u), axis=1)
    b = np.argmax(G + model("gumbel", loc=loc).quantile(u), axis=1)
    np.testing.assert_array_equal(a, b)


@given(st.floats(0.05, 0.95), st.floats(0.1, 20))
def test_scaled_quantile_is_scaled(u, c):
    m = model("exponential", rate=1.0)
    assert scaled(m, c).quantile(u) == pytest.approx(c * m.quantile(u), rel=1e-14)
