import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from rareloss.errors import BracketError, DomainError, ParameterError
from rareloss.numerics import QuantileFn, find_root, inv_cdf, ks_statistic

U = np.concatenate([np.logspace(-12, -1, 40), np.linspace(0.05, 0.95, 50), 1 - np.logspace(-1, -12, 40)])


@pytest.mark.parametrize("q, ref", [
    (QuantileFn.normal(), stats.norm()),
    (QuantileFn.normal(2.0, 3.0), stats.norm(2.0, 3.0)),
    (QuantileFn.student_t(3.0), stats.t(3.0)),
    (QuantileFn.student_t(0.7), stats.t(0.7)),
    (QuantileFn.gamma(0.3), stats.gamma(0.3)),
    (QuantileFn.gamma(1.0 / 5.5, 5.5), stats.gamma(1.0 / 5.5, scale=5.5)),
    (QuantileFn.gamma(7.0, 0.5), stats.gamma(7.0, scale=0.5)),
    (QuantileFn.beta(0.3, 0.7), stats.beta(0.3, 0.7)),
    (QuantileFn.beta(2.0, 5.0), stats.beta(2.0, 5.0)),
    (QuantileFn.exponential(2.0), stats.expon(scale=0.5)),
    (QuantileFn.chi2(3.0), stats.chi2(3.0)),
])
def test_quantiles_match_reference_and_invert_cdf(q, ref):
    x = q.ppf(U)
    np.testing.assert_allclose(x, ref.ppf(U), rtol=1e-8, atol=1e-12)
    # round trip: relative in the lower tail, relative to q in the upper tail
    np.testing.assert_allclose(q.cdf(x), U, rtol=1e-10, atol=1e-300)
    xs = q.isf(U)
    # check each point through its well-conditioned tail; rounding x to a
    # double moves the tail mass by about pdf(x) ulp(x), so allow that much
    slack = 4.0 * np.nan_to_num(q.pdf(xs)) * np.spacing(np.abs(xs))
    upper = U <= 0.5
    at_end = xs == q.support[1]
    err_up = np.abs(q.sf(xs) - U)
    err_lo = np.abs(q.cdf(xs) - (1.0 - U))
    assert np.all((err_up <= 1e-10 * U + slack)[upper & ~at_end])
    assert np.all((err_lo <= 1e-10 * (1.0 - U) + slack)[~upper])

def test_inv_cdf_examples():
    assert inv_cdf(QuantileFn.normal(), 0.5) == 0.0
    assert inv_cdf(QuantileFn.gamma(1.0, 1.0), 0.3) == pytest.approx(-math.log(0.7), abs=1e-12)
    assert inv_cdf(QuantileFn.student_t(3.0), 0.975) == pytest.approx(3.182446305284263, abs=1e-10)


@pytest.mark.parametrize("u", [0.0, 1.0, -0.1, 1.5])
def test_inv_cdf_rejects_boundary(u):
    with pytest.raises(DomainError):
        inv_cdf(QuantileFn.normal(), u)


@pytest.mark.parametrize("family, params", [("gamma", (-1.0, 1.0)), ("beta", (0.0, 1.0)), ("t", (0.0,)),
                                            ("normal", (0.0, -1.0)), ("weird", (1.0,)), ("gamma", (1.0,))])
def test_invalid_parameters(family, params):
    with pytest.raises(ParameterError):
        QuantileFn(family, params)


@settings(max_examples=60, deadline=None)
@given(a=st.floats(0.05, 20), u=st.floats(1e-10, 1 - 1e-10))
def test_gamma_roundtrip_property(a, u):
    q = QuantileFn.gamma(a)
    assert q.cdf(q.ppf(u)) == pytest.approx(u, rel=1e-9, abs=1e-15)


@settings(max_examples=60, deadline=None)
@given(r=st.floats(0.5, 50), u=st.floats(1e-9, 1 - 1e-9))
def test_t_roundtrip_and_monotone(r, u):
    q = QuantileFn.student_t(r)
    x = q.ppf(u)
    assert q.cdf(x) == pytest.approx(u, rel=1e-9)
    assert q.ppf(min(u * 1.01, 1 - 1e-12)) >= x


def test_find_root_examples():
    assert find_root(lambda x: x * x - 2, 0, 2) == pytest.approx(math.sqrt(2), abs=1e-12)
    theta = find_root(lambda th: 100 * 0.01 * math.exp(th) / (1 + 0.01 * (math.exp(th) - 1)) - 10, 0, 10)
    assert theta == pytest.approx(math.log(11), abs=1e-10)
    with pytest.raises(BracketError):
        find_root(lambda x: x * x + 1, -1, 1)


def test_ks_statistic_examples():
    assert ks_statistic([0.5], lambda x: np.clip(x, 0, 1)) == pytest.approx(0.5)
    assert ks_statistic([0.25, 0.75], lambda x: np.clip(x, 0, 1)) == pytest.approx(0.25)
    with pytest.raises(DomainError):
        ks_statistic([], lambda x: x)


def test_ks_statistic_matches_scipy():
    x = np.random.default_rng(1).normal(size=500)
    assert ks_statistic(x, stats.norm.cdf) == pytest.approx(stats.kstest(x, "norm").statistic, abs=1e-14)
