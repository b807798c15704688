import math

import numpy as np
import pytest
from scipy import integrate, stats

from rareloss.errors import DegenerateError, DomainError, ParameterError
from rareloss.models import (
    ClaytonModel,
    GaussianModel,
    TFactorModel,
    archimedean_copula_cdf_check,
    clayton_conditional_pd,
    clayton_psi,
    clayton_psi_inv,
    gaussian_conditional_pd,
    kendall_tau,
    model_from_tag,
    sample_clayton_copula,
    sample_loss,
    sample_losses,
    t_conditional_pd,
)
from rareloss.numerics import QuantileFn
from rareloss.portfolio import Portfolio


def test_gaussian_conditional_pd_examples(gaussian_benchmark):
    p = Portfolio([1.0, 1.0], [0.0, 0.0], np.zeros((2, 1)))
    np.testing.assert_allclose(gaussian_conditional_pd(p, [3.0]), 0.5)
    g = gaussian_benchmark
    np.testing.assert_allclose(gaussian_conditional_pd(g, np.zeros(21)), stats.norm.cdf(-g.thresholds / g.b),
                               rtol=1e-12)
    assert np.all(gaussian_conditional_pd(g, np.full(21, 40.0)) > 1 - 1e-12)


def test_t_conditional_pd_examples(gaussian_benchmark):
    g = gaussian_benchmark
    z = np.random.default_rng(0).normal(size=21)
    np.testing.assert_array_equal(t_conditional_pd(g, z, 3.0, 3.0), gaussian_conditional_pd(g, z))
    p = Portfolio([1.0], [1.0], [[math.sqrt(0.96)]])
    assert t_conditional_pd(p, [0.0], 12.0, 3.0)[0] == pytest.approx(stats.norm.cdf(-10.0), rel=1e-10)
    assert t_conditional_pd(p, [0.0], 1e-20, 3.0)[0] == pytest.approx(0.5, abs=1e-9)
    with pytest.raises(DomainError):
        t_conditional_pd(p, [0.0], 0.0, 3.0)


def test_clayton_conditional_pd_examples():
    p = Portfolio([1.0], [math.log(2.0)], np.zeros((1, 0)))  # F(x) = 1/2 for Exp(1)
    assert clayton_conditional_pd(p, 1.0, 1.0)[0] == pytest.approx(1 - math.exp(-1), abs=1e-12)
    assert clayton_conditional_pd(p, 1e-300, 1.0)[0] < 1e-290
    assert clayton_conditional_pd(p, 1e6, 1.0)[0] == 1.0
    lam = np.linspace(0.01, 5, 50)
    assert np.all(np.diff(clayton_conditional_pd(p, lam, 2.0)[:, 0]) > 0)
    with pytest.raises(DegenerateError):
        clayton_conditional_pd(Portfolio([1.0], [0.0], np.zeros((1, 0))), 1.0, 1.0)


def test_psi_inverse_pair():
    u = np.linspace(0.01, 0.99, 50)
    for eta in (0.5, 1.0, 5.5):
        np.testing.assert_allclose(clayton_psi_inv(clayton_psi(u, eta), eta), u, rtol=1e-12)


def test_copula_cdf_examples():
    assert archimedean_copula_cdf_check([0.37], 5.5) == pytest.approx(0.37, rel=1e-12)
    assert archimedean_copula_cdf_check([1.0, 1.0, 1.0], 2.0) == 1.0
    assert archimedean_copula_cdf_check([0.5, 0.5], 1.0) == pytest.approx(1.0 / 3.0, rel=1e-12)


@pytest.mark.parametrize("eta, u", [(1.0, (0.5, 0.5)), (5.5, (0.3, 0.8)), (0.4, (0.2, 0.6))])
def test_copula_cdf_matches_mixture_integral(eta, u):
    # P(U <= u) = E[prod_i P(E_i >= Lambda psi(u_i))] = E[exp(-Lambda sum psi(u_i))], Lambda ~ G(1/eta, eta)
    s = sum(clayton_psi(v, eta) for v in u)
    mix = stats.gamma(1.0 / eta, scale=eta)
    val, _ = integrate.quad(lambda lam: math.exp(-lam * s) * mix.pdf(lam), 0, np.inf, limit=200)
    assert archimedean_copula_cdf_check(u, eta) == pytest.approx(val, abs=1e-3)


def test_copula_sampler_uniform_marginals_and_tau():
    U = sample_clayton_copula(100_000, 2, 5.5, rng=3)
    for j in range(2):
        assert stats.kstest(U[:, j], "uniform").pvalue > 0.01
    assert abs(kendall_tau(U[:20000, 0], U[:20000, 1]) - 5.5 / 7.5) < 0.02


def test_benchmark_clayton_model_tau(clayton_benchmark):
    s = sample_losses(clayton_benchmark, ClaytonModel(5.5), 20_000, rng=4, keep_latent=True)
    E, lam = s.latent["E"][:, :2], s.latent["Lambda"]
    U = clayton_psi_inv(E / lam[:, None], 5.5)
    assert abs(kendall_tau(U[:, 0], U[:, 1]) - 5.5 / 7.5) < 0.02


def test_sampler_marginal_default_rates(gaussian_benchmark, t_benchmark):
    n = 100_000
    for p, model in ((gaussian_benchmark, GaussianModel()), (t_benchmark, TFactorModel(3.0))):
        s = sample_losses(p, model, n, rng=5, keep_latent=True)
        rate = s.defaults.mean(axis=0)
        sd = np.sqrt(p.marginal_pd * (1 - p.marginal_pd) / n)
        # every obligor within 4.5 sd; the bulk within 3 sd
        assert np.all(np.abs(rate - p.marginal_pd) <= 4.5 * sd)
        assert np.mean(np.abs(rate - p.marginal_pd) <= 3 * sd) > 0.98
        np.testing.assert_array_equal(s.loss, s.defaults.astype(float) @ p.costs)


def test_clayton_marginals_with_uniform_mixing():
    p = Portfolio(np.ones(3), np.full(3, 1.0), np.zeros((3, 0)))
    s = sample_losses(p, ClaytonModel(2.0, mixing_scale=2.0), 100_000, rng=6, keep_latent=True)
    assert np.all(np.abs(s.defaults.mean(axis=0) - math.exp(-1)) < 3 * math.sqrt(0.25 / 1e5) * 1.5)


def test_infinite_thresholds_never_default():
    p = Portfolio([1.0, 2.0], [np.inf, np.inf], [[0.5], [0.5]])
    assert sample_losses(p, GaussianModel(), 1000, rng=1).loss.max() == 0


def test_sample_loss_single_draw(gaussian_benchmark):
    s = sample_loss(gaussian_benchmark, GaussianModel(), rng=9)
    assert s.defaults.shape == (1000,) and s.latent["Z"].shape == (21,)
    assert s.loss == float(s.defaults @ gaussian_benchmark.costs)


def test_model_tags():
    assert isinstance(model_from_tag("t", r=4), TFactorModel)
    with pytest.raises(ParameterError):
        model_from_tag("gumbel")
    with pytest.raises(ParameterError):
        TFactorModel(-1.0)
    with pytest.raises(ParameterError):
        ClaytonModel(0.0)
    assert ClaytonModel().marginal == QuantileFn.exponential()
