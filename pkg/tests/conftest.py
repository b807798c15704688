import numpy as np
import pytest

from rareloss.portfolio import Portfolio, build_benchmark_portfolio


@pytest.fixture(scope="session")
def gaussian_benchmark():
    return build_benchmark_portfolio(variant="gaussian")


@pytest.fixture(scope="session")
def t_benchmark():
    return build_benchmark_portfolio(variant="t")


@pytest.fixture(scope="session")
def clayton_benchmark():
    return build_benchmark_portfolio(variant="clayton")


def small_portfolio(d=10, m=1, seed=0, pd=0.05):
    """Random nonnegative loadings with row norms below 0.9 and integer costs."""
    gen = np.random.default_rng(seed)
    A = gen.uniform(0.1, 0.5, size=(d, m))
    A *= np.minimum(1.0, 0.8 / np.linalg.norm(A, axis=1))[:, None]
    c = gen.integers(1, 5, size=d).astype(float)
    from scipy.stats import norm

    x = norm.isf(np.full(d, pd))
    return Portfolio(c, x, A)


@pytest.fixture
def toy10():
    return small_portfolio(10, 1, seed=3)


def exact_tail_gaussian_m1(p, gamma, nodes=80):
    """P(L > gamma) for a one-factor Gaussian portfolio: Gauss-Hermite over
    the factor times full enumeration of the 2^d default patterns."""
    import itertools

    from rareloss.models import gaussian_conditional_pd

    x, w = np.polynomial.hermite_e.hermegauss(nodes)
    w = w / w.sum()
    B = np.array(list(itertools.product((0, 1), repeat=p.d)), dtype=float)
    tail = (B @ p.costs) > gamma
    total = 0.0
    for xi, wi in zip(x, w):
        P = gaussian_conditional_pd(p, [xi])
        total += wi * np.sum(np.prod(np.where(B == 1, P, 1 - P), axis=1) * tail)
    return total
