import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from rareloss.errors import DegenerateError, DomainError, ParameterError
from rareloss.portfolio import (
    Portfolio,
    build_benchmark_portfolio,
    load_portfolio_csv,
    portfolio_loss,
    save_portfolio_csv,
)


def test_loss_examples(gaussian_benchmark):
    assert portfolio_loss(Portfolio([1, 1, 1], [0, 0, 0], np.zeros((3, 0))), [0, 0, 0]) == 0
    assert portfolio_loss(Portfolio([1, 1, 1], [0, 0, 0], np.zeros((3, 0))), [1, 1, 1]) == 3
    B = np.zeros(1000)
    B[0] = B[-1] = 1
    assert portfolio_loss(gaussian_benchmark, B) == 26


def test_loss_length_mismatch():
    with pytest.raises(DomainError):
        portfolio_loss(Portfolio([1, 1], [0, 0], np.zeros((2, 0))), [1, 0, 1])


def test_benchmark_structure(gaussian_benchmark, t_benchmark):
    p = gaussian_benchmark
    assert p.d == 1000 and p.m == 21
    assert p.costs[0] == 1 and p.costs[-1] == 25
    np.testing.assert_allclose(p.b, 0.2, atol=1e-12)
    assert np.all((p.marginal_pd >= 0) & (p.marginal_pd <= 0.02))
    A = p.loadings
    assert np.all(A[:, 0] == 0.8)
    assert np.all((A[:, 1:] > 0).sum(axis=1) == 2)
    # sector i occupies rows 100i..100i+99 in column 1+i; sub-block j is rows 10j..10j+9 inside it
    assert np.all(A[250:260, 3] == 0.4) and np.all(A[250:260, 11 + 5] == 0.4)
    np.testing.assert_allclose(A[:, 11:].sum(axis=0), 40.0)
    np.testing.assert_allclose(stats.norm.sf(p.thresholds), p.marginal_pd, rtol=1e-12)
    np.testing.assert_allclose(stats.t.sf(t_benchmark.thresholds, 3), t_benchmark.marginal_pd, rtol=1e-9)


def test_clayton_benchmark(clayton_benchmark):
    assert clayton_benchmark.m == 0
    assert np.all(clayton_benchmark.costs == 1) and np.all(clayton_benchmark.thresholds == 3)


def test_invariants_enforced():
    with pytest.raises(ParameterError):
        Portfolio([1.0], [0.0], [[0.9, 0.9]])
    with pytest.raises(DegenerateError):
        Portfolio([1.0], [0.0], [[0.6, 0.8]])
    with pytest.raises(ParameterError):
        Portfolio([0.0], [0.0], [[0.5]])
    with pytest.raises(ParameterError):
        build_benchmark_portfolio(d=150)


def test_csv_roundtrip(tmp_path, gaussian_benchmark):
    path = tmp_path / "p.csv"
    save_portfolio_csv(gaussian_benchmark, path)
    q = load_portfolio_csv(path)
    for name in ("costs", "thresholds", "loadings", "b", "marginal_pd"):
        assert np.array_equal(getattr(q, name), getattr(gaussian_benchmark, name))


def test_csv_with_probabilities_only(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("k,c_k,p_k,a_1\n2,2,0.1,0.5\n1,1,0.01,0.3\n")
    p = load_portfolio_csv(path)
    assert list(p.costs) == [1.0, 2.0]
    np.testing.assert_allclose(stats.norm.sf(p.thresholds), [0.01, 0.1], rtol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.booleans(), st.booleans()), min_size=1, max_size=30))
def test_quasi_monotone(pairs):
    d = len(pairs)
    c = np.arange(1, d + 1, dtype=float)
    p = Portfolio(c, np.zeros(d), np.zeros((d, 0)))
    B = np.array([a for a, _ in pairs], dtype=float)
    B2 = np.maximum(B, [b for _, b in pairs])
    assert portfolio_loss(p, B) <= portfolio_loss(p, B2)
