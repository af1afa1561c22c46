import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from diffrank import autodiff as ad
from diffrank.densemat import ContractError, gaussian_matrix
from diffrank.estimator import (EstimatorConfig, estimate, nuclear_estimate, probes, rank_estimate,
                                schatten_p_estimate)
from diffrank.iterops import IterConfig
from diffrank.oracle import exact_rank, exact_schatten
from diffrank.synthetic import low_rank, orthogonal

BIG = IterConfig(k1=50, k2=50)


def test_config_validation():
    with pytest.raises(ContractError):
        EstimatorConfig(n_samples=0)
    with pytest.raises(ContractError):
        EstimatorConfig(p=-1)
    with pytest.raises(ContractError):
        EstimatorConfig(seed=-3)
    assert EstimatorConfig().with_(p=3).p == 3


@pytest.mark.parametrize("p", [1, 2, 3])
def test_identity_any_p(p):
    _, rep = schatten_p_estimate(np.eye(4), EstimatorConfig(5000, seed=1, p=p))
    assert abs(rep.estimate - 4.0) <= 4 * np.sqrt(2 * 4 / 5000)


def test_diag34_nuclear():
    _, rep = nuclear_estimate(np.diag([3.0, 4.0]), EstimatorConfig(10000, seed=1))
    assert abs(rep.estimate - 7.0) <= 4 * np.sqrt(2 * 25 / 10000)


def test_zero_matrix_gives_exact_zero():
    for fn in (schatten_p_estimate, rank_estimate, nuclear_estimate):
        est, rep = fn(np.zeros((3, 3)), EstimatorConfig(17))
        assert est.item() == 0.0 and rep.estimate == 0.0


def test_rank_identity():
    _, rep = rank_estimate(np.eye(5), EstimatorConfig(2000))
    assert abs(rep.estimate - 5) <= 0.5


def test_rank_low_rank_product():
    s = low_rank(0, 5, 7, 3)
    assert exact_rank(s) == 3
    _, rep = rank_estimate(s, EstimatorConfig(2000, iter=IterConfig(k1=50)))
    assert abs(rep.estimate - 3) <= 0.5


def test_orthogonal_nuclear():
    q = orthogonal(3, 4)
    _, rep = nuclear_estimate(q, EstimatorConfig(4000, seed=2))
    assert abs(rep.estimate - 4.0) <= 4 * np.sqrt(2 * 4 / 4000)


def test_report_invariants():
    s = gaussian_matrix(0, 6, 6)
    est, rep = schatten_p_estimate(s, EstimatorConfig(50, p=2))
    assert rep.samples.shape == (50,)
    assert rep.estimate == np.mean(rep.samples)
    assert est.item() == rep.estimate
    assert rep.variance == np.var(rep.samples, ddof=1)
    assert rep.config.p == 2


def test_single_sample_variance_is_zero():
    _, rep = nuclear_estimate(np.eye(2), EstimatorConfig(1))
    assert rep.variance == 0.0


def test_probes_are_stream_addressed():
    cfg = EstimatorConfig(8, seed=4, stream_offset=100)
    g = probes(5, cfg)
    assert np.array_equal(g[:, 3:], probes(5, cfg.with_(stream_offset=103, n_samples=5)))


def test_samples_are_separate_columns():
    # sample i only depends on probe i: dropping samples leaves the rest unchanged
    s = gaussian_matrix(1, 5, 5)
    _, a = nuclear_estimate(s, EstimatorConfig(10, seed=3))
    _, b = nuclear_estimate(s, EstimatorConfig(4, seed=3))
    assert np.allclose(a.samples[:4], b.samples, rtol=1e-13, atol=0)


def test_dispatch():
    s = np.eye(3)
    cfg = EstimatorConfig(30)
    assert estimate(s, "rank", cfg)[1].estimate == rank_estimate(s, cfg)[1].estimate
    assert estimate(s, "nuclear", cfg)[1].estimate == nuclear_estimate(s, cfg)[1].estimate
    with pytest.raises(ContractError):
        estimate(s, "trace", cfg)


def test_reproducible():
    s = gaussian_matrix(2, 4, 6)
    a = schatten_p_estimate(s, EstimatorConfig(30, seed=9, p=3))[1]
    b = schatten_p_estimate(s, EstimatorConfig(30, seed=9, p=3))[1]
    assert np.array_equal(a.samples, b.samples)


@pytest.mark.parametrize("p", [1, 2])
def test_gradient_matches_fd(p):
    s = gaussian_matrix(12, 3, 3)
    cfg = EstimatorConfig(20, iter=IterConfig(k1=20, k2=20), seed=1, p=p)
    f = lambda x: schatten_p_estimate(x, cfg)[0]
    _, g = ad.gradient(f, s)
    assert np.any(g)
    h = 1e-6
    fd = np.zeros_like(s)
    for idx in np.ndindex(*s.shape):
        e = np.zeros_like(s)
        e[idx] = h
        fd[idx] = (schatten_p_estimate(s + e, cfg)[1].estimate - schatten_p_estimate(s - e, cfg)[1].estimate) / (2 * h)
    assert np.max(np.abs(g - fd)) / np.max(np.abs(fd)) <= 1e-4


def test_rank_gradient_is_small_at_full_rank():
    # projection onto the full space is constant, so the gradient vanishes as k1 grows
    s = gaussian_matrix(5, 4, 4)
    _, g = ad.gradient(lambda x: rank_estimate(x, EstimatorConfig(20, iter=IterConfig(k1=40)))[0], s)
    assert np.max(np.abs(g)) <= 1e-6


def test_variance_scales_as_one_over_n():
    s = gaussian_matrix(3, 10, 10)

    def spread(n, trials=200):
        vals = [nuclear_estimate(s, EstimatorConfig(n, iter=BIG, stream_offset=t * n))[1].estimate
                for t in range(trials)]
        return np.var(vals, ddof=1)

    ratio = spread(50) / spread(200)
    assert 4 * 0.7 <= ratio <= 4 * 1.3


def test_per_sample_variance_law():
    s = gaussian_matrix(3, 10, 10)
    for p in (1, 2):
        _, rep = schatten_p_estimate(s, EstimatorConfig(10000, iter=BIG, seed=1, p=p))
        law = 2 * exact_schatten(s, 2 * p)
        assert 0.5 * law <= rep.variance <= 1.5 * law


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 10_000))
def test_estimates_are_finite_and_nonnegative(m, n, seed):
    s = gaussian_matrix(seed, m, n)
    for p in (0, 1, 2):
        _, rep = schatten_p_estimate(s, EstimatorConfig(8, seed=seed, p=p))
        assert np.isfinite(rep.estimate)
    _, rep = rank_estimate(s, EstimatorConfig(8, seed=seed))
    assert rep.estimate >= 0
