import math

import numpy as np
import pytest

from mmdscan.errors import ConfigurationError, InsufficientSamplesError, ResourceError
from mmdscan.geometry import ModularRange
from mmdscan.kernels import constant, gaussian, laplacian
from mmdscan.mmd import (
    SampleField, build_gram_cache, complement, expected_kernel, mmd2_gaussian_pair, mmd2_mixtures,
    mmd_u2, subset_mmd_u2,
)


def brute_mmd(X, Y, k):
    n, m = len(X), len(Y)
    sxx = sum(k(X[i], X[j]) for i in range(n) for j in range(n) if i != j)
    syy = sum(k(Y[i], Y[j]) for i in range(m) for j in range(m) if i != j)
    sxy = sum(k(x, y) for x in X for y in Y)
    return sxx / (n * (n - 1)) + syy / (m * (m - 1)) - 2 * sxy / (n * m)


def gk(x, y):
    return math.exp(-((x - y) ** 2) / 2)


# --- estimator -------------------------------------------------------------

def test_constant_kernel_is_zero(rng):
    assert mmd_u2(rng.normal(size=5), rng.normal(size=7), constant(1.0)) == pytest.approx(0.0, abs=1e-15)


def test_hand_values():
    assert mmd_u2([0, 0], [1, 1], gaussian(1.0)) == pytest.approx(2 - 2 * math.exp(-0.5), abs=1e-14)
    assert mmd_u2([0, 0], [1, 1], gaussian(1.0)) == pytest.approx(0.786938, abs=1e-6)
    v = mmd_u2([0, 1], [0, 1], gaussian(1.0))
    assert v == pytest.approx(math.exp(-0.5) - 1, abs=1e-14)
    assert v == pytest.approx(-0.393469, abs=1e-6)


def test_matches_brute_force(rng):
    X, Y = rng.normal(size=6), rng.normal(1, 2, size=9)
    assert mmd_u2(X, Y, gaussian(1.0)) == pytest.approx(brute_mmd(X, Y, gk), abs=1e-13)


@pytest.mark.parametrize("n,m", [(1, 5), (5, 1), (0, 3)])
def test_needs_two_samples(n, m):
    with pytest.raises(InsufficientSamplesError):
        mmd_u2(np.zeros(n), np.zeros(m), gaussian(1.0))


def test_range(rng):
    for _ in range(200):
        X = rng.normal(scale=3, size=rng.integers(2, 8))
        Y = rng.normal(scale=3, size=rng.integers(2, 8))
        assert abs(mmd_u2(X, Y, laplacian(0.5))) <= 2.0


# --- population values -----------------------------------------------------

def test_population_examples():
    assert mmd2_gaussian_pair(0, 1, 0, 1, 1) == pytest.approx(0.0, abs=1e-15)
    assert mmd2_gaussian_pair(0, 1, 1, 1, 1) == pytest.approx(2 / math.sqrt(3) * (1 - math.exp(-1 / 6)), rel=1e-14)
    assert mmd2_gaussian_pair(0, 1, 1, 1, 1) == pytest.approx(0.177268, abs=1e-6)
    assert mmd2_gaussian_pair(0, 1, 0, 4, 1) == pytest.approx(1 / math.sqrt(3) - 2 / math.sqrt(6) + 1 / 3, rel=1e-13)
    assert mmd2_gaussian_pair(0, 1, 0, 4, 1) == pytest.approx(0.094187, abs=1e-6)


def test_population_rejects_bad_params():
    with pytest.raises(ConfigurationError):
        mmd2_gaussian_pair(0, 0, 0, 1, 1)
    with pytest.raises(ConfigurationError):
        mmd2_gaussian_pair(0, 1, 0, 1, -1)


@pytest.mark.slow
@pytest.mark.parametrize("mq,vq,expected", [(1.0, 1.0, 0.177268), (0.0, 4.0, 0.094187)])
def test_population_monte_carlo(mq, vq, expected):
    # E k(x,x') - 2 E k(x,y) + E k(y,y') with independent copies, 10^7 draws each
    g = np.random.default_rng(7)
    n = 10_000_000
    x1, x2 = g.normal(0, 1, n), g.normal(0, 1, n)
    y1, y2 = g.normal(mq, math.sqrt(vq), n), g.normal(mq, math.sqrt(vq), n)
    k = lambda a, b: np.exp(-((a - b) ** 2) / 2).mean()
    mc = k(x1, x2) - 2 * k(x1, y1) + k(y1, y2)
    assert mc == pytest.approx(expected, abs=1e-3)


def test_laplacian_expected_kernel_monte_carlo():
    g = np.random.default_rng(3)
    x, y = g.normal(0.3, 1.2, 2_000_000), g.normal(-0.5, 0.7, 2_000_000)
    mc = np.exp(-np.abs(x - y) / 0.8).mean()
    assert expected_kernel(laplacian(0.8), 0.3, 1.2 ** 2, -0.5, 0.7 ** 2) == pytest.approx(mc, abs=2e-3)


def test_mixture_with_single_component_matches_pair():
    a = mmd2_mixtures([(1.0, 0.0, 1.0)], [(1.0, 1.0, 1.0)], gaussian(1.0))
    assert a == pytest.approx(mmd2_gaussian_pair(0, 1, 1, 1, 1), rel=1e-14)


def test_mixture_equal_moments_is_small_but_positive():
    v = mmd2_mixtures([(1.0, 0.0, 2.0)], [(0.5, -1.0, 1.0), (0.5, 1.0, 1.0)], gaussian(1.0))
    assert 0 < v < 0.01


# --- gram cache ------------------------------------------------------------

def test_cache_constant_kernel():
    c = build_gram_cache(np.zeros(2), constant(1.0))
    assert np.array_equal(c.gram, np.ones((2, 2)))
    assert c.total == 4.0
    assert np.array_equal(c.row_sums, [2.0, 2.0])


def test_cache_total_two_nodes():
    c = build_gram_cache(np.array([0.0, 1.0]), gaussian(1.0))
    assert c.total == pytest.approx(2 + 2 * math.exp(-0.5), abs=1e-14)
    assert c.total == pytest.approx(3.213061, abs=1e-6)


def test_cache_invariants(rng):
    c = build_gram_cache(rng.normal(size=50), gaussian(1.0))
    assert np.array_equal(c.gram, c.gram.T)
    assert c.gram.min() >= 0 and c.gram.max() <= 1
    assert c.prefix2d[50, 50] == pytest.approx(c.total, rel=1e-12)
    assert c.total == pytest.approx(c.row_sums.sum(), rel=1e-9)
    for i, j in [(0, 0), (1, 1), (13, 40), (50, 7), (25, 25)]:
        assert c.prefix2d[i, j] == pytest.approx(c.gram[:i, :j].sum(), abs=1e-10)


def test_cache_without_prefix(rng):
    c = build_gram_cache(rng.normal(size=10), gaussian(1.0), with_prefix2d=False)
    assert c.prefix2d is None


def test_cache_memory_guard(rng):
    with pytest.raises(ResourceError):
        build_gram_cache(rng.normal(size=30), gaussian(1.0), max_prefix_nodes=20)


def test_sample_field_validation():
    from mmdscan.geometry import line
    with pytest.raises(ConfigurationError, match="node count mismatch"):
        SampleField(np.zeros(5), line(6))
    with pytest.raises(ConfigurationError):
        SampleField(np.array([0.0, np.nan]))
    f = SampleField([1, 2, 3], line(3))
    assert len(f) == 3 and f.values.dtype == float


# --- subset statistics -----------------------------------------------------

def test_subset_contiguous_splits(rng):
    v = rng.normal(size=6)
    c = build_gram_cache(v, gaussian(1.0))
    for s in range(6):
        for k in range(2, 5):
            if s + k > 6:
                continue
            inside = np.arange(s, s + k)
            want = mmd_u2(v[inside], v[complement(inside, 6)], gaussian(1.0))
            assert subset_mmd_u2(c, range(s, s + k)) == pytest.approx(want, abs=1e-12)
            assert subset_mmd_u2(c, inside) == pytest.approx(want, abs=1e-12)
    assert subset_mmd_u2(c, range(2, 4)) == pytest.approx(mmd_u2(v[2:4], np.r_[v[:2], v[4:]], gaussian(1.0)), abs=1e-12)


def test_subset_ring_wrap(rng):
    v = rng.normal(size=5)
    c = build_gram_cache(v, gaussian(1.0))
    want = mmd_u2(v[[4, 0]], v[[1, 2, 3]], gaussian(1.0))
    assert subset_mmd_u2(c, ModularRange(4, 2, 5)) == pytest.approx(want, abs=1e-12)
    assert subset_mmd_u2(c, np.array([0, 4])) == pytest.approx(want, abs=1e-12)


def test_subset_complement_symmetry(rng):
    v = rng.normal(size=12)
    c = build_gram_cache(v, laplacian(1.0))
    for idx in (np.array([0, 3, 5]), np.arange(4, 9), np.array([1, 2, 10, 11])):
        assert subset_mmd_u2(c, idx) == pytest.approx(subset_mmd_u2(c, complement(idx, 12)), abs=1e-12)


def test_subset_too_small(rng):
    c = build_gram_cache(rng.normal(size=6), gaussian(1.0))
    with pytest.raises(InsufficientSamplesError):
        subset_mmd_u2(c, range(0, 1))
    with pytest.raises(InsufficientSamplesError):
        subset_mmd_u2(c, range(0, 5))


@pytest.mark.slow
def test_unbiasedness():
    g = np.random.default_rng(2024)
    X = g.normal(0, 1, (20_000, 20))
    Y = g.normal(1, 1, (20_000, 20))
    vals = np.array([mmd_u2(x, y, gaussian(1.0)) for x, y in zip(X, Y)])
    se = vals.std(ddof=1) / math.sqrt(vals.size)
    assert abs(vals.mean() - 0.177268) <= 3 * se
