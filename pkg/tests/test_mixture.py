import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from kernelfilter.exceptions import (
    DegenerateMixtureError,
    DimensionError,
    NonNormalizableError,
    NotPositiveDefiniteError,
    SignedMixtureSamplingError,
)
from kernelfilter.mixture import GaussianKernel, KernelMixture, dumps, empty, loads, load, save


def random_mixture(rng, k, d, signed=False):
    weights = rng.uniform(0.2, 1.0, size=k)
    if signed:
        weights *= rng.choice([-1.0, 1.0], size=k)
    means = rng.normal(scale=1.5, size=(k, d))
    covs = []
    for _ in range(k):
        a = rng.normal(size=(d, d))
        covs.append(a @ a.T / d + 0.3 * np.eye(d))
    return KernelMixture.from_arrays(weights, means, covs)


# ----------------------------------------------------------------- evaluate

def test_standard_normal_peak():
    m = KernelMixture.gaussian([0.0], [[1.0]])
    assert m.evaluate([0.0]) == pytest.approx(0.3989422804014327, rel=1e-14)


def test_empty_mixture_evaluates_to_zero():
    assert empty(3).evaluate(np.ones(3)) == 0.0


def test_two_kernel_value_matches_monte_carlo_kde():
    # oracle: probability of a small window around 0 estimated from 10^6 draws
    m = KernelMixture.from_arrays([0.5, 0.5], [[-1.0], [1.0]], [[[1.0]], [[1.0]]])
    rng = np.random.default_rng(11)
    draws = m.sample(1_000_000, rng)[:, 0]
    h = 0.05
    p_hat = np.mean(np.abs(draws) < h)
    density_hat = p_hat / (2 * h)
    se = np.sqrt(p_hat * (1 - p_hat) / draws.size) / (2 * h)
    # window averaging bias is O(h^2 f''), far below the sampling error here
    assert abs(m.evaluate([0.0]) - density_hat) < 3 * se


def test_evaluate_matches_scipy():
    rng = np.random.default_rng(0)
    m = random_mixture(rng, 4, 3, signed=True)
    x = rng.normal(size=(7, 3))
    expected = sum(k.weight * stats.multivariate_normal(k.mean, k.cov).pdf(x) for k in m.kernels)
    np.testing.assert_allclose(m.evaluate(x), expected, rtol=1e-12)


def test_dimension_mismatch_raises():
    m = KernelMixture.gaussian([0.0, 0.0], np.eye(2))
    with pytest.raises(DimensionError):
        m.evaluate([0.0, 0.0, 0.0])


def test_non_spd_covariance_rejected():
    with pytest.raises(NotPositiveDefiniteError):
        GaussianKernel(1.0, np.zeros(2), np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_slightly_asymmetric_covariance_is_symmetrized():
    k = GaussianKernel(1.0, np.zeros(2), np.array([[1.0, 0.2 + 1e-14], [0.2, 1.0]]))
    np.testing.assert_array_equal(k.cov, k.cov.T)


# ----------------------------------------------------------------- gradient

def test_gradient_at_peak_and_unit_offset():
    m = KernelMixture.gaussian([0.0], [[1.0]])
    assert m.gradient([0.0])[0] == 0.0
    assert m.gradient([1.0])[0] == pytest.approx(-0.24197072451914337, rel=1e-13)


def test_gradient_matches_central_differences():
    rng = np.random.default_rng(3)
    m = random_mixture(rng, 3, 2)
    x = rng.normal(size=2)
    h = 1e-5
    fd = np.array([(m.evaluate(x + h * e) - m.evaluate(x - h * e)) / (2 * h) for e in np.eye(2)])
    np.testing.assert_allclose(m.gradient(x), fd, rtol=1e-6)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.integers(1, 4), k=st.integers(1, 4))
def test_gradient_property(seed, d, k):
    rng = np.random.default_rng(seed)
    m = random_mixture(rng, k, d, signed=True)
    x = rng.normal(size=d)
    h = 1e-5
    fd = np.array([(m.evaluate(x + h * e) - m.evaluate(x - h * e)) / (2 * h) for e in np.eye(d)])
    scale = np.abs(m.weights).sum() * max(np.max(np.abs(fd)), 1e-3)
    np.testing.assert_allclose(m.gradient(x), fd, rtol=1e-6, atol=1e-6 * scale)


def test_value_and_gradient_batch_consistent():
    rng = np.random.default_rng(4)
    m = random_mixture(rng, 3, 3)
    xs = rng.normal(size=(5, 3))
    v, g = m.value_and_gradient(xs)
    np.testing.assert_allclose(v, m.evaluate(xs), rtol=1e-14)
    np.testing.assert_allclose(g, m.gradient(xs), rtol=1e-14)


# ------------------------------------------------------------------ moments

def test_single_kernel_moments():
    m = KernelMixture.gaussian([2.0, 3.0], np.eye(2))
    mean, cov = m.moments()
    np.testing.assert_array_equal(mean, [2.0, 3.0])
    np.testing.assert_allclose(cov, np.eye(2), atol=1e-15)


def test_law_of_total_variance():
    a, s = 1.7, 0.4
    m = KernelMixture.from_arrays([0.5, 0.5], [[-a], [a]], [[[s * s]], [[s * s]]])
    mean, cov = m.moments()
    assert mean[0] == pytest.approx(0.0, abs=1e-15)
    assert cov[0, 0] == pytest.approx(s * s + a * a, rel=1e-14)


def test_moments_match_monte_carlo():
    rng = np.random.default_rng(5)
    m = random_mixture(rng, 5, 2)
    draws = m.sample(1_000_000, rng)
    mean, cov = m.moments()
    se = np.sqrt(np.diag(cov) / draws.shape[0])
    assert np.all(np.abs(draws.mean(axis=0) - mean) < 3 * se)
    # standard error of a sample variance is about var * sqrt(2/n) for near-Gaussian data;
    # a mixture has heavier tails, so use the empirical fourth moment instead
    centered = draws - mean
    for i in range(2):
        var_se = np.std(centered[:, i] ** 2) / np.sqrt(draws.shape[0])
        assert abs(np.var(draws[:, i]) - cov[i, i]) < 3 * var_se


def test_moments_of_nonpositive_mass_raise():
    m = KernelMixture.from_arrays([1.0, -1.0], [[0.0], [1.0]], [[[1.0]], [[1.0]]])
    with pytest.raises(DegenerateMixtureError):
        m.moments()


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.integers(1, 4))
def test_single_kernel_moments_exact(seed, d):
    rng = np.random.default_rng(seed)
    m = random_mixture(rng, 1, d)
    m = m.reweighted([rng.uniform(0.1, 5.0)])
    mean, cov = m.moments()
    np.testing.assert_allclose(mean, m.kernels[0].mean, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(cov, m.kernels[0].cov, rtol=1e-9, atol=1e-12)


# ------------------------------------------------------------------ sample

def test_sample_standard_normal_clt():
    m = KernelMixture.gaussian([0.0], [[1.0]])
    x = m.sample(100_000, np.random.default_rng(6))[:, 0]
    assert abs(x.mean()) < 0.02
    assert abs(x.var() - 1) < 0.02


def test_sample_zero_count():
    m = KernelMixture.gaussian([0.0, 1.0], np.eye(2))
    assert m.sample(0, np.random.default_rng(0)).shape == (0, 2)


def test_kernel_selection_frequencies():
    # two far-apart kernels so each draw identifies its kernel
    m = KernelMixture.from_arrays([0.3, 0.7], [[-100.0], [100.0]], [[[1.0]], [[1.0]]])
    n = 200_000
    x = m.sample(n, np.random.default_rng(7))[:, 0]
    freq = np.mean(x < 0)
    assert abs(freq - 0.3) < 3 * np.sqrt(0.3 * 0.7 / n)


def test_sampling_signed_mixture_raises():
    m = KernelMixture.from_arrays([1.0, -0.1], [[0.0], [1.0]], [[[1.0]], [[1.0]]])
    with pytest.raises(SignedMixtureSamplingError):
        m.sample(10, np.random.default_rng(0))


def test_sample_is_seed_deterministic():
    m = random_mixture(np.random.default_rng(1), 3, 2)
    a = m.sample(50, np.random.default_rng(9))
    b = m.sample(50, np.random.default_rng(9))
    np.testing.assert_array_equal(a, b)


# --------------------------------------------------------------- normalize

def test_normalize_weights():
    m = KernelMixture.from_arrays([2.0, 2.0], [[0.0], [1.0]], [[[1.0]], [[1.0]]])
    np.testing.assert_allclose(m.normalize().weights, [0.5, 0.5])
    single = KernelMixture.gaussian([0.0], [[1.0]])
    np.testing.assert_array_equal(single.normalize().weights, [1.0])


def test_normalize_signed_weights_integrates_to_one():
    m = KernelMixture.from_arrays([3.0, -1.0], [[0.0], [0.5]], [[[1.0]], [[0.5]]]).normalize()
    np.testing.assert_allclose(m.weights, [1.5, -0.5])
    total, _ = integrate.quad(lambda x: m.evaluate([x]), -20, 20, limit=200)
    assert total == pytest.approx(1.0, abs=1e-10)


def test_normalize_nonpositive_mass_raises():
    m = KernelMixture.from_arrays([1.0, -2.0], [[0.0], [1.0]], [[[1.0]], [[1.0]]])
    with pytest.raises(NonNormalizableError):
        m.normalize()


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.integers(1, 2), k=st.integers(1, 3))
def test_quadrature_of_normalized_mixture(seed, d, k):
    rng = np.random.default_rng(seed)
    m = random_mixture(rng, k, d).normalize()
    radius = 10 * np.sqrt(np.max([np.max(np.diag(c)) for c in m.covs]))
    lo = m.means.min(axis=0) - radius
    hi = m.means.max(axis=0) + radius
    if d == 1:
        total, _ = integrate.quad(lambda x: m.evaluate([x]), lo[0], hi[0], limit=400, epsabs=1e-10)
    else:
        n = 801
        g1 = np.linspace(lo[0], hi[0], n)
        g2 = np.linspace(lo[1], hi[1], n)
        x1, x2 = np.meshgrid(g1, g2, indexing="ij")
        vals = m.evaluate(np.column_stack([x1.ravel(), x2.ravel()])).reshape(n, n)
        total = integrate.simpson(integrate.simpson(vals, x=g2, axis=1), x=g1)
    assert total == pytest.approx(1.0, abs=1e-6)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), k=st.integers(1, 5))
def test_normalize_total_mass_property(seed, k):
    m = random_mixture(np.random.default_rng(seed), k, 2).normalize()
    assert abs(m.total_mass - 1.0) <= 1e-12


# ------------------------------------------------------------ serialization

def test_text_round_trip(tmp_path):
    m = random_mixture(np.random.default_rng(8), 3, 3, signed=True)
    back = loads(dumps(m))
    np.testing.assert_array_equal(back.weights, m.weights)
    np.testing.assert_array_equal(back.means, m.means)
    np.testing.assert_array_equal(back.covs, m.covs)
    path = tmp_path / "mix.txt"
    save(m, path)
    np.testing.assert_array_equal(load(path).covs, m.covs)


def test_loads_without_header_infers_dimension():
    text = "1 0 0 1 0 0 1\n0.5 1 1 2 0 0 2\n"
    m = loads(text)
    assert m.dim == 2 and len(m) == 2


def test_mixture_is_immutable():
    m = KernelMixture.gaussian([0.0], [[1.0]])
    with pytest.raises(ValueError):
        m.kernels[0].mean[0] = 3.0
