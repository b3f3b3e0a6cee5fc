import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kernelfilter.boosting import BoostConfig, TargetFunction, boost_fit, local_fit
from kernelfilter.exceptions import LocalFitError
from kernelfilter.mixture import KernelMixture


def three_gaussians():
    return KernelMixture.from_arrays(
        [0.5, 0.3, 0.2],
        [[-2.5, -1.0], [2.0, 2.0], [1.5, -2.5]],
        [[[0.6, 0.2], [0.2, 0.4]], [[0.5, -0.15], [-0.15, 0.7]], [[0.4, 0.0], [0.0, 0.3]]],
    )


def grid(lo=-6.0, hi=6.0, n=50):
    g = np.linspace(lo, hi, n)
    x1, x2 = np.meshgrid(g, g, indexing="ij")
    return np.column_stack([x1.ravel(), x2.ravel()])


# ---------------------------------------------------------------- local fit

def test_local_fit_recovers_exact_bump():
    center = np.array([1.0, 2.0])
    proposal_cov = np.diag([2.0, 3.0])
    cfg = BoostConfig()
    init_cov = cfg.init_cov_scale * np.diag(np.diag(proposal_cov))
    bump = KernelMixture.gaussian(center, init_cov, weight=0.7)
    k = local_fit(bump.evaluate, center, cfg, proposal_cov, np.random.default_rng(0))
    assert k.weight == pytest.approx(0.7, rel=1e-3)
    np.testing.assert_allclose(k.mean, center, atol=1e-3)
    np.testing.assert_allclose(k.cov, init_cov, rtol=1e-3)


def test_local_fit_keeps_negative_sign():
    center = np.zeros(2)
    bump = KernelMixture.gaussian(center, 0.25 * np.eye(2), weight=-0.5)
    k = local_fit(bump.evaluate, center, BoostConfig(), np.eye(2), np.random.default_rng(1))
    assert k.weight == pytest.approx(-0.5, rel=1e-3)


def test_local_fit_moves_toward_offset_bump():
    center = np.zeros(2)
    offset = np.array([1.0, -1.0])
    true_mean = center + 0.3 * offset
    bump = KernelMixture.gaussian(true_mean, 0.25 * np.eye(2), weight=1.0)
    cfg = BoostConfig()
    rng = np.random.default_rng(2)
    k = local_fit(bump.evaluate, center, cfg, np.eye(2), rng)
    assert np.linalg.norm(k.mean - true_mean) < np.linalg.norm(center - true_mean)
    # objective on fresh local samples: fitted kernel vs the starting kernel
    xs = center + 0.5 * rng.standard_normal((500, 2))
    start = KernelMixture.gaussian(center, 0.25 * np.eye(2), weight=bump.evaluate(center) * 2 * np.pi * 0.25)
    initial = np.sum((bump.evaluate(xs) - start.evaluate(xs)) ** 2)
    final = np.sum((bump.evaluate(xs) - k.weight * np.exp(k.logpdf(xs))) ** 2)
    assert final <= 0.1 * initial


@pytest.mark.parametrize("metric", ["diagonal", "full"])
def test_local_fit_full_covariance_recovers_correlation(metric):
    cov = np.array([[0.3, 0.2], [0.2, 0.4]])
    bump = KernelMixture.gaussian([0.0, 0.0], cov, weight=1.2)
    cfg = BoostConfig(full_covariance=True, local_metric=metric)
    k = local_fit(bump.evaluate, np.zeros(2), cfg, 4 * cov, np.random.default_rng(3))
    np.testing.assert_allclose(k.cov, cov, rtol=1e-3, atol=1e-4)
    assert k.weight == pytest.approx(1.2, rel=1e-3)


def test_local_fit_non_finite_residual_fails():
    with pytest.raises(LocalFitError):
        local_fit(lambda x: np.full(len(x), np.nan), np.zeros(2), BoostConfig(), np.eye(2),
                  np.random.default_rng(0))


def test_invalid_config_rejected():
    with pytest.raises(ValueError):
        BoostConfig(max_kernels=0)
    with pytest.raises(ValueError):
        BoostConfig(tol=0.0)
    with pytest.raises(ValueError):
        BoostConfig(local_metric="spherical")


# ---------------------------------------------------------------- boost fit

@pytest.mark.parametrize(
    "cov, full",
    [([[0.5, 0.0], [0.0, 0.3]], False), ([[0.5, 0.1], [0.1, 0.3]], True)],
)
def test_self_fit_single_kernel(cov, full):
    target = KernelMixture.gaussian([1.0, -1.0], cov)
    fitted, diag = boost_fit(TargetFunction(target.evaluate, target), BoostConfig(full_covariance=full),
                             np.random.default_rng(0))
    assert len(fitted) == 1
    assert diag.global_errors[1] < 1e-4
    assert diag.stop_reason == "tol"


def test_zero_target_gives_empty_mixture():
    proposal = KernelMixture.gaussian([0.0, 0.0], np.eye(2))
    fitted, diag = boost_fit(TargetFunction(lambda x: np.zeros(len(x)), proposal), BoostConfig(),
                             np.random.default_rng(0))
    assert len(fitted) == 0
    assert diag.global_errors == [0.0]
    assert diag.stop_reason == "tol"


def test_three_gaussian_recovery():
    target = three_gaussians()
    proposal = KernelMixture.gaussian([0.0, 0.0], 9 * np.eye(2))
    cfg = BoostConfig(full_covariance=True, max_kernels=6, tol=1e-8)
    fitted, diag = boost_fit(TargetFunction(target.evaluate, proposal), cfg, np.random.default_rng(0))
    pts = grid()
    truth = target.evaluate(pts)
    rel_sup = np.max(np.abs(fitted.evaluate(pts) - truth)) / np.max(np.abs(truth))
    assert len(fitted) <= 6
    assert rel_sup <= 0.05
    assert np.all(np.diff(diag.global_errors) <= 0)


def test_kernel_cap_respected():
    target = three_gaussians()
    proposal = KernelMixture.gaussian([0.0, 0.0], 9 * np.eye(2))
    cfg = BoostConfig(max_kernels=2, tol=1e-12)
    fitted, diag = boost_fit(TargetFunction(target.evaluate, proposal), cfg, np.random.default_rng(1))
    assert len(fitted) == 2 and diag.n_kernels == 2
    assert diag.stop_reason == "max_kernels"


def test_relative_tolerance_scales_with_target():
    target = KernelMixture.gaussian([0.0, 0.0], np.eye(2), weight=1e-3)
    cfg = BoostConfig(relative_tol=True, tol=1e-6)
    fitted, diag = boost_fit(TargetFunction(target.evaluate, target), cfg, np.random.default_rng(2))
    assert diag.threshold == pytest.approx(1e-6 * diag.initial_error)
    assert len(fitted) == 1


def test_boost_fit_is_deterministic():
    target = three_gaussians()
    proposal = KernelMixture.gaussian([0.0, 0.0], 9 * np.eye(2))
    cfg = BoostConfig(max_kernels=4)
    a, _ = boost_fit(TargetFunction(target.evaluate, proposal), cfg, np.random.default_rng(5))
    b, _ = boost_fit(TargetFunction(target.evaluate, proposal), cfg, np.random.default_rng(5))
    np.testing.assert_array_equal(a.weights, b.weights)
    np.testing.assert_array_equal(a.covs, b.covs)


def test_non_finite_target_raises():
    proposal = KernelMixture.gaussian([0.0], [[1.0]])
    with pytest.raises(LocalFitError):
        boost_fit(TargetFunction(lambda x: np.full(len(x), np.inf), proposal), BoostConfig(),
                  np.random.default_rng(0))


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), k=st.integers(1, 3))
def test_global_error_non_increasing(seed, k):
    rng = np.random.default_rng(seed)
    target = KernelMixture.from_arrays(rng.uniform(0.2, 1.0, k), rng.uniform(-3, 3, size=(k, 2)),
                                       [np.diag(rng.uniform(0.2, 1.0, 2)) for _ in range(k)])
    proposal = KernelMixture.gaussian([0.0, 0.0], 6 * np.eye(2))
    _, diag = boost_fit(TargetFunction(target.evaluate, proposal), BoostConfig(max_kernels=5, tol=1e-10), rng)
    assert np.all(np.diff(diag.global_errors) <= 0)
    assert diag.n_kernels <= 5
