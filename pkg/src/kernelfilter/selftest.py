"""Fast oracle checks run by ``kernelfilter selftest``; each prints one PASS/FAIL line."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .baselines import ParticleEnsemble, enkf_analysis, pf_reweight, run_kalman
from .boosting import BoostConfig, TargetFunction, boost_fit
from .filter import FilterConfig, run_filter
from .fokker_planck import ResidualDrift, ResidualTarget, evaluate_target
from .mixture import KernelMixture
from .models import generate_observations, make_bearing_only, make_demo2d, make_linear_gaussian, simulate_truth


def _standard_normal_peak() -> bool:
    return abs(KernelMixture.gaussian([0.0], [[1.0]]).evaluate([0.0]) - 1 / np.sqrt(2 * np.pi)) < 1e-15


def _gradient_matches_fd() -> bool:
    rng = np.random.default_rng(0)
    covs = [np.eye(2) * s + 0.1 for s in (0.5, 1.0, 2.0)]
    m = KernelMixture.from_arrays([0.2, 0.5, 0.3], rng.normal(size=(3, 2)), covs)
    x = rng.normal(size=2)
    h = 1e-5
    fd = np.array([(m.evaluate(x + h * e) - m.evaluate(x - h * e)) / (2 * h) for e in np.eye(2)])
    return np.allclose(m.gradient(x), fd, rtol=1e-6, atol=1e-12)


def _demo2d_drift() -> bool:
    b = make_demo2d().drift
    return np.allclose(b(0, np.array([0.0, 0.0])), [3, -2]) and np.allclose(b(0, np.array([1.0, 1.0])), [11, 3])


def _bearing_angle() -> bool:
    h = make_bearing_only().obs_model.observe
    return abs(h(np.array([2.0, 7.0, 0.0, 0.0]))[0] - np.pi / 2) < 1e-15


def _target_closed_form() -> bool:
    res = ResidualDrift(lambda x: np.asarray(x), lambda x: np.ones(np.shape(x)[:-1]), True)
    tgt = ResidualTarget(KernelMixture.gaussian([0.0], [[1.0]]), res, 0.1)
    return abs(evaluate_target(tgt, np.array([0.0])) - 0.9 / np.sqrt(2 * np.pi)) < 1e-14


def _boost_self_fit() -> bool:
    kern = KernelMixture.gaussian([1.0, -1.0], [[0.5, 0.1], [0.1, 0.3]])
    fitted, diag = boost_fit(TargetFunction(kern.evaluate, kern), BoostConfig(full_covariance=True),
                             np.random.default_rng(1))
    return len(fitted) == 1 and diag.global_errors[-1] < 1e-4


def _kalman_equivalence() -> bool:
    prob = make_linear_gaussian()
    rng = np.random.default_rng(3)
    truth = simulate_truth(prob.state_model, prob.truth, rng)
    steps, obs = generate_observations(prob.obs_model, truth, prob.truth, rng)
    cfg = FilterConfig(boost=BoostConfig(max_kernels=1, relative_tol=True, full_covariance=True),
                       prior=KernelMixture.gaussian(prob.prior_mean, prob.prior_cov))
    run = run_filter(prob.state_model, prob.obs_model, steps, obs, prob.truth.num_steps, prob.truth.step_size, cfg,
                     np.random.default_rng(4))
    oracle = run_kalman(prob, steps, obs)
    return len(run) == len(oracle) and all(
        np.allclose(s.posterior.moments()[0], b.mean, atol=1e-6) for s, b in zip(run, oracle)
    )


def _pf_weights() -> bool:
    prob = make_linear_gaussian()
    rng = np.random.default_rng(5)
    ens = ParticleEnsemble.from_gaussian(prob.prior_mean, prob.prior_cov, 1000, rng)
    out = pf_reweight(ens, prob.obs_model, np.array([0.7]), rng)
    return abs(out.weights.sum() - 1) < 1e-12 and 1 <= out.ess <= 1000


def _enkf_zero_gain() -> bool:
    prob = make_bearing_only()
    x = np.tile(prob.prior_mean, (10, 1))  # no spread: zero cross covariance
    res = enkf_analysis(x, prob.obs_model, np.array([0.1, -0.2]), np.random.default_rng(6))
    return np.array_equal(res.ensemble, x)


CHECKS: dict[str, Callable[[], bool]] = {
    "standard normal peak": _standard_normal_peak,
    "mixture gradient vs finite differences": _gradient_matches_fd,
    "demo2d drift values": _demo2d_drift,
    "vertical bearing angle": _bearing_angle,
    "drift target closed form": _target_closed_form,
    "boosting self-fit": _boost_self_fit,
    "kernel filter equals Kalman (K=1)": _kalman_equivalence,
    "particle weights normalized": _pf_weights,
    "EnKF zero-gain identity": _enkf_zero_gain,
}


def run_selftest(verbose: bool = True) -> bool:
    ok = True
    for name, check in CHECKS.items():
        try:
            passed = bool(check())
        except Exception as exc:  # report, do not abort the suite
            passed = False
            name = f"{name} ({type(exc).__name__}: {exc})"
        ok &= passed
        if verbose:
            print(f"{'PASS' if passed else 'FAIL'}  {name}")
    return ok
