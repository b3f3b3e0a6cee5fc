import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kernelfilter.baselines import (
    KalmanBelief,
    ParticleEnsemble,
    effective_sample_size,
    enkf_analysis,
    enkf_step,
    kalman_predict,
    kalman_step,
    kalman_update,
    pf_reweight,
    pf_step,
    run_enkf,
    run_kalman,
    run_pf,
    systematic_resample,
)
from kernelfilter.exceptions import DegenerateWeightsError, OracleError
from kernelfilter.models import (
    LinearGaussian,
    ObservationModel,
    StateModel,
    constant_diffusion,
    generate_observations,
    make_bearing_only,
    make_linear_gaussian,
    simulate_truth,
)

from oracles import gaussian_pdf, grid_bayes_1d, kalman_recursion


def still_model(d=2):
    return StateModel(d, lambda t, x: np.zeros_like(x), constant_diffusion(np.zeros((d, d))), d)


def scalar_obs(var=1.0):
    return ObservationModel(1, lambda x: np.asarray(x)[..., :1], [[var]])


def linear_data(seed=0, **kw):
    prob = make_linear_gaussian(**kw)
    rng = np.random.default_rng(seed)
    truth = simulate_truth(prob.state_model, prob.truth, rng)
    steps, obs = generate_observations(prob.obs_model, truth, prob.truth, rng)
    return prob, steps, obs


# ------------------------------------------------------------------ helpers

def test_effective_sample_size_extremes():
    assert effective_sample_size(np.full(8, 1 / 8)) == pytest.approx(8.0)
    assert effective_sample_size(np.array([1.0, 0, 0, 0])) == pytest.approx(1.0)


def test_systematic_resample_counts():
    # systematic resampling gives each index floor or ceil of N w_i copies
    w = np.array([0.1, 0.25, 0.05, 0.6])
    idx = systematic_resample(w, np.random.default_rng(0))
    counts = np.bincount(idx, minlength=4)
    assert counts.sum() == 4
    assert np.all(np.abs(counts - 4 * w) < 1)


# ------------------------------------------------------------------ PF

def test_pf_without_observation_and_dynamics_is_identity():
    ens = ParticleEnsemble.from_gaussian(np.zeros(2), np.eye(2), 50, np.random.default_rng(1))
    out = pf_step(ens, still_model(), scalar_obs(), None, 0.0, 0.1, np.random.default_rng(2))
    np.testing.assert_array_equal(out.particles, ens.particles)
    np.testing.assert_array_equal(out.weights, ens.weights)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), y=st.floats(-3, 3))
def test_pf_weights_normalized_and_ess_in_range(seed, y):
    rng = np.random.default_rng(seed)
    ens = ParticleEnsemble.from_gaussian(np.zeros(2), np.eye(2), 200, rng)
    out = pf_reweight(ens, scalar_obs(0.3), [y], rng)
    assert np.all(out.weights >= 0)
    assert out.weights.sum() == pytest.approx(1.0, abs=1e-12)
    assert 1.0 - 1e-9 <= out.ess <= 200 + 1e-9


def test_pf_concentrated_likelihood_collapses():
    particles = np.linspace(-5, 5, 101)[:, None]
    ens = ParticleEnsemble(particles, np.full(101, 1 / 101))
    out = pf_reweight(ens, scalar_obs(1e-6), [0.0], np.random.default_rng(3))
    assert out.ess < 2
    assert out.resampled
    assert np.all(np.abs(out.particles) < 0.2)


def test_pf_all_zero_likelihood():
    ens = ParticleEnsemble(np.array([[1e200], [2e200]]), np.array([0.5, 0.5]))
    obs = ObservationModel(1, lambda x: np.asarray(x) ** 2, [[1.0]])
    with np.errstate(over="ignore", invalid="ignore"):
        with pytest.raises(DegenerateWeightsError):
            pf_reweight(ens, obs, [0.0], np.random.default_rng(0))
        out = pf_step(ens, StateModel(1, lambda t, x: np.zeros_like(x), constant_diffusion([[0.0]]), 1),
                      obs, [0.0], 0.0, 0.1, np.random.default_rng(0))
    assert out.degenerate
    np.testing.assert_array_equal(out.weights, [0.5, 0.5])


def test_pf_matches_grid_bayes_after_two_updates():
    # 1-D static state, two observations: importance weights are exact Bayes on the particle set
    rng = np.random.default_rng(4)
    n = 200_000
    ens = ParticleEnsemble.from_gaussian(np.zeros(1), np.eye(1), n, rng)
    obs = scalar_obs(0.5)
    for y in ([0.8], [1.1]):
        ens = pf_reweight(ens, obs, y, rng, resample_threshold=0.0)
    x = np.linspace(-8, 8, 8001)
    post = grid_bayes_1d(x, gaussian_pdf(x), np.exp(-((0.8 - x) ** 2 + (1.1 - x) ** 2) / (2 * 0.5)))
    grid_mean = np.trapezoid(x * post, x)
    # analytic: precision 1 + 2/0.5 = 5, mean (0.8 + 1.1) / 0.5 / 5
    assert grid_mean == pytest.approx(0.76, abs=1e-6)
    assert abs(ens.mean()[0] - grid_mean) < 3 * np.sqrt(0.2 / ens.ess)


# ------------------------------------------------------------------ EnKF

def test_enkf_huge_noise_is_identity():
    rng = np.random.default_rng(5)
    ens = rng.normal(size=(100, 2))
    obs = ObservationModel(1, lambda x: np.asarray(x)[..., :1], [[1e12]])
    out = enkf_analysis(ens, obs, [3.0], rng).ensemble
    np.testing.assert_allclose(out, ens, atol=1e-4)


def test_enkf_zero_spread_gives_zero_gain():
    ens = np.tile([1.0, 2.0], (20, 1))
    res = enkf_analysis(ens, scalar_obs(), [5.0], np.random.default_rng(6))
    np.testing.assert_array_equal(res.ensemble, ens)
    assert not res.skipped


def test_enkf_needs_two_members():
    with pytest.raises(ValueError):
        enkf_analysis(np.zeros((1, 2)), scalar_obs(), [0.0], np.random.default_rng(0))


def test_enkf_without_observation_only_propagates():
    ens = np.random.default_rng(7).normal(size=(10, 2))
    np.testing.assert_array_equal(enkf_step(ens, still_model(), scalar_obs(), None, 0, 0.1,
                                            np.random.default_rng(0)), ens)


def test_enkf_wraps_bearing_innovations():
    # members straddle the branch cut; a wrapped update stays near it instead of jumping across zero
    obs = make_bearing_only().obs_model
    rng = np.random.default_rng(8)
    ens = np.column_stack([rng.normal(-5.0, 0.05, 500), rng.normal(6.0, 0.2, 500),
                           np.full(500, 1.0), np.zeros(500)])
    y = obs.observe(np.array([-5.0, 6.0, 0.0, 0.0]))
    out = enkf_analysis(ens, obs, y, rng).ensemble
    assert np.all(np.abs(out[:, 0] + 5.0) < 1.0)
    assert np.all(np.abs(out[:, 1] - 6.0) < 1.5)


# ---------------------------------------------------------------- Kalman

def scalar_lg(R=1.0):
    return LinearGaussian(np.zeros((1, 1)), np.zeros(1), np.zeros((1, 1)), np.eye(1), np.array([[R]]))


def test_kalman_textbook_update():
    post = kalman_update(KalmanBelief(np.zeros(1), np.eye(1)), scalar_lg(), [1.0])
    assert post.mean[0] == pytest.approx(0.5)
    assert post.cov[0, 0] == pytest.approx(0.5)


def test_kalman_predict_moments():
    lg = LinearGaussian(np.array([[-2.0]]), np.array([1.0]), np.array([[0.5]]), np.eye(1), np.eye(1))
    out = kalman_predict(KalmanBelief(np.array([1.0]), np.array([[0.49]])), lg, 0.1)
    assert out.mean[0] == pytest.approx(0.8 + 0.1)
    assert out.cov[0, 0] == pytest.approx(0.64 * 0.49 + 0.1 * 0.25)


def test_kalman_non_spd_innovation():
    lg = LinearGaussian(np.zeros((1, 1)), np.zeros(1), np.zeros((1, 1)), np.eye(1), np.array([[-2.0]]))
    with pytest.raises(OracleError):
        kalman_update(KalmanBelief(np.zeros(1), np.eye(1)), lg, [0.0])


def test_run_kalman_matches_reference_recursion():
    prob, steps, obs = linear_data(1)
    lg = prob.linear
    dt = prob.truth.step_size
    beliefs = run_kalman(prob, steps, obs)
    F = np.eye(2) + lg.B * dt
    obs_at = dict(zip(steps.tolist(), obs))
    ref = kalman_recursion(prob.prior_mean, prob.prior_cov, F, lg.c * dt, dt * lg.sigma @ lg.sigma.T,
                           lg.H, lg.R, [obs_at.get(n) for n in range(1, prob.truth.num_steps + 1)])
    for b, (m, c) in zip(beliefs[1:], ref):
        np.testing.assert_allclose(b.mean, m, atol=1e-12)
        np.testing.assert_allclose(b.cov, c, atol=1e-12)


def test_run_kalman_rejects_nonlinear_problem():
    with pytest.raises(ValueError):
        run_kalman(make_bearing_only(), [], [])


def test_kalman_step_without_observation_is_predict():
    lg = make_linear_gaussian().linear
    b = KalmanBelief(np.array([1.0, 0.0]), np.eye(2))
    a = kalman_step(b, lg, 0.05)
    p = kalman_predict(b, lg, 0.05)
    np.testing.assert_array_equal(a.mean, p.mean)


# ------------------------------------------------- Monte Carlo vs Kalman

@pytest.mark.parametrize("kind", ["pf", "enkf"])
def test_monte_carlo_filters_track_kalman(kind):
    # the Monte Carlo standard error of a run is the spread over independently seeded runs
    prob, steps, obs = linear_data(2, num_steps=20)
    kf = np.array([b.mean for b in run_kalman(prob, steps, obs)])

    def once(seed):
        rng = np.random.default_rng(seed)
        return run_pf(prob, steps, obs, 5000, rng)[0] if kind == "pf" else run_enkf(prob, steps, obs, 2000, rng)

    runs = np.array([once(s) for s in range(10)])
    se = runs.std(axis=0, ddof=1)[1:]
    assert np.all(np.abs(runs[0, 1:] - kf[1:]) <= 3 * se)
