"""Comparison filters: bootstrap particle filter, stochastic EnKF, and the Kalman oracle."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from .exceptions import DegenerateWeightsError, OracleError
from .models import LinearGaussian, ObservationModel, StateModel, wrap_angle


# ------------------------------------------------------------ particle filter

@dataclass(frozen=True)
class ParticleEnsemble:
    """Weighted particles; ``weights`` are nonnegative and sum to one.

    ``ess`` is the effective sample size measured before any resampling in the
    step that produced this ensemble; ``degenerate`` flags an all-zero
    likelihood event that forced a uniform reset of the weights.
    """

    particles: np.ndarray
    weights: np.ndarray
    ess: float = float("nan")
    resampled: bool = False
    degenerate: bool = False

    @classmethod
    def from_gaussian(cls, mean, cov, n: int, rng: np.random.Generator) -> "ParticleEnsemble":
        particles = rng.multivariate_normal(mean, cov, size=n, method="cholesky")
        return cls(particles, np.full(n, 1.0 / n))

    @property
    def size(self) -> int:
        return self.particles.shape[0]

    def mean(self) -> np.ndarray:
        return self.weights @ self.particles

    def cov(self) -> np.ndarray:
        diff = self.particles - self.mean()
        return (self.weights[:, None] * diff).T @ diff


def effective_sample_size(weights: np.ndarray) -> float:
    return float(1.0 / np.sum(weights ** 2))


def systematic_resample(weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Indices drawn by systematic resampling (one uniform offset)."""
    n = weights.size
    positions = (rng.random() + np.arange(n)) / n
    cumulative = np.cumsum(weights)
    cumulative[-1] = 1.0
    return np.searchsorted(cumulative, positions)


def pf_reweight(
    ens: ParticleEnsemble,
    obs_model: ObservationModel,
    y,
    rng: np.random.Generator,
    half: bool = True,
    resample_threshold: float = 0.5,
) -> ParticleEnsemble:
    """Bayes reweighting by the likelihood of ``y``, then systematic resampling if ESS < threshold N.

    Raises:
        DegenerateWeightsError: if every particle has zero likelihood (the
            caller may catch it; :func:`pf_step` resets to uniform weights).
    """
    logw = np.log(np.maximum(ens.weights, 1e-300)) + obs_model.log_likelihood(y, ens.particles, half=half)
    if not np.any(np.isfinite(logw)):
        raise DegenerateWeightsError("all particle likelihood weights vanished")
    logw = np.where(np.isfinite(logw), logw, -np.inf)
    weights = np.exp(logw - logsumexp(logw))
    ess = effective_sample_size(weights)
    n = ens.size
    if ess < resample_threshold * n:
        idx = systematic_resample(weights, rng)
        return ParticleEnsemble(ens.particles[idx], np.full(n, 1.0 / n), ess, True)
    return ParticleEnsemble(ens.particles, weights, ess, False)


def pf_step(
    ens: ParticleEnsemble,
    model: StateModel,
    obs_model: ObservationModel,
    y,
    t: float,
    dt: float,
    rng: np.random.Generator,
    half: bool = True,
) -> ParticleEnsemble:
    """Propagate every particle one Euler-Maruyama step; reweight/resample when ``y`` is given."""
    moved = ParticleEnsemble(model.euler_maruyama(t, ens.particles, dt, rng), ens.weights)
    if y is None:
        return moved
    try:
        return pf_reweight(moved, obs_model, y, rng, half=half)
    except DegenerateWeightsError:
        n = moved.size
        idx = rng.integers(0, n, size=n)
        return ParticleEnsemble(moved.particles[idx], np.full(n, 1.0 / n), 0.0, True, True)


# ------------------------------------------------------ ensemble Kalman filter

@dataclass(frozen=True)
class EnKFResult:
    ensemble: np.ndarray
    skipped: bool = False


def enkf_analysis(
    ensemble: np.ndarray,
    obs_model: ObservationModel,
    y,
    rng: np.random.Generator,
) -> EnKFResult:
    """Stochastic (perturbed-observation) EnKF update without inflation or localization."""
    x = np.asarray(ensemble, dtype=float)
    n = x.shape[0]
    if n < 2:
        raise ValueError("EnKF needs at least two members")
    R = obs_model.noise_covariance
    hx = np.asarray(obs_model.observe(x), dtype=float)
    mask = obs_model.angular_mask
    if mask.any():
        # anomalies of angular outputs around their circular mean
        circ = np.arctan2(np.sin(hx).mean(axis=0), np.cos(hx).mean(axis=0))
        h_mean = np.where(mask, circ, hx.mean(axis=0))
        h_anom = obs_model.innovation(hx, h_mean)
        h_mean = h_mean + h_anom.mean(axis=0)
        h_anom = h_anom - h_anom.mean(axis=0)
    else:
        h_anom = hx - hx.mean(axis=0)
    x_anom = x - x.mean(axis=0)
    c_xh = x_anom.T @ h_anom / (n - 1)
    c_hh = h_anom.T @ h_anom / (n - 1)
    try:
        gain = np.linalg.solve((c_hh + R).T, c_xh.T).T
    except np.linalg.LinAlgError:
        return EnKFResult(x, skipped=True)
    perturbed = np.asarray(y, dtype=float) + rng.multivariate_normal(
        np.zeros(obs_model.obs_dim), R, size=n, method="cholesky"
    )
    innov = obs_model.innovation(perturbed, hx)
    return EnKFResult(x + innov @ gain.T)


def enkf_step(
    ensemble: np.ndarray,
    model: StateModel,
    obs_model: ObservationModel,
    y,
    t: float,
    dt: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Propagate members one Euler-Maruyama step and assimilate ``y`` when given."""
    moved = model.euler_maruyama(t, ensemble, dt, rng)
    if y is None:
        return moved
    return enkf_analysis(moved, obs_model, y, rng).ensemble


# -------------------------------------------------------------- Kalman oracle

@dataclass(frozen=True)
class KalmanBelief:
    mean: np.ndarray
    cov: np.ndarray


def kalman_predict(belief: KalmanBelief, lg: LinearGaussian, dt: float) -> KalmanBelief:
    """Exact moments of one Euler-Maruyama step of ``dX = (B X + c) dt + sigma dW``."""
    F = np.eye(lg.B.shape[0]) + lg.B * dt
    mean = F @ belief.mean + lg.c * dt
    cov = F @ belief.cov @ F.T + dt * lg.sigma @ lg.sigma.T
    return KalmanBelief(mean, 0.5 * (cov + cov.T))


def kalman_update(belief: KalmanBelief, lg: LinearGaussian, y) -> KalmanBelief:
    H, R = lg.H, lg.R
    S = H @ belief.cov @ H.T + R
    S = 0.5 * (S + S.T)
    try:
        chol = np.linalg.cholesky(S)
    except np.linalg.LinAlgError as exc:
        raise OracleError("innovation covariance is not SPD") from exc
    PHt = belief.cov @ H.T
    gain = np.linalg.solve(chol.T, np.linalg.solve(chol, PHt.T)).T
    mean = belief.mean + gain @ (np.asarray(y, dtype=float) - H @ belief.mean)
    I_KH = np.eye(belief.mean.size) - gain @ H
    cov = I_KH @ belief.cov @ I_KH.T + gain @ R @ gain.T
    return KalmanBelief(mean, 0.5 * (cov + cov.T))


def kalman_step(belief: KalmanBelief, lg: LinearGaussian, dt: float, y=None) -> KalmanBelief:
    belief = kalman_predict(belief, lg, dt)
    return belief if y is None else kalman_update(belief, lg, y)


# ----------------------------------------------------------------- run loops

def run_pf(problem, obs_steps, observations, n_particles: int, rng, half: bool = True):
    """Run the PF over the whole horizon; returns ``(estimates, ess_history, degenerate_count)``."""
    truth = problem.truth
    obs_at = {int(s): y for s, y in zip(obs_steps, observations)}
    ens = ParticleEnsemble.from_gaussian(problem.prior_mean, problem.prior_cov, n_particles, rng)
    est = [ens.mean()]
    ess = [float(n_particles)]
    degenerate = 0
    for n in range(truth.num_steps):
        ens = pf_step(ens, problem.state_model, problem.obs_model, obs_at.get(n + 1),
                      n * truth.step_size, truth.step_size, rng, half)
        degenerate += ens.degenerate
        est.append(ens.mean())
        ess.append(ens.ess)
    return np.array(est), np.array(ess), degenerate


def run_enkf(problem, obs_steps, observations, n_members: int, rng):
    truth = problem.truth
    obs_at = {int(s): y for s, y in zip(obs_steps, observations)}
    ens = rng.multivariate_normal(problem.prior_mean, problem.prior_cov, size=n_members, method="cholesky")
    est = [ens.mean(axis=0)]
    for n in range(truth.num_steps):
        ens = enkf_step(ens, problem.state_model, problem.obs_model, obs_at.get(n + 1),
                        n * truth.step_size, truth.step_size, rng)
        est.append(ens.mean(axis=0))
    return np.array(est)


def run_kalman(problem, obs_steps, observations) -> list[KalmanBelief]:
    if problem.linear is None:
        raise ValueError(f"problem {problem.name!r} is not linear-Gaussian")
    truth = problem.truth
    obs_at = {int(s): y for s, y in zip(obs_steps, observations)}
    belief = KalmanBelief(np.asarray(problem.prior_mean, float), np.asarray(problem.prior_cov, float))
    out = [belief]
    for n in range(truth.num_steps):
        belief = kalman_step(belief, problem.linear, truth.step_size, obs_at.get(n + 1))
        out.append(belief)
    return out


__all__ = [
    "ParticleEnsemble",
    "KalmanBelief",
    "EnKFResult",
    "effective_sample_size",
    "systematic_resample",
    "pf_reweight",
    "pf_step",
    "enkf_analysis",
    "enkf_step",
    "kalman_predict",
    "kalman_update",
    "kalman_step",
    "run_pf",
    "run_enkf",
    "run_kalman",
    "wrap_angle",
]
