"""Recursive adaptive-kernel filter: kernel prediction, Bayesian update, re-fit."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .boosting import BoostConfig, BoostDiagnostics, TargetFunction, boost_fit
from .exceptions import (
    DegenerateMixtureError,
    DivergenceError,
    FilterDivergenceError,
    KernelFilterError,
    LocalFitError,
    NonNormalizableError,
    TransportError,
)
from .fokker_planck import (
    ResidualTarget,
    evaluate_target,
    inflate_diffusion,
    linearize_drift,
    residual_drift,
    transport_linear,
)
from .mixture import KernelMixture
from .models import ObservationModel, StateModel

logger = logging.getLogger(__name__)

# relative size of residual drift below which prediction is purely linear
LINEAR_SHORTCUT_TOL = 1e-10


@dataclass(frozen=True)
class FilterConfig:
    """Settings for the adaptive-kernel filter.

    Attributes:
        boost: boosting settings, shared by the prediction and posterior fits.
        prior: initial filtering density (normalized).
        linearization_samples: samples used for the least-squares drift fit.
        likelihood_half: use ``exp(-(1/2) r^T R^-1 r)``; ``False`` drops the 1/2.
        clip_negative_prior: evaluate the posterior target as
            ``max(predicted, 0) * likelihood``. A signed predicted mixture can
            dip below zero, and the likelihood may single out exactly that
            region, leaving a posterior with negative mass.
    """

    boost: BoostConfig = field(default_factory=lambda: BoostConfig(relative_tol=True, full_covariance=True))
    prior: Optional[KernelMixture] = None
    linearization_samples: int = 2000
    likelihood_half: bool = True
    clip_negative_prior: bool = True


@dataclass
class StepInfo:
    """Diagnostics collected while producing one filter step."""

    linear_shortcut: bool = False
    linearization_fallback: bool = False
    analytic_jacobian: Optional[bool] = None
    predict_boost: Optional[BoostDiagnostics] = None
    update_boost: Optional[BoostDiagnostics] = None
    predict_fallback: bool = False
    kept_transported: bool = False
    update_failed: bool = False
    negative_weights: int = 0
    message: str = ""


@dataclass(frozen=True)
class FilterStep:
    """Predicted and posterior densities at simulation step ``n``."""

    n: int
    predicted: KernelMixture
    posterior: KernelMixture
    point_estimate: np.ndarray
    observed: bool
    info: StepInfo


def predict(
    p_n: KernelMixture,
    model: StateModel,
    t: float,
    dt: float,
    cfg: FilterConfig,
    rng: np.random.Generator,
    info: Optional[StepInfo] = None,
) -> KernelMixture:
    """Propagate ``p_n`` over ``[t, t + dt]``.

    Linear transport by the least-squares drift, a boosting fit of the residual
    (nonlinear) drift action when it is not negligible, then diffusion inflation.
    A failed boosting fit, or one that matches the one-step target worse than
    the transported kernels do, is replaced by the transported kernels. An
    accepted fit is rescaled to the transported mass, which is the exact mass
    of the one-step target.
    """
    info = info if info is not None else StepInfo()
    proposal = p_n.positive_part()
    lin = linearize_drift(model, t, proposal, rng, cfg.linearization_samples)
    info.linearization_fallback = lin.fallback
    transported, tmap = transport_linear(p_n, lin, dt)
    residual = residual_drift(model, lin, tmap, t)
    info.analytic_jacobian = residual.analytic_jacobian

    trans_proposal = transported.positive_part()
    probe = trans_proposal.sample(100, rng)
    bn_sup = np.abs(residual.value(probe)).max()
    drift_scale = max(1.0, np.abs(model.drift(t, tmap.inverse(probe))).max())
    if bn_sup < LINEAR_SHORTCUT_TOL * drift_scale:
        info.linear_shortcut = True
        fitted = transported
    else:
        target = ResidualTarget(transported, residual, dt)
        try:
            fitted, diag = boost_fit(
                TargetFunction(lambda x: evaluate_target(target, x), trans_proposal), cfg.boost, rng
            )
            info.predict_boost = diag
            if len(fitted) == 0 or not fitted.total_mass > 0:
                raise LocalFitError("prediction fit produced no usable kernels")
            # the transported kernels already approximate the target to O(dt);
            # a fit that does worse on fresh samples is discarded
            check = trans_proposal.sample(cfg.boost.global_samples, rng)
            exact = evaluate_target(target, check)
            fit_err = np.mean((exact - fitted.evaluate(check)) ** 2)
            if not fit_err < np.mean((exact - transported.evaluate(check)) ** 2):
                info.kept_transported = True
                fitted = transported
            else:
                # the one-step target integrates exactly to the transported mass
                fitted = fitted.reweighted(fitted.weights * (transported.total_mass / fitted.total_mass))
        except (LocalFitError, DegenerateMixtureError) as exc:
            logger.warning("prediction boosting failed (%s); using transported kernels", exc)
            info.predict_fallback = True
            fitted = transported
    return inflate_diffusion(fitted, model, t, dt)


def likelihood(obs_model: ObservationModel, y, x, cfg: Optional[FilterConfig] = None):
    """Unnormalized Gaussian likelihood of ``y`` at state(s) ``x`` (angles wrapped)."""
    half = True if cfg is None else cfg.likelihood_half
    return np.exp(obs_model.log_likelihood(y, x, half=half))


def update(
    predicted: KernelMixture,
    obs_model: ObservationModel,
    y,
    cfg: FilterConfig,
    rng: np.random.Generator,
    info: Optional[StepInfo] = None,
) -> KernelMixture:
    """Fit kernels to ``predicted(x) * likelihood(y | x)`` and normalize.

    Raises:
        FilterDivergenceError: if the fitted posterior has no positive mass.
    """
    info = info if info is not None else StepInfo()
    y = np.asarray(y, dtype=float)

    clip = cfg.clip_negative_prior and predicted.has_negative_weights

    def posterior(x):
        prior = predicted.evaluate(x)
        if clip:
            prior = np.maximum(prior, 0.0)
        return prior * likelihood(obs_model, y, x, cfg)

    fitted, diag = boost_fit(TargetFunction(posterior, predicted.positive_part()), cfg.boost, rng)
    info.update_boost = diag
    try:
        result = fitted.normalize()
    except NonNormalizableError as exc:
        raise FilterDivergenceError(f"posterior fit is not normalizable: {exc}") from exc
    info.negative_weights = int(np.sum(result.weights < 0))
    return result


def _finite(m: KernelMixture) -> bool:
    return len(m) > 0 and np.isfinite(m.total_mass) and all(np.all(np.isfinite(k.mean)) for k in m.kernels)


def run_filter(
    model: StateModel,
    obs_model: ObservationModel,
    obs_steps,
    observations,
    num_steps: int,
    dt: float,
    cfg: FilterConfig,
    rng: np.random.Generator,
    t0: float = 0.0,
) -> list[FilterStep]:
    """Predict every step and update at ``obs_steps``.

    Returns one record per step ``0..num_steps`` (step 0 holds the prior). If
    the filter diverges the list ends early at the last finite step.
    """
    if cfg.prior is None:
        raise ValueError("FilterConfig.prior is required")
    obs_at = {int(s): np.asarray(y, dtype=float) for s, y in zip(obs_steps, observations)}
    p = cfg.prior
    steps = [FilterStep(0, p, p, p.moments()[0], False, StepInfo())]
    for n in range(num_steps):
        t = t0 + n * dt
        info = StepInfo()
        try:
            predicted = predict(p, model, t, dt, cfg, rng, info)
        except (TransportError, DegenerateMixtureError, KernelFilterError) as exc:
            logger.warning("prediction failed at step %d: %s", n + 1, exc)
            break
        posterior = predicted
        try:
            posterior = predicted.normalize()
        except NonNormalizableError:
            break
        observed = (n + 1) in obs_at
        if observed:
            try:
                posterior = update(predicted, obs_model, obs_at[n + 1], cfg, rng, info)
            except (FilterDivergenceError, LocalFitError, DegenerateMixtureError) as exc:
                info.update_failed = True
                info.message = str(exc)
                logger.warning("update failed at step %d: %s", n + 1, exc)
        if not _finite(posterior):
            break
        try:
            estimate = posterior.moments()[0]
        except DegenerateMixtureError:
            break
        if not np.all(np.isfinite(estimate)):
            break
        steps.append(FilterStep(n + 1, predicted, posterior, estimate, observed, info))
        p = posterior
    return steps


def estimates(steps: list[FilterStep]) -> np.ndarray:
    return np.array([s.point_estimate for s in steps])


__all__ = [
    "FilterConfig",
    "FilterStep",
    "StepInfo",
    "predict",
    "likelihood",
    "update",
    "run_filter",
    "estimates",
    "DivergenceError",
]
