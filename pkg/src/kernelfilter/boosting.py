"""Greedy (boosting) construction of a Gaussian kernel mixture for a pointwise target.

Each round measures the mean-squared residual on samples from a proposal
mixture, seeds a kernel at the worst-fit sample, refines its weight, mean and
covariance by damped Gauss-Newton on nearby samples, and adds it to the fit.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import linalg

from .exceptions import LocalFitError
from .mixture import LOG_2PI, GaussianKernel, KernelMixture

logger = logging.getLogger(__name__)

# bound on |log| of the scaled Cholesky diagonal during the local search
LOG_DIAG_LIMIT = 15.0
# candidate multiples of the initial covariance tried before the local search
INIT_SHRINK = (1.0, 0.25, 0.0625)


@dataclass(frozen=True)
class BoostConfig:
    """Settings for :func:`boost_fit`.

    Attributes:
        max_kernels: cap on the number of kernels.
        global_samples: proposal samples used to measure the global error.
        tol: stopping threshold on the global mean-squared error. With
            ``relative_tol`` it is a fraction of the error of the empty fit,
            otherwise an absolute value in density-squared units.
        local_samples: samples drawn around each new kernel's seed point.
        local_opt_max_iters: Gauss-Newton iteration cap for one kernel.
        init_cov_scale: initial kernel covariance as a multiple of the
            proposal's marginal variances.
        full_covariance: optimize a full Cholesky factor instead of a diagonal.
        monotone_guard: stop (dropping the last kernel if it does not help)
            when a fresh sample set shows the error grew by more than 10%.
        resample_each_round: redraw the global samples every round instead of
            only after a failed round.
        min_improvement: relative drop in the global error a candidate kernel
            must achieve to be accepted.
        local_metric: ``"diagonal"`` draws local samples from
            ``N(center, init_cov_scale * diag(proposal_cov))``; ``"full"`` uses
            the whole proposal covariance, which suits strongly correlated
            densities.
    """

    max_kernels: int = 20
    global_samples: int = 1000
    tol: float = 1e-4
    local_samples: int = 200
    local_opt_max_iters: int = 100
    init_cov_scale: float = 0.25
    full_covariance: bool = False
    relative_tol: bool = False
    monotone_guard: bool = True
    resample_each_round: bool = False
    min_improvement: float = 1e-3
    local_metric: str = "diagonal"

    def __post_init__(self):
        for name in ("max_kernels", "global_samples", "local_samples", "local_opt_max_iters"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.local_metric not in ("diagonal", "full"):
            raise ValueError("local_metric must be 'diagonal' or 'full'")
        if not (self.tol > 0 and self.init_cov_scale > 0):
            raise ValueError("tol and init_cov_scale must be positive")


@dataclass(frozen=True)
class TargetFunction:
    """A pointwise-evaluable function plus a nonnegative proposal used to sample it."""

    eval: Callable[[np.ndarray], np.ndarray]
    proposal: KernelMixture


@dataclass
class RoundRecord:
    round: int
    global_error: float
    n_kernels: int
    accepted: bool
    weight: float = float("nan")
    mean: Optional[np.ndarray] = None
    cov: Optional[np.ndarray] = None


@dataclass
class BoostDiagnostics:
    """Per-round history of one :func:`boost_fit` call.

    ``global_errors`` lists the error of the empty fit followed by the error
    after each accepted kernel.
    """

    rounds: list[RoundRecord] = field(default_factory=list)
    global_errors: list[float] = field(default_factory=list)
    initial_error: float = float("nan")
    threshold: float = float("nan")
    stop_reason: str = ""
    failures: int = 0

    @property
    def n_kernels(self) -> int:
        return sum(r.accepted for r in self.rounds)


class _KernelParams:
    """Scaled parameterization of one kernel for the local least-squares fit.

    theta = [w, u (d), log-diag (d), off-diagonal (d(d-1)/2, full only)] with
    weight = w0 * w, mean = center + S u, Sigma = S Lt Lt^T S^T, where S is
    the lower-triangular factor of the initial covariance and Lt is unit
    lower-triangular at the start. Everything is O(1) at the initial guess
    ``w = 1, u = 0, Lt = I``.
    """

    def __init__(self, center: np.ndarray, base: np.ndarray, full: bool):
        self.center = center
        self.base = base
        self.base_inv = np.linalg.inv(base)
        self.d = d = center.size
        self.full = full
        self.tril = np.tril_indices(d, -1)
        self.n_params = 1 + 2 * d + (len(self.tril[0]) if full else 0)
        self.log_diag_max = LOG_DIAG_LIMIT

    def initial(self) -> np.ndarray:
        theta = np.zeros(self.n_params)
        theta[0] = 1.0
        return theta

    def unpack(self, thetas: np.ndarray):
        d = self.d
        w = thetas[:, 0]
        mu = self.center + thetas[:, 1:1 + d] @ self.base.T
        log_diag = thetas[:, 1 + d:1 + 2 * d]
        lt = np.zeros((thetas.shape[0], d, d))
        idx = np.arange(d)
        lt[:, idx, idx] = np.exp(np.clip(log_diag, -LOG_DIAG_LIMIT, LOG_DIAG_LIMIT))
        if self.full:
            lt[:, self.tril[0], self.tril[1]] = thetas[:, 1 + 2 * d:]
        return w, mu, log_diag, lt

    def shape_values(self, thetas: np.ndarray, xs: np.ndarray) -> np.ndarray:
        """Kernel values relative to the ``w0``-scaled peak, shape (P, n): ``w exp(-|z|^2/2) / det(Lt)``."""
        w, mu, log_diag, lt = self.unpack(thetas)
        # marginal variances in scaled coordinates are the squared row norms of Lt
        row_var = np.einsum("pij,pij->pi", lt, lt)
        bad = (np.any(np.abs(log_diag) > LOG_DIAG_LIMIT, axis=1)
               | np.any(0.5 * np.log(row_var) > self.log_diag_max, axis=1))
        if np.any(bad):
            # keep exp() finite; such parameter sets are rejected through a NaN objective
            log_diag = np.where(bad[:, None], 0.0, log_diag)
            lt[bad] = np.eye(self.d)
        u = (xs[None, :, :] - mu[:, None, :]) @ self.base_inv.T
        if self.full:
            z = u @ np.linalg.inv(lt).transpose(0, 2, 1)
        else:
            z = u / np.exp(log_diag)[:, None, :]
        expo = -0.5 * (z * z).sum(axis=2) - log_diag.sum(axis=1)[:, None]
        with np.errstate(over="ignore", invalid="ignore"):
            out = w[:, None] * np.exp(expo)
        out[bad] = np.nan
        return out

    def jacobian(self, theta: np.ndarray, xs: np.ndarray) -> np.ndarray:
        """Derivatives of ``shape_values`` at one parameter vector, shape (n, P).

        With ``z = Lt^-1 (S^-1 (x - center) - u)`` and ``q = Lt^-T z`` the kernel
        ``f`` has ``df/du = f q`` and ``df/dLt_ij = f (q_i z_j - [i = j] / Lt_ii)``;
        the diagonal entries are parameterized by their logarithms.
        """
        d = self.d
        w, _, log_diag, lt = self.unpack(theta[None, :])
        w, log_diag, lt = w[0], log_diag[0], lt[0]
        v = (xs - self.center) @ self.base_inv.T - theta[1:1 + d]
        z = linalg.solve_triangular(lt, v.T, lower=True)
        q = linalg.solve_triangular(lt, z, lower=True, trans="T")
        z, q = z.T, q.T
        g = np.exp(-0.5 * (z * z).sum(axis=1) - log_diag.sum())
        f = w * g
        cols = [g[:, None], f[:, None] * q, f[:, None] * (q * z * np.diag(lt) - 1.0)]
        if self.full:
            cols.append(f[:, None] * q[:, self.tril[0]] * z[:, self.tril[1]])
        return np.hstack(cols)

    def to_kernel(self, theta: np.ndarray, w0: float) -> GaussianKernel:
        w, mu, _, lt = self.unpack(theta[None, :])
        chol = self.base @ lt[0]
        return GaussianKernel(w0 * w[0], mu[0], chol @ chol.T)


def local_fit(
    residual: Callable[[np.ndarray], np.ndarray],
    center: np.ndarray,
    cfg: BoostConfig,
    proposal_cov: np.ndarray,
    rng: np.random.Generator,
) -> GaussianKernel:
    """Fit one Gaussian kernel to ``residual`` on samples around ``center``.

    Samples come from ``N(center, init_cov_scale * diag(proposal_cov))`` (or the
    full scaled proposal covariance with ``local_metric="full"``). The
    objective ``sum_j (residual(x_j) - w N(x_j; mu, Sigma))^2`` is minimized by
    Levenberg-damped Gauss-Newton with the closed-form Jacobian, starting
    from ``mu = center``, ``Sigma = Sigma_init`` and the weight that makes the
    kernel match ``residual(center)`` at its peak.

    Raises:
        LocalFitError: if the residual or the objective is not finite.
    """
    center = np.asarray(center, dtype=float)
    d = center.size
    proposal_cov = np.atleast_2d(np.asarray(proposal_cov, dtype=float))
    if cfg.local_metric == "full":
        try:
            base = np.linalg.cholesky(cfg.init_cov_scale * 0.5 * (proposal_cov + proposal_cov.T))
        except np.linalg.LinAlgError as exc:
            raise LocalFitError("proposal covariance is not positive definite") from exc
    else:
        init_var = cfg.init_cov_scale * np.diag(proposal_cov).copy()
        if not np.all(init_var > 0):
            raise LocalFitError("proposal covariance has non-positive marginal variances")
        base = np.diag(np.sqrt(init_var))

    xs = center + rng.standard_normal((cfg.local_samples, d)) @ base.T
    xs = np.vstack([center, xs])
    r = np.asarray(residual(xs), dtype=float)
    if not np.all(np.isfinite(r)):
        raise LocalFitError("residual is not finite at the local samples")
    r_center = r[0]
    if r_center == 0.0:
        raise LocalFitError("residual vanishes at the kernel center")
    # peak height of N(.; center, Sigma_init) is exp(-d/2 log 2pi - sum log s)
    w0 = r_center * np.exp(0.5 * d * LOG_2PI + np.log(np.diag(base)).sum())
    scale = abs(r_center)
    target = r / scale
    sign = np.sign(r_center)

    params = _KernelParams(center, base, cfg.full_covariance)
    # a kernel much wider than the proposal only fits a near-constant offset
    params.log_diag_max = np.log(3.0 / np.sqrt(cfg.init_cov_scale))

    def model(thetas):
        return sign * params.shape_values(thetas, xs)

    def objective(res):
        val = float(res @ res)
        return val if np.isfinite(val) else np.inf

    # start from the prescribed covariance or a shrunken copy of it, whichever
    # fits best; the weight keeps the peak equal to residual(center)
    starts = []
    for shrink in INIT_SHRINK:
        theta = params.initial()
        theta[1 + d:1 + 2 * d] = 0.5 * np.log(shrink)
        theta[0] = shrink ** (d / 2)
        starts.append(theta)
    start_vals = model(np.array(starts))
    start_objs = [objective(target - v) for v in start_vals]
    best = int(np.argmin(start_objs))
    theta = starts[best]
    res = target - start_vals[best]
    obj = start_objs[best]
    if not np.isfinite(obj):
        raise LocalFitError("initial objective is not finite")
    obj0 = obj
    lam = 1e-3
    p = params.n_params
    eye = np.eye(p)
    for _ in range(cfg.local_opt_max_iters):
        if obj <= 1e-28 * max(obj0, 1e-300):
            break
        jac = sign * params.jacobian(theta, xs)
        if not np.all(np.isfinite(jac)):
            raise LocalFitError("non-finite Jacobian in local optimization")
        grad = jac.T @ res
        hess = jac.T @ jac
        hdiag = np.diag(hess).copy()
        hdiag[hdiag <= 0] = 1.0
        improved = False
        for _attempt in range(12):
            try:
                delta = np.linalg.solve(hess + lam * np.diag(hdiag) + 1e-14 * eye, grad)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = theta + delta
            trial_res = target - model(trial[None, :])[0]
            trial_obj = objective(trial_res)
            if trial_obj < obj:
                improved = True
                break
            lam *= 4.0
        if not improved:
            break
        rel_decrease = (obj - trial_obj) / obj
        theta, res, obj = trial, trial_res, trial_obj
        lam = max(lam / 3.0, 1e-12)
        if rel_decrease < 1e-6:
            break
    if not np.isfinite(obj):
        raise LocalFitError("local objective is not finite")
    try:
        return params.to_kernel(theta, w0)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise LocalFitError(f"fitted kernel is invalid: {exc}") from exc


def boost_fit(
    target: TargetFunction,
    cfg: BoostConfig,
    rng: np.random.Generator,
) -> tuple[KernelMixture, BoostDiagnostics]:
    """Greedily build up to ``cfg.max_kernels`` kernels approximating ``target.eval``.

    A candidate kernel is kept only if it lowers the mean-squared error on the
    current global sample set. A failed round (local-fit error or no
    improvement) is retried once on freshly drawn samples; a second consecutive
    failure ends the fit with the kernels accepted so far.
    """
    proposal = target.proposal
    d = proposal.dim
    _, proposal_cov = proposal.moments()
    diag = BoostDiagnostics()
    mix = KernelMixture(d, ())

    def draw():
        xs = proposal.sample(cfg.global_samples, rng)
        g = np.asarray(target.eval(xs), dtype=float)
        return xs, g

    xs, g = draw()
    if not np.all(np.isfinite(g)):
        raise LocalFitError("target is not finite at the global samples")
    fitted = np.zeros(len(xs))
    e0 = float(np.mean(g ** 2))
    diag.initial_error = e0
    diag.threshold = cfg.tol * e0 if cfg.relative_tol else cfg.tol
    err = e0
    diag.global_errors.append(err)
    failures = 0
    round_idx = 0
    while True:
        if err < diag.threshold or (cfg.relative_tol and e0 == 0.0):
            diag.stop_reason = "tol"
            break
        if len(mix) >= cfg.max_kernels:
            diag.stop_reason = "max_kernels"
            break
        round_idx += 1
        e = g - fitted
        best = int(np.argmax(np.abs(e)))

        def residual(x, _mix=mix):
            return np.asarray(target.eval(x), dtype=float) - _mix.evaluate(x)

        kernel = None
        new_err = np.inf
        try:
            kernel = local_fit(residual, xs[best], cfg, proposal_cov, rng)
            new_fitted = fitted + kernel.weight * np.exp(kernel.logpdf(xs))
            new_err = float(np.mean((g - new_fitted) ** 2))
        except LocalFitError as exc:
            logger.debug("local fit failed in round %d: %s", round_idx, exc)

        if kernel is None or not new_err < err * (1.0 - cfg.min_improvement):
            failures += 1
            diag.failures += 1
            diag.rounds.append(RoundRecord(round_idx, err, len(mix), False))
            if failures >= 2:
                diag.stop_reason = "aborted"
                break
            xs, g = draw()
            fitted = mix.evaluate(xs)
            err = float(np.mean((g - fitted) ** 2))
            if _guard_triggered(cfg, diag, err):
                mix, err = _guard_reject(mix, xs, g, fitted, err)
                diag.stop_reason = "guard"
                break
            continue

        failures = 0
        mix = mix.append(kernel)
        fitted, err = new_fitted, new_err
        diag.rounds.append(
            RoundRecord(round_idx, err, len(mix), True, kernel.weight, kernel.mean.copy(), kernel.cov.copy())
        )
        diag.global_errors.append(err)
        if cfg.resample_each_round:
            xs, g = draw()
            fitted = mix.evaluate(xs)
            err = float(np.mean((g - fitted) ** 2))
            if _guard_triggered(cfg, diag, err):
                mix, err = _guard_reject(mix, xs, g, fitted, err)
                diag.stop_reason = "guard"
                break
    return mix, diag


def _guard_triggered(cfg: BoostConfig, diag: BoostDiagnostics, err: float) -> bool:
    return cfg.monotone_guard and len(diag.global_errors) > 1 and err > 1.1 * diag.global_errors[-1]


def _guard_reject(mix, xs, g, fitted, err):
    """Drop the newest kernel if it does not reduce the error on the fresh samples."""
    last = mix.kernels[-1]
    without = fitted - last.weight * np.exp(last.logpdf(xs))
    err_without = float(np.mean((g - without) ** 2))
    if err_without <= err:
        return KernelMixture(mix.dim, mix.kernels[:-1]), err_without
    return mix, err
