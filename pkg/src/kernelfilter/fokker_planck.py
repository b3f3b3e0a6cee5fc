"""Operator-decomposed prediction for the drift/diffusion Fokker-Planck equation.

One explicit step is split three ways:

1. an affine least-squares fit ``A x + alpha`` of the drift transports every
   Gaussian kernel exactly through ``x -> (I + A dt) x + alpha dt``;
2. the remaining drift, pulled back through that map, acts on the transported
   mixture through one explicit Euler step of the pure-drift operator
   ``L p = -div(b p)``, giving a pointwise-evaluable (non-Gaussian) target;
3. additive noise is added to each kernel covariance as ``dt sigma sigma^T``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .exceptions import TransportError
from .mixture import GaussianKernel, KernelMixture
from .models import StateModel

COND_LIMIT = 1e12


@dataclass(frozen=True)
class LinearDrift:
    """Least-squares affine drift ``A x + alpha``.

    ``fallback`` is set when the sample covariance was rank deficient and the
    fit degraded to ``A = 0, alpha = mean(b)``.
    """

    A: np.ndarray
    alpha: np.ndarray
    fallback: bool = False


@dataclass(frozen=True)
class TransportMap:
    """Affine map ``x -> M x + c`` with ``M = I + A dt`` and ``c = alpha dt``."""

    M: np.ndarray
    c: np.ndarray
    M_inv: np.ndarray = field(repr=False)

    @classmethod
    def from_linear_drift(cls, lin: LinearDrift, dt: float) -> "TransportMap":
        d = lin.alpha.size
        M = np.eye(d) + lin.A * dt
        cond = np.linalg.cond(M)
        if not np.isfinite(cond) or cond > COND_LIMIT:
            raise TransportError(f"transport map is near-singular (cond {cond:.3g}); reduce the step size")
        return cls(M, lin.alpha * dt, np.linalg.inv(M))

    def apply(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x) @ self.M.T + self.c

    def inverse(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x) - self.c) @ self.M_inv.T


def linearize_drift(
    model: StateModel,
    t: float,
    m: KernelMixture,
    rng: np.random.Generator,
    n_samples: int = 2000,
) -> LinearDrift:
    """Affine least-squares fit of ``b(t, .)`` over samples of ``m``.

    The regression is solved on centered samples with an SVD-based least-squares
    solver, which reproduces an exactly affine drift to rounding error.
    """
    xs = m.sample(n_samples, rng)
    bs = np.asarray(model.drift(t, xs), dtype=float)
    x_mean = xs.mean(axis=0)
    b_mean = bs.mean(axis=0)
    xc = xs - x_mean
    coef, _, rank, _ = np.linalg.lstsq(xc, bs - b_mean, rcond=None)
    if rank < model.dim or not np.all(np.isfinite(coef)):
        return LinearDrift(np.zeros((model.dim, model.dim)), b_mean, fallback=True)
    A = coef.T
    return LinearDrift(A, b_mean - A @ x_mean)


def transport_linear(m: KernelMixture, lin: LinearDrift, dt: float) -> tuple[KernelMixture, TransportMap]:
    """Push every kernel through the affine map; weights are unchanged.

    Raises:
        TransportError: if ``I + A dt`` is near-singular.
    """
    tmap = TransportMap.from_linear_drift(lin, dt)
    kernels = tuple(
        GaussianKernel(k.weight, tmap.M @ k.mean + tmap.c, tmap.M @ k.cov @ tmap.M.T) for k in m.kernels
    )
    return KernelMixture(m.dim, kernels), tmap


@dataclass(frozen=True)
class ResidualDrift:
    """Nonlinear drift remainder evaluated in transported coordinates.

    ``value(x) = b(t, T^-1 x) - (A T^-1 x + alpha)`` and ``divergence(x)`` is its
    divergence with respect to ``x``. ``analytic_jacobian`` records whether the
    model Jacobian or finite differences were used.
    """

    value: Callable[[np.ndarray], np.ndarray]
    divergence: Callable[[np.ndarray], np.ndarray]
    analytic_jacobian: bool


def residual_drift(model: StateModel, lin: LinearDrift, tmap: TransportMap, t: float) -> ResidualDrift:
    A, alpha, M_inv = lin.A, lin.alpha, tmap.M_inv

    def value(x):
        z = tmap.inverse(x)
        return np.asarray(model.drift(t, z), dtype=float) - (z @ A.T + alpha)

    if model.drift_jacobian is not None:
        # d/dx b_N(T^-1 x) = (J_b(z) - A) M^-1, so the divergence is sum_ij (J_b - A)_ij (M^-1)_ji
        shift = float(np.sum(A * M_inv.T))

        def divergence(x):
            z = tmap.inverse(x)
            jac = np.asarray(model.drift_jacobian(t, z), dtype=float)
            return np.einsum("...ij,ji->...", jac, M_inv) - shift

        return ResidualDrift(value, divergence, True)

    def fd_divergence(x):
        x = np.asarray(x, dtype=float)
        total = np.zeros(x.shape[:-1])
        for i in range(x.shape[-1]):
            h = 1e-5 * np.maximum(1.0, np.abs(x[..., i]))
            xp = x.copy()
            xm = x.copy()
            xp[..., i] += h
            xm[..., i] -= h
            total += (value(xp)[..., i] - value(xm)[..., i]) / (2 * h)
        return total

    return ResidualDrift(value, fd_divergence, False)


@dataclass(frozen=True)
class ResidualTarget:
    """Transported kernels plus the residual drift acting on them over ``dt``."""

    transported: KernelMixture
    residual: ResidualDrift
    dt: float

    def __call__(self, x):
        return evaluate_target(self, x)


def evaluate_target(tgt: ResidualTarget, x) -> float | np.ndarray:
    """``p(x) (1 - dt div b_N(x)) - dt b_N(x) . grad p(x)`` for the transported mixture ``p``."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xb = np.atleast_2d(x)
    p, grad = tgt.transported.value_and_gradient(xb)
    bn = tgt.residual.value(xb)
    div = tgt.residual.divergence(xb)
    out = p * (1.0 - tgt.dt * div) - tgt.dt * np.einsum("ij,ij->i", bn, grad)
    return float(out[0]) if single else out


def inflate_diffusion(m: KernelMixture, model: StateModel, t: float, dt: float) -> KernelMixture:
    """Add ``dt sigma(t) sigma(t)^T`` to every kernel covariance."""
    sigma = model.diffusion_matrix(t)
    increment = dt * sigma @ sigma.T
    if not np.any(increment):
        return m
    return KernelMixture(m.dim, tuple(k.with_(cov=k.cov + increment) for k in m.kernels))


def one_step_target(model: StateModel, m: KernelMixture, t: float, dt: float) -> ResidualTarget:
    """Explicit Euler target ``p + dt L_b p`` with no linear transport (identity map)."""
    zero = LinearDrift(np.zeros((m.dim, m.dim)), np.zeros(m.dim))
    tmap = TransportMap.from_linear_drift(zero, dt)
    return ResidualTarget(m, residual_drift(model, zero, tmap, t), dt)
