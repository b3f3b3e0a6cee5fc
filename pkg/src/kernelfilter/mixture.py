"""Weighted Gaussian kernel mixtures.

Each kernel stores a weight that multiplies a *normalized* Gaussian density,
so the total mass of a mixture is simply the sum of its weights. Weights may
be negative in intermediate mixtures (boosting corrections); only sampling
and normalization require a nonnegative / positive mass.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .exceptions import (
    DegenerateMixtureError,
    DimensionError,
    NonNormalizableError,
    NotPositiveDefiniteError,
    SignedMixtureSamplingError,
)

LOG_2PI = np.log(2.0 * np.pi)


def cholesky_spd(cov: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Symmetrize ``cov`` and return ``(cov, lower_cholesky_factor)``.

    A single jitter of ``1e-10 * trace(cov) / d`` is added before giving up.

    Raises:
        NotPositiveDefiniteError: if the matrix is not SPD even after jitter.
    """
    cov = np.array(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise DimensionError(f"covariance must be square, got shape {cov.shape}")
    if not np.all(np.isfinite(cov)):
        raise NotPositiveDefiniteError("covariance has non-finite entries")
    cov = 0.5 * (cov + cov.T)
    try:
        return cov, np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    d = cov.shape[0]
    jitter = 1e-10 * np.trace(cov) / d
    if jitter > 0:
        cov = cov + jitter * np.eye(d)
        try:
            return cov, np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            pass
    raise NotPositiveDefiniteError("covariance is not symmetric positive definite")


def gaussian_logpdf(x: np.ndarray, mean: np.ndarray, chol: np.ndarray) -> np.ndarray:
    """Log density of N(mean, chol chol^T) at the rows of ``x`` (shape (n, d))."""
    d = mean.shape[0]
    z = solve_triangular(chol, (x - mean).T, lower=True, check_finite=False)
    half_logdet = np.log(np.diag(chol)).sum()
    return -0.5 * np.einsum("ij,ij->j", z, z) - half_logdet - 0.5 * d * LOG_2PI


@dataclass(frozen=True, eq=False)
class GaussianKernel:
    """One weighted Gaussian component ``weight * N(x; mean, cov)``.

    The Cholesky factor is computed once at construction; non-SPD input is
    rejected after symmetrization and a single jitter attempt.
    """

    weight: float
    mean: np.ndarray
    cov: np.ndarray
    chol: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        weight = float(self.weight)
        mean = np.array(self.mean, dtype=float).reshape(-1)
        if not np.isfinite(weight):
            raise ValueError("kernel weight must be finite")
        if not np.all(np.isfinite(mean)):
            raise ValueError("kernel mean must be finite")
        cov = np.atleast_2d(np.array(self.cov, dtype=float))
        if cov.shape != (mean.size, mean.size):
            raise DimensionError(
                f"covariance shape {cov.shape} does not match mean length {mean.size}"
            )
        cov, chol = cholesky_spd(cov)
        mean.flags.writeable = False
        cov.flags.writeable = False
        chol.flags.writeable = False
        object.__setattr__(self, "weight", weight)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "chol", chol)

    @property
    def dim(self) -> int:
        return self.mean.size

    @property
    def amplitude(self) -> float:
        """Peak value ``weight / ((2 pi)^(d/2) |cov|^(1/2))`` of the kernel."""
        half_logdet = np.log(np.diag(self.chol)).sum()
        return self.weight * np.exp(-0.5 * self.dim * LOG_2PI - half_logdet)

    def logpdf(self, x: np.ndarray) -> np.ndarray:
        return gaussian_logpdf(x, self.mean, self.chol)

    def with_(self, weight=None, mean=None, cov=None) -> "GaussianKernel":
        return GaussianKernel(
            self.weight if weight is None else weight,
            self.mean if mean is None else mean,
            self.cov if cov is None else cov,
        )


@dataclass(frozen=True, eq=False)
class KernelMixture:
    """An ordered, immutable collection of Gaussian kernels over ``R^dim``.

    Evaluation methods accept a single point of shape ``(dim,)`` (returning a
    scalar / vector) or a batch of shape ``(n, dim)``.
    """

    dim: int
    kernels: tuple[GaussianKernel, ...] = ()

    def __post_init__(self):
        if int(self.dim) < 1:
            raise ValueError("mixture dimension must be positive")
        kernels = tuple(self.kernels)
        for k in kernels:
            if k.dim != self.dim:
                raise DimensionError(
                    f"kernel of dimension {k.dim} in a mixture of dimension {self.dim}"
                )
        object.__setattr__(self, "dim", int(self.dim))
        object.__setattr__(self, "kernels", kernels)

    @classmethod
    def from_arrays(cls, weights, means, covs) -> "KernelMixture":
        means = np.atleast_2d(np.asarray(means, dtype=float))
        covs = np.asarray(covs, dtype=float).reshape(means.shape[0], means.shape[1], means.shape[1])
        kernels = [GaussianKernel(w, m, c) for w, m, c in zip(np.ravel(weights), means, covs)]
        return cls(means.shape[1], tuple(kernels))

    @classmethod
    def gaussian(cls, mean, cov, weight: float = 1.0) -> "KernelMixture":
        kernel = GaussianKernel(weight, mean, cov)
        return cls(kernel.dim, (kernel,))

    def __len__(self) -> int:
        return len(self.kernels)

    def __iter__(self):
        return iter(self.kernels)

    @cached_property
    def weights(self) -> np.ndarray:
        return np.array([k.weight for k in self.kernels], dtype=float)

    @cached_property
    def means(self) -> np.ndarray:
        return np.array([k.mean for k in self.kernels], dtype=float).reshape(-1, self.dim)

    @cached_property
    def covs(self) -> np.ndarray:
        return np.array([k.cov for k in self.kernels], dtype=float).reshape(-1, self.dim, self.dim)

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum()) if self.kernels else 0.0

    @property
    def has_negative_weights(self) -> bool:
        return bool(np.any(self.weights < 0))

    def _as_batch(self, x) -> tuple[np.ndarray, bool]:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        xb = np.atleast_2d(x)
        if xb.ndim != 2 or xb.shape[1] != self.dim:
            raise DimensionError(f"expected points of dimension {self.dim}, got shape {x.shape}")
        return xb, single

    def _component_pdfs(self, xb: np.ndarray) -> np.ndarray:
        # (K, n) normalized densities
        return np.array([np.exp(k.logpdf(xb)) for k in self.kernels]).reshape(len(self), xb.shape[0])

    def evaluate(self, x) -> float | np.ndarray:
        """Sum of ``w_k N(x; mu_k, Sigma_k)``; zero for an empty mixture."""
        xb, single = self._as_batch(x)
        out = np.zeros(xb.shape[0])
        for k in self.kernels:
            out += k.weight * np.exp(k.logpdf(xb))
        return float(out[0]) if single else out

    __call__ = evaluate

    def gradient(self, x) -> np.ndarray:
        """Analytic gradient: ``-sum_k w_k N_k(x) Sigma_k^{-1} (x - mu_k)``."""
        xb, single = self._as_batch(x)
        grad = np.zeros_like(xb)
        for k in self.kernels:
            prec_diff = cho_solve((k.chol, True), (xb - k.mean).T, check_finite=False).T
            grad -= (k.weight * np.exp(k.logpdf(xb)))[:, None] * prec_diff
        return grad[0] if single else grad

    def value_and_gradient(self, x) -> tuple[np.ndarray, np.ndarray]:
        xb, _ = self._as_batch(x)
        val = np.zeros(xb.shape[0])
        grad = np.zeros_like(xb)
        for k in self.kernels:
            dens = k.weight * np.exp(k.logpdf(xb))
            val += dens
            grad -= dens[:, None] * cho_solve((k.chol, True), (xb - k.mean).T, check_finite=False).T
        return val, grad

    def moments(self) -> tuple[np.ndarray, np.ndarray]:
        """Mean and covariance of the (possibly signed) mixture.

        Raises:
            DegenerateMixtureError: if the total mass is not positive.
        """
        mass = self.total_mass
        if not mass > 0:
            raise DegenerateMixtureError(f"moments of a mixture with total mass {mass}")
        w = self.weights / mass
        mean = w @ self.means
        second = np.einsum("k,kij->ij", w, self.covs + np.einsum("ki,kj->kij", self.means, self.means))
        cov = second - np.outer(mean, mean)
        return mean, 0.5 * (cov + cov.T)

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``count`` i.i.d. points, returned as an array of shape (count, dim).

        Raises:
            SignedMixtureSamplingError: if any weight is negative.
            DegenerateMixtureError: if the total mass is not positive.
        """
        if self.has_negative_weights:
            raise SignedMixtureSamplingError("cannot sample a mixture with negative weights")
        mass = self.total_mass
        if not mass > 0:
            raise DegenerateMixtureError("cannot sample a mixture with zero mass")
        count = int(count)
        if count == 0:
            return np.empty((0, self.dim))
        counts = rng.multinomial(count, self.weights / mass)
        z = rng.standard_normal((count, self.dim))
        out = np.empty((count, self.dim))
        start = 0
        for k, c in zip(self.kernels, counts):
            out[start:start + c] = k.mean + z[start:start + c] @ k.chol.T
            start += c
        return rng.permutation(out, axis=0)

    def normalize(self) -> "KernelMixture":
        """Divide every weight by the total mass.

        Raises:
            NonNormalizableError: if the total mass is not positive.
        """
        mass = self.total_mass
        if not (mass > 0 and np.isfinite(mass)):
            raise NonNormalizableError(f"cannot normalize a mixture with total mass {mass}")
        return self.reweighted(self.weights / mass)

    def reweighted(self, weights: Iterable[float]) -> "KernelMixture":
        return KernelMixture(self.dim, tuple(k.with_(weight=w) for k, w in zip(self.kernels, weights)))

    def positive_part(self) -> "KernelMixture":
        """Mixture of only the positively weighted kernels (used as a sampling proposal)."""
        return KernelMixture(self.dim, tuple(k for k in self.kernels if k.weight > 0))

    def __add__(self, other: "KernelMixture") -> "KernelMixture":
        if other.dim != self.dim:
            raise DimensionError("cannot add mixtures of different dimensions")
        return KernelMixture(self.dim, self.kernels + other.kernels)

    def append(self, kernel: GaussianKernel) -> "KernelMixture":
        return KernelMixture(self.dim, self.kernels + (kernel,))

    def to_text(self) -> str:
        return dumps(self)


def empty(dim: int) -> KernelMixture:
    return KernelMixture(dim, ())


# Module-level aliases mirroring the method API.

def evaluate(m: KernelMixture, x):
    return m.evaluate(x)


def gradient(m: KernelMixture, x):
    return m.gradient(x)


def moments(m: KernelMixture):
    return m.moments()


def sample(m: KernelMixture, count: int, rng: np.random.Generator):
    return m.sample(count, rng)


def normalize(m: KernelMixture) -> KernelMixture:
    return m.normalize()


# Line-oriented text records: one kernel per line,
# "weight mean_1..mean_d cov_11 cov_12 ... cov_dd".

_HEADER = "# kernel-mixture dim={dim} kernels={count}"


def dumps(m: KernelMixture) -> str:
    lines = [_HEADER.format(dim=m.dim, count=len(m))]
    for k in m.kernels:
        values = [k.weight, *k.mean, *k.cov.ravel()]
        lines.append(" ".join(f"{v:.17g}" for v in values))
    return "\n".join(lines) + "\n"


def loads(text: str, dim: int | None = None) -> KernelMixture:
    """Parse the text record written by :func:`dumps`.

    The dimension is read from the header when present, otherwise inferred
    from the number of fields per line (``1 + d + d^2``).
    """
    rows: list[list[float]] = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            for token in line[1:].split():
                if token.startswith("dim="):
                    dim = int(token[4:])
            continue
        rows.append([float(v) for v in line.replace(",", " ").split()])
    if dim is None:
        if not rows:
            raise ValueError("cannot infer dimension of an empty mixture record")
        n = len(rows[0])
        dim = int(round((-1 + np.sqrt(1 + 4 * (n - 1))) / 2))
    kernels = []
    for row in rows:
        if len(row) != 1 + dim + dim * dim:
            raise DimensionError(f"kernel record has {len(row)} fields, expected {1 + dim + dim * dim}")
        kernels.append(GaussianKernel(row[0], row[1:1 + dim], np.reshape(row[1 + dim:], (dim, dim))))
    return KernelMixture(dim, tuple(kernels))


def save(m: KernelMixture, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(m))


def load(path) -> KernelMixture:
    with open(path) as fh:
        return loads(fh.read())
