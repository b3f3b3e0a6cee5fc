"""State-space model descriptions and the three benchmark problems.

All user-supplied callables are vectorized over leading axes: ``drift(t, x)``
takes ``x`` of shape ``(..., d)`` and returns the same shape,
``drift_jacobian(t, x)`` returns ``(..., d, d)`` with entry ``[i, j] = db_i/dx_j``,
and ``observe(x)`` maps ``(..., d)`` to ``(..., l)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .exceptions import DimensionError, DivergenceError

Drift = Callable[[float, np.ndarray], np.ndarray]
Jacobian = Callable[[float, np.ndarray], np.ndarray]
Diffusion = Callable[[float], np.ndarray]


def wrap_angle(theta):
    """Map angles into (-pi, pi]."""
    wrapped = np.mod(np.asarray(theta, dtype=float) + np.pi, 2.0 * np.pi) - np.pi
    return np.where(wrapped == -np.pi, np.pi, wrapped)


def constant_diffusion(sigma) -> Diffusion:
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    sigma.flags.writeable = False

    def diffusion(t):
        return sigma

    return diffusion


@dataclass(frozen=True)
class StateModel:
    """SDE ``dX = b(t, X) dt + sigma(t) dW`` with additive noise of dimension ``noise_dim``."""

    dim: int
    drift: Drift
    diffusion: Diffusion
    noise_dim: int
    drift_jacobian: Optional[Jacobian] = None
    name: str = "model"

    def diffusion_matrix(self, t: float) -> np.ndarray:
        sigma = np.atleast_2d(np.asarray(self.diffusion(t), dtype=float))
        if sigma.shape != (self.dim, self.noise_dim):
            raise DimensionError(
                f"diffusion returned shape {sigma.shape}, expected {(self.dim, self.noise_dim)}"
            )
        return sigma

    def euler_maruyama(self, t: float, x: np.ndarray, dt: float, rng: np.random.Generator) -> np.ndarray:
        """One Euler-Maruyama step for every row of ``x``."""
        x = np.asarray(x, dtype=float)
        sigma = self.diffusion_matrix(t)
        out = x + self.drift(t, x) * dt
        if np.any(sigma):
            dw = rng.standard_normal(x.shape[:-1] + (self.noise_dim,)) * np.sqrt(dt)
            out = out + dw @ sigma.T
        return out


def check_jacobian(model: StateModel, points: np.ndarray, t: float = 0.0, rel_tol: float = 1e-5) -> float:
    """Compare ``drift_jacobian`` with central differences of ``drift``.

    Returns the worst relative error over ``points``; raises ``ValueError`` when it
    exceeds ``rel_tol`` or the model has no analytic Jacobian.
    """
    if model.drift_jacobian is None:
        raise ValueError("model has no analytic drift Jacobian")
    points = np.atleast_2d(np.asarray(points, dtype=float))
    worst = 0.0
    for x in points:
        analytic = np.asarray(model.drift_jacobian(t, x))
        numeric = np.empty_like(analytic)
        for j in range(model.dim):
            h = 1e-6 * max(1.0, abs(x[j]))
            e = np.zeros(model.dim)
            e[j] = h
            numeric[:, j] = (model.drift(t, x + e) - model.drift(t, x - e)) / (2 * h)
        scale = max(1.0, np.abs(analytic).max())
        worst = max(worst, float(np.abs(analytic - numeric).max() / scale))
    if worst > rel_tol:
        raise ValueError(f"drift Jacobian disagrees with finite differences (rel err {worst:.3g})")
    return worst


@dataclass(frozen=True)
class ObservationModel:
    """Discrete observations ``y = h(x) + xi``, ``xi ~ N(0, R)``.

    Components flagged in ``angular`` are angles; their innovations are wrapped
    into (-pi, pi] before any quadratic form.
    """

    obs_dim: int
    observe: Callable[[np.ndarray], np.ndarray]
    noise_covariance: np.ndarray
    angular: tuple[bool, ...] = ()
    name: str = "observation"

    def __post_init__(self):
        R = np.atleast_2d(np.asarray(self.noise_covariance, dtype=float))
        if R.shape != (self.obs_dim, self.obs_dim):
            raise DimensionError(f"noise covariance shape {R.shape} != ({self.obs_dim}, {self.obs_dim})")
        R = 0.5 * (R + R.T)
        np.linalg.cholesky(R)
        R.flags.writeable = False
        object.__setattr__(self, "noise_covariance", R)
        angular = tuple(bool(a) for a in self.angular) or (False,) * self.obs_dim
        if len(angular) != self.obs_dim:
            raise DimensionError("angular mask length must equal obs_dim")
        object.__setattr__(self, "angular", angular)

    @property
    def angular_mask(self) -> np.ndarray:
        return np.array(self.angular, dtype=bool)

    def innovation(self, y, hx) -> np.ndarray:
        """``y - h(x)`` with angular components wrapped."""
        diff = np.asarray(y, dtype=float) - np.asarray(hx, dtype=float)
        if any(self.angular):
            diff = np.where(self.angular_mask, wrap_angle(diff), diff)
        return diff

    def log_likelihood(self, y, x, half: bool = True) -> np.ndarray:
        """Unnormalized ``-c (y - h(x))^T R^{-1} (y - h(x))``, ``c = 1/2`` or 1."""
        innov = self.innovation(y, self.observe(np.asarray(x, dtype=float)))
        quad = np.einsum("...i,...i->...", innov @ np.linalg.inv(self.noise_covariance), innov)
        return -(0.5 if half else 1.0) * quad


def observe(model: ObservationModel, x, rng: np.random.Generator) -> np.ndarray:
    """Noisy observation ``h(x) + xi``; angular components are wrapped."""
    x = np.asarray(x, dtype=float)
    hx = np.asarray(model.observe(x), dtype=float)
    if hx.shape[-1] != model.obs_dim:
        raise DimensionError(f"observation function returned {hx.shape[-1]} values, expected {model.obs_dim}")
    noise = rng.multivariate_normal(np.zeros(model.obs_dim), model.noise_covariance, size=hx.shape[:-1] or None, method="cholesky")
    y = hx + noise
    if any(model.angular):
        y = np.where(model.angular_mask, wrap_angle(y), y)
    return y


@dataclass(frozen=True)
class TruthConfig:
    """Truth simulation settings.

    ``event_hooks`` holds ``(step, transform)`` pairs applied to the truth state
    right after that step index is computed; filters never see them.
    """

    initial_state: np.ndarray
    step_size: float
    num_steps: int
    obs_stride: int = 1
    event_hooks: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "initial_state", np.asarray(self.initial_state, dtype=float))
        if self.step_size <= 0 or self.num_steps < 1 or self.obs_stride < 1:
            raise ValueError("step_size, num_steps and obs_stride must be positive")
        if self.num_steps % self.obs_stride:
            raise ValueError("obs_stride must divide num_steps")
        object.__setattr__(self, "event_hooks", tuple(self.event_hooks))

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.num_steps + 1) * self.step_size

    @property
    def obs_steps(self) -> np.ndarray:
        return np.arange(self.obs_stride, self.num_steps + 1, self.obs_stride)


def simulate_truth(model: StateModel, cfg: TruthConfig, rng: np.random.Generator) -> np.ndarray:
    """Euler-Maruyama trajectory of shape ``(num_steps + 1, dim)``.

    Raises:
        DivergenceError: when the state becomes non-finite.
    """
    if cfg.initial_state.shape != (model.dim,):
        raise DimensionError("initial state does not match model dimension")
    hooks: dict[int, list] = {}
    for step, fn in cfg.event_hooks:
        hooks.setdefault(int(step), []).append(fn)
    traj = np.empty((cfg.num_steps + 1, model.dim))
    traj[0] = cfg.initial_state
    x = cfg.initial_state.copy()
    for n in range(cfg.num_steps):
        x = model.euler_maruyama(n * cfg.step_size, x, cfg.step_size, rng)
        for fn in hooks.get(n + 1, ()):
            x = np.asarray(fn(x), dtype=float)
        if not np.all(np.isfinite(x)):
            raise DivergenceError(f"truth diverged at step {n + 1}", step=n + 1)
        traj[n + 1] = x
    return traj


def generate_observations(
    obs_model: ObservationModel, truth: np.ndarray, cfg: TruthConfig, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Observe the truth every ``obs_stride`` steps; returns ``(steps, observations)``."""
    steps = cfg.obs_steps
    return steps, observe(obs_model, truth[steps], rng).reshape(len(steps), obs_model.obs_dim)


@dataclass(frozen=True)
class Problem:
    """A complete tracking problem: dynamics, observations, truth settings, and filter prior."""

    name: str
    state_model: StateModel
    obs_model: ObservationModel
    truth: TruthConfig
    prior_mean: np.ndarray
    prior_cov: np.ndarray
    error_dims: tuple[int, ...]
    linear: Optional["LinearGaussian"] = None
    params: dict = field(default_factory=dict)

    def __iter__(self):
        # allows ``state, obs, truth = make_bearing_only()``
        return iter((self.state_model, self.obs_model, self.truth))


@dataclass(frozen=True)
class LinearGaussian:
    """Matrices of a linear-Gaussian problem: ``b = B x + c``, ``h = H x``."""

    B: np.ndarray
    c: np.ndarray
    sigma: np.ndarray
    H: np.ndarray
    R: np.ndarray


# ----------------------------------------------------------------- demo 2-D

DEMO2D_MATRIX = np.array([[3.0, 4.0], [3.0, 2.0]])
DEMO2D_OFFSET = np.array([3.0, -2.0])


def make_demo2d(with_quadratic: bool = True) -> StateModel:
    """2-D drift ``[x2^2, 0] + [[3, 4], [3, 2]] x + [3, -2]`` with zero diffusion.

    ``with_quadratic=False`` drops the ``x2^2`` term, leaving a linear drift.
    """
    q = 1.0 if with_quadratic else 0.0

    def drift(t, x):
        x = np.asarray(x, dtype=float)
        out = x @ DEMO2D_MATRIX.T + DEMO2D_OFFSET
        out[..., 0] += q * x[..., 1] ** 2
        return out

    def jacobian(t, x):
        x = np.asarray(x, dtype=float)
        jac = np.broadcast_to(DEMO2D_MATRIX, x.shape[:-1] + (2, 2)).copy()
        jac[..., 0, 1] += 2.0 * q * x[..., 1]
        return jac

    return StateModel(
        dim=2,
        drift=drift,
        diffusion=constant_diffusion(np.zeros((2, 1))),
        noise_dim=1,
        drift_jacobian=jacobian,
        name="demo2d" if with_quadratic else "demo2d-linear",
    )


# ------------------------------------------------------ bearing-only tracking

def bearing_observation(platforms) -> Callable[[np.ndarray], np.ndarray]:
    platforms = np.asarray(platforms, dtype=float)

    def h(x):
        x = np.asarray(x, dtype=float)
        dx = x[..., None, 0] - platforms[:, 0]
        dy = x[..., None, 1] - platforms[:, 1]
        return np.arctan2(dy, dx)

    return h


def flip_vertical_velocity(x):
    x = np.array(x, dtype=float)
    x[..., 3] = -x[..., 3]
    return x


def make_bearing_only(
    sigma=(0.5, 0.5, 0.3, 0.3),
    platforms=((2.0, 6.0), (10.0, 12.0)),
    initial_state=(1.0, 3.0, 10.0, 6.0),
    step_size: float = 0.01,
    num_steps: int = 300,
    bearing_std: float = 0.05,
    turn_step: Optional[int] = 120,
    prior_cov_scale: float = 0.5,
) -> Problem:
    """Constant-velocity target observed by two bearing sensors.

    The truth has its vertical velocity negated at ``turn_step`` (the filters'
    model is not told). Angles come from the quadrant-aware ``arctan2``.
    """
    sigma = np.diag(np.asarray(sigma, dtype=float))
    B = np.zeros((4, 4))
    B[0, 2] = B[1, 3] = 1.0

    def drift(t, x):
        x = np.asarray(x, dtype=float)
        return x @ B.T

    def jacobian(t, x):
        return np.broadcast_to(B, np.shape(x)[:-1] + (4, 4)).copy()

    state = StateModel(4, drift, constant_diffusion(sigma), 4, jacobian, name="bearing")
    n_platforms = len(platforms)
    obs = ObservationModel(
        obs_dim=n_platforms,
        observe=bearing_observation(platforms),
        noise_covariance=bearing_std ** 2 * np.eye(n_platforms),
        angular=(True,) * n_platforms,
        name="bearings",
    )
    hooks = ((turn_step, flip_vertical_velocity),) if turn_step is not None else ()
    truth = TruthConfig(np.asarray(initial_state, dtype=float), step_size, num_steps, 1, hooks)
    return Problem(
        name="bearing",
        state_model=state,
        obs_model=obs,
        truth=truth,
        prior_mean=np.asarray(initial_state, dtype=float),
        prior_cov=prior_cov_scale * np.eye(4),
        error_dims=(0, 1),
        params=dict(platforms=np.asarray(platforms, dtype=float), turn_step=turn_step),
    )


# ------------------------------------------------------------------ Lorenz-96

def lorenz96_drift(forcing: float) -> tuple[Drift, Jacobian]:
    def drift(t, x):
        x = np.asarray(x, dtype=float)
        return (np.roll(x, -1, axis=-1) - np.roll(x, 2, axis=-1)) * np.roll(x, 1, axis=-1) - x + forcing

    def jacobian(t, x):
        x = np.asarray(x, dtype=float)
        d = x.shape[-1]
        jac = np.zeros(x.shape[:-1] + (d, d))
        idx = np.arange(d)
        jac[..., idx, (idx + 1) % d] = np.roll(x, 1, axis=-1)
        jac[..., idx, (idx - 2) % d] = -np.roll(x, 1, axis=-1)
        jac[..., idx, (idx - 1) % d] = np.roll(x, -1, axis=-1) - np.roll(x, 2, axis=-1)
        jac[..., idx, idx] = -1.0
        return jac

    return drift, jacobian


def lorenz96_spinup(d: int, forcing: float, duration: float = 5.0, dt: float = 0.001) -> np.ndarray:
    """Deterministic state on the attractor: perturbed equilibrium integrated for ``duration``."""
    drift, _ = lorenz96_drift(forcing)
    x = np.full(d, float(forcing))
    x[0] += 0.01
    for _ in range(int(round(duration / dt))):
        x = x + dt * drift(0.0, x)
    return x


def make_lorenz96(
    d: int = 10,
    forcing: float = 8.0,
    sigma: float = 0.5,
    step_size: float = 0.001,
    num_steps: int = 3000,
    obs_stride: int = 100,
    obs_std: float = 1.0,
    initial_state=None,
    prior_cov_scale: float = 0.5,
) -> Problem:
    """Stochastic Lorenz-96 with direct, noisy observations of the odd (1-based) components."""
    if d < 4:
        raise ValueError("Lorenz-96 needs d >= 4")
    drift, jacobian = lorenz96_drift(forcing)
    state = StateModel(d, drift, constant_diffusion(sigma * np.eye(d)), d, jacobian, name="lorenz96")
    observed = np.arange(0, d, 2)
    H = np.zeros((observed.size, d))
    H[np.arange(observed.size), observed] = 1.0

    def h(x):
        return np.asarray(x, dtype=float)[..., observed]

    obs = ObservationModel(observed.size, h, obs_std ** 2 * np.eye(observed.size), name="odd-components")
    x0 = lorenz96_spinup(d, forcing) if initial_state is None else np.asarray(initial_state, dtype=float)
    truth = TruthConfig(x0, step_size, num_steps, obs_stride)
    return Problem(
        name="lorenz96",
        state_model=state,
        obs_model=obs,
        truth=truth,
        prior_mean=x0.copy(),
        prior_cov=prior_cov_scale * np.eye(d),
        error_dims=tuple(range(d)),
        params=dict(forcing=forcing, observed=observed, H=H),
    )


# ------------------------------------------------------------ linear-Gaussian

def make_linear_gaussian(
    B=((-0.5, 1.0), (-1.0, -0.5)),
    c=(0.2, -0.1),
    sigma=((0.3, 0.0), (0.0, 0.2)),
    H=((1.0, 0.0),),
    R=((0.25,),),
    initial_state=(1.0, 0.0),
    step_size: float = 0.05,
    num_steps: int = 50,
    obs_stride: int = 1,
    prior_cov=((0.5, 0.1), (0.1, 0.4)),
) -> Problem:
    """Linear drift ``B x + c`` with linear observation ``H x``; the Kalman oracle applies."""
    B = np.asarray(B, dtype=float)
    c = np.asarray(c, dtype=float)
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    H = np.atleast_2d(np.asarray(H, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    d = B.shape[0]

    def drift(t, x):
        return np.asarray(x, dtype=float) @ B.T + c

    def jacobian(t, x):
        return np.broadcast_to(B, np.shape(x)[:-1] + (d, d)).copy()

    state = StateModel(d, drift, constant_diffusion(sigma), sigma.shape[1], jacobian, name="linear")

    def h(x):
        return np.asarray(x, dtype=float) @ H.T

    obs = ObservationModel(H.shape[0], h, R, name="linear")
    truth = TruthConfig(np.asarray(initial_state, dtype=float), step_size, num_steps, obs_stride)
    return Problem(
        name="linear",
        state_model=state,
        obs_model=obs,
        truth=truth,
        prior_mean=np.asarray(initial_state, dtype=float),
        prior_cov=np.asarray(prior_cov, dtype=float),
        error_dims=tuple(range(d)),
        linear=LinearGaussian(B, c, sigma, H, R),
    )


PROBLEMS = {
    "bearing": make_bearing_only,
    "lorenz96": make_lorenz96,
    "linear": make_linear_gaussian,
}


def make_problem(name: str, **overrides) -> Problem:
    try:
        factory = PROBLEMS[name]
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}") from None
    return factory(**overrides)
