"""Nonlinear filtering with adaptive Gaussian kernel mixtures.

The filtering density is a weighted sum of Gaussian kernels. Each prediction
step moves the kernels through a least-squares affine fit of the drift, fits
the remaining nonlinear drift action by greedy kernel boosting, and widens the
kernels by the diffusion. Each update step refits the kernels to prior times
likelihood. Particle-filter, ensemble-Kalman and exact Kalman baselines plus a
seeded experiment harness are included.
"""

from .baselines import (
    KalmanBelief,
    ParticleEnsemble,
    enkf_step,
    kalman_step,
    pf_step,
    run_enkf,
    run_kalman,
    run_pf,
)
from .boosting import BoostConfig, BoostDiagnostics, TargetFunction, boost_fit, local_fit
from .exceptions import (
    DegenerateMixtureError,
    DegenerateWeightsError,
    DimensionError,
    DivergenceError,
    FilterDivergenceError,
    KernelFilterError,
    LocalFitError,
    NonNormalizableError,
    NotPositiveDefiniteError,
    OracleError,
    SignedMixtureSamplingError,
    TransportError,
)
from .filter import FilterConfig, FilterStep, StepInfo, likelihood, predict, run_filter, update
from .fokker_planck import (
    LinearDrift,
    ResidualTarget,
    TransportMap,
    evaluate_target,
    inflate_diffusion,
    linearize_drift,
    residual_drift,
    transport_linear,
)
from .harness import ExperimentConfig, RmseReport, load_config, parse_roster, run_demo2d, run_experiment, track
from .mixture import GaussianKernel, KernelMixture
from .models import (
    ObservationModel,
    Problem,
    StateModel,
    TruthConfig,
    make_bearing_only,
    make_demo2d,
    make_linear_gaussian,
    make_lorenz96,
    make_problem,
    observe,
    simulate_truth,
)

__version__ = "0.1.0"
