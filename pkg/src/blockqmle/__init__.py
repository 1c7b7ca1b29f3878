"""Block quasi-likelihood estimation for noisy, nonsynchronously observed
two-dimensional diffusions: simulator, block partition, banded likelihood
kernels, maximum-likelihood-type and Bayes-type estimators, limit objects
and a reproducible Monte Carlo harness.
"""

from ._kernels import BACKEND
from .baseline import realized_cov_previous_tick
from .blocks import BlockConfig, BlockData, auto_block_config, build_blocks
from .errors import ConfigError, DataError, EstimationError, NumericalError
from .estimate import (
    EstimateReport,
    bayes,
    estimate_noise_variance,
    estimate_pipeline,
    mle,
    observed_info,
    plug_in_noise,
    qcov_estimate,
)
from .likelihood import block_covariance, loglik, loglik_batch, loglik_grad, loglik_hess
from .limits import (
    LimitContext,
    information_matrix,
    noise_information_matrix,
    noiseless_qlr_limit,
    noise_qlr_limit,
    qlr_limit,
    theoretical_min_std,
    varphi,
)
from .models import CIRDiffusion, ConstantDiffusion, DiffusionModel, make_model
from .montecarlo import MonteCarloTable, RunConfig, run_montecarlo, run_replication
from .simulate import (
    LatentPath,
    NoiseConfig,
    ObservationSet,
    PathConfig,
    SamplingConfig,
    observe,
    read_csv,
    sample_poisson_times,
    simulate_latent_path,
    simulate_observations,
    true_quadratic_covariation,
    write_csv,
)

__version__ = "0.1.0"
