"""Direct-sampling (implicit) particle filter for a bearings-only ship track.

The filter builds each new particle as an explicit function of Gaussian
reference draws instead of weighting samples from the prior, so particles land
where the observations put probability.  Subpackages cover the scalar Gaussian
algebra, a conditioned-path (bridge) sampler, the ship model, forward and
one-step backward kernels, resampling, variance estimation and the Monte Carlo
experiments behind the command-line tool.
"""

from .azimuth import ModelParams, Observation, ShipState, generate_truth, simulate_truth_batch
from .bridge import BridgeSpec, IterationConfig, PathSample, bridge_iterate, subdivide_sample
from .errors import (
    ConvergenceError,
    DegeneratePositionError,
    FailureBudgetError,
    FilterError,
    InfeasibleBandError,
    InvalidConfigError,
    InvalidInputError,
    NoBracketError,
    SingularSchemeError,
    UndefinedDiscriminantError,
)
from .estimation import DiscriminantInput, SigmaScanRow, discriminant_D, estimate_sigma, sigma_scan
from .experiments import ExperimentConfig, RunStats, discrepancy_study, intrinsic_uncertainty, robustness_study
from .filter import FilterOutput, run_filter, run_filter_batch
from .forward import ForwardConfig, RefPair, forward_step
from .gaussian import Gaussian1D, MergeResult, merge, sample_from
from .resampling import Ensemble, ResamplePolicy, resample
from .smoother import BackwardInput, backward_step

__version__ = "0.1.0"

__all__ = [
    "BackwardInput", "BridgeSpec", "ConvergenceError", "DegeneratePositionError", "DiscriminantInput", "Ensemble",
    "ExperimentConfig", "FailureBudgetError", "FilterError", "FilterOutput", "ForwardConfig", "Gaussian1D",
    "InfeasibleBandError", "InvalidConfigError", "InvalidInputError", "IterationConfig", "MergeResult",
    "ModelParams", "NoBracketError", "Observation", "PathSample", "RefPair", "ResamplePolicy", "RunStats",
    "ShipState", "SigmaScanRow", "SingularSchemeError", "UndefinedDiscriminantError", "backward_step",
    "bridge_iterate", "discrepancy_study", "discriminant_D", "estimate_sigma", "forward_step", "generate_truth",
    "intrinsic_uncertainty", "merge", "resample", "robustness_study", "run_filter", "run_filter_batch",
    "sample_from", "sigma_scan", "simulate_truth_batch", "subdivide_sample",
]
