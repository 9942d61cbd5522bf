"""Gradient-based prediction for adversarial multi-armed bandits.

Two smoothing back-ends for the max-of-losses potential: Tsallis-entropy
regularization (with the softmax/EXP3 limit) and stochastic perturbation
(Follow the Perturbed Leader with Geometric Resampling), plus the
distribution library, regret-bound calculators and an experiment harness.
"""

from .distributions import (
    PerturbationModel,
    condition_above,
    expected_max,
    expected_max_mc,
    mirror,
    model,
    scaled,
    sup_hazard,
)
from .engine import (
    EstimateState,
    PenaltyLedger,
    PerturbationSmoother,
    RunTrace,
    SoftmaxSmoother,
    TsallisSmoother,
    check_differential_consistency,
    expected_regret,
    penalty_decomposition,
    run,
    run_round,
    smoother_from_dict,
)
from .environments import EnvironmentSpec, generate
from .exceptions import LossRangeError, MonotonicityError, RootFindingError, SimplexError
from .harness import ExperimentConfig, RegretReport, run_experiment, sweep
from .kernels import BACKEND
from .perturbation import (
    PerturbationConfig,
    ftpl_gradient_mc,
    ftpl_sample,
    geometric_resampling_estimate,
    hazard_regret_bound,
    tune_eta,
)
from .tsallis import (
    TsallisConfig,
    minimax_eta,
    softmax_distribution,
    tsallis_distribution,
    tsallis_potential,
    tsallis_regret_bound,
)

__version__ = "0.1.0"
