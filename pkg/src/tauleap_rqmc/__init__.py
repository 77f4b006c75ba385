"""Tau-leaping simulation of reaction networks with MC, classical RQMC and Array-RQMC."""

from .arrayrqmc import ArrayRqmcPlan, run_once, run_replicated
from .chain import (
    EstimatorOutput,
    Functional,
    SimConfig,
    crqmc_estimate,
    mc_estimate,
    simulate_path,
    simulate_paths,
    step,
)
from .harness import ExperimentConfig, eif, fit_beta, run_experiment, vrf
from .model import (
    ReactionNetwork,
    apply_reactions,
    builtin_model,
    parse_network,
    propensity,
    serialize_network,
)
from .points import PointSet
from .sampling import count_variate, normal_inverse, poisson_inverse

__version__ = "0.1.0"
