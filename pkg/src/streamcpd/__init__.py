"""Streaming Bayesian change-point detection over an unbounded latent-class
hierarchy, with fixed-K and raw-observation baselines."""

__version__ = "0.1.0"

from .crp import CrpState, LabelCounts, sample_class, sequence_probability
from .detector import (
    Detector,
    DetectorConfig,
    NigParams,
    RunResult,
    SparsePosterior,
    StepOutput,
    baseline_predictive,
    fixed_k_run_predictive,
    nig_update,
    run,
)
from .emission import (
    CandidatePolicy,
    EmissionParams,
    decay_rates,
    e_step,
    emission_loglik,
    gaussian_gradients,
    m_step,
    map_assignment,
    spawn_candidate,
)
from .errors import ConfigError, ContractViolation, DegenerateStateError, InputError
from .oracles import (
    SegmentSpec,
    brute_force_joint,
    brute_force_joint_by_segments,
    finite_difference,
    gen_piecewise_gaussian,
)
from .runlength import (
    ChangePointRule,
    HazardConfig,
    PrunePolicy,
    RunLengthState,
    detect_changepoints,
    hazard_prior,
    map_runlength,
    normalize_posterior,
    prune,
    recursion_step,
)

__all__ = [
    "__version__",
    "CandidatePolicy",
    "ChangePointRule",
    "ConfigError",
    "ContractViolation",
    "CrpState",
    "DegenerateStateError",
    "Detector",
    "DetectorConfig",
    "EmissionParams",
    "HazardConfig",
    "InputError",
    "LabelCounts",
    "NigParams",
    "PrunePolicy",
    "RunLengthState",
    "RunResult",
    "SegmentSpec",
    "SparsePosterior",
    "StepOutput",
    "baseline_predictive",
    "brute_force_joint",
    "brute_force_joint_by_segments",
    "decay_rates",
    "detect_changepoints",
    "e_step",
    "emission_loglik",
    "finite_difference",
    "fixed_k_run_predictive",
    "gaussian_gradients",
    "gen_piecewise_gaussian",
    "hazard_prior",
    "m_step",
    "map_assignment",
    "map_runlength",
    "nig_update",
    "normalize_posterior",
    "prune",
    "recursion_step",
    "run",
    "sample_class",
    "sequence_probability",
    "spawn_candidate",
]
