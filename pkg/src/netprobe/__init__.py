"""Excitation-based topology inference for noisy linear networked systems.

The package simulates linear network dynamics x_t = W x_{t-1} + noise with
noisy observations, injects designed excitation inputs at chosen nodes, and
decides which nodes are downstream neighbors of the excited node from the
observed deviations.  It also refines global least-squares estimates of W
with the edge constraints obtained from an excitation round.
"""

from netprobe.topology import (
    StabilityClass,
    WeightedDigraph,
    TopologyMatrix,
    HopSets,
    generate_random_digraph,
    laplacian_weights,
    metropolis_weights,
    scale_to_asymptotic,
    classify_stability,
    true_hop_sets,
)
from netprobe.dynamics import (
    NoiseModel,
    ExcitationPlan,
    Trajectory,
    simulate,
    deviation_bound,
    observation_deviation,
)
from netprobe.detect import (
    TestDesign,
    HStepNoise,
    erf,
    erf_inv,
    deviation_noise_bound,
    deviation_noise_std,
    critical_excitation,
    misjudgement_probability,
    false_alarm_probability,
    detection_probability,
    hop_inference_lower_bound,
    multi_excitation_bound,
)
from netprobe.infer import (
    NeighborDecision,
    infer_one_hop,
    infer_within_hops,
    infer_multi_excitation,
)
from netprobe.estimate import (
    EntryConstraint,
    LsProblem,
    LsSolution,
    ErrorMetrics,
    ols_estimate,
    constrained_estimate,
    error_metrics,
    constraints_from_decision,
)
from netprobe.harness import (
    ExperimentConfig,
    ResultTable,
    run_onehop_accuracy,
    run_multihop_accuracy,
    run_ls_improvement,
)

__all__ = [
    "StabilityClass",
    "WeightedDigraph",
    "TopologyMatrix",
    "HopSets",
    "generate_random_digraph",
    "laplacian_weights",
    "metropolis_weights",
    "scale_to_asymptotic",
    "classify_stability",
    "true_hop_sets",
    "NoiseModel",
    "ExcitationPlan",
    "Trajectory",
    "simulate",
    "deviation_bound",
    "observation_deviation",
    "TestDesign",
    "HStepNoise",
    "erf",
    "erf_inv",
    "deviation_noise_bound",
    "deviation_noise_std",
    "critical_excitation",
    "misjudgement_probability",
    "false_alarm_probability",
    "detection_probability",
    "hop_inference_lower_bound",
    "multi_excitation_bound",
    "NeighborDecision",
    "infer_one_hop",
    "infer_within_hops",
    "infer_multi_excitation",
    "EntryConstraint",
    "LsProblem",
    "LsSolution",
    "ErrorMetrics",
    "ols_estimate",
    "constrained_estimate",
    "error_metrics",
    "constraints_from_decision",
    "ExperimentConfig",
    "ResultTable",
    "run_onehop_accuracy",
    "run_multihop_accuracy",
    "run_ls_improvement",
]

__version__ = "0.1.0"
