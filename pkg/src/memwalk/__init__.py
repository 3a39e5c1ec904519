"""Markov chains with finite memory and memory-aware hypergraph random walks.

The package models a walk whose next step depends on an ordered window of
past states.  Transition (or rate) tensors over histories lift to paired
operators whose sparse unfolding makes the memory process an ordinary
Markov chain; a product-measure closure reduces the dynamics to a small
nonlinear system on the nodes.  Hypergraphs supply the tensors: each
directed hyperedge maps an ordered history to a head node.
"""

from .errors import (
    CertificationError,
    DimensionError,
    IntegrationError,
    IterationLimitError,
    MemwalkError,
    ParseError,
    StructuralError,
    ValidationError,
)
from .tensor import (
    DenseTensor,
    PairedOperator,
    contract_power,
    ivec,
    ivec_inverse,
)
from .markov import (
    ClosedClass,
    JointDistribution,
    SpectralSummary,
    TransitionTensor,
    UnfoldedChain,
    check_primitivity,
    lift_transition,
    marginalize,
    memory_lift,
    simulate_discrete,
    stationary_joint,
    step_joint,
    unfolded_chain,
    zeig_fixed_point,
)
from .ctmc import (
    GeneratorPair,
    InteractionGraph,
    LaplacianPair,
    RateTensor,
    TrajectoryRecord,
    build_generator,
    build_laplacian,
    check_detailed_balance,
    ct_closed_classes,
    flux,
    flux_divergence,
    integrate_exact,
    integrate_mean_field,
    interaction_graph,
    lyapunov_value,
    mean_field_rhs,
    outflow,
    predict_limit,
    stationary_ct,
)
from .hypergraph import (
    AdjacencyBundle,
    DirectedHypergraph,
    ProjectedGraph,
    adjacency_bundle,
    classical_walk_stationary,
    expand_undirected,
    project,
    to_rate,
    to_transition,
)
from .simulate import (
    EnsembleResult,
    run_continuous_ensemble,
    run_discrete_ensemble,
    total_variation,
)

__version__ = "0.1.0"

__all__ = [
    "AdjacencyBundle",
    "CertificationError",
    "ClosedClass",
    "DenseTensor",
    "DimensionError",
    "DirectedHypergraph",
    "EnsembleResult",
    "GeneratorPair",
    "IntegrationError",
    "InteractionGraph",
    "IterationLimitError",
    "JointDistribution",
    "LaplacianPair",
    "MemwalkError",
    "PairedOperator",
    "ParseError",
    "ProjectedGraph",
    "RateTensor",
    "SpectralSummary",
    "StructuralError",
    "TrajectoryRecord",
    "TransitionTensor",
    "UnfoldedChain",
    "ValidationError",
    "adjacency_bundle",
    "build_generator",
    "build_laplacian",
    "check_detailed_balance",
    "check_primitivity",
    "classical_walk_stationary",
    "contract_power",
    "ct_closed_classes",
    "expand_undirected",
    "flux",
    "flux_divergence",
    "integrate_exact",
    "integrate_mean_field",
    "interaction_graph",
    "ivec",
    "ivec_inverse",
    "lift_transition",
    "lyapunov_value",
    "marginalize",
    "mean_field_rhs",
    "memory_lift",
    "outflow",
    "predict_limit",
    "project",
    "run_continuous_ensemble",
    "run_discrete_ensemble",
    "simulate_discrete",
    "stationary_ct",
    "stationary_joint",
    "step_joint",
    "to_rate",
    "to_transition",
    "total_variation",
    "unfolded_chain",
    "zeig_fixed_point",
]
