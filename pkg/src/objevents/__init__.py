"""Numerical toolkit for multi-channel measurement functionals and objective events.

Build a unitary-dilation measurement model, evaluate coincidence
probabilities of channel readings, check the measurement axioms, and verify
that discriminating channels agree on every trial.
"""
from .linalg import DEFAULT_TOL, DimensionLayout, LayoutError, PreconditionError, ToleranceConfig, partial_trace, tensor
from .measurement import (
    ChannelLayout,
    MeasurementModel,
    coincidence_distribution,
    conditional_output_state,
    copy_model,
    induced_effect,
    m_coincidence,
    m_total,
    output_state,
    random_model,
    verify_axioms,
)
from .quantum import DensityOperator, Effect, ValidationError, Weights, complement, mix, probability
from .superposition import SuperpositionFamily, check_eq15, coherent, is_insensitive, is_member, member
from .theorems import (
    DiscriminationScenario,
    MultiwayScenario,
    check_discrimination,
    consistency_analysis,
    multiway_filter,
    sample_trials,
    verify_theorem1,
    verify_theorem2,
    verify_theorem3,
)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_TOL",
    "DimensionLayout",
    "LayoutError",
    "PreconditionError",
    "ToleranceConfig",
    "partial_trace",
    "tensor",
    "ChannelLayout",
    "MeasurementModel",
    "coincidence_distribution",
    "conditional_output_state",
    "copy_model",
    "induced_effect",
    "m_coincidence",
    "m_total",
    "output_state",
    "random_model",
    "verify_axioms",
    "DensityOperator",
    "Effect",
    "ValidationError",
    "Weights",
    "complement",
    "mix",
    "probability",
    "SuperpositionFamily",
    "check_eq15",
    "coherent",
    "is_insensitive",
    "is_member",
    "member",
    "DiscriminationScenario",
    "MultiwayScenario",
    "check_discrimination",
    "consistency_analysis",
    "multiway_filter",
    "sample_trials",
    "verify_theorem1",
    "verify_theorem2",
    "verify_theorem3",
]
