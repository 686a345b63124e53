"""Optimal synthesis of two-qubit unitaries into fractional XX-type interactions."""

from .approximator import nearest_point
from .circuit_polytope import StrengthSequence, circuit_polytope, member
from .decomposer import TwoQubitCircuit, reconstruct, synthesize_canonical
from .optimizer import (
    REFERENCE_ERROR_MODEL,
    ErrorModel,
    GateSet,
    SynthesisMode,
    SynthesisOptions,
    expected_cost_exact,
    expected_cost_monte_carlo,
    optimal_synthesize,
)
from .weyl import canonical_infidelity, monodromy_coordinate

__all__ = [
    "REFERENCE_ERROR_MODEL",
    "ErrorModel",
    "GateSet",
    "StrengthSequence",
    "SynthesisMode",
    "SynthesisOptions",
    "TwoQubitCircuit",
    "canonical_infidelity",
    "circuit_polytope",
    "expected_cost_exact",
    "expected_cost_monte_carlo",
    "member",
    "monodromy_coordinate",
    "nearest_point",
    "optimal_synthesize",
    "reconstruct",
    "synthesize_canonical",
]
