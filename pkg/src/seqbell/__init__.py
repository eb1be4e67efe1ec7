"""Sequential Bell tests with chains of observers measuring two shared ququarts."""

__version__ = "0.1.0"

from .gammaseq import INFEASIBLE, GammaSequence, find_feasible_theta, gamma_first, gamma_sequence
from .measurements import SideParameters, build_party_povm, luders_instrument
from .optimizer import OptimizationResult, objective_min_S, optimize_symmetric
from .simulator import ScenarioConfig, compare_closed_form, critical_visibility, simulate_S
from .witness import JointDistribution, WitnessValue, closed_form_S, lhv_bound, witness_from_joint

__all__ = [
    "INFEASIBLE",
    "GammaSequence",
    "JointDistribution",
    "OptimizationResult",
    "ScenarioConfig",
    "SideParameters",
    "WitnessValue",
    "build_party_povm",
    "closed_form_S",
    "compare_closed_form",
    "critical_visibility",
    "find_feasible_theta",
    "gamma_first",
    "gamma_sequence",
    "lhv_bound",
    "luders_instrument",
    "objective_min_S",
    "optimize_symmetric",
    "simulate_S",
    "witness_from_joint",
]
