"""Threshold-rule pump control optimization via model-based search."""

from .acquisition import AcqConfig, IncumbentState, aei, ei, lcb, score, score_batch
from .focus import FocusConfig, FocusResult, maximize, shrink
from .forest import (
    FeasibilityModel,
    ForestHyper,
    ForestModel,
    ModelUnavailableError,
    Observation,
    Prediction,
    feasibility_prob,
    fit_classifier,
    fit_regressor,
    predict,
)
from .hydrosim import (
    NetworkModel,
    SimulationResult,
    control_step,
    evaluate,
    load_network,
    pressure_at,
    simulate,
)
from .loop import RunConfig, RunTrace, best_seen, propose_next, run
from .space import (
    DiscreteSet,
    ThresholdSpace,
    ValidityReport,
    count_admissible,
    encode,
    enumerate_admissible,
    lhs_sample,
)

__version__ = "0.1.0"

__all__ = [
    "AcqConfig",
    "DiscreteSet",
    "FeasibilityModel",
    "FocusConfig",
    "FocusResult",
    "ForestHyper",
    "ForestModel",
    "IncumbentState",
    "ModelUnavailableError",
    "NetworkModel",
    "Observation",
    "Prediction",
    "RunConfig",
    "RunTrace",
    "SimulationResult",
    "ThresholdSpace",
    "ValidityReport",
    "aei",
    "best_seen",
    "control_step",
    "count_admissible",
    "ei",
    "encode",
    "enumerate_admissible",
    "evaluate",
    "feasibility_prob",
    "fit_classifier",
    "fit_regressor",
    "lcb",
    "lhs_sample",
    "load_network",
    "maximize",
    "predict",
    "pressure_at",
    "propose_next",
    "run",
    "score",
    "score_batch",
    "shrink",
    "simulate",
]
