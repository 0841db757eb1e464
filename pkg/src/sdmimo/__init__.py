"""Spatial Sigma-Delta ADC arrays for massive MIMO: channel estimation and uplink rates."""

from .channel import ScenarioGeometry
from .coupling import CouplingParams, build_coupling
from .estimator import TAGS, build_estimator, run_algorithm_1, scenario_estimator
from .harness import ExperimentConfig, ResultTable
from .rate import RECEIVERS, RateReport, data_phase_model, mrc_rate, zf_rate
from .scenario import Scenario
from .sigma_delta import QuantizerSpec, SigmaDeltaFront, build_feedback

__all__ = [
    "ScenarioGeometry", "CouplingParams", "build_coupling", "TAGS", "build_estimator",
    "run_algorithm_1", "scenario_estimator", "ExperimentConfig", "ResultTable", "RECEIVERS",
    "RateReport", "data_phase_model", "mrc_rate", "zf_rate", "Scenario", "QuantizerSpec",
    "SigmaDeltaFront", "build_feedback",
]
