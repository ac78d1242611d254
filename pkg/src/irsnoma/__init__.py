"""Downlink simulator for dual-polarized IRS-assisted massive MIMO-NOMA."""

__version__ = "0.1.0"

from .channel import (ChannelRealization, ClusterGeometry, ClusterSpatialModel,
                      LinkBudget, StreamKey, assemble_effective_channel,
                      build_one_ring_covariance, draw_channel)
from .config import ScenarioConfig, parse_config
from .engine import RateResult, ScenarioResult, run_scenario
from .errors import ConfigurationError, RejectedRealization
from .irs import IrsSetting, QclsProblem, build_subproblems, optimize_user_irs, solve_qcls
from .precoder import assign_polarizations, build_assignment_vector, build_cluster_precoder
from .receiver import build_detection, polarization_interference, sic_interference, sinr

__all__ = [
    "ChannelRealization", "ClusterGeometry", "ClusterSpatialModel", "LinkBudget",
    "StreamKey", "assemble_effective_channel", "build_one_ring_covariance", "draw_channel",
    "ScenarioConfig", "parse_config", "RateResult", "ScenarioResult", "run_scenario",
    "ConfigurationError", "RejectedRealization", "IrsSetting", "QclsProblem",
    "build_subproblems", "optimize_user_irs", "solve_qcls", "assign_polarizations",
    "build_assignment_vector", "build_cluster_precoder", "build_detection",
    "polarization_interference", "sic_interference", "sinr",
]
