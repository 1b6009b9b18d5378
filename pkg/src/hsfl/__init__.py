"""Latency simulation and resource optimization for heterogeneous split
federated learning."""

from ._kernels import BACKEND
from .channel import EnvStats, sample, sample_batch
from .config import load_config
from .cutlayer import GAConfig, optimize_cuts
from .latency import per_round_latency
from .policies import POLICY_NAMES, baseline_policy
from .profiles import Allocation, EnvironmentSample, ModelProfile, SystemProfile
from .protocol import run_training
from .shortterm import RoundRule, optimize_round

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "EnvStats", "sample", "sample_batch", "load_config", "GAConfig",
    "optimize_cuts", "per_round_latency", "POLICY_NAMES", "baseline_policy",
    "Allocation", "EnvironmentSample", "ModelProfile", "SystemProfile", "run_training",
    "RoundRule", "optimize_round",
]
