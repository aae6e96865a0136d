"""
cgate - trigger and filter gates for LLM code completion.

This library trains the models that decide whether a completion should be generated
and whether a generated one should be shown, calibrates their thresholds against a
false-negative budget, evaluates the trade-off offline and serves the decisions.
"""

from importlib.metadata import version

# Import logging FIRST so it is configured before other modules log
from .logging import CGATE_LOG, Logger, logger  # isort: skip

from .calibrate import HardRules, ThresholdPolicy, calibrate_policy, sweep_joint  # noqa: E402
from .client import GateClient
from .config import ServeConfig, create_gate_from_config, load_config_file
from .events import Dataset, load_dataset, save_dataset
from .scoring import Scorer, ScoredDataset, load_model, score_dataset
from .serve import Gate, GateServer
from .synthgen import WorldConfig, generate, generate_closed_loop
from .training import evaluate_task, train_hybrid_task, train_task

__version__ = version("cgate")

__all__ = [
    "CGATE_LOG",
    "Dataset",
    "Gate",
    "GateClient",
    "GateServer",
    "HardRules",
    "Logger",
    "ScoredDataset",
    "Scorer",
    "ServeConfig",
    "ThresholdPolicy",
    "WorldConfig",
    "calibrate_policy",
    "create_gate_from_config",
    "evaluate_task",
    "generate",
    "generate_closed_loop",
    "load_config_file",
    "load_dataset",
    "load_model",
    "logger",
    "save_dataset",
    "score_dataset",
    "set_debug",
    "sweep_joint",
    "train_hybrid_task",
    "train_task",
]


def set_debug(debug=2):
    """Set the log verbosity for cgate (0=off, 1=info, 2=debug)."""
    Logger.set_debug(debug)
