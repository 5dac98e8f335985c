"""Closed-loop spiking oculomotor controller on a simulated robotic head."""
from .config import Config, ConfigError, load_config
from .harness import ExperimentConfig, MetricsReport, RunResult, Trace, compute_metrics, run_experiment

__all__ = ["Config", "ConfigError", "load_config", "ExperimentConfig", "MetricsReport",
           "RunResult", "Trace", "compute_metrics", "run_experiment"]
__version__ = "0.1.0"
