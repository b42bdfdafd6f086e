"""Experiment runner, evaluation metrics and the probe suite."""

from .config import ConfigError, ConfigErrors, ExperimentConfig, load_config
from .evaluation import EvalReport, eval_robust, eval_standard, evaluate, fosp_metric
from .experiment import (
    ExperimentResult,
    evaluate_checkpoint,
    run_experiment,
    run_experiment_async,
)
from .probes import ProbeReport, probe_suite, probes, run_probe
