"""Configuration, seeded experiment orchestration, figure data and the CLI."""
from .config import (ExperimentConfig, StuckRule, dumps_config, load_config, loads_config)
from .figures import FIGURES, fig1_config, reproduce_figure
from .rng import substream
from .runner import RunManifest, run_experiment, trial_inits

__all__ = ["ExperimentConfig", "StuckRule", "dumps_config", "load_config", "loads_config",
           "FIGURES", "fig1_config", "reproduce_figure", "substream", "RunManifest",
           "run_experiment", "trial_inits"]
