from recmarl.experiment.config import ConfigError, ExperimentConfig, from_dict, load, loads
from recmarl.experiment.runner import RunFailure, aggregate, confidence_band, run_experiment
