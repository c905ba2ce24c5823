from .config import ExperimentConfig
from .reference_experiment import EXPECTED_REPORTS, ReferenceExperiment

__all__ = ["EXPECTED_REPORTS", "ExperimentConfig", "ReferenceExperiment"]
