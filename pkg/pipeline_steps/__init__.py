from .common import ExperimentLayout, pipeline_step
from .steps import REFERENCE_PLAN, STEP_REGISTRY

__all__ = ["REFERENCE_PLAN", "STEP_REGISTRY", "ExperimentLayout", "pipeline_step"]
