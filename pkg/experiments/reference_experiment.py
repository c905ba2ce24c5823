"""
experiments/reference_experiment.py - the desk-scale end-to-end run.

Trains the anchor, standard and robust models, extracts and quantizes
signatures, evaluates patched models, analyzes signature structure and
checks cross-dataset transfer. Everything lands under one outdir.
"""
import logging
import os
from typing import Any, Dict, List, Optional, Sequence

from experiments.config import ExperimentConfig
from pipeline_loop import PipelineExecutor
from pipeline_steps import REFERENCE_PLAN, STEP_REGISTRY
from utils import write_json

logger = logging.getLogger(__name__)

EXPECTED_REPORTS = (
    "per_corruption.csv",
    "summary.csv",
    "storage.csv",
    "alpha_sweep.csv",
    "composition.csv",
    "layer_sweep.csv",
    "norms.csv",
    "relationship.csv",
    "cross_dataset.csv",
    "transfer_gain.csv",
    "transfer.csv",
)


class ReferenceExperiment:
    def __init__(self, config: Optional[ExperimentConfig] = None, outdir: str = "runs/reference",
                 plan: Sequence[str] = REFERENCE_PLAN):
        self.config = config or ExperimentConfig()
        self.outdir = outdir
        self.executor = PipelineExecutor(STEP_REGISTRY, plan)
        logger.info("experiment: %s on %s/%s, %d kinds, outdir %s",
                    self.config.architecture, self.config.dataset_a, self.config.dataset_b,
                    len(self.config.kinds), outdir)

    def run(self) -> Dict[str, Any]:
        write_json(os.path.join(self.outdir, "experiment_config.json"), self.config.to_dict())
        result = self.executor.run({"config": self.config}, self.outdir)

        # ========================================
        # SAVE EXECUTION SUMMARY
        # ========================================
        summary_path = os.path.join(self.outdir, "execution_summary.json")
        write_json(summary_path, {
            "status": result["status"],
            "steps_taken": result.get("steps", 0),
            "max_steps": len(self.executor.plan),
            "failures_count": len(result.get("failures", [])),
            "failures": result.get("failures", []),
            "error": result.get("error", ""),
        })

        results = {name: obs["metrics"] for name, obs in result["observations"].items() if "metrics" in obs}
        write_json(os.path.join(self.outdir, "results.json"), results)

        logger.info("=" * 60)
        logger.info("EXECUTION SUMMARY")
        logger.info("=" * 60)
        logger.info("Status: %s", result["status"])
        logger.info("Steps: %d/%d", result.get("steps", 0), len(self.executor.plan))
        for i, failure in enumerate(result.get("failures", []), 1):
            logger.info("Failure %d: step %s (%s) %s", i, failure["step"], failure["action"], failure["error"])

        missing = self.missing_reports()
        for name in missing:
            logger.warning("[MISSING] reports/%s", name)
        if result["status"] == "SUCCESS" and not missing:
            logger.info("SUCCESS - all %d reports written", len(EXPECTED_REPORTS))
        return {"status": result["status"], "results": results, "missing_reports": missing,
                "error": result.get("error", "")}

    def missing_reports(self) -> List[str]:
        return [n for n in EXPECTED_REPORTS if not os.path.exists(os.path.join(self.outdir, "reports", n))]

    def explain(self) -> str:
        c = self.config
        return f"""Reference experiment ({len(self.executor.plan)} steps)

Architecture: {c.architecture}, anchor: {c.init_strategy}
Datasets: {c.dataset_a} (patching), {c.dataset_b} (transfer / cross-dataset)
Corruptions: {', '.join(c.kinds)} at severity {c.severity}
Signatures: {c.mode} mode, shallowest {c.layers_kept} groups

Steps:
{chr(10).join(f"{i}. {name}" for i, name in enumerate(self.executor.plan, 1))}

Output Structure:
- execution_summary.json - final status and failures
- results.json - metrics reported by each step
- steps/ - one observation per step
- models/ - anchor, standard, robust and augmentation checkpoints
- signatures/ - shallow, full_a, full_b, shallow_16bit, shallow_8bit
- reports/ - CSV reports"""
