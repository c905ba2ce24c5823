"""
pipeline_loop.py - linear step executor for the reference experiment.

Runs named steps in order. Each step receives the shared context (config,
outdir and every output published by earlier steps) and returns an
observation dict that is saved to <outdir>/steps/step_NN_<name>.json.
"""
import logging
import os
import traceback
from typing import Any, Callable, Dict, List, Sequence, Tuple

from utils import write_json

logger = logging.getLogger(__name__)

Step = Callable[[Dict[str, Any]], Dict[str, Any]]


class PipelineExecutor:
    def __init__(self, steps: Dict[str, Step], plan: Sequence[str]):
        unknown = [name for name in plan if name not in steps]
        if unknown:
            raise ValueError(f"unknown steps in plan: {unknown}")
        self.steps = steps
        self.plan = tuple(plan)
        self.history: List[Tuple[str, Dict[str, Any]]] = []
        self.failures: List[Dict[str, Any]] = []

    # ---------------------------------------------------------
    # Observation bookkeeping
    # ---------------------------------------------------------
    def _save(self, outdir: str, step_num: int, name: str, observation: Dict[str, Any]) -> str:
        path = os.path.join(outdir, "steps", f"step_{step_num:02d}_{name}.json")
        write_json(path, observation)
        return path

    def _log_observation(self, observation: Dict[str, Any]) -> None:
        for key in ("total_models", "total_signatures"):
            if key in observation:
                logger.info("  %s: %s", key, observation[key])
        for key, value in sorted(observation.get("outputs", {}).items()):
            if isinstance(value, str):
                logger.info("  %s -> %s", key, value)

    # ---------------------------------------------------------
    # Main loop
    # ---------------------------------------------------------
    def run(self, inputs: Dict[str, Any], outdir: str) -> Dict[str, Any]:
        os.makedirs(os.path.join(outdir, "steps"), exist_ok=True)
        context = dict(inputs, outdir=outdir)
        observations: Dict[str, Dict[str, Any]] = {}
        total = len(self.plan)

        for step_num, name in enumerate(self.plan, start=1):
            logger.info("=" * 60)
            logger.info("STEP %d/%d: %s", step_num, total, name)
            logger.info("=" * 60)
            try:
                observation = self.steps[name](context)
            except Exception as e:
                logger.error("exception in %s: %s\n%s", name, e, traceback.format_exc())
                observation = {"error": f"{type(e).__name__}: {e}"}
                failure_type = "exception"
            else:
                failure_type = "step_error"

            self._save(outdir, step_num, name, observation)
            self.history.append((name, observation))
            if "error" in observation:
                self.failures.append({"step": step_num, "action": name, "error": observation["error"], "type": failure_type})
                logger.error("step %s failed: %s", name, observation["error"])
                return {"status": "FAILED", "error": observation["error"], "steps": step_num,
                        "failures": self.failures, "observations": observations}

            logger.info("step %s completed", name)
            self._log_observation(observation)
            observations[name] = observation
            context.update(observation.get("outputs", {}))

        return {"status": "SUCCESS", "steps": total, "failures": self.failures, "observations": observations}
