"""
pipeline_steps/common.py - shared plumbing for the experiment steps.

Every step takes the executor's context dict and returns an observation:
{"success": True, "outputs": {...}, "metrics": {...}} or {"error": "..."}.
Artifacts travel between steps as file paths under the experiment outdir.
"""
import functools
import logging
import os
from typing import TYPE_CHECKING, Any, Callable, Dict, Iterable, List, Optional

from checkpoint_store import Checkpoint, SignatureFile, read_checkpoint, read_signature, write_checkpoint
from desk_trainer import EvalContext, LabeledSet, resolve_dataset
from errors import RWSError, ValidationError

if TYPE_CHECKING:
    from experiments.config import ExperimentConfig

logger = logging.getLogger(__name__)

Step = Callable[[Dict[str, Any]], Dict[str, Any]]


def pipeline_step(fn: Step) -> Step:
    """Turn library errors into error observations."""

    @functools.wraps(fn)
    def wrapper(inp: Dict[str, Any]) -> Dict[str, Any]:
        try:
            return fn(inp)
        except (RWSError, OSError) as e:
            logger.error("%s failed: %s", fn.__name__, e)
            return {"error": f"{type(e).__name__}: {e}"}

    return wrapper


class ExperimentLayout:
    """Where each artifact of a run lives."""

    def __init__(self, outdir: str):
        self.outdir = outdir

    def model(self, name: str) -> str:
        return os.path.join(self.outdir, "models", f"{name}.ckpt")

    def signature(self, family: str, kind: str) -> str:
        return os.path.join(self.outdir, "signatures", family, f"{kind}.rws")

    def report(self, name: str) -> str:
        return os.path.join(self.outdir, "reports", name)

    def save_model(self, name: str, ckpt: Checkpoint) -> str:
        path = self.model(name)
        write_checkpoint(ckpt, path)
        return path

    def save_signature(self, family: str, sig: SignatureFile) -> str:
        path = self.signature(family, sig.corruption)
        write_checkpoint(sig, path)
        return path


def config_of(inp: Dict[str, Any]) -> "ExperimentConfig":
    return inp["config"]


def layout_of(inp: Dict[str, Any]) -> ExperimentLayout:
    return ExperimentLayout(inp["outdir"])


def require(inp: Dict[str, Any], *keys: str) -> List[Any]:
    missing = [k for k in keys if k not in inp]
    if missing:
        raise ValidationError(f"missing step inputs {missing}; run the earlier steps first")
    return [inp[k] for k in keys]


def load_models(paths: Dict[str, str]) -> Dict[str, Checkpoint]:
    return {name: read_checkpoint(p) for name, p in paths.items()}


def load_signatures(paths: Dict[str, str], kinds: Iterable[str]) -> List[SignatureFile]:
    return [read_signature(paths[k]) for k in kinds]


def train_set(config: "ExperimentConfig", dataset: str) -> LabeledSet:
    return resolve_dataset(dataset, "train", config.train_size, config.data_seed)


def eval_context(config: "ExperimentConfig", dataset: str, severity: Optional[int] = None) -> EvalContext:
    test = resolve_dataset(dataset, "test", config.test_size, config.test_seed)
    return EvalContext(test, config.kinds, config.severity if severity is None else severity)


def points(value: float) -> float:
    """Accuracy fraction as percentage points, rounded for stable JSON."""
    return round(100.0 * value, 6)
