from .corruptions import KINDS, SEVERITY_TABLES, CorruptionSpec, apply_corruption, corrupt
from .datasets import LabeledSet, generate_dataset, resolve_dataset
from .evaluate import EVAL_SEED, EvalContext, evaluate, robust_accuracy
from .gradcheck import GradCheckReport, grad_check
from .idx import load_idx
from .network import DeskNet, NetSpec
from .rng import derive_seed, make_rng
from .train import INIT_STRATEGIES, TrainConfig, anchor_init, train, train_with_history

__all__ = [
    "EVAL_SEED",
    "INIT_STRATEGIES",
    "KINDS",
    "SEVERITY_TABLES",
    "CorruptionSpec",
    "DeskNet",
    "GradCheckReport",
    "EvalContext",
    "LabeledSet",
    "NetSpec",
    "TrainConfig",
    "anchor_init",
    "apply_corruption",
    "corrupt",
    "derive_seed",
    "evaluate",
    "generate_dataset",
    "grad_check",
    "load_idx",
    "make_rng",
    "resolve_dataset",
    "robust_accuracy",
    "train",
    "train_with_history",
]
