"""
desk_trainer/evaluate.py - clean (TA) and corrupted (RA) accuracy.
"""
from dataclasses import replace
from typing import Dict, Optional, Sequence, Union

import numpy as np

from checkpoint_store import Checkpoint
from desk_trainer.corruptions import KINDS, CorruptionSpec, corrupt
from desk_trainer.datasets import LabeledSet
from desk_trainer.network import DeskNet

# Fixed and never used for training draws, so RA is comparable across models.
EVAL_SEED = 0xE7A15EED

Model = Union[Checkpoint, DeskNet]


def _net(model: Model) -> DeskNet:
    return model if isinstance(model, DeskNet) else DeskNet.from_checkpoint(model)


def corrupted_images(data: LabeledSet, corruption: CorruptionSpec) -> np.ndarray:
    return corrupt(data.images, replace(corruption, seed=EVAL_SEED))


def accuracy_on(model: Model, images: np.ndarray, labels: np.ndarray) -> float:
    preds = _net(model).predict(images)
    return float(np.mean(preds == labels))


def evaluate(model: Model, data: LabeledSet, corruption: Optional[CorruptionSpec] = None) -> float:
    images = data.images if corruption is None else corrupted_images(data, corruption)
    return accuracy_on(model, images, data.labels)


def robust_accuracy(model: Model, data: LabeledSet, kinds: Sequence[str] = KINDS, severity: int = 5) -> float:
    net = _net(model)
    return float(np.mean([evaluate(net, data, CorruptionSpec(k, severity)) for k in kinds]))


class EvalContext:
    """A test set plus lazily built corrupted copies, one per kind."""

    def __init__(self, test_set: LabeledSet, kinds: Sequence[str] = KINDS, severity: int = 5):
        self.test_set = test_set
        self.kinds = tuple(kinds)
        self.severity = severity
        self._corrupted: Dict[str, np.ndarray] = {}

    def images(self, kind: Optional[str]) -> np.ndarray:
        if kind is None:
            return self.test_set.images
        if kind not in self._corrupted:
            self._corrupted[kind] = corrupted_images(self.test_set, CorruptionSpec(kind, self.severity))
        return self._corrupted[kind]

    def accuracy(self, model: Model, kind: Optional[str] = None) -> float:
        return accuracy_on(model, self.images(kind), self.test_set.labels)

    def robust_accuracy(self, model: Model, kinds: Optional[Sequence[str]] = None) -> float:
        net = _net(model)
        return float(np.mean([self.accuracy(net, k) for k in (kinds or self.kinds)]))
