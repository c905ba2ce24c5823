"""
desk_trainer/train.py - SGD with momentum on softmax cross-entropy.

Training is a pure function of (config, init, corruption, data): shuffling,
augmentation and initialization all draw from seeded Philox streams.
"""
import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, fields, replace
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from checkpoint_store import Checkpoint
from desk_trainer.corruptions import CorruptionSpec, corrupt
from desk_trainer.datasets import LabeledSet, resolve_dataset
from desk_trainer.network import DeskNet, NetSpec
from desk_trainer.rng import derive_seed, make_rng
from errors import DivergenceError, ValidationError

logger = logging.getLogger(__name__)

INIT_STRATEGIES = ("pretext-pretrain", "std-as-init")
Corruption = Union[None, CorruptionSpec, Sequence[CorruptionSpec]]


@dataclass(frozen=True)
class TrainConfig:
    dataset: str = "synthA"
    epochs: int = 6
    batch_size: int = 32
    learning_rate: float = 0.02
    momentum: float = 0.9
    seed: int = 0
    init_strategy: str = "pretext-pretrain"
    train_size: int = 3000
    data_seed: int = 1
    pretext_dataset: str = "synthB"

    def __post_init__(self):
        if self.init_strategy not in INIT_STRATEGIES:
            raise ValidationError(f"init_strategy must be one of {INIT_STRATEGIES}")
        if self.epochs < 0 or self.batch_size < 1 or self.train_size < 1:
            raise ValidationError("epochs must be >= 0, batch_size and train_size >= 1")
        if not (math.isfinite(self.learning_rate) and math.isfinite(self.momentum)):
            raise ValidationError("learning_rate and momentum must be finite")

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValidationError(f"unknown TrainConfig keys: {unknown}")
        return cls(**data)

    @classmethod
    def from_json(cls, path: str) -> "TrainConfig":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_dict(json.load(f))

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()

    def replace(self, **changes) -> "TrainConfig":
        return replace(self, **changes)


def _as_list(corruption: Corruption) -> List[CorruptionSpec]:
    if corruption is None:
        return []
    if isinstance(corruption, CorruptionSpec):
        return [corruption]
    return list(corruption)


def corruption_tag(corruption: Corruption) -> Tuple[str, str]:
    specs = _as_list(corruption)
    if not specs:
        return "none", "0"
    if len(specs) == 1:
        return specs[0].kind, str(specs[0].severity)
    return "mixed:" + "+".join(s.kind for s in specs), ",".join(str(s.severity) for s in specs)


def augment(images: np.ndarray, corruption: Corruption, seed: int, epoch: int) -> np.ndarray:
    """Fresh seeded corruption draw for one epoch; a list assigns one kind per image."""
    specs = _as_list(corruption)
    if not specs:
        return images
    if len(specs) == 1:
        spec = specs[0]
        return corrupt(images, replace(spec, seed=derive_seed(seed, "augment", epoch)))
    pick = make_rng(seed, "augment-pick", epoch).integers(len(specs), size=images.shape[0])
    out = images.copy()
    for i, spec in enumerate(specs):
        rows = np.flatnonzero(pick == i)
        if rows.size:
            out[rows] = corrupt(images[rows], replace(spec, seed=derive_seed(seed, f"augment:{i}", epoch)))
    return out


def train_with_history(
    config: TrainConfig,
    init: Union[Checkpoint, int, None] = None,
    corruption: Corruption = None,
    spec: Optional[NetSpec] = None,
    data: Optional[LabeledSet] = None,
) -> Tuple[Checkpoint, List[float]]:
    if isinstance(init, Checkpoint):
        if config.epochs == 0:
            return init, []
        net = DeskNet.from_checkpoint(init)
        init_tag = f"ckpt:{init.content_digest[:16]}"
    else:
        seed = config.seed if init is None else int(init)
        net = DeskNet.initialize(spec or NetSpec(), seed)
        init_tag = f"seed:{seed}"
    if spec is not None and spec != net.spec:
        raise ValidationError("init checkpoint does not match the requested network spec")

    data = data if data is not None else resolve_dataset(config.dataset, "train", config.train_size, config.data_seed)
    if data.image_hw != net.spec.input_hw:
        raise ValidationError(f"dataset images are {data.image_hw}, network expects {net.spec.input_hw}")
    if int(data.labels.max()) >= net.spec.num_classes:
        raise ValidationError("dataset has more classes than the network outputs")

    kind, severity = corruption_tag(corruption)
    lr, mu = np.float32(config.learning_rate), np.float32(config.momentum)
    velocity = {n: np.zeros_like(p) for n, p in net.params.items()}
    history: List[float] = []
    n = len(data)
    for epoch in range(config.epochs):
        images = augment(data.images, corruption, config.seed, epoch)
        order = make_rng(config.seed, "shuffle", epoch).permutation(n)
        total = 0.0
        for b, start in enumerate(range(0, n, config.batch_size)):
            rows = order[start:start + config.batch_size]
            loss, grads = net.loss_and_grads(images[rows], data.labels[rows])
            if not math.isfinite(loss):
                raise DivergenceError(
                    f"non-finite loss at epoch {epoch} batch {b} (lr={config.learning_rate}, corruption={kind})"
                )
            for name, g in grads.items():
                v = velocity[name]
                v *= mu
                v += g
                net.params[name] -= lr * v
            total += loss * rows.size
        history.append(total / n)
        logger.info("epoch %d/%d loss %.4f (%s, corruption=%s)", epoch + 1, config.epochs, history[-1], config.dataset, kind)

    ckpt = net.to_checkpoint(
        dataset=config.dataset,
        config_hash=config.config_hash,
        seed=str(config.seed),
        corruption=kind,
        corruption_severity=severity,
        epochs=str(config.epochs),
        init=init_tag,
        init_strategy=config.init_strategy,
    )
    return ckpt, history


def train(
    config: TrainConfig,
    init: Union[Checkpoint, int, None] = None,
    corruption: Corruption = None,
    spec: Optional[NetSpec] = None,
    data: Optional[LabeledSet] = None,
) -> Checkpoint:
    return train_with_history(config, init, corruption, spec, data)[0]


def anchor_init(config: TrainConfig, spec: Optional[NetSpec] = None, data: Optional[LabeledSet] = None) -> Checkpoint:
    """Common starting point for the standard and robust models.

    pretext-pretrain: train from a fresh seed on the pretext dataset.
    std-as-init: the standard model itself, trained from a fresh seed.
    """
    if config.init_strategy == "pretext-pretrain":
        pretext = config.replace(dataset=config.pretext_dataset)
        logger.info("anchoring on a %s pretext model", config.pretext_dataset)
        return train(pretext, config.seed, spec=spec, data=data)
    logger.info("anchoring on the standard model")
    return train(config, config.seed, spec=spec, data=data)
