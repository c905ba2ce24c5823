"""
experiments/config.py - knobs for the reference experiment.
"""
import json
from dataclasses import asdict, dataclass, fields, replace
from typing import Tuple

from desk_trainer import INIT_STRATEGIES, KINDS, NetSpec, TrainConfig
from errors import ValidationError


@dataclass(frozen=True)
class ExperimentConfig:
    dataset_a: str = "synthA"
    dataset_b: str = "synthB"
    pretext_dataset: str = "synthB"
    architecture: str = "convnet"
    conv_channels: Tuple[int, ...] = (8, 16)
    conv_hidden: Tuple[int, ...] = (16,)
    init_strategy: str = "pretext-pretrain"
    kinds: Tuple[str, ...] = KINDS
    severity: int = 5
    sweep_severities: Tuple[int, ...] = (3, 5)
    train_size: int = 2000
    test_size: int = 1000
    epochs: int = 4
    pretext_epochs: int = 4
    batch_size: int = 32
    learning_rate: float = 0.02
    momentum: float = 0.9
    seed: int = 0
    data_seed: int = 1
    test_seed: int = 2
    mode: str = "vector"
    layers_kept: int = 2
    alphas: Tuple[float, ...] = (0.0, 0.3, 0.6, 0.9, 1.0)
    composition_pair: Tuple[str, str] = ("gaussian_noise", "contrast")
    composition_alphas: Tuple[float, ...] = (0.0, 0.5, 1.0)
    augmentation_baseline: bool = True

    def __post_init__(self):
        for name in (
            "conv_channels", "conv_hidden", "kinds", "sweep_severities", "alphas", "composition_pair", "composition_alphas",
        ):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.init_strategy not in INIT_STRATEGIES:
            raise ValidationError(f"init_strategy must be one of {INIT_STRATEGIES}")
        unknown = [k for k in self.kinds if k not in KINDS]
        if unknown:
            raise ValidationError(f"unknown corruption kinds {unknown}")
        if not set(self.composition_pair) <= set(self.kinds):
            raise ValidationError(f"composition_pair {self.composition_pair} must be among the trained kinds")
        if len(self.kinds) < 2:
            raise ValidationError("the experiment needs at least two corruption kinds")
        if len(self.composition_pair) != 2:
            raise ValidationError("composition_pair names exactly two kinds")
        if not 1 <= self.layers_kept <= len(self.net_spec().layer_order):
            raise ValidationError(f"layers_kept={self.layers_kept} outside the network's layer groups")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValidationError(f"unknown ExperimentConfig keys: {unknown}")
        return cls(**data)

    @classmethod
    def from_json(cls, path: str) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_dict(json.load(f))

    def to_dict(self) -> dict:
        return asdict(self)

    def replace(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)

    def net_spec(self) -> NetSpec:
        """The mlp keeps its stock widths; conv_channels and conv_hidden shape the convnet."""
        if self.architecture == "convnet":
            return NetSpec.default("convnet", conv_channels=self.conv_channels, hidden=self.conv_hidden)
        return NetSpec.default(self.architecture)

    def train_config(self, dataset: str) -> TrainConfig:
        return TrainConfig(
            dataset=dataset,
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            momentum=self.momentum,
            seed=self.seed,
            init_strategy=self.init_strategy,
            train_size=self.train_size,
            data_seed=self.data_seed,
            pretext_dataset=self.pretext_dataset,
        )
