import numpy as np
import pytest

from checkpoint_store import Checkpoint, write_checkpoint
from desk_trainer import CorruptionSpec, NetSpec, TrainConfig, generate_dataset, train
from signature_engine import extract_rws

GROUPS = ("g1", "g2", "g3", "g4")


def toy_checkpoint(seed: int, scale: float = 1.0, groups=GROUPS, **metadata) -> Checkpoint:
    """Four groups, each a [3,4] weight and a [3] bias."""
    rng = np.random.default_rng(seed)
    tensors = {}
    for g in groups:
        tensors[f"{g}.weight"] = (scale * rng.standard_normal((3, 4))).astype(np.float32)
        tensors[f"{g}.bias"] = (scale * rng.standard_normal(3)).astype(np.float32)
    return Checkpoint(tensors, dict(metadata), groups)


def shifted(base: Checkpoint, seed: int, scale: float = 0.1, **metadata) -> Checkpoint:
    rng = np.random.default_rng(seed)
    tensors = {n: (a + scale * rng.standard_normal(a.shape)).astype(np.float32) for n, a in base.tensors.items()}
    return base.with_tensors(tensors, **metadata)


@pytest.fixture
def toy_trio():
    """(std, init, robust) sharing one architecture."""
    init = toy_checkpoint(0)
    std = shifted(init, 1, 0.5)
    robust = shifted(init, 2, 0.5, corruption="gaussian_noise")
    return std, init, robust


@pytest.fixture
def toy_signatures(toy_trio):
    std, init, _ = toy_trio
    kinds = ("gaussian_noise", "impulse_noise", "contrast")
    return [
        extract_rws(std, init, shifted(init, 10 + i, 0.5), "vector", 2, kind)
        for i, kind in enumerate(kinds)
    ]


@pytest.fixture
def ckpt_file(tmp_path, toy_trio):
    path = tmp_path / "std.ckpt"
    write_checkpoint(toy_trio[0], str(path))
    return path


# ---------------------------------------------------------
# Tiny desk models
# ---------------------------------------------------------
TINY_HW = (12, 12)


@pytest.fixture(scope="session")
def tiny_spec():
    return NetSpec.default("mlp", input_hw=TINY_HW, hidden=(24, 16, 12))


@pytest.fixture(scope="session")
def tiny_data():
    return generate_dataset("synthA", "train", 200, 1, size=TINY_HW[0])


@pytest.fixture(scope="session")
def tiny_test():
    return generate_dataset("synthA", "test", 100, 2, size=TINY_HW[0])


@pytest.fixture(scope="session")
def tiny_config():
    return TrainConfig(epochs=2, batch_size=16, learning_rate=0.05, train_size=200)


@pytest.fixture(scope="session")
def tiny_models(tiny_spec, tiny_data, tiny_config):
    """init, std and a gaussian-noise robust model for the tiny mlp."""
    init = train(tiny_config.replace(epochs=1), 7, spec=tiny_spec, data=tiny_data)
    std = train(tiny_config, init, data=tiny_data)
    robust = train(tiny_config, init, CorruptionSpec("gaussian_noise", 5), data=tiny_data)
    return init, std, robust
