"""
train_step.py - anchor, standard and robust model training.

Step 1: anchor init (pretext pre-train, or the standard model itself)
Step 2: standard models on dataset A and dataset B, both from the anchor
Step 3: one robust model per corruption kind on each dataset, plus the
        mixed-corruption augmentation baseline on dataset A
"""
import logging
from typing import Any, Dict

from checkpoint_store import read_checkpoint
from desk_trainer import CorruptionSpec, anchor_init, train
from pipeline_steps.common import config_of, layout_of, pipeline_step, require, train_set

logger = logging.getLogger(__name__)


@pipeline_step
def pretext_pretrain_step(inp: Dict[str, Any]) -> Dict[str, Any]:
    """
    Input: {"config": ExperimentConfig, "outdir": "..."}
    Output: {"success": true, "outputs": {"init_model": "<outdir>/models/init.ckpt"}}
    """
    config, layout = config_of(inp), layout_of(inp)
    tc = config.train_config(config.dataset_a)
    if config.init_strategy == "pretext-pretrain":
        tc = tc.replace(epochs=config.pretext_epochs)
        data = train_set(config, config.pretext_dataset)
    else:
        data = train_set(config, config.dataset_a)
    init = anchor_init(tc, config.net_spec(), data)
    path = layout.save_model("init", init)
    logger.info("anchor (%s) written to %s", config.init_strategy, path)
    return {"success": True, "outputs": {"init_model": path}, "metrics": {"init_strategy": config.init_strategy}}


@pipeline_step
def train_standard_step(inp: Dict[str, Any]) -> Dict[str, Any]:
    """
    Input: {"init_model": path}
    Output: {"success": true, "outputs": {"std_a": path, "std_b": path}}
    """
    config, layout = config_of(inp), layout_of(inp)
    (init_path,) = require(inp, "init_model")
    init = read_checkpoint(init_path)
    outputs = {}
    for key, dataset in (("std_a", config.dataset_a), ("std_b", config.dataset_b)):
        if key == "std_a" and config.init_strategy == "std-as-init":
            std = init
        else:
            std = train(config.train_config(dataset), init, data=train_set(config, dataset))
        outputs[key] = layout.save_model(key, std)
    return {"success": True, "outputs": outputs}


@pipeline_step
def train_robust_step(inp: Dict[str, Any]) -> Dict[str, Any]:
    """
    Input: {"init_model": path}
    Output: {"success": true, "outputs": {"robust_a": {kind: path}, "robust_b": {...}, "augmented_a": path}}
    """
    config, layout = config_of(inp), layout_of(inp)
    (init_path,) = require(inp, "init_model")
    init = read_checkpoint(init_path)
    outputs: Dict[str, Any] = {}
    for key, dataset in (("robust_a", config.dataset_a), ("robust_b", config.dataset_b)):
        data = train_set(config, dataset)
        tc = config.train_config(dataset)
        paths = {}
        for kind in config.kinds:
            robust = train(tc, init, CorruptionSpec(kind, config.severity), data=data)
            paths[kind] = layout.save_model(f"{key}_{kind}", robust)
        outputs[key] = paths
        logger.info("trained %d robust models on %s", len(paths), dataset)

    if config.augmentation_baseline:
        specs = [CorruptionSpec(k, config.severity) for k in config.kinds]
        mixed = train(config.train_config(config.dataset_a), init, specs, data=train_set(config, config.dataset_a))
        outputs["augmented_a"] = layout.save_model("augmented_a", mixed)
    return {"success": True, "outputs": outputs, "total_models": sum(len(v) for v in outputs.values() if isinstance(v, dict))}
