"""
extract_step.py - signature extraction and quantization.

Families written under <outdir>/signatures/:
  shallow    dataset A, first `layers_kept` groups (the patches)
  full_a     dataset A, every group (norm profile, per-layer cosines)
  full_b     dataset B, every group (cross-dataset comparison)
  shallow_16bit / shallow_8bit   quantized copies of `shallow`
"""
import logging
from typing import Any, Dict

from checkpoint_store import read_checkpoint, read_signature
from pipeline_steps.common import config_of, layout_of, load_models, pipeline_step, require
from quantizer import quantize
from signature_engine import extract_rws

logger = logging.getLogger(__name__)

QUANT_FAMILIES = {16: "shallow_16bit", 8: "shallow_8bit"}


@pipeline_step
def extract_signatures_step(inp: Dict[str, Any]) -> Dict[str, Any]:
    """
    Input: {"init_model", "std_a", "std_b", "robust_a", "robust_b"}
    Output: {"success": true, "outputs": {"signatures": {family: {kind: path}}}}
    """
    config, layout = config_of(inp), layout_of(inp)
    init_path, std_a_path, std_b_path, robust_a, robust_b = require(
        inp, "init_model", "std_a", "std_b", "robust_a", "robust_b"
    )
    init = read_checkpoint(init_path)
    std_a, std_b = read_checkpoint(std_a_path), read_checkpoint(std_b_path)
    n_groups = len(std_a.layer_order)
    plan = (
        ("shallow", std_a, load_models(robust_a), config.layers_kept),
        ("full_a", std_a, load_models(robust_a), n_groups),
        ("full_b", std_b, load_models(robust_b), n_groups),
    )
    families: Dict[str, Dict[str, str]] = {}
    for family, std, robust, kept in plan:
        families[family] = {
            kind: layout.save_signature(family, extract_rws(std, init, robust[kind], config.mode, kept, kind))
            for kind in config.kinds
        }
        logger.info("extracted %d %s signatures (%d/%d groups)", len(config.kinds), family, kept, n_groups)
    return {"success": True, "outputs": {"signatures": families}, "total_signatures": 3 * len(config.kinds)}


@pipeline_step
def quantize_signatures_step(inp: Dict[str, Any]) -> Dict[str, Any]:
    """
    Input: {"signatures": {"shallow": {kind: path}}}
    Output: {"success": true, "outputs": {"signatures": {..., "shallow_16bit": {...}, "shallow_8bit": {...}}}}
    """
    config, layout = config_of(inp), layout_of(inp)
    (families,) = require(inp, "signatures")
    families = dict(families)
    for bits, family in QUANT_FAMILIES.items():
        families[family] = {
            kind: layout.save_signature(family, quantize(read_signature(families["shallow"][kind]), bits))
            for kind in config.kinds
        }
    return {"success": True, "outputs": {"signatures": families}}
