# steps.py
from .analyze_step import analyze_step, transfer_step
from .evaluate_step import evaluate_patches_step
from .extract_step import extract_signatures_step, quantize_signatures_step
from .train_step import pretext_pretrain_step, train_robust_step, train_standard_step

# ============================================================================
# STEP REGISTRY
# ============================================================================
STEP_REGISTRY = {
    "pretext_pretrain": pretext_pretrain_step,
    "train_standard": train_standard_step,
    "train_robust": train_robust_step,
    "extract_signatures": extract_signatures_step,
    "quantize_signatures": quantize_signatures_step,
    "evaluate_patches": evaluate_patches_step,
    "analyze": analyze_step,
    "transfer": transfer_step,
}

REFERENCE_PLAN = tuple(STEP_REGISTRY)
