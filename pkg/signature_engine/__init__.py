from .delta import WeightDelta, delta
from .extract import DEFAULT_LAYERS_KEPT, extract_rws, layer_count_sweep
from .patch import PatchRecipe, patch, rescale_sweep
from .projection import matrix_residual, vector_residual

__all__ = [
    "DEFAULT_LAYERS_KEPT",
    "PatchRecipe",
    "WeightDelta",
    "delta",
    "extract_rws",
    "layer_count_sweep",
    "matrix_residual",
    "patch",
    "rescale_sweep",
    "vector_residual",
]
