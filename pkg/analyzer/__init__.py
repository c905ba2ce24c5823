from .feature_maps import feature_map_dump, normalize_map
from .norms import PROFILE_HEADER, layer_norm_profile
from .pgm import read_pgm, write_pgm
from .similarity import cosine_matrix, cross_dataset_report, diversity, per_layer_cosine, rws_relationship_matrix
from .tables import ReportTable, SimilarityReport, format_cell
from .transfer import transfer_gain_matrix

__all__ = [
    "PROFILE_HEADER",
    "ReportTable",
    "SimilarityReport",
    "cosine_matrix",
    "cross_dataset_report",
    "diversity",
    "feature_map_dump",
    "format_cell",
    "layer_norm_profile",
    "normalize_map",
    "per_layer_cosine",
    "read_pgm",
    "rws_relationship_matrix",
    "transfer_gain_matrix",
    "write_pgm",
]
