from .checkpoint import (
    PROJECTION_MODES,
    SCALE_SUFFIX,
    Checkpoint,
    SignatureFile,
    match_group,
    source_fingerprint,
)
from .file_format import (
    parse_checkpoint,
    read_checkpoint,
    read_signature,
    serialize_checkpoint,
    storage_bytes,
    write_checkpoint,
)

__all__ = [
    "PROJECTION_MODES",
    "SCALE_SUFFIX",
    "Checkpoint",
    "SignatureFile",
    "match_group",
    "parse_checkpoint",
    "read_checkpoint",
    "read_signature",
    "serialize_checkpoint",
    "source_fingerprint",
    "storage_bytes",
    "write_checkpoint",
]
