"""
checkpoint_store/checkpoint.py - in-memory checkpoints and signature files.
"""
import hashlib
import json
from dataclasses import dataclass, field, replace
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from errors import ArchitectureMismatchError, ValidationError
from tensor_core import FlatVector, dtype_code, make_tensor

SCALE_SUFFIX = "#scale"
SIGNATURE_KEYS = ("corruption", "mode", "layers_kept", "quant_bits", "source_fingerprint")
PROJECTION_MODES = ("vector", "global", "matrix")
QUANT_LEVELS = ("0", "8", "16")


def match_group(name: str, layer_order: Sequence[str]) -> Optional[str]:
    """Return the single group whose "<group>." prefix matches name.

    None when nothing matches; ValidationError when several do.
    """
    hits = [g for g in layer_order if name.startswith(g + ".")]
    if len(hits) > 1:
        raise ValidationError(f"tensor {name!r} matches several layer groups {hits}")
    return hits[0] if hits else None


def check_layer_order(layer_order: Sequence[str]) -> None:
    if not layer_order:
        raise ValidationError("layer_order is empty")
    if len(set(layer_order)) != len(layer_order):
        raise ValidationError(f"layer_order has duplicates: {list(layer_order)}")
    for g in layer_order:
        if not g or "," in g:
            raise ValidationError(f"invalid layer group name {g!r}")


@dataclass(frozen=True, eq=False)
class Checkpoint:
    """Ordered name -> tensor map plus string metadata and layer groups."""

    tensors: Dict[str, np.ndarray]
    metadata: Dict[str, str] = field(default_factory=dict)
    layer_order: Tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "layer_order", tuple(self.layer_order))
        check_layer_order(self.layer_order)
        tensors = {}
        for name, arr in self.tensors.items():
            if match_group(name, self.layer_order) is None:
                raise ValidationError(f"orphan tensor {name!r} matches no layer group")
            tensors[name] = make_tensor(arr)
        object.__setattr__(self, "tensors", tensors)
        meta = {}
        for key, value in self.metadata.items():
            if not isinstance(key, str) or not isinstance(value, str):
                raise ValidationError(f"metadata entries must be strings: {key!r}={value!r}")
            if key == "layer_order":
                continue
            meta[key] = value
        object.__setattr__(self, "metadata", meta)

    # ---------------------------------------------------------
    # Layer groups
    # ---------------------------------------------------------
    def group_names(self, group: str) -> List[str]:
        return [n for n in self.tensors if match_group(n, self.layer_order) == group]

    def group_tensors(self, group: str) -> Dict[str, np.ndarray]:
        return {n: self.tensors[n] for n in self.group_names(group)}

    def flatten_group(self, group: str) -> FlatVector:
        return FlatVector.flatten(self.tensors, self.group_names(group))

    def flatten(self, groups: Optional[Sequence[str]] = None) -> FlatVector:
        groups = self.layer_order if groups is None else groups
        return FlatVector.concat(self.flatten_group(g) for g in groups)

    # ---------------------------------------------------------
    # Identity
    # ---------------------------------------------------------
    @property
    def arch_fingerprint(self) -> str:
        desc = {
            "tensors": [[n, list(a.shape)] for n, a in self.tensors.items()],
            "layer_order": list(self.layer_order),
        }
        return hashlib.sha256(json.dumps(desc, separators=(",", ":")).encode()).hexdigest()

    @property
    def content_digest(self) -> str:
        from checkpoint_store.file_format import serialize_checkpoint

        return hashlib.sha256(serialize_checkpoint(self)).hexdigest()

    @property
    def num_scalars(self) -> int:
        return int(sum(a.size for a in self.tensors.values()))

    def first_difference(self, other: "Checkpoint") -> Optional[str]:
        """Describe the first structural difference, or None if shape-compatible."""
        if self.layer_order != other.layer_order:
            return f"layer_order {list(self.layer_order)} vs {list(other.layer_order)}"
        names_a, names_b = list(self.tensors), list(other.tensors)
        for i in range(max(len(names_a), len(names_b))):
            a = names_a[i] if i < len(names_a) else None
            b = names_b[i] if i < len(names_b) else None
            if a != b:
                return f"tensor #{i}: {a!r} vs {b!r}"
            ta, tb = self.tensors[a], other.tensors[b]
            if ta.shape != tb.shape:
                return f"tensor {a!r}: shape {list(ta.shape)} vs {list(tb.shape)}"
            if dtype_code(ta) != dtype_code(tb):
                return f"tensor {a!r}: dtype {dtype_code(ta)} vs {dtype_code(tb)}"
        return None

    def is_shape_compatible(self, other: "Checkpoint") -> bool:
        return self.first_difference(other) is None

    def require_compatible(self, other: "Checkpoint") -> None:
        diff = self.first_difference(other)
        if diff is not None:
            raise ArchitectureMismatchError(f"checkpoints are not shape-compatible: {diff}")

    def with_tensors(self, tensors: Mapping[str, np.ndarray], **metadata: str) -> "Checkpoint":
        meta = dict(self.metadata)
        meta.update(metadata)
        return replace(self, tensors=dict(tensors), metadata=meta)


def source_fingerprint(std: Checkpoint, init: Checkpoint) -> str:
    h = hashlib.sha256()
    h.update(std.content_digest.encode())
    h.update(init.content_digest.encode())
    return h.hexdigest()


# ============================================================================
# SIGNATURE FILES
# ============================================================================
@dataclass(frozen=True, eq=False)
class SignatureFile(Checkpoint):
    """A checkpoint restricted to kept layer groups, tagged with provenance."""

    def __post_init__(self):
        super().__post_init__()
        missing = [k for k in SIGNATURE_KEYS if k not in self.metadata]
        if missing:
            raise ValidationError(f"signature metadata missing keys: {missing}")
        if self.mode not in PROJECTION_MODES:
            raise ValidationError(f"unknown projection mode {self.mode!r}")
        if self.metadata["quant_bits"] not in QUANT_LEVELS:
            raise ValidationError(f"quant_bits must be one of {QUANT_LEVELS}")
        if not self.metadata["layers_kept"].isdigit() or self.layers_kept != len(self.layer_order):
            raise ValidationError(
                f"layers_kept={self.metadata['layers_kept']} but {len(self.layer_order)} groups present"
            )
        if self.quant_bits:
            for name, arr in self.tensors.items():
                if name.endswith(SCALE_SUFFIX) or arr.dtype.kind != "i":
                    continue
                if name + SCALE_SUFFIX not in self.tensors:
                    raise ValidationError(f"quantized tensor {name!r} has no {SCALE_SUFFIX} companion")

    @classmethod
    def from_checkpoint(cls, ckpt: Checkpoint) -> "SignatureFile":
        return cls(ckpt.tensors, ckpt.metadata, ckpt.layer_order)

    @property
    def corruption(self) -> str:
        return self.metadata["corruption"]

    @property
    def mode(self) -> str:
        return self.metadata["mode"]

    @property
    def layers_kept(self) -> int:
        return int(self.metadata["layers_kept"])

    @property
    def quant_bits(self) -> int:
        return int(self.metadata["quant_bits"])

    @property
    def source_fingerprint(self) -> str:
        return self.metadata["source_fingerprint"]

    @property
    def target_arch(self) -> Optional[str]:
        """Fingerprint of the full architecture the signature was cut from."""
        return self.metadata.get("arch_fingerprint")

    def payload_names(self, group: str) -> List[str]:
        return [n for n in self.group_names(group) if not n.endswith(SCALE_SUFFIX)]
