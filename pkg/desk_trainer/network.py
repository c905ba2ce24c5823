"""
desk_trainer/network.py - desk-scale networks with hand-written gradients.

convnet: [conv(3x3, valid) -> ReLU -> 2x2 maxpool] per conv group, then
dense groups with ReLU between them. mlp: dense groups only. Parameters are
"<group>.weight" / "<group>.bias"; dense weights are [out, in].
"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from checkpoint_store import Checkpoint
from desk_trainer.rng import make_rng
from errors import ArchitectureMismatchError, ValidationError

ARCHITECTURES = ("mlp", "convnet")
ACTIVATIONS = ("relu", "identity")


@dataclass(frozen=True)
class NetSpec:
    architecture: str = "convnet"
    input_hw: Tuple[int, int] = (28, 28)
    num_classes: int = 10
    conv_channels: Tuple[int, ...] = (8, 16)
    hidden: Tuple[int, ...] = (64,)
    activation: str = "relu"
    kernel: int = 3

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ValidationError(f"unknown architecture {self.architecture!r}")
        if self.activation not in ACTIVATIONS:
            raise ValidationError(f"unknown activation {self.activation!r}")
        object.__setattr__(self, "input_hw", tuple(int(v) for v in self.input_hw))
        object.__setattr__(self, "hidden", tuple(int(v) for v in self.hidden))
        channels = tuple(int(v) for v in self.conv_channels) if self.architecture == "convnet" else ()
        object.__setattr__(self, "conv_channels", channels)
        if len(self.layer_order) < 4:
            raise ValidationError(f"{self.architecture} needs at least 4 layer groups, has {len(self.layer_order)}")
        if min(self._flat_hw()) < 1:
            raise ValidationError(f"input {self.input_hw} too small for {len(channels)} conv stages")

    @classmethod
    def default(cls, architecture: str = "convnet", **overrides) -> "NetSpec":
        if architecture == "mlp":
            overrides.setdefault("hidden", (128, 64, 32))
        return cls(architecture=architecture, **overrides)

    @property
    def conv_groups(self) -> Tuple[str, ...]:
        return tuple(f"conv{i + 1}" for i in range(len(self.conv_channels)))

    @property
    def dense_groups(self) -> Tuple[str, ...]:
        return tuple(f"fc{i + 1}" for i in range(len(self.hidden) + 1))

    @property
    def layer_order(self) -> Tuple[str, ...]:
        return self.conv_groups + self.dense_groups

    def _flat_hw(self) -> Tuple[int, int]:
        h, w = self.input_hw
        for _ in self.conv_channels:
            h, w = (h - self.kernel + 1) // 2, (w - self.kernel + 1) // 2
        return h, w

    def param_shapes(self) -> Dict[str, Tuple[int, ...]]:
        shapes: Dict[str, Tuple[int, ...]] = {}
        c_in = 1
        for g, c_out in zip(self.conv_groups, self.conv_channels):
            shapes[f"{g}.weight"] = (c_out, c_in, self.kernel, self.kernel)
            shapes[f"{g}.bias"] = (c_out,)
            c_in = c_out
        h, w = self._flat_hw()
        fan_in = c_in * h * w if self.conv_channels else self.input_hw[0] * self.input_hw[1]
        for g, width in zip(self.dense_groups, self.hidden + (self.num_classes,)):
            shapes[f"{g}.weight"] = (width, fan_in)
            shapes[f"{g}.bias"] = (width,)
            fan_in = width
        return shapes

    def metadata(self) -> Dict[str, str]:
        return {
            "architecture": self.architecture,
            "input_hw": f"{self.input_hw[0]}x{self.input_hw[1]}",
            "num_classes": str(self.num_classes),
            "activation": self.activation,
        }

    @classmethod
    def from_checkpoint(cls, ckpt: Checkpoint) -> "NetSpec":
        meta = ckpt.metadata
        if "architecture" not in meta or "input_hw" not in meta:
            raise ValidationError("checkpoint carries no desk architecture metadata")
        h, w = (int(v) for v in meta["input_hw"].split("x"))
        conv = [g for g in ckpt.layer_order if g.startswith("conv")]
        dense = [g for g in ckpt.layer_order if g.startswith("fc")]
        if not dense:
            raise ArchitectureMismatchError("checkpoint has no dense layer groups")
        spec = cls(
            architecture=meta["architecture"],
            input_hw=(h, w),
            num_classes=int(meta.get("num_classes", ckpt.tensors[f"{dense[-1]}.weight"].shape[0])),
            conv_channels=tuple(ckpt.tensors[f"{g}.weight"].shape[0] for g in conv),
            hidden=tuple(ckpt.tensors[f"{g}.weight"].shape[0] for g in dense[:-1]),
            activation=meta.get("activation", "relu"),
            kernel=ckpt.tensors[f"{conv[0]}.weight"].shape[2] if conv else 3,
        )
        found = {n: tuple(a.shape) for n, a in ckpt.tensors.items()}
        if found != spec.param_shapes() or spec.layer_order != ckpt.layer_order:
            raise ArchitectureMismatchError(f"checkpoint tensors do not form a {spec.architecture} network")
        return spec


# ============================================================================
# LAYER KERNELS
# ============================================================================
def _conv_forward(a, weight, bias):
    n, c, h, w = a.shape
    o, _, k, _ = weight.shape
    ho, wo = h - k + 1, w - k + 1
    cols = sliding_window_view(a, (k, k), axis=(2, 3)).transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, c * k * k)
    out = cols @ weight.reshape(o, -1).T + bias
    return out.reshape(n, ho, wo, o).transpose(0, 3, 1, 2), cols


def _conv_backward(dout, cols, a_shape, weight, need_input_grad):
    n, c, h, w = a_shape
    o, _, k, _ = weight.shape
    ho, wo = dout.shape[2:]
    d = dout.transpose(0, 2, 3, 1).reshape(-1, o)
    dw = (d.T @ cols).reshape(weight.shape)
    db = d.sum(axis=0)
    if not need_input_grad:
        return None, dw, db
    dcols = (d @ weight.reshape(o, -1)).reshape(n, ho, wo, c, k, k)
    da = np.zeros(a_shape, dtype=dout.dtype)
    for i in range(k):
        for j in range(k):
            da[:, :, i:i + ho, j:j + wo] += dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
    return da, dw, db


def _pool_forward(a):
    n, c, h, w = a.shape
    hp, wp = h // 2, w // 2
    win = a[:, :, :2 * hp, :2 * wp].reshape(n, c, hp, 2, wp, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, hp, wp, 4)
    idx = win.argmax(axis=-1)
    return np.take_along_axis(win, idx[..., None], axis=-1)[..., 0], idx


def _pool_backward(dout, idx, a_shape):
    n, c, h, w = a_shape
    hp, wp = idx.shape[2:]
    dwin = np.zeros((n, c, hp, wp, 4), dtype=dout.dtype)
    np.put_along_axis(dwin, idx[..., None], dout[..., None], axis=-1)
    da = np.zeros(a_shape, dtype=dout.dtype)
    da[:, :, :2 * hp, :2 * wp] = dwin.reshape(n, c, hp, wp, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, 2 * hp, 2 * wp)
    return da


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray) -> Tuple[float, np.ndarray]:
    n = labels.size
    z = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1))
    loss = float(np.mean(log_norm - z[np.arange(n), labels]))
    grad = softmax(logits)
    grad[np.arange(n), labels] -= 1
    return loss, grad / n


# ============================================================================
# NETWORK
# ============================================================================
@dataclass
class _Trace:
    logits: np.ndarray
    cache: List[tuple] = field(default_factory=list)
    pattern: List[np.ndarray] = field(default_factory=list)
    features: Dict[str, np.ndarray] = field(default_factory=dict)


class DeskNet:
    def __init__(self, spec: NetSpec, params: Dict[str, np.ndarray]):
        expected = spec.param_shapes()
        if {n: tuple(p.shape) for n, p in params.items()} != expected:
            raise ArchitectureMismatchError("parameter shapes do not match the network spec")
        self.spec = spec
        self.params = {n: params[n] for n in expected}

    @classmethod
    def initialize(cls, spec: NetSpec, seed: int, dtype=np.float32) -> "DeskNet":
        """He-normal weights (unit-gain for identity activation), zero biases."""
        params = {}
        for i, (name, shape) in enumerate(spec.param_shapes().items()):
            if name.endswith(".bias"):
                params[name] = np.zeros(shape, dtype=dtype)
                continue
            fan_in = int(np.prod(shape[1:]))
            last = name.startswith(spec.dense_groups[-1] + ".")
            gain = 2.0 if spec.activation == "relu" and not last else 1.0
            draw = make_rng(seed, "init", i).standard_normal(shape)
            params[name] = (draw * np.sqrt(gain / fan_in)).astype(dtype)
        return cls(spec, params)

    @classmethod
    def from_checkpoint(cls, ckpt: Checkpoint, dtype=np.float32) -> "DeskNet":
        spec = NetSpec.from_checkpoint(ckpt)
        return cls(spec, {n: np.array(a, dtype=dtype) for n, a in ckpt.tensors.items()})

    def to_checkpoint(self, **metadata: str) -> Checkpoint:
        meta = self.spec.metadata()
        meta.update(metadata)
        tensors = {n: p.astype(np.float32) for n, p in self.params.items()}
        return Checkpoint(tensors, meta, self.spec.layer_order)

    def _prepare(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        if x.ndim == 2:
            x = x[None]
        if tuple(x.shape[1:]) != self.spec.input_hw:
            raise ValidationError(f"input shape {list(x.shape[1:])} does not match network input {list(self.spec.input_hw)}")
        return x.astype(next(iter(self.params.values())).dtype, copy=False)

    def _forward(self, x: np.ndarray, keep_cache: bool = False, capture: Sequence[str] = ()) -> _Trace:
        x = self._prepare(x)
        n = x.shape[0]
        relu = self.spec.activation == "relu"
        trace = _Trace(logits=None)
        a = x.reshape(n, 1, *self.spec.input_hw)
        for g in self.spec.conv_groups:
            z, cols = _conv_forward(a, self.params[f"{g}.weight"], self.params[f"{g}.bias"])
            mask = z > 0 if relu else None
            r = np.maximum(z, 0) if relu else z
            if g in capture:
                trace.features[g] = r
            pooled, idx = _pool_forward(r)
            if keep_cache:
                trace.cache.append(("conv", g, a.shape, cols, mask, r.shape, idx, pooled.shape))
            trace.pattern.extend(p for p in (mask, idx) if p is not None)
            a = pooled
        a = a.reshape(n, -1)
        last = self.spec.dense_groups[-1]
        for g in self.spec.dense_groups:
            z = a @ self.params[f"{g}.weight"].T + self.params[f"{g}.bias"]
            mask = z > 0 if relu and g != last else None
            if keep_cache:
                trace.cache.append(("dense", g, a, mask))
            if mask is not None:
                trace.pattern.append(mask)
            a = np.maximum(z, 0) if mask is not None else z
        trace.logits = a
        return trace

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Class probabilities, one row per image."""
        return softmax(self._forward(x).logits)

    def feature_maps(self, x: np.ndarray, groups: Sequence[str]) -> Dict[str, np.ndarray]:
        """Post-activation (pre-pool) maps of the requested conv groups."""
        unknown = [g for g in groups if g not in self.spec.conv_groups]
        if unknown:
            raise ValidationError(f"not convolutional groups: {unknown}")
        return self._forward(x, capture=tuple(groups)).features

    def predict(self, x: np.ndarray, batch_size: int = 500) -> np.ndarray:
        x = self._prepare(x)
        out = [self._forward(x[i:i + batch_size]).logits.argmax(axis=1) for i in range(0, x.shape[0], batch_size)]
        return np.concatenate(out)

    def loss(self, x: np.ndarray, y: np.ndarray) -> float:
        return softmax_cross_entropy(self._forward(x).logits, y)[0]

    def loss_and_pattern(self, x: np.ndarray, y: np.ndarray) -> Tuple[float, List[np.ndarray]]:
        trace = self._forward(x)
        return softmax_cross_entropy(trace.logits, y)[0], trace.pattern

    def loss_and_grads(self, x: np.ndarray, y: np.ndarray) -> Tuple[float, Dict[str, np.ndarray]]:
        trace = self._forward(x, keep_cache=True)
        loss, d = softmax_cross_entropy(trace.logits, y)
        grads: Dict[str, np.ndarray] = {}
        first = self.spec.layer_order[0]
        for entry in reversed(trace.cache):
            if entry[0] == "dense":
                _, g, a_in, mask = entry
                if mask is not None:
                    d = d * mask
                weight = self.params[f"{g}.weight"]
                grads[f"{g}.weight"] = d.T @ a_in
                grads[f"{g}.bias"] = d.sum(axis=0)
                if g != first:
                    d = d @ weight
            else:
                _, g, a_shape, cols, mask, r_shape, idx, pooled_shape = entry
                d = _pool_backward(d.reshape(pooled_shape), idx, r_shape)
                if mask is not None:
                    d = d * mask
                d, grads[f"{g}.weight"], grads[f"{g}.bias"] = _conv_backward(
                    d, cols, a_shape, self.params[f"{g}.weight"], need_input_grad=g != first
                )
        return loss, {n: grads[n] for n in self.params}
