"""Minimal differentiable network engine.

Supports a fixed layer set (Dense, Conv2D, ReLU, BatchNorm, GlobalAvgPool,
Flatten) over 64-bit floats, with analytic backprop and a stable flat
parameter layout: a model's parameters live in one 1-D array whose index ->
(layer, role, position) mapping is a pure function of the architecture, so
optimizer states, gradient vectors, and freeze masks can all share indices.

Gradient vectors are plain 1-D float64 ndarrays aligned with
``ModelState.params`` (same length, same layout).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from typing import Union

import numpy as np

__all__ = [
    "Tensor",
    "Dense",
    "Conv2D",
    "ReLU",
    "BatchNorm",
    "GlobalAvgPool",
    "Flatten",
    "ArchSpec",
    "LayoutRecord",
    "ModelState",
    "param_layout",
    "init_model",
    "forward",
    "loss_and_grad",
    "clone_with_params",
    "save_model",
    "load_model",
    "arch_to_json",
    "arch_from_json",
]

MODEL_MAGIC = b"UNFG"
MODEL_FORMAT_VERSION = 1


class Tensor:
    """Dense array of float64 values with an explicit shape.

    Values are stored flat in row-major order; ``array`` exposes the shaped
    view. Construction rejects non-finite entries.
    """

    __slots__ = ("shape", "values")

    def __init__(self, shape: tuple[int, ...], values: np.ndarray):
        shape = tuple(int(d) for d in shape)
        if any(d <= 0 for d in shape):
            raise ValueError(f"tensor dimensions must be positive, got {shape}")
        values = np.ascontiguousarray(values, dtype=np.float64).ravel()
        if values.size != int(np.prod(shape)):
            raise ValueError(
                f"shape {shape} needs {int(np.prod(shape))} values, got {values.size}"
            )
        if not np.isfinite(values).all():
            raise ValueError("tensor contains non-finite values")
        self.shape = shape
        self.values = values

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "Tensor":
        arr = np.asarray(arr, dtype=np.float64)
        return cls(arr.shape, arr.ravel())

    @property
    def array(self) -> np.ndarray:
        return self.values.reshape(self.shape)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape})"


# --------------------------------------------------------------------------
# Architecture description
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Dense:
    in_dim: int
    out_dim: int


@dataclass(frozen=True)
class Conv2D:
    in_ch: int
    out_ch: int
    kernel: int
    stride: int = 1


@dataclass(frozen=True)
class ReLU:
    pass


@dataclass(frozen=True)
class BatchNorm:
    num_features: int
    momentum: float = 0.1
    epsilon: float = 1e-5


@dataclass(frozen=True)
class GlobalAvgPool:
    pass


@dataclass(frozen=True)
class Flatten:
    pass


Layer = Union[Dense, Conv2D, ReLU, BatchNorm, GlobalAvgPool, Flatten]


@dataclass(frozen=True)
class ArchSpec:
    """Ordered layer stack plus the input shape it consumes.

    ``input_shape`` is (C, H, W) for image inputs or (features,) for flat
    inputs; ``output_dim`` is the number of classes (single-label) or labels
    (multi-label) the final layer must emit.
    """

    input_shape: tuple[int, ...]
    layers: tuple[Layer, ...]
    output_dim: int

    def __post_init__(self):
        object.__setattr__(self, "input_shape", tuple(int(d) for d in self.input_shape))
        object.__setattr__(self, "layers", tuple(self.layers))

    def validate(self) -> list[tuple[int, ...]]:
        """Shape-check every layer transition; returns per-layer output shapes."""
        if self.output_dim < 1:
            raise ValueError(f"output_dim must be >= 1, got {self.output_dim}")
        if len(self.input_shape) not in (1, 3) or any(d <= 0 for d in self.input_shape):
            raise ValueError(f"input_shape must be (features,) or (C, H, W), got {self.input_shape}")
        shapes = []
        shape = self.input_shape
        for i, layer in enumerate(self.layers):
            shape = _layer_output_shape(layer, shape, i)
            shapes.append(shape)
        if shape != (self.output_dim,):
            raise ValueError(
                f"network emits shape {shape} but output_dim is {self.output_dim}"
            )
        return shapes


def _layer_output_shape(layer: Layer, shape: tuple[int, ...], i: int) -> tuple[int, ...]:
    if isinstance(layer, Dense):
        if shape != (layer.in_dim,):
            raise ValueError(f"layer {i} Dense expects ({layer.in_dim},), got {shape}")
        return (layer.out_dim,)
    if isinstance(layer, Conv2D):
        if len(shape) != 3 or shape[0] != layer.in_ch:
            raise ValueError(f"layer {i} Conv2D expects (={layer.in_ch}, H, W), got {shape}")
        if layer.kernel < 1 or layer.stride < 1:
            raise ValueError(f"layer {i} Conv2D kernel/stride must be >= 1")
        c, h, w = shape
        if h < layer.kernel or w < layer.kernel:
            raise ValueError(f"layer {i} Conv2D kernel {layer.kernel} exceeds input {h}x{w}")
        h_out = (h - layer.kernel) // layer.stride + 1
        w_out = (w - layer.kernel) // layer.stride + 1
        return (layer.out_ch, h_out, w_out)
    if isinstance(layer, ReLU):
        return shape
    if isinstance(layer, BatchNorm):
        if shape[0] != layer.num_features:
            raise ValueError(
                f"layer {i} BatchNorm({layer.num_features}) mismatches feature dim {shape[0]}"
            )
        return shape
    if isinstance(layer, GlobalAvgPool):
        if len(shape) != 3:
            raise ValueError(f"layer {i} GlobalAvgPool expects (C, H, W), got {shape}")
        return (shape[0],)
    if isinstance(layer, Flatten):
        return (int(np.prod(shape)),)
    raise TypeError(f"unknown layer type {type(layer).__name__}")


_LAYER_TAGS = {
    Dense: "dense",
    Conv2D: "conv2d",
    ReLU: "relu",
    BatchNorm: "batchnorm",
    GlobalAvgPool: "global_avg_pool",
    Flatten: "flatten",
}


def arch_to_json(arch: ArchSpec) -> str:
    """Canonical JSON encoding (sorted keys, no whitespace); stable across runs."""
    layers = []
    for layer in arch.layers:
        entry = {"type": _LAYER_TAGS[type(layer)]}
        for name in getattr(layer, "__dataclass_fields__", {}):
            entry[name] = getattr(layer, name)
        layers.append(entry)
    doc = {
        "input_shape": list(arch.input_shape),
        "layers": layers,
        "output_dim": arch.output_dim,
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def arch_from_json(text: str) -> ArchSpec:
    doc = json.loads(text)
    by_tag = {tag: cls for cls, tag in _LAYER_TAGS.items()}
    layers = []
    for entry in doc["layers"]:
        cls = by_tag.get(entry.get("type"))
        if cls is None:
            raise ValueError(f"unknown layer type {entry.get('type')!r}")
        kwargs = {k: v for k, v in entry.items() if k != "type"}
        layers.append(cls(**kwargs))
    arch = ArchSpec(
        input_shape=tuple(doc["input_shape"]),
        layers=tuple(layers),
        output_dim=int(doc["output_dim"]),
    )
    arch.validate()
    return arch


# --------------------------------------------------------------------------
# Parameter layout and model state
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LayoutRecord:
    layer_index: int
    role: str  # weight | bias | scale | shift
    offset: int
    length: int


def param_layout(arch: ArchSpec) -> tuple[LayoutRecord, ...]:
    """Deterministic flat layout: layers in order, weight before bias,
    scale before shift; offsets are cumulative and non-overlapping."""
    records = []
    offset = 0

    def add(layer_index, role, length):
        nonlocal offset
        records.append(LayoutRecord(layer_index, role, offset, length))
        offset += length

    for i, layer in enumerate(arch.layers):
        if isinstance(layer, Dense):
            add(i, "weight", layer.in_dim * layer.out_dim)
            add(i, "bias", layer.out_dim)
        elif isinstance(layer, Conv2D):
            add(i, "weight", layer.out_ch * layer.in_ch * layer.kernel * layer.kernel)
            add(i, "bias", layer.out_ch)
        elif isinstance(layer, BatchNorm):
            add(i, "scale", layer.num_features)
            add(i, "shift", layer.num_features)
    return tuple(records)


@dataclass
class ModelState:
    """Architecture plus one flat float64 parameter vector.

    BatchNorm running statistics ride along per BatchNorm layer but are not
    parameters: they are excluded from ``params``, gradient vectors, and
    freeze masks. A ModelState is exclusively owned by whoever trains it;
    train-mode forward updates the running statistics in place.
    """

    arch: ArchSpec
    params: np.ndarray
    layout: tuple[LayoutRecord, ...]
    batchnorm_stats: dict[int, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)

    @property
    def num_params(self) -> int:
        return self.params.size

    def slice(self, layer_index: int, role: str) -> np.ndarray:
        for rec in self.layout:
            if rec.layer_index == layer_index and rec.role == role:
                return self.params[rec.offset : rec.offset + rec.length]
        raise KeyError(f"no parameter ({layer_index}, {role}) in layout")


def _kaiming_bound(fan_in: int) -> float:
    # He-uniform for ReLU nets: U(-sqrt(6/fan_in), +sqrt(6/fan_in)).
    return float(np.sqrt(6.0 / fan_in))


def init_model(arch: ArchSpec, seed: int) -> ModelState:
    """Deterministically initialize a model: Kaiming-uniform weights, zero
    biases, identity BatchNorm (scale 1, shift 0, running mean 0 / var 1)."""
    arch.validate()
    layout = param_layout(arch)
    total = sum(r.length for r in layout)
    params = np.zeros(total, dtype=np.float64)
    rng = np.random.default_rng(seed)
    for rec in layout:
        layer = arch.layers[rec.layer_index]
        view = params[rec.offset : rec.offset + rec.length]
        if rec.role == "weight":
            if isinstance(layer, Dense):
                bound = _kaiming_bound(layer.in_dim)
            else:
                bound = _kaiming_bound(layer.in_ch * layer.kernel * layer.kernel)
            view[:] = rng.uniform(-bound, bound, size=rec.length)
        elif rec.role == "scale":
            view[:] = 1.0
        # bias and shift stay zero
    stats = {
        i: (np.zeros(l.num_features), np.ones(l.num_features))
        for i, l in enumerate(arch.layers)
        if isinstance(l, BatchNorm)
    }
    return ModelState(arch=arch, params=params, layout=layout, batchnorm_stats=stats)


def clone_with_params(model: ModelState, new_params: np.ndarray) -> ModelState:
    """Same architecture and layout, replaced parameters, copied BN stats."""
    new_params = np.asarray(new_params, dtype=np.float64).ravel()
    if new_params.size != model.params.size:
        raise ValueError(
            f"expected {model.params.size} parameters, got {new_params.size}"
        )
    stats = {i: (m.copy(), v.copy()) for i, (m, v) in model.batchnorm_stats.items()}
    return ModelState(
        arch=model.arch,
        params=new_params.copy(),
        layout=model.layout,
        batchnorm_stats=stats,
    )


def clone_model(model: ModelState) -> ModelState:
    return clone_with_params(model, model.params)


# --------------------------------------------------------------------------
# Forward / backward
# --------------------------------------------------------------------------

def _check_finite(arr: np.ndarray, where: str):
    if not np.isfinite(arr).all():
        raise FloatingPointError(f"non-finite values after {where}")


def _reshape_weight(layer: Layer, flat: np.ndarray) -> np.ndarray:
    if isinstance(layer, Dense):
        return flat.reshape(layer.in_dim, layer.out_dim)
    if isinstance(layer, Conv2D):
        return flat.reshape(layer.out_ch, layer.in_ch, layer.kernel, layer.kernel)
    raise TypeError(f"{type(layer).__name__} has no weight")


def _forward_raw(
    model: ModelState,
    x: np.ndarray,
    mode: str,
    cache: list | None = None,
    update_stats: bool = True,
) -> np.ndarray:
    """Run the stack on a (batch, *input_shape) array; returns logits.

    ``cache`` collects per-layer context for the backward pass. In train mode
    BatchNorm normalizes with batch statistics and (if ``update_stats``)
    smooths the model's running statistics in place; eval mode reads running
    statistics only and never mutates the model.
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    x = np.asarray(x, dtype=np.float64)
    expected = model.arch.input_shape
    if x.ndim != len(expected) + 1 or x.shape[1:] != expected:
        raise ValueError(f"batch shape {x.shape} does not match input {expected}")
    _check_finite(x, "input")

    for i, layer in enumerate(model.arch.layers):
        if isinstance(layer, Dense):
            w = _reshape_weight(layer, model.slice(i, "weight"))
            b = model.slice(i, "bias")
            out = x @ w + b
            if cache is not None:
                cache.append(("dense", x, w))
        elif isinstance(layer, Conv2D):
            out = _conv2d_forward(x, layer, model, i, cache)
        elif isinstance(layer, ReLU):
            out = np.maximum(x, 0.0)
            if cache is not None:
                cache.append(("relu", x > 0))
        elif isinstance(layer, BatchNorm):
            out = _batchnorm_forward(x, layer, model, i, mode, cache, update_stats)
        elif isinstance(layer, GlobalAvgPool):
            out = x.mean(axis=(2, 3))
            if cache is not None:
                cache.append(("gap", x.shape))
        elif isinstance(layer, Flatten):
            out = x.reshape(x.shape[0], -1)
            if cache is not None:
                cache.append(("flatten", x.shape))
        else:
            raise TypeError(f"unknown layer {type(layer).__name__}")
        _check_finite(out, f"layer {i} ({type(layer).__name__})")
        x = out
    return x


def _im2col(x: np.ndarray, k: int, s: int, h_out: int, w_out: int) -> np.ndarray:
    """Patch matrix (B*H_out*W_out, C*k*k) for direct valid convolution."""
    windows = np.lib.stride_tricks.sliding_window_view(x, (k, k), axis=(2, 3))
    windows = windows[:, :, ::s, ::s]  # (B, C, H_out, W_out, k, k)
    cols = windows.transpose(0, 2, 3, 1, 4, 5)
    return cols.reshape(x.shape[0] * h_out * w_out, -1)


def _conv2d_forward(x, layer: Conv2D, model, i, cache):
    # Direct (valid, strided) convolution as one patch-matrix product.
    w = _reshape_weight(layer, model.slice(i, "weight"))
    b = model.slice(i, "bias")
    s, k = layer.stride, layer.kernel
    bsz, _, h, wd = x.shape
    h_out = (h - k) // s + 1
    w_out = (wd - k) // s + 1
    cols = _im2col(x, k, s, h_out, w_out)
    w2 = w.reshape(layer.out_ch, -1)
    out = (cols @ w2.T + b).reshape(bsz, h_out, w_out, layer.out_ch)
    out = out.transpose(0, 3, 1, 2)
    if cache is not None:
        cache.append(("conv2d", x.shape, cols, w, (s, k, h_out, w_out)))
    return out


def _bn_axes(x: np.ndarray) -> tuple[int, ...]:
    return (0,) if x.ndim == 2 else (0, 2, 3)


def _bn_expand(v: np.ndarray, ndim: int) -> np.ndarray:
    return v if ndim == 2 else v[:, None, None]


def _batchnorm_forward(x, layer: BatchNorm, model, i, mode, cache, update_stats):
    scale = model.slice(i, "scale")
    shift = model.slice(i, "shift")
    axes = _bn_axes(x)
    if mode == "train":
        mu = x.mean(axis=axes)
        var = x.var(axis=axes)
        if update_stats:
            run_mu, run_var = model.batchnorm_stats[i]
            m = layer.momentum
            run_mu *= 1.0 - m
            run_mu += m * mu
            run_var *= 1.0 - m
            run_var += m * var
    else:
        mu, var = model.batchnorm_stats[i]
    inv_std = 1.0 / np.sqrt(var + layer.epsilon)
    xhat = (x - _bn_expand(mu, x.ndim)) * _bn_expand(inv_std, x.ndim)
    out = _bn_expand(scale, x.ndim) * xhat + _bn_expand(shift, x.ndim)
    if cache is not None:
        cache.append(("batchnorm", xhat, inv_std, scale, mode))
    return out


def _backward_raw(model: ModelState, cache: list, dlogits: np.ndarray) -> np.ndarray:
    """Walk the cached stack in reverse, producing the flat gradient vector."""
    grad = np.zeros_like(model.params)
    d = dlogits
    for i in range(len(model.arch.layers) - 1, -1, -1):
        entry = cache[i]
        kind = entry[0]
        if kind == "dense":
            _, x, w = entry
            _store(model, grad, i, "weight", x.T @ d)
            _store(model, grad, i, "bias", d.sum(axis=0))
            d = d @ w.T
        elif kind == "conv2d":
            _, x_shape, cols, w, (s, k, h_out, w_out) = entry
            out_ch = w.shape[0]
            d2 = d.transpose(0, 2, 3, 1).reshape(-1, out_ch)
            _store(model, grad, i, "weight", d2.T @ cols)
            _store(model, grad, i, "bias", d.sum(axis=(0, 2, 3)))
            dcols = (d2 @ w.reshape(out_ch, -1)).reshape(
                x_shape[0], h_out, w_out, x_shape[1], k, k
            )
            dx = np.zeros(x_shape)
            for ki in range(k):
                for kj in range(k):
                    dx[:, :, ki : ki + s * h_out : s, kj : kj + s * w_out : s] += (
                        dcols[:, :, :, :, ki, kj].transpose(0, 3, 1, 2)
                    )
            d = dx
        elif kind == "relu":
            d = d * entry[1]
        elif kind == "batchnorm":
            _, xhat, inv_std, scale, mode = entry
            axes = _bn_axes(xhat)
            _store(model, grad, i, "scale", (d * xhat).sum(axis=axes))
            _store(model, grad, i, "shift", d.sum(axis=axes))
            dxhat = d * _bn_expand(scale, d.ndim)
            if mode == "train":
                mean_dxhat = _bn_expand(dxhat.mean(axis=axes), d.ndim)
                mean_dxhat_xhat = _bn_expand((dxhat * xhat).mean(axis=axes), d.ndim)
                d = _bn_expand(inv_std, d.ndim) * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat)
            else:
                d = dxhat * _bn_expand(inv_std, d.ndim)
        elif kind == "gap":
            shape = entry[1]
            d = np.broadcast_to(d[:, :, None, None], shape) / (shape[2] * shape[3])
        elif kind == "flatten":
            d = d.reshape(entry[1])
        else:
            raise RuntimeError(f"corrupt backward cache entry {kind!r}")
    return grad


def _store(model: ModelState, grad: np.ndarray, layer_index: int, role: str, value):
    for rec in model.layout:
        if rec.layer_index == layer_index and rec.role == role:
            grad[rec.offset : rec.offset + rec.length] = np.asarray(value).ravel()
            return
    raise KeyError(f"no layout record ({layer_index}, {role})")


def forward(model: ModelState, batch: Tensor | np.ndarray, mode: str = "eval") -> Tensor:
    """Logits for a batch; (batch_size, output_dim).

    Eval mode is a pure function of (model, batch); train mode uses batch
    statistics in BatchNorm layers and updates their running statistics.
    """
    arr = batch.array if isinstance(batch, Tensor) else np.asarray(batch)
    out = _forward_raw(model, arr, mode)
    return Tensor.from_array(out)


# --------------------------------------------------------------------------
# Losses
# --------------------------------------------------------------------------

def _softmax_ce(logits: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    n, k = logits.shape
    targets = np.asarray(targets)
    if targets.shape != (n,):
        raise ValueError(f"expected {n} class indices, got shape {targets.shape}")
    if targets.min() < 0 or targets.max() >= k:
        raise ValueError(f"class index out of range [0, {k})")
    shifted = logits - logits.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = shifted - logsumexp
    loss = -logp[np.arange(n), targets].mean()
    probs = np.exp(logp)
    dlogits = probs
    dlogits[np.arange(n), targets] -= 1.0
    return float(loss), dlogits / n


def _bce_logits(logits: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    targets = np.asarray(targets, dtype=np.float64)
    if targets.shape != logits.shape:
        raise ValueError(f"targets shape {targets.shape} != logits shape {logits.shape}")
    if ((targets != 0.0) & (targets != 1.0)).any():
        raise ValueError("bce targets must be 0/1 (apply the unknown-label policy first)")
    z = logits
    # max(z,0) - z*y + log1p(exp(-|z|)) is the stable elementwise form.
    loss = (np.maximum(z, 0.0) - z * targets + np.log1p(np.exp(-np.abs(z)))).mean()
    sig = 1.0 / (1.0 + np.exp(-z))
    return float(loss), (sig - targets) / z.size


def loss_and_grad(
    model: ModelState,
    batch: Tensor | np.ndarray,
    targets: np.ndarray,
    loss_kind: str,
    bn_mode: str = "train",
    update_stats: bool = True,
) -> tuple[float, np.ndarray]:
    """Mean batch loss and its gradient in ModelState layout.

    ``loss_kind`` is "ce" (softmax cross-entropy over class indices) or "bce"
    (elementwise binary cross-entropy with logits over 0/1 label matrices).
    BatchNorm runs in ``bn_mode``; the training path uses "train".
    """
    arr = batch.array if isinstance(batch, Tensor) else np.asarray(batch, dtype=np.float64)
    if arr.shape[0] == 0:
        raise ValueError("empty batch")
    cache: list = []
    logits = _forward_raw(model, arr, bn_mode, cache=cache, update_stats=update_stats)
    if loss_kind == "ce":
        loss, dlogits = _softmax_ce(logits, targets)
    elif loss_kind == "bce":
        loss, dlogits = _bce_logits(logits, targets)
    else:
        raise ValueError(f"loss_kind must be 'ce' or 'bce', got {loss_kind!r}")
    if not np.isfinite(loss):
        raise FloatingPointError("non-finite loss")
    grad = _backward_raw(model, cache, dlogits)
    _check_finite(grad, "backward pass")
    return loss, grad


# --------------------------------------------------------------------------
# Model file format
# --------------------------------------------------------------------------

def _write_array(fh, arr: np.ndarray):
    data = np.ascontiguousarray(arr, dtype="<f8")
    fh.write(struct.pack("<Q", data.size))
    fh.write(data.tobytes())


def _read_exact(fh, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise ValueError(f"truncated model file while reading {what}")
    return data


def _read_array(fh, what: str) -> np.ndarray:
    (n,) = struct.unpack("<Q", _read_exact(fh, 8, f"{what} length"))
    return np.frombuffer(_read_exact(fh, 8 * n, what), dtype="<f8").astype(np.float64)


def save_model(model: ModelState, path) -> None:
    """Single binary file: magic, version, arch JSON, params, BN stats."""
    arch_json = arch_to_json(model.arch).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<I", MODEL_FORMAT_VERSION))
        fh.write(struct.pack("<Q", len(arch_json)))
        fh.write(arch_json)
        _write_array(fh, model.params)
        for i in sorted(model.batchnorm_stats):
            mu, var = model.batchnorm_stats[i]
            _write_array(fh, mu)
            _write_array(fh, var)


def load_model(path) -> ModelState:
    with open(path, "rb") as fh:
        magic = _read_exact(fh, 4, "magic")
        if magic != MODEL_MAGIC:
            raise ValueError(f"not a model file (magic {magic!r})")
        (version,) = struct.unpack("<I", _read_exact(fh, 4, "version"))
        if version != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model format version {version}")
        (arch_len,) = struct.unpack("<Q", _read_exact(fh, 8, "arch length"))
        arch = arch_from_json(_read_exact(fh, arch_len, "arch").decode("utf-8"))
        layout = param_layout(arch)
        params = _read_array(fh, "params")
        expected = sum(r.length for r in layout)
        if params.size != expected:
            raise ValueError(f"model file has {params.size} params, arch needs {expected}")
        stats = {}
        for i, layer in enumerate(arch.layers):
            if isinstance(layer, BatchNorm):
                mu = _read_array(fh, f"bn{i} mean")
                var = _read_array(fh, f"bn{i} var")
                if mu.size != layer.num_features or var.size != layer.num_features:
                    raise ValueError(f"BatchNorm stats size mismatch at layer {i}")
                stats[i] = (mu, var)
        if fh.read(1):
            raise ValueError("trailing bytes after model payload")
    return ModelState(arch=arch, params=params, layout=layout, batchnorm_stats=stats)
