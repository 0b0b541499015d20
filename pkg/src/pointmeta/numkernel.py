"""Dense numeric kernel: float32 arrays, affine/MLP layers, reductions, softmax.

All tensors are numpy float32 arrays in row-major order. Operations are pure,
validate their shapes, and refuse to propagate NaN/Inf silently. Normalization
layers are inference-mode only: a folded per-channel scale + shift.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    DimensionError,
    MissingWeightError,
    NumericError,
    ParameterError,
)

Tensor = np.ndarray

ACTIVATIONS = ("relu", "none")


def as_tensor(x, name: str = "tensor") -> Tensor:
    """Coerce to a contiguous float32 array and reject non-finite values."""
    arr = np.ascontiguousarray(x, dtype=np.float32)
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"{name} contains NaN/Inf")
    return arr


def _check_finite(out: Tensor, op: str) -> Tensor:
    if not np.all(np.isfinite(out)):
        raise NumericError(f"{op} produced non-finite values")
    return out


@dataclass(frozen=True)
class MlpSpec:
    """Shape of a per-row MLP: affine -> folded norm -> activation per layer.

    layer_dims lists the input dim followed by one output dim per layer, so a
    1-layer map d_in -> d_out is (d_in, d_out). final_activation controls
    whether the last layer is passed through the activation.
    """

    layer_dims: tuple[int, ...]
    with_norm: bool = True
    activation: str = "relu"
    final_activation: bool = True

    def __post_init__(self):
        object.__setattr__(self, "layer_dims", tuple(int(d) for d in self.layer_dims))
        if len(self.layer_dims) < 2:
            raise ParameterError("MlpSpec needs at least (d_in, d_out)")
        if any(d <= 0 for d in self.layer_dims):
            raise ParameterError(f"MlpSpec dims must be positive, got {self.layer_dims}")
        if self.activation not in ACTIVATIONS:
            raise ParameterError(f"unknown activation {self.activation!r}")

    @property
    def in_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def out_dim(self) -> int:
        return self.layer_dims[-1]

    @property
    def n_layers(self) -> int:
        return len(self.layer_dims) - 1

    def param_count(self) -> int:
        """Closed-form parameter count: in*out + out per affine, 2*out per norm."""
        total = 0
        for d_in, d_out in zip(self.layer_dims[:-1], self.layer_dims[1:]):
            total += d_in * d_out + d_out
            if self.with_norm:
                total += 2 * d_out
        return total

    def param_shapes(self, prefix: str = "") -> dict[str, tuple[int, ...]]:
        """Ordered mapping of parameter names to shapes under ``prefix``."""
        shapes: dict[str, tuple[int, ...]] = {}
        for i, (d_in, d_out) in enumerate(zip(self.layer_dims[:-1], self.layer_dims[1:])):
            shapes[f"{prefix}l{i}.weight"] = (d_in, d_out)
            shapes[f"{prefix}l{i}.bias"] = (d_out,)
            if self.with_norm:
                shapes[f"{prefix}l{i}.scale"] = (d_out,)
                shapes[f"{prefix}l{i}.shift"] = (d_out,)
        return shapes


def _fetch(params: Mapping[str, Tensor], name: str) -> Tensor:
    try:
        return params[name]
    except KeyError:
        raise MissingWeightError(f"missing parameter {name!r}") from None


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Real matrix product of (m,k) by (k,n).

    Summation order is fixed by the BLAS kernel, so repeated calls on one
    machine are bit-identical.
    """
    a = np.asarray(a, dtype=np.float32)
    b = np.asarray(b, dtype=np.float32)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul shapes do not chain: {a.shape} x {b.shape}")
    return _check_finite(a @ b, "matmul")


def apply_mlp(x: Tensor, spec: MlpSpec, params: Mapping[str, Tensor], prefix: str = "") -> Tensor:
    """Apply an MLP over the last axis of ``x``; leading axes are batch-like.

    Per layer: x @ W + b, then scale*x + shift when with_norm, then the
    activation (skipped on the final layer unless final_activation).
    """
    x = np.asarray(x, dtype=np.float32)
    if x.shape[-1] != spec.in_dim:
        raise DimensionError(
            f"mlp input dim mismatch: x has {x.shape[-1]}, spec expects {spec.in_dim}"
        )
    lead = x.shape[:-1]
    out = x.reshape(-1, spec.in_dim)
    for i in range(spec.n_layers):
        w = _fetch(params, f"{prefix}l{i}.weight")
        b = _fetch(params, f"{prefix}l{i}.bias")
        if w.shape != (spec.layer_dims[i], spec.layer_dims[i + 1]):
            raise DimensionError(
                f"weight {prefix}l{i}.weight has shape {w.shape}, "
                f"expected {(spec.layer_dims[i], spec.layer_dims[i + 1])}"
            )
        out = out @ w + b
        if spec.with_norm:
            scale = _fetch(params, f"{prefix}l{i}.scale")
            shift = _fetch(params, f"{prefix}l{i}.shift")
            out = out * scale + shift
        last = i == spec.n_layers - 1
        if spec.activation == "relu" and (not last or spec.final_activation):
            out = np.maximum(out, 0.0, out)
    return _check_finite(out.reshape(*lead, spec.out_dim), "apply_mlp")


def softmax_axis(x: Tensor, axis: int, temperature: float = 1.0) -> Tensor:
    """Numerically stable softmax along ``axis`` with a temperature.

    output = exp((x - max) / T) normalized to sum 1 along the axis. The max
    subtraction is mandatory; with T -> 0 the output approaches a one-hot mask
    on the per-slice maximum.
    """
    if not temperature > 0:
        raise ParameterError(f"softmax temperature must be > 0, got {temperature}")
    x = np.asarray(x, dtype=np.float32)
    shifted = (x - np.max(x, axis=axis, keepdims=True)) / np.float32(temperature)
    e = np.exp(shifted)
    out = e / np.sum(e, axis=axis, keepdims=True)
    return _check_finite(out, "softmax_axis")


def reduce(x: Tensor, axis: int, mode: str, return_argmax: bool = False):
    """Reduce along ``axis`` with max/mean/sum.

    mode="max" optionally returns the argmax indices as a second value.
    """
    x = np.asarray(x, dtype=np.float32)
    if x.ndim == 0 or x.shape[axis] < 1:
        raise ParameterError(f"cannot reduce over empty axis {axis} of shape {x.shape}")
    if mode == "max":
        out = np.max(x, axis=axis)
        if return_argmax:
            return _check_finite(out, "reduce"), np.argmax(x, axis=axis)
        return _check_finite(out, "reduce")
    if return_argmax:
        raise ParameterError(f"argmax only defined for mode='max', not {mode!r}")
    if mode == "mean":
        out = np.mean(x, axis=axis, dtype=np.float32)
    elif mode == "sum":
        out = np.sum(x, axis=axis, dtype=np.float32)
    else:
        raise ParameterError(f"unknown reduce mode {mode!r}")
    return _check_finite(out, "reduce")


def concat(parts: Sequence[Tensor], axis: int) -> Tensor:
    """Concatenate tensors along ``axis``; all other axes must agree."""
    if len(parts) == 0:
        raise ParameterError("concat of zero parts")
    arrs = [np.asarray(p, dtype=np.float32) for p in parts]
    first = arrs[0].shape
    ax = axis % arrs[0].ndim
    for a in arrs[1:]:
        ok = a.ndim == arrs[0].ndim and all(
            s == t for i, (s, t) in enumerate(zip(a.shape, first)) if i != ax
        )
        if not ok:
            raise DimensionError(
                f"concat shapes disagree off axis {axis}: {first} vs {a.shape}"
            )
    return _check_finite(np.concatenate(arrs, axis=axis), "concat")


def relu(x: Tensor) -> Tensor:
    return np.maximum(np.asarray(x, dtype=np.float32), 0.0)
