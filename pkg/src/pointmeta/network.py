"""Macro-architecture: stem MLP, four reduction stages with repeated blocks,
feature-propagation decoder, and the S/L/XL/XXL family scaling.

Each encoder stage starts with a reduction unit (farthest point sampling by
the stride, a 1-layer channel-doubling MLP applied before grouping, an
additive coordinate embedding, max aggregation), followed by the configured
number of block-variant copies at the stage width. The decoder mirrors the
encoder with inverse-distance interpolation, skip concatenation, and a
1-layer MLP per stage.

Weights container format (little-endian): magic "PMWT01", u32 record count,
then per record u32 name length, UTF-8 name, u32 rank, rank u32 dims, and the
float32 payload.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import kernels, zoo
from .cloud import PointCloud, interpolate_features
from .errors import ConfigError, WeightsIOError
from .metablock import (
    AggregationSpec,
    BlockSpec,
    PositionEmbedSpec,
    aggregate,
    block_param_shapes,
    position_embed,
    run_block,
)
from .neighbors import ball_query_auto
from .numkernel import MlpSpec, Tensor, apply_mlp
from .report import CostReport, CostRow

N_STAGES = 4
DECODER_KNN = 3

FAMILIES: dict[str, tuple[int, tuple[int, int, int, int]]] = {
    "S": (32, (0, 0, 0, 0)),
    "L": (32, (2, 4, 2, 2)),
    "XL": (64, (3, 6, 3, 3)),
    "XXL": (64, (4, 8, 4, 4)),
}

HEADS = ("per_point_features", "per_point_logits")


@dataclass(frozen=True)
class NetworkConfig:
    stem_channels: int = 32
    blocks_per_stage: tuple[int, int, int, int] = (2, 4, 2, 2)
    stride: int = 4
    base_radius: float = 0.1
    k: int = 32
    block_variant: str = "pointmetabase"
    head: str = "per_point_features"
    num_classes: int = 0
    in_channels: int = 3

    def __post_init__(self):
        if len(self.blocks_per_stage) != N_STAGES:
            raise ConfigError(
                f"blocks_per_stage must have {N_STAGES} entries, got {self.blocks_per_stage}"
            )
        if self.stem_channels <= 0:
            raise ConfigError("stem_channels must be positive")
        if any(b < 0 for b in self.blocks_per_stage):
            raise ConfigError("block counts must be non-negative")
        if self.stride < 2:
            raise ConfigError("stride must be >= 2")
        if not self.base_radius > 0:
            raise ConfigError("base_radius must be positive")
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.head not in HEADS:
            raise ConfigError(f"head must be one of {HEADS}")
        if self.head == "per_point_logits" and self.num_classes < 1:
            raise ConfigError("per_point_logits head needs num_classes >= 1")
        if self.in_channels < 1:
            raise ConfigError("in_channels must be >= 1")

    @property
    def stage_widths(self) -> tuple[int, ...]:
        """Feature width per level: stem, then doubling at each reduction."""
        return tuple(self.stem_channels * (2**s) for s in range(N_STAGES + 1))

    @property
    def stage_radii(self) -> tuple[float, ...]:
        return tuple(self.base_radius * (2**s) for s in range(N_STAGES))


def family_config(family: str, variant: str = "pointmetabase", **overrides) -> NetworkConfig:
    """NetworkConfig for a named family size (S, L, XL, XXL)."""
    if family not in FAMILIES:
        raise ConfigError(f"unknown family {family!r}, expected one of {sorted(FAMILIES)}")
    c, blocks = FAMILIES[family]
    return NetworkConfig(
        stem_channels=c, blocks_per_stage=blocks, block_variant=variant, **overrides
    )


@dataclass(frozen=True)
class ReductionPlan:
    """One stage's reduction unit: channel-doubling MLP before grouping plus
    an additive coordinate embedding and max aggregation."""

    mlp: MlpSpec
    pe_mlp: MlpSpec
    radius: float
    k: int


@dataclass(frozen=True)
class StagePlan:
    reduction: ReductionPlan
    blocks: tuple[BlockSpec, ...]
    width: int


@dataclass
class Network:
    """Built layer graph plus (optionally) initialized weights."""

    cfg: NetworkConfig
    stem: MlpSpec
    stages: tuple[StagePlan, ...]
    decoder: tuple[MlpSpec, ...]  # coarse-to-fine, decoder[i] fuses stage 4-i into 3-i
    head: Optional[MlpSpec]
    param_shapes: dict[str, tuple[int, ...]]
    weights: Optional[dict[str, np.ndarray]] = None

    def min_points(self) -> int:
        return self.cfg.stride**N_STAGES


def build_network(cfg: NetworkConfig) -> Network:
    widths = cfg.stage_widths
    radii = cfg.stage_radii
    stem = MlpSpec((cfg.in_channels, widths[0]))

    stages = []
    for s in range(1, N_STAGES + 1):
        red = ReductionPlan(
            mlp=MlpSpec((widths[s - 1], widths[s])),
            pe_mlp=MlpSpec((3, widths[s])),
            radius=radii[s - 1],
            k=cfg.k,
        )
        blocks = tuple(
            zoo.make_block(cfg.block_variant, widths[s], radius=radii[s - 1], k=cfg.k)
            for _ in range(cfg.blocks_per_stage[s - 1])
        )
        stages.append(StagePlan(red, blocks, widths[s]))

    decoder = tuple(
        MlpSpec((widths[s - 1] + widths[s], widths[s - 1])) for s in range(N_STAGES, 0, -1)
    )
    head = None
    if cfg.head == "per_point_logits":
        head = MlpSpec((widths[0], cfg.num_classes), with_norm=False, activation="none")

    shapes: dict[str, tuple[int, ...]] = {}
    shapes.update(stem.param_shapes("stem."))
    for s, plan in enumerate(stages, start=1):
        shapes.update(plan.reduction.mlp.param_shapes(f"enc{s}.sa.nu."))
        shapes.update(plan.reduction.pe_mlp.param_shapes(f"enc{s}.sa.pe."))
        for j, bspec in enumerate(plan.blocks):
            shapes.update(block_param_shapes(bspec, f"enc{s}.b{j}."))
    for i, dspec in enumerate(decoder):
        shapes.update(dspec.param_shapes(f"dec{N_STAGES - i}.mlp."))
    if head is not None:
        shapes.update(head.param_shapes("head."))

    return Network(cfg, stem, tuple(stages), decoder, head, shapes)


_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64 = 0xFFFFFFFFFFFFFFFF


def _fnv1a64(text: str) -> int:
    h = _FNV_OFFSET
    for byte in text.encode("utf-8"):
        h ^= byte
        h = (h * _FNV_PRIME) & _U64
    return h


def _glorot_bound(name: str, shape: tuple[int, ...]) -> float:
    if len(shape) == 3:  # stacked per-kernel matrices (L, d_in, d_out)
        fan_in, fan_out = shape[1], shape[2]
    elif name.endswith("h.weight"):  # stored transposed: (d_out, d_in*d_mid)
        fan_in, fan_out = shape[1], shape[0]
    else:
        fan_in, fan_out = shape[0], shape[1]
    return math.sqrt(6.0 / (fan_in + fan_out))


def init_weights(net: Network, seed: int = 42) -> Network:
    """Fill every parameter deterministically from (layer path, seed).

    Affine weights are uniform(-b, b) with b = sqrt(6 / (fan_in + fan_out));
    biases and norm shifts are zero, norm scales one. Each tensor gets its own
    stream seeded by fnv1a64(name) XOR seed, so layouts can change without
    perturbing unrelated layers.
    """
    weights: dict[str, np.ndarray] = {}
    seed = int(seed) & _U64
    for name, shape in net.param_shapes.items():
        if name.endswith(".weight"):
            rng = np.random.default_rng(_fnv1a64(name) ^ seed)
            b = _glorot_bound(name, shape)
            weights[name] = rng.uniform(-b, b, size=shape).astype(np.float32)
        elif name.endswith(".scale"):
            weights[name] = np.ones(shape, dtype=np.float32)
        else:  # .bias / .shift
            weights[name] = np.zeros(shape, dtype=np.float32)
    net.weights = weights
    return net


def _require_weights(net: Network) -> dict[str, np.ndarray]:
    if net.weights is None:
        raise ConfigError("network has no weights; call init_weights or load_weights")
    return net.weights


def forward(net: Network, cloud: PointCloud, fps_start: int = 0) -> Tensor:
    """Per-point outputs of the full encoder/decoder at the input resolution."""
    cfg = net.cfg
    if cloud.n < net.min_points():
        raise ConfigError(
            f"need at least stride^{N_STAGES} = {net.min_points()} points, got {cloud.n}"
        )
    if cloud.d != cfg.in_channels:
        raise ConfigError(
            f"cloud has {cloud.d} feature channels, network expects {cfg.in_channels}"
        )
    w = _require_weights(net)

    feats = apply_mlp(cloud.features, net.stem, w, "stem.")
    levels = [(cloud.positions, feats)]

    for s, plan in enumerate(net.stages, start=1):
        pos_prev, f_prev = levels[-1]
        red = plan.reduction
        f_tr = apply_mlp(f_prev, red.mlp, w, f"enc{s}.sa.nu.")
        m = math.ceil(pos_prev.shape[0] / cfg.stride)
        start = fps_start if s == 1 else 0
        sel = kernels.active.fps(pos_prev, m, start)
        pos_sel = pos_prev[sel]
        table = ball_query_auto(pos_sel, pos_prev, red.radius, red.k)
        grouped = f_tr[table.indices]
        relpos = pos_prev[table.indices] - pos_sel[:, None, :]
        emb = position_embed(
            relpos, None, pos_sel, pos_prev[table.indices],
            PositionEmbedSpec(kind="epe", mlp=red.pe_mlp, merge="add"),
            w, f"enc{s}.sa.", channels=grouped.shape[-1],
        )
        f_cur = aggregate(
            grouped, emb, f_tr[sel], _MAX_AGG, w,
            relpos=relpos, valid_counts=table.valid_counts, prefix=f"enc{s}.sa.",
        )
        stage_cloud = PointCloud(pos_sel, f_cur)
        for j, bspec in enumerate(plan.blocks):
            stage_cloud = run_block(stage_cloud, bspec, w, prefix=f"enc{s}.b{j}.")
        levels.append((stage_cloud.positions, stage_cloud.features))

    pos_c, f_c = levels[-1]
    for i, dspec in enumerate(net.decoder):
        s = N_STAGES - i
        pos_f, f_skip = levels[s - 1]
        k_interp = min(DECODER_KNN, pos_c.shape[0])
        interp = interpolate_features(PointCloud(pos_c, f_c), pos_f, k=k_interp)
        fused = np.concatenate([f_skip, interp], axis=1)
        f_c = apply_mlp(fused, dspec, w, f"dec{s}.mlp.")
        pos_c = pos_f

    if net.head is not None:
        f_c = apply_mlp(f_c, net.head, w, "head.")
    return f_c


_MAX_AGG = AggregationSpec("max")


def count_params(net: Network) -> CostReport:
    """Exact parameter totals per layer, from the parameter shape table.

    Layers are parameter names minus their final component, so one affine plus
    its norm forms a single row.
    """
    by_layer: dict[str, int] = {}
    for name, shape in net.param_shapes.items():
        layer = name.rsplit(".", 1)[0]
        by_layer[layer] = by_layer.get(layer, 0) + int(np.prod(shape))
    rows = tuple(CostRow(path, params, 0) for path, params in by_layer.items())
    return CostReport(
        rows,
        counting_mode="macs",
        n_points=0,
        k=net.cfg.k,
        strides=(net.cfg.stride,) * N_STAGES,
        label=net.cfg.block_variant,
    )


def save_weights(net: Network, path) -> None:
    w = _require_weights(net)
    with open(path, "wb") as fh:
        fh.write(b"PMWT01")
        fh.write(struct.pack("<I", len(w)))
        for name, arr in w.items():
            blob = name.encode("utf-8")
            fh.write(struct.pack("<I", len(blob)))
            fh.write(blob)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_weights(net: Network, path) -> Network:
    """Load a PMWT01 container; names must match the network exactly."""
    raw = Path(path).read_bytes()
    if raw[:6] != b"PMWT01":
        raise WeightsIOError(f"{path}: bad magic, not a PMWT01 weights file")
    (count,) = struct.unpack_from("<I", raw, 6)
    off = 10
    loaded: dict[str, np.ndarray] = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<I", raw, off)
        off += 4
        name = raw[off : off + nlen].decode("utf-8")
        off += nlen
        (rank,) = struct.unpack_from("<I", raw, off)
        off += 4
        dims = struct.unpack_from(f"<{rank}I", raw, off)
        off += 4 * rank
        n_vals = int(np.prod(dims)) if rank else 1
        arr = np.frombuffer(raw, dtype="<f4", count=n_vals, offset=off).reshape(dims)
        off += 4 * n_vals
        loaded[name] = arr.copy()
    missing = sorted(set(net.param_shapes) - set(loaded))
    extra = sorted(set(loaded) - set(net.param_shapes))
    if missing or extra:
        raise WeightsIOError(
            f"{path}: weights do not match network; missing={missing[:8]} extra={extra[:8]}"
        )
    for name, shape in net.param_shapes.items():
        if loaded[name].shape != shape:
            raise WeightsIOError(
                f"{path}: {name} has shape {loaded[name].shape}, network expects {shape}"
            )
    net.weights = loaded
    return net
