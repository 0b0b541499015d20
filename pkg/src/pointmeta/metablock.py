"""Composable point-cloud block: neighbor update -> position embedding ->
neighbor aggregation -> point update.

A block is described declaratively by a BlockSpec; ``run_block`` executes the
three-stage forward over a PointCloud. The neighbor update is permutation
equivariant, every aggregation variant is permutation invariant along the
neighbor axis, and all functions are pure in (cloud, spec, weights).

Weight naming: all parameters of a block live in one flat mapping under a
prefix, e.g. "nu.l0.weight", "pe.l0.weight", "agg.q.l0.weight",
"pu.l1.bias", "pu.proj.weight".
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from .cloud import PointCloud
from .errors import DimensionError, ParameterError, SpecError
from .neighbors import NeighborTable, ball_query_auto, feature_knn, knn
from .numkernel import MlpSpec, Tensor, _fetch, apply_mlp, concat, reduce, softmax_axis

NU_ORDERS = ("mlp_before_group", "group_before_mlp")
GROUPINGS = ("ball", "knn", "feature_knn")
PE_KINDS = ("none", "ipe", "epe", "pp")
EPE_MERGES = ("add", "concat")
AGG_KINDS = (
    "max",
    "mean",
    "sum",
    "position_pool",
    "vsa",
    "attentive_pool",
    "xconv",
    "eff_pointconv",
    "kpconv",
)

# concat token -> feature width (None = input feature dim)
_TOKEN_DIMS = {
    "neighbor": None,
    "feat_diff": None,
    "center_feat": None,
    "relpos": 3,
    "abs_pos_j": 3,
    "abs_pos_i": 3,
    "dist": 1,
}


@dataclass(frozen=True)
class NeighborUpdateSpec:
    """Grouping choice plus the (optional) shared MLP and its placement.

    ``concat`` lists what feeds the MLP in group-before-MLP order; the
    implicit-position-embedding tokens from the PositionEmbedSpec are
    appended after these.
    """

    order: str
    mlp: Optional[MlpSpec]
    grouping: str = "ball"
    radius: float = 0.1
    k: int = 32
    repeat_factor: int = 1
    concat: tuple[str, ...] = ("neighbor",)

    def __post_init__(self):
        if self.order not in NU_ORDERS:
            raise SpecError(f"unknown neighbor-update order {self.order!r}")
        if self.grouping not in GROUPINGS:
            raise SpecError(f"unknown grouping {self.grouping!r}")
        for t in self.concat:
            if t not in _TOKEN_DIMS:
                raise SpecError(f"unknown neighbor concat token {t!r}")
        if self.order == "mlp_before_group" and self.concat != ("neighbor",):
            raise SpecError("concat tokens require group_before_mlp")
        if self.repeat_factor < 1:
            raise SpecError("repeat_factor must be >= 1")


@dataclass(frozen=True)
class PositionEmbedSpec:
    """How position information enters the block.

    ipe: coordinates are concatenated into the neighbor-update MLP input
    (tokens in ``concat_inputs``); epe: a small MLP of the coordinate inputs,
    merged by add or concat; pp: the relative coordinates themselves act as
    multiplicative pooling weights, repeated channels/3 times per axis.
    """

    kind: str = "none"
    concat_inputs: tuple[str, ...] = ("relpos",)
    mlp: Optional[MlpSpec] = None
    merge: str = "add"
    inputs: tuple[str, ...] = ("relpos",)
    repeat_to_channels: bool = True

    def __post_init__(self):
        if self.kind not in PE_KINDS:
            raise SpecError(f"unknown position embedding kind {self.kind!r}")
        for t in tuple(self.concat_inputs) + tuple(self.inputs):
            if t not in ("relpos", "abs_pos_j", "abs_pos_i", "dist"):
                raise SpecError(f"unknown position token {t!r}")
        if self.kind == "epe":
            if self.mlp is None:
                raise SpecError("epe requires an mlp")
            if self.merge not in EPE_MERGES:
                raise SpecError(f"epe merge must be one of {EPE_MERGES}")
            want = sum(_TOKEN_DIMS[t] for t in self.inputs)
            if self.mlp.in_dim != want:
                raise SpecError(
                    f"epe mlp input dim {self.mlp.in_dim} != {want} for inputs {self.inputs}"
                )


@dataclass(frozen=True)
class AggregationSpec:
    """Reduction over the neighbor axis; kind selects the formula.

    Learnable variants carry their operator MLPs; ``temperature`` scales the
    softmax of the attention variants. ``out_dim`` is required for the
    variants that change the channel count via a weight matrix (xconv,
    eff_pointconv, kpconv). mean/sum divide by the neighbor cap K; set
    use_valid_counts to divide by the true in-radius counts instead.
    """

    kind: str = "max"
    temperature: float = 1.0
    use_valid_counts: bool = False
    mlp_q: Optional[MlpSpec] = None
    mlp_k: Optional[MlpSpec] = None
    mlp_w: Optional[MlpSpec] = None
    mlp_score: Optional[MlpSpec] = None
    mlp_x: Optional[MlpSpec] = None
    mlp_m: Optional[MlpSpec] = None
    d_mid: int = 16
    out_dim: Optional[int] = None
    kernel_points: Optional[tuple[tuple[float, float, float], ...]] = None
    sigma: float = 0.1

    def __post_init__(self):
        if self.kind not in AGG_KINDS:
            raise SpecError(f"unknown aggregation kind {self.kind!r}")
        if not self.temperature > 0:
            raise SpecError("temperature must be positive")
        need = {
            "vsa": ("mlp_q", "mlp_k", "mlp_w"),
            "attentive_pool": ("mlp_score",),
            "xconv": ("mlp_x", "out_dim"),
            "eff_pointconv": ("mlp_m", "out_dim"),
            "kpconv": ("kernel_points", "out_dim"),
        }
        for attr in need.get(self.kind, ()):
            if getattr(self, attr) is None:
                raise SpecError(f"aggregation {self.kind!r} requires {attr}")

    @property
    def n_kernel_points(self) -> int:
        return len(self.kernel_points) if self.kernel_points else 0


@dataclass(frozen=True)
class PointUpdateSpec:
    """Per-point MLP after aggregation, optionally residual.

    inverted_bottleneck marks a 2-layer MLP whose hidden width is 4x the
    input; the mlp field carries the actual dims. A residual connection adds
    the block input, through a 1-layer linear projection when dims differ.
    """

    mlp: Optional[MlpSpec] = None
    inverted_bottleneck: bool = False
    residual: bool = False

    def __post_init__(self):
        if self.inverted_bottleneck:
            if self.mlp is None or self.mlp.n_layers != 2:
                raise SpecError("inverted bottleneck is a 2-layer mlp")
            if self.mlp.layer_dims[1] != 4 * self.mlp.layer_dims[0]:
                raise SpecError("inverted bottleneck hidden width must be 4x input")


@dataclass(frozen=True)
class PositionEmbedding:
    """Computed embedding values plus how to merge them into features.

    values is None for the empty marker (kind none, or ipe which is realized
    inside the neighbor update).
    """

    kind: str
    values: Optional[np.ndarray]
    merge: str  # none | add | concat | mul


@dataclass(frozen=True)
class AttentionMask:
    """Per-channel attention over neighbors; sums to 1 along the K axis."""

    values: np.ndarray  # (N, K, d)
    temperature: float


@dataclass(frozen=True)
class BlockSpec:
    """Declarative description of one block, including its input width."""

    in_dim: int
    neighbor_update: NeighborUpdateSpec
    position_embed: PositionEmbedSpec = field(default_factory=PositionEmbedSpec)
    aggregation: AggregationSpec = field(default_factory=AggregationSpec)
    point_update: PointUpdateSpec = field(default_factory=PointUpdateSpec)

    def __post_init__(self):
        block_dims(self)  # raises SpecError / DimensionError on inconsistency


def _token_width(token: str, d: int) -> int:
    w = _TOKEN_DIMS[token]
    return d if w is None else w


def nu_concat_width(spec: BlockSpec) -> int:
    """Input width of the neighbor-update MLP in group-before-MLP order."""
    width = sum(_token_width(t, spec.in_dim) for t in spec.neighbor_update.concat)
    if spec.position_embed.kind == "ipe":
        width += sum(_token_width(t, spec.in_dim) for t in spec.position_embed.concat_inputs)
    return width


def block_dims(spec: BlockSpec) -> dict[str, int]:
    """Derive and validate the channel widths flowing through a block."""
    nu = spec.neighbor_update
    pe = spec.position_embed
    agg = spec.aggregation
    pu = spec.point_update

    if pe.kind == "ipe" and nu.order == "mlp_before_group":
        raise SpecError("ipe needs group_before_mlp: relative coordinates must enter the MLP")

    if nu.order == "mlp_before_group":
        if nu.mlp is not None and nu.mlp.in_dim != spec.in_dim:
            raise DimensionError(
                f"neighbor mlp expects {nu.mlp.in_dim} channels, block input is {spec.in_dim}"
            )
        base = nu.mlp.out_dim if nu.mlp is not None else spec.in_dim
    else:
        want = nu_concat_width(spec)
        if nu.mlp is not None:
            if nu.mlp.in_dim != want:
                raise DimensionError(
                    f"neighbor mlp expects {nu.mlp.in_dim} channels, concat provides {want}"
                )
            base = nu.mlp.out_dim
        else:
            base = want
    grouped = base * nu.repeat_factor

    emb_dim = 0
    if pe.kind == "epe":
        emb_dim = pe.mlp.out_dim
        if pe.merge == "add" and emb_dim != grouped:
            raise DimensionError(
                f"add-merge embedding dim {emb_dim} != neighbor feature dim {grouped}"
            )
    elif pe.kind == "pp":
        if pe.repeat_to_channels:
            if grouped % 3 != 0:
                raise SpecError(
                    f"position pooling needs channels divisible by 3, got {grouped}"
                )
        elif grouped != 3:
            raise SpecError("pp without channel repetition requires exactly 3 channels")
        emb_dim = grouped

    merged = grouped + emb_dim if (pe.kind == "epe" and pe.merge == "concat") else grouped

    if agg.kind in ("max", "mean", "sum", "position_pool"):
        agg_out = merged
        if agg.kind == "position_pool" and pe.kind != "pp" and merged % 3 != 0:
            raise SpecError(
                f"position pooling needs channels divisible by 3, got {merged}"
            )
    elif agg.kind == "vsa":
        if pe.kind == "epe" and pe.merge != "add":
            raise SpecError("vsa uses an additive position embedding")
        if agg.mlp_q.in_dim != spec.in_dim:
            raise DimensionError(
                f"vsa query mlp expects {agg.mlp_q.in_dim}, block input is {spec.in_dim}"
            )
        if agg.mlp_k.in_dim != grouped or agg.mlp_q.out_dim != agg.mlp_k.out_dim:
            raise DimensionError("vsa key mlp dims must match neighbor features and query")
        if agg.mlp_w.in_dim != agg.mlp_k.out_dim or agg.mlp_w.out_dim != grouped:
            raise DimensionError("vsa weight mlp must map scores back to the feature dim")
        agg_out = grouped
    elif agg.kind == "attentive_pool":
        if agg.mlp_score.in_dim != merged or agg.mlp_score.out_dim != merged:
            raise DimensionError(
                f"attentive pooling score mlp must be {merged}->{merged}, "
                f"got {agg.mlp_score.layer_dims}"
            )
        agg_out = merged
    elif agg.kind == "xconv":
        k = nu.k
        if agg.mlp_x.in_dim != 3 * k or agg.mlp_x.out_dim != k * k:
            raise DimensionError(
                f"xconv transform mlp must map {3 * k} -> {k * k} for k={k}"
            )
        agg_out = agg.out_dim
    elif agg.kind == "eff_pointconv":
        if agg.mlp_m.in_dim != 3 or agg.mlp_m.out_dim != agg.d_mid:
            raise DimensionError(f"eff_pointconv weight mlp must map 3 -> d_mid={agg.d_mid}")
        agg_out = agg.out_dim
    else:  # kpconv
        agg_out = agg.out_dim

    if pu.mlp is not None:
        if pu.mlp.in_dim != agg_out:
            raise DimensionError(
                f"point update expects {pu.mlp.in_dim} channels, aggregation yields {agg_out}"
            )
        out = pu.mlp.out_dim
    else:
        out = agg_out

    return {
        "grouped": grouped,
        "emb": emb_dim,
        "merged": merged,
        "agg_out": agg_out,
        "out": out,
        "needs_residual_proj": bool(pu.residual and out != spec.in_dim),
    }


def icosahedron_kernel(radius: float) -> tuple[tuple[float, float, float], ...]:
    """13 kernel point coordinates: the center plus 12 icosahedron vertices
    scaled to ``radius``."""
    phi = (1.0 + 5.0**0.5) / 2.0
    verts = []
    for s1 in (1.0, -1.0):
        for s2 in (1.0, -1.0):
            verts.append((0.0, s1, s2 * phi))
            verts.append((s1, s2 * phi, 0.0))
            verts.append((s2 * phi, 0.0, s1))
    norm = (1.0 + phi * phi) ** 0.5
    pts = [(0.0, 0.0, 0.0)]
    pts += [(radius * x / norm, radius * y / norm, radius * z / norm) for x, y, z in verts]
    return tuple(pts)


def _gather(x: np.ndarray, table: NeighborTable) -> np.ndarray:
    return x[table.indices]


def neighbor_update(
    cloud: PointCloud,
    spec: BlockSpec,
    weights: Mapping[str, Tensor],
    prefix: str = "",
    table: Optional[NeighborTable] = None,
):
    """Group neighbors and apply the shared MLP in the configured order.

    Returns (grouped_features (N,K,d'), relpos (N,K,3), table). Gathering
    neighbor rows commutes with the pointwise MLP, which is why the
    MLP-before-group order computes the same features K times cheaper when no
    coordinate inputs are concatenated.
    """
    nu = spec.neighbor_update
    pe = spec.position_embed
    dims = block_dims(spec)
    if cloud.d != spec.in_dim:
        raise DimensionError(f"cloud features have {cloud.d} channels, spec expects {spec.in_dim}")

    if table is None:
        if nu.grouping == "ball":
            table = ball_query_auto(cloud.positions, cloud.positions, nu.radius, nu.k)
        elif nu.grouping == "knn":
            table = knn(cloud.positions, cloud.positions, nu.k)
        else:
            table = feature_knn(cloud.features, nu.k)

    relpos = _gather(cloud.positions, table) - cloud.positions[:, None, :]

    if nu.order == "mlp_before_group":
        feats = cloud.features
        if nu.mlp is not None:
            feats = apply_mlp(feats, nu.mlp, weights, prefix + "nu.")
        grouped = _gather(feats, table)
    else:
        neighbor_feats = _gather(cloud.features, table)
        parts = []
        for token in nu.concat:
            if token == "neighbor":
                parts.append(neighbor_feats)
            elif token == "feat_diff":
                parts.append(neighbor_feats - cloud.features[:, None, :])
            elif token == "center_feat":
                parts.append(
                    np.broadcast_to(cloud.features[:, None, :], neighbor_feats.shape).copy()
                )
            else:
                parts.extend(_position_parts((token,), relpos, cloud.positions, table))
        if pe.kind == "ipe":
            parts.extend(_position_parts(pe.concat_inputs, relpos, cloud.positions, table))
        grouped = parts[0] if len(parts) == 1 else concat(parts, axis=-1)
        if nu.mlp is not None:
            grouped = apply_mlp(grouped, nu.mlp, weights, prefix + "nu.")

    if nu.repeat_factor > 1:
        grouped = np.tile(grouped, (1, 1, nu.repeat_factor))
    assert grouped.shape[-1] == dims["grouped"]
    return grouped, relpos, table


def _position_parts(tokens, relpos, positions, table):
    parts = []
    for token in tokens:
        if token == "relpos":
            parts.append(relpos)
        elif token == "abs_pos_j":
            parts.append(_gather(positions, table))
        elif token == "abs_pos_i":
            parts.append(
                np.broadcast_to(positions[:, None, :], relpos.shape).copy()
            )
        else:  # dist
            d2 = relpos[..., 0] ** 2 + relpos[..., 1] ** 2 + relpos[..., 2] ** 2
            parts.append(np.sqrt(d2)[..., None])
    return parts


def position_embed(
    relpos: Tensor,
    dists: Optional[Tensor],
    abs_q: Optional[Tensor],
    abs_n: Optional[Tensor],
    spec: PositionEmbedSpec,
    weights: Mapping[str, Tensor],
    prefix: str = "",
    channels: Optional[int] = None,
) -> PositionEmbedding:
    """Compute the explicit embedding values (or an empty marker).

    ipe returns the empty marker: it is realized inside the neighbor update
    concat. pp repeats each relative-coordinate axis channels/3 times and is
    merged multiplicatively.
    """
    if spec.kind in ("none", "ipe"):
        return PositionEmbedding(spec.kind, None, "none")
    if spec.kind == "pp":
        if channels is None:
            raise ParameterError("pp embedding needs the target channel count")
        if spec.repeat_to_channels:
            if channels % 3 != 0:
                raise SpecError(f"position pooling needs channels divisible by 3, got {channels}")
            values = np.repeat(relpos, channels // 3, axis=-1)
        else:
            if channels != 3:
                raise SpecError("pp without channel repetition requires exactly 3 channels")
            values = relpos
        return PositionEmbedding("pp", values, "mul")
    # epe
    parts = []
    for token in spec.inputs:
        if token == "relpos":
            parts.append(relpos)
        elif token == "dist":
            if dists is None:
                d2 = relpos[..., 0] ** 2 + relpos[..., 1] ** 2 + relpos[..., 2] ** 2
                dists = np.sqrt(d2)
            parts.append(dists[..., None])
        elif token == "abs_pos_j":
            parts.append(abs_n)
        else:
            parts.append(np.broadcast_to(abs_q[:, None, :], relpos.shape).copy())
    x = parts[0] if len(parts) == 1 else concat(parts, axis=-1)
    values = apply_mlp(x, spec.mlp, weights, prefix + "pe.")
    return PositionEmbedding("epe", values, spec.merge)


def _merge_embedding(grouped: np.ndarray, emb: Optional[PositionEmbedding]) -> np.ndarray:
    if emb is None or emb.values is None:
        return grouped
    if emb.merge == "add":
        if emb.values.shape[-1] != grouped.shape[-1]:
            raise DimensionError(
                f"add-merge embedding dim {emb.values.shape[-1]} != features {grouped.shape[-1]}"
            )
        return grouped + emb.values
    if emb.merge == "concat":
        return concat([grouped, emb.values], axis=-1)
    return grouped * emb.values  # mul


def aggregate(
    grouped: Tensor,
    emb: Optional[PositionEmbedding],
    center_features: Tensor,
    spec: AggregationSpec,
    weights: Mapping[str, Tensor],
    relpos: Optional[Tensor] = None,
    valid_counts: Optional[np.ndarray] = None,
    prefix: str = "",
    return_mask: bool = False,
):
    """Permutation-invariant reduction over the neighbor axis.

    Additive embeddings are added to the neighbor features before the
    variant's formula; multiplicative (pp) fields weight them. Variants that
    need raw geometry (position_pool fallback, xconv, eff_pointconv, kpconv)
    take it from ``relpos``.
    """
    n, k, d = grouped.shape
    mask = None

    if spec.kind in ("max", "mean", "sum"):
        merged = _merge_embedding(grouped, emb)
        if spec.kind == "max":
            out = reduce(merged, axis=1, mode="max")
        elif spec.use_valid_counts and valid_counts is not None:
            keep = (np.arange(k)[None, :] < np.maximum(valid_counts, 1)[:, None]).astype(
                np.float32
            )
            total = np.sum(merged * keep[:, :, None], axis=1, dtype=np.float32)
            if spec.kind == "mean":
                total = total / np.maximum(valid_counts, 1)[:, None].astype(np.float32)
            out = total
        else:
            out = reduce(merged, axis=1, mode=spec.kind)
    elif spec.kind == "position_pool":
        if emb is not None and emb.kind == "pp":
            base = grouped
            w = emb.values
        else:
            base = _merge_embedding(grouped, emb)
            if relpos is None:
                raise SpecError("position_pool without a pp embedding needs relpos")
            if base.shape[-1] % 3 != 0:
                raise SpecError(
                    f"position pooling needs channels divisible by 3, got {base.shape[-1]}"
                )
            w = np.repeat(relpos, base.shape[-1] // 3, axis=-1)
        out = reduce(base * w, axis=1, mode="mean")
    elif spec.kind == "vsa":
        e = 0.0
        if emb is not None and emb.values is not None:
            if emb.merge != "add":
                raise SpecError("vsa uses an additive position embedding")
            e = emb.values
        q = apply_mlp(center_features, spec.mlp_q, weights, prefix + "agg.q.")
        kk = apply_mlp(grouped, spec.mlp_k, weights, prefix + "agg.k.")
        logits = apply_mlp(q[:, None, :] - kk + e, spec.mlp_w, weights, prefix + "agg.w.")
        attn = softmax_axis(logits, axis=1, temperature=spec.temperature)
        mask = AttentionMask(attn, spec.temperature)
        out = np.sum(attn * (grouped + e), axis=1, dtype=np.float32)
    elif spec.kind == "attentive_pool":
        s = _merge_embedding(grouped, emb)
        logits = apply_mlp(s, spec.mlp_score, weights, prefix + "agg.score.")
        attn = softmax_axis(logits, axis=1, temperature=spec.temperature)
        mask = AttentionMask(attn, spec.temperature)
        out = np.sum(attn * s, axis=1, dtype=np.float32)
    elif spec.kind == "xconv":
        if relpos is None:
            raise SpecError("xconv needs relpos")
        merged = _merge_embedding(grouped, emb)
        dm = merged.shape[-1]
        x = apply_mlp(relpos.reshape(n, k * 3), spec.mlp_x, weights, prefix + "agg.x.")
        x = x.reshape(n, k, k)
        lifted = np.einsum("nij,njd->nid", x, merged).reshape(n, k * dm)
        w = _fetch(weights, prefix + "agg.conv.weight")
        b = _fetch(weights, prefix + "agg.conv.bias")
        out = (lifted @ w + b).astype(np.float32)
    elif spec.kind == "eff_pointconv":
        if relpos is None:
            raise SpecError("eff_pointconv needs relpos")
        base = _merge_embedding(grouped, emb)
        mj = apply_mlp(relpos, spec.mlp_m, weights, prefix + "agg.m.")  # (N,K,d_mid)
        fprime = np.einsum("nkm,nkd->nmd", mj, base)  # sum over neighbors
        h = _fetch(weights, prefix + "agg.h.weight")
        out = (fprime.reshape(n, -1) @ h.T).astype(np.float32)
    else:  # kpconv
        if relpos is None:
            raise SpecError("kpconv needs relpos")
        base = _merge_embedding(grouped, emb)
        kp = np.asarray(spec.kernel_points, dtype=np.float32)  # (L,3)
        w = _fetch(weights, prefix + "agg.kernel.weight")
        diff = relpos[:, :, None, :] - kp[None, None, :, :]
        dist = np.sqrt(diff[..., 0] ** 2 + diff[..., 1] ** 2 + diff[..., 2] ** 2)
        infl = np.maximum(0.0, 1.0 - dist / np.float32(spec.sigma))  # (N,K,L)
        per_kernel = np.einsum("nkl,nkd->nld", infl, base)
        out = np.einsum("nld,ldo->no", per_kernel, w).astype(np.float32)

    if return_mask:
        return out, mask
    return out


def point_update(
    f1: Tensor,
    input_features: Tensor,
    spec: PointUpdateSpec,
    weights: Mapping[str, Tensor],
    prefix: str = "",
) -> Tensor:
    """Per-point MLP on the aggregated features, optionally residual."""
    out = np.asarray(f1, dtype=np.float32)
    if spec.mlp is not None:
        out = apply_mlp(out, spec.mlp, weights, prefix + "pu.")
    if spec.residual:
        res = np.asarray(input_features, dtype=np.float32)
        if res.shape[-1] != out.shape[-1]:
            w = _fetch(weights, prefix + "pu.proj.weight")
            b = _fetch(weights, prefix + "pu.proj.bias")
            res = (res @ w + b).astype(np.float32)
        out = out + res
    return out


def run_block(
    cloud: PointCloud,
    spec: BlockSpec,
    weights: Mapping[str, Tensor],
    prefix: str = "",
    table: Optional[NeighborTable] = None,
) -> PointCloud:
    """Full block forward: positions pass through, features are replaced."""
    grouped, relpos, table = neighbor_update(cloud, spec, weights, prefix, table=table)
    emb = position_embed(
        relpos,
        None,
        cloud.positions,
        cloud.positions[table.indices],
        spec.position_embed,
        weights,
        prefix,
        channels=grouped.shape[-1],
    )
    f1 = aggregate(
        grouped,
        emb,
        cloud.features,
        spec.aggregation,
        weights,
        relpos=relpos,
        valid_counts=table.valid_counts,
        prefix=prefix,
    )
    f2 = point_update(f1, cloud.features, spec.point_update, weights, prefix)
    return cloud.with_features(f2)


def block_param_shapes(spec: BlockSpec, prefix: str = "") -> dict[str, tuple[int, ...]]:
    """Ordered name -> shape mapping for every learnable tensor of a block."""
    dims = block_dims(spec)
    shapes: dict[str, tuple[int, ...]] = {}
    nu, pe, agg, pu = (
        spec.neighbor_update,
        spec.position_embed,
        spec.aggregation,
        spec.point_update,
    )
    if nu.mlp is not None:
        shapes.update(nu.mlp.param_shapes(prefix + "nu."))
    if pe.kind == "epe":
        shapes.update(pe.mlp.param_shapes(prefix + "pe."))
    if agg.kind == "vsa":
        shapes.update(agg.mlp_q.param_shapes(prefix + "agg.q."))
        shapes.update(agg.mlp_k.param_shapes(prefix + "agg.k."))
        shapes.update(agg.mlp_w.param_shapes(prefix + "agg.w."))
    elif agg.kind == "attentive_pool":
        shapes.update(agg.mlp_score.param_shapes(prefix + "agg.score."))
    elif agg.kind == "xconv":
        shapes.update(agg.mlp_x.param_shapes(prefix + "agg.x."))
        shapes[prefix + "agg.conv.weight"] = (nu.k * dims["merged"], agg.out_dim)
        shapes[prefix + "agg.conv.bias"] = (agg.out_dim,)
    elif agg.kind == "eff_pointconv":
        shapes.update(agg.mlp_m.param_shapes(prefix + "agg.m."))
        shapes[prefix + "agg.h.weight"] = (agg.out_dim, agg.d_mid * dims["merged"])
    elif agg.kind == "kpconv":
        shapes[prefix + "agg.kernel.weight"] = (
            agg.n_kernel_points,
            dims["merged"],
            agg.out_dim,
        )
    if pu.mlp is not None:
        shapes.update(pu.mlp.param_shapes(prefix + "pu."))
    if dims["needs_residual_proj"]:
        shapes[prefix + "pu.proj.weight"] = (spec.in_dim, dims["out"])
        shapes[prefix + "pu.proj.bias"] = (dims["out"],)
    return shapes
