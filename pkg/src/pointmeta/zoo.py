"""Registry of named block variants.

Every entry builds a BlockSpec whose input and output widths both equal the
requested channel count, so variants drop into the same macro-architecture
interchangeably. Position-pooling variants (plain_pp, plain_pp_max,
plain_epe_pp) need the channel count divisible by 3.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import RegistryError
from .metablock import (
    AggregationSpec,
    BlockSpec,
    NeighborUpdateSpec,
    PointUpdateSpec,
    PositionEmbedSpec,
    icosahedron_kernel,
)
from .numkernel import MlpSpec


@dataclass(frozen=True)
class VariantId:
    """A registered block name plus the channel width to build it at."""

    name: str
    channels: int = 48

    def __post_init__(self):
        if self.channels <= 0:
            raise RegistryError(f"channels must be positive, got {self.channels}")


def _linear(*dims: int) -> MlpSpec:
    """Plain affine stack: no norm, no activation (projection / logits use)."""
    return MlpSpec(tuple(dims), with_norm=False, activation="none")


def _mlp(*dims: int) -> MlpSpec:
    return MlpSpec(tuple(dims))


def _nu_before(d: int, radius: float, k: int, layers: int = 1, grouping: str = "ball"):
    mlp = _mlp(*([d] * (layers + 1))) if layers else None
    return NeighborUpdateSpec("mlp_before_group", mlp, grouping, radius, k)


def _epe_add(d: int) -> PositionEmbedSpec:
    return PositionEmbedSpec(kind="epe", mlp=_mlp(3, d), merge="add")


def _plain_epe(d, radius, k, n_layers, p_layers, inverted=False):
    """The shared skeleton of the update-allocation grid: MLP-before-group
    neighbor update with n layers, additive coordinate embedding, max pooling,
    p-layer point update."""
    if inverted:
        pu = PointUpdateSpec(mlp=_mlp(d, 4 * d, d), inverted_bottleneck=True)
    elif p_layers:
        pu = PointUpdateSpec(mlp=_mlp(*([d] * (p_layers + 1))))
    else:
        pu = PointUpdateSpec(mlp=None)
    return BlockSpec(
        in_dim=d,
        neighbor_update=_nu_before(d, radius, k, layers=n_layers),
        position_embed=_epe_add(d),
        aggregation=AggregationSpec("max"),
        point_update=pu,
    )


def _make_plain_max(d, radius, k):
    return BlockSpec(
        in_dim=d,
        neighbor_update=_nu_before(d, radius, k),
        aggregation=AggregationSpec("max"),
        point_update=PointUpdateSpec(mlp=_mlp(d, d)),
    )


def _make_plain_pp(d, radius, k):
    return BlockSpec(
        in_dim=d,
        neighbor_update=_nu_before(d, radius, k),
        position_embed=PositionEmbedSpec(kind="pp"),
        aggregation=AggregationSpec("position_pool"),
        point_update=PointUpdateSpec(mlp=_mlp(d, d)),
    )


def _make_plain_pp_max(d, radius, k):
    return BlockSpec(
        in_dim=d,
        neighbor_update=_nu_before(d, radius, k),
        position_embed=PositionEmbedSpec(kind="pp"),
        aggregation=AggregationSpec("max"),
        point_update=PointUpdateSpec(mlp=_mlp(d, d)),
    )


def _make_plain_ipe_max(d, radius, k):
    return BlockSpec(
        in_dim=d,
        neighbor_update=NeighborUpdateSpec("group_before_mlp", _mlp(d + 3, d), "ball", radius, k),
        position_embed=PositionEmbedSpec(kind="ipe", concat_inputs=("relpos",)),
        aggregation=AggregationSpec("max"),
        point_update=PointUpdateSpec(mlp=_mlp(d, d)),
    )


def _make_plain_epe_max(d, radius, k):
    return _plain_epe(d, radius, k, 1, 1)


def _make_plain_epe_pp(d, radius, k):
    return BlockSpec(
        in_dim=d,
        neighbor_update=_nu_before(d, radius, k),
        position_embed=_epe_add(d),
        aggregation=AggregationSpec("position_pool"),
        point_update=PointUpdateSpec(mlp=_mlp(d, d)),
    )


def _make_pointmetabase(d, radius, k):
    return BlockSpec(
        in_dim=d,
        neighbor_update=_nu_before(d, radius, k),
        position_embed=_epe_add(d),
        aggregation=AggregationSpec("max"),
        point_update=PointUpdateSpec(mlp=_mlp(d, d, d), residual=True),
    )


def _make_pointnet2(d, radius, k):
    return BlockSpec(
        in_dim=d,
        neighbor_update=NeighborUpdateSpec(
            "group_before_mlp", _mlp(d + 3, d, d, d), "ball", radius, k
        ),
        position_embed=PositionEmbedSpec(kind="ipe", concat_inputs=("relpos",)),
        aggregation=AggregationSpec("max"),
        point_update=PointUpdateSpec(mlp=_mlp(d, d)),
    )


def _make_pointnext(d, radius, k):
    return BlockSpec(
        in_dim=d,
        neighbor_update=NeighborUpdateSpec("group_before_mlp", _mlp(d + 3, d), "ball", radius, k),
        position_embed=PositionEmbedSpec(kind="ipe", concat_inputs=("relpos",)),
        aggregation=AggregationSpec("max"),
        point_update=PointUpdateSpec(mlp=_mlp(d, 4 * d, d), inverted_bottleneck=True, residual=True),
    )


def _make_point_transformer(d, radius, k):
    return BlockSpec(
        in_dim=d,
        neighbor_update=_nu_before(d, radius, k, grouping="knn"),
        position_embed=_epe_add(d),
        aggregation=AggregationSpec(
            "vsa",
            mlp_q=_linear(d, d),
            mlp_k=_linear(d, d),
            mlp_w=_linear(d, d),
        ),
        point_update=PointUpdateSpec(mlp=_mlp(d, d), residual=True),
    )


def _make_assanet(d, radius, k):
    return BlockSpec(
        in_dim=d,
        neighbor_update=NeighborUpdateSpec(
            "mlp_before_group", _mlp(d, d), "ball", radius, k, repeat_factor=3
        ),
        position_embed=PositionEmbedSpec(kind="pp"),
        aggregation=AggregationSpec("position_pool"),
        point_update=PointUpdateSpec(mlp=_mlp(3 * d, d), residual=True),
    )


def _make_dgcnn(d, radius, k):
    return BlockSpec(
        in_dim=d,
        neighbor_update=NeighborUpdateSpec(
            "group_before_mlp",
            _mlp(2 * d, d),
            "feature_knn",
            radius,
            k,
            concat=("feat_diff", "center_feat"),
        ),
        aggregation=AggregationSpec("max"),
        point_update=PointUpdateSpec(mlp=None),
    )


def _make_pointcnn(d, radius, k):
    d_e = math.ceil(d / 4)
    return BlockSpec(
        in_dim=d,
        neighbor_update=NeighborUpdateSpec("group_before_mlp", None, "knn", radius, k),
        position_embed=PositionEmbedSpec(kind="epe", mlp=_mlp(3, d_e), merge="concat"),
        aggregation=AggregationSpec(
            "xconv", mlp_x=_linear(3 * k, k * k), out_dim=d
        ),
        point_update=PointUpdateSpec(mlp=None),
    )


def _make_randla(d, radius, k):
    return BlockSpec(
        in_dim=d,
        neighbor_update=NeighborUpdateSpec(
            "group_before_mlp", _mlp(d + 3, d), "knn", radius, k, concat=("neighbor", "abs_pos_j")
        ),
        position_embed=PositionEmbedSpec(
            kind="epe",
            mlp=_mlp(10, d),
            merge="concat",
            inputs=("relpos", "dist", "abs_pos_j", "abs_pos_i"),
        ),
        aggregation=AggregationSpec("attentive_pool", mlp_score=_linear(2 * d, 2 * d)),
        point_update=PointUpdateSpec(mlp=_mlp(2 * d, d), residual=True),
    )


def _make_pointconv_eff(d, radius, k):
    return BlockSpec(
        in_dim=d,
        neighbor_update=NeighborUpdateSpec(
            "group_before_mlp", _mlp(d + 3, d, d, d), "ball", radius, k
        ),
        position_embed=PositionEmbedSpec(kind="ipe", concat_inputs=("relpos",)),
        aggregation=AggregationSpec(
            "eff_pointconv",
            mlp_m=MlpSpec((3, 16), with_norm=False),
            d_mid=16,
            out_dim=d,
        ),
        point_update=PointUpdateSpec(mlp=_mlp(d, d)),
    )


def _make_kpconv(d, radius, k):
    return BlockSpec(
        in_dim=d,
        neighbor_update=NeighborUpdateSpec("group_before_mlp", None, "ball", radius, k),
        aggregation=AggregationSpec(
            "kpconv",
            kernel_points=icosahedron_kernel(radius),
            sigma=radius,
            out_dim=d,
        ),
        point_update=PointUpdateSpec(mlp=None),
    )


_GRID_CONFIGS = {
    "n1p1": (1, 1, False),
    "n2p0": (2, 0, False),
    "n0p2": (0, 2, False),
    "n1p2": (1, 2, False),
    "n1p2_inv": (1, 2, True),
    "n2p1": (2, 1, False),
    "n2p1_inv": (2, 1, True),
    "n1p3": (1, 3, False),
    "n3p1": (3, 1, False),
}

_REGISTRY = {
    "pointnet2": (
        _make_pointnet2,
        "group-then-MLP (3 layers) on features + relative coords, max pool, 1-layer update",
    ),
    "point_transformer": (
        _make_point_transformer,
        "MLP-then-group (knn), additive coord embedding, vector self-attention, residual update",
    ),
    "assanet": (
        _make_assanet,
        "MLP-then-group repeated x3, coordinate-repeat weights, position pooling, residual update",
    ),
    "dgcnn": (
        _make_dgcnn,
        "feature-space knn, MLP on (neighbor-center diff, center), max pool, no point update",
    ),
    "pointcnn": (
        _make_pointcnn,
        "concat coord embedding, learned KxK neighborhood transform + affine lift",
    ),
    "randla": (
        _make_randla,
        "MLP on (features, abs coords), 10-input concat embedding, attentive pooling, residual",
    ),
    "pointconv_eff": (
        _make_pointconv_eff,
        "group-then-MLP, decoupled dynamic/static weight matrices summed over neighbors",
    ),
    "kpconv": (
        _make_kpconv,
        "kernel-point correlation weights (13 points) applied through per-kernel matrices",
    ),
    "pointnext": (
        _make_pointnext,
        "group-then-MLP (1 layer) with relative coords, max pool, inverted-bottleneck residual",
    ),
    "pointmetabase": (
        _make_pointmetabase,
        "1-layer MLP-then-group, additive coord embedding, max pool, 2-layer residual update",
    ),
    "plain_max": (
        _make_plain_max,
        "1-layer MLP-then-group, no position embedding, max pool, 1-layer update",
    ),
    "plain_pp": (
        _make_plain_pp,
        "plain block with coordinate-repeat multiplicative weights and position pooling",
    ),
    "plain_pp_max": (
        _make_plain_pp_max,
        "plain block with coordinate-repeat weights but max pooling",
    ),
    "plain_ipe_max": (
        _make_plain_ipe_max,
        "plain block with relative coords concatenated into a group-then-MLP update",
    ),
    "plain_epe_max": (
        _make_plain_epe_max,
        "plain block plus additive coordinate embedding (max pool)",
    ),
    "plain_epe_pp": (
        _make_plain_epe_pp,
        "plain block plus additive coordinate embedding, position pooling",
    ),
}
for _name, (_n, _p, _inv) in _GRID_CONFIGS.items():
    _REGISTRY[_name] = (
        (lambda d, radius, k, _cfg=(_n, _p, _inv): _plain_epe(d, radius, k, *_cfg)),
        f"update-allocation grid entry: {_n}-layer neighbor MLP, {_p}-layer point MLP"
        + (", inverted bottleneck" if _inv else ""),
    )


def list_variants(channels: int = 48) -> tuple[VariantId, ...]:
    """All registered variants, sorted by name; stable across runs."""
    return tuple(VariantId(name, channels) for name in sorted(_REGISTRY))


def variant_description(name: str) -> str:
    if name not in _REGISTRY:
        raise RegistryError(f"unknown variant {name!r}")
    return _REGISTRY[name][1]


def make_block(variant, channels: int | None = None, *, radius: float = 0.1, k: int = 32) -> BlockSpec:
    """Build the BlockSpec for a registered variant at a channel width."""
    if isinstance(variant, VariantId):
        name = variant.name
        d = variant.channels if channels is None else channels
    else:
        name = str(variant)
        d = 48 if channels is None else channels
    if name not in _REGISTRY:
        raise RegistryError(
            f"unknown variant {name!r}; registered: {', '.join(sorted(_REGISTRY))}"
        )
    if d <= 0:
        raise RegistryError(f"channels must be positive, got {d}")
    return _REGISTRY[name][0](d, radius, k)
