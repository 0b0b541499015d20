"""Composable point-cloud block engine.

Blocks decompose into four meta functions (neighbor update, position
embedding, neighbor aggregation, point update); named variants in the zoo
instantiate the classic local-aggregation designs, the network module stacks
them into the PointMetaBase encoder/decoder family, and the analysis module
accounts parameters and FLOPs analytically.
"""

from .analysis import (
    BenchResult,
    bench_neighbors,
    compare_variants,
    count_flops,
    verify_k_reduction,
)
from .cloud import PointCloud, SampleIndex, farthest_point_sample, interpolate_features, load_cloud, save_cloud
from .kernels import ACTIVE_BACKEND, available_backends
from .metablock import (
    AggregationSpec,
    AttentionMask,
    BlockSpec,
    NeighborUpdateSpec,
    PointUpdateSpec,
    PositionEmbedSpec,
    PositionEmbedding,
    aggregate,
    neighbor_update,
    point_update,
    position_embed,
    run_block,
)
from .neighbors import GridIndex, NeighborTable, ball_query, build_grid, feature_knn, knn
from .network import (
    FAMILIES,
    Network,
    NetworkConfig,
    build_network,
    count_params,
    family_config,
    forward,
    init_weights,
    load_weights,
    save_weights,
)
from .numkernel import MlpSpec, Tensor, apply_mlp, concat, matmul, reduce, softmax_axis
from .report import CostReport, CostRow, to_tsv
from .zoo import VariantId, list_variants, make_block, variant_description

__version__ = "0.1.0"
