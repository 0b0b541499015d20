"""Neighbor grouping: KNN, ball query, feature-space KNN, and a uniform grid.

The plain module functions define the semantics (brute force over all pairs);
``GridIndex`` accelerates ball query and KNN over 3D positions and is required
to return results identical to the brute-force definitions, index for index.

Conventions:
  - knn orders neighbors by (distance, reference index); valid_counts == k.
  - ball query returns in-radius points in ascending reference-index order,
    capped at k_cap; rows are padded by repeating the first neighbor, and an
    empty ball falls back to the single nearest reference point with
    valid_counts 0 so callers can detect it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ParameterError
from .numkernel import Tensor, as_tensor


@dataclass(frozen=True)
class NeighborTable:
    """Per-point neighbor index sets with the repeat-first padding convention."""

    indices: np.ndarray  # (N, K) int64
    valid_counts: np.ndarray  # (N,) int64, true in-range counts (<= K)
    k_cap: int

    def __post_init__(self):
        if self.indices.ndim != 2 or self.indices.shape[1] != self.k_cap:
            raise ParameterError(
                f"indices shape {self.indices.shape} inconsistent with k_cap {self.k_cap}"
            )
        if self.valid_counts.shape != (self.indices.shape[0],):
            raise ParameterError("valid_counts length must match indices rows")

    @property
    def n_queries(self) -> int:
        return self.indices.shape[0]


def _as_points(x, name: str) -> np.ndarray:
    arr = as_tensor(x, name)
    if arr.ndim != 2:
        raise ParameterError(f"{name} must be 2-D, got shape {arr.shape}")
    return arr


def _resolve_empty_balls(idx, counts, query, reference, backend):
    empty = np.flatnonzero(counts == 0)
    if len(empty):
        nearest = backend.brute_knn(np.ascontiguousarray(query[empty]), reference, 1)
        idx[empty] = nearest  # broadcast single column over all K slots
    return idx


def knn(query: Tensor, reference: Tensor, k: int) -> NeighborTable:
    """k nearest reference points per query point, ties to the smaller index.

    When query and reference are the same set, each point is its own first
    neighbor (distance zero sorts first).
    """
    query = _as_points(query, "query")
    reference = _as_points(reference, "reference")
    if not 1 <= k <= reference.shape[0]:
        raise ParameterError(f"k={k} out of range for {reference.shape[0]} reference points")
    backend = kernels.active
    if query.shape[1] == 3 and reference.shape[1] == 3:
        idx = backend.brute_knn(query, reference, k)
    else:
        idx = backend.brute_knn_generic(query, reference, k)
    counts = np.full(query.shape[0], k, dtype=np.int64)
    return NeighborTable(idx, counts, k)


def ball_query(query: Tensor, reference: Tensor, radius: float, k_cap: int) -> NeighborTable:
    """Up to k_cap reference points within ``radius``, in index scan order."""
    query = _as_points(query, "query")
    reference = _as_points(reference, "reference")
    if not radius > 0:
        raise ParameterError(f"radius must be positive, got {radius}")
    if k_cap < 1:
        raise ParameterError(f"k_cap must be >= 1, got {k_cap}")
    backend = kernels.active
    idx, counts = backend.brute_ball(query, reference, float(radius), k_cap)
    idx = _resolve_empty_balls(idx, counts, query, reference, backend)
    return NeighborTable(idx, counts, k_cap)


def feature_knn(features: Tensor, k: int) -> NeighborTable:
    """knn of a point set against itself with distances in feature space."""
    features = _as_points(features, "features")
    if not 1 <= k <= features.shape[0]:
        raise ParameterError(f"k={k} out of range for {features.shape[0]} points")
    idx = kernels.active.brute_knn_generic(features, features, k)
    counts = np.full(features.shape[0], k, dtype=np.int64)
    return NeighborTable(idx, counts, k)


@dataclass(frozen=True)
class GridIndex:
    """Uniform grid over reference positions; cell = floor(position / cell_size).

    Stores a CSR layout: point ids grouped by linearized cell key, ascending
    id inside each cell. Queries through the index return exactly the
    brute-force results.
    """

    cell_size: float
    reference: np.ndarray  # (N, 3) float32
    mins: np.ndarray  # (3,) int64 occupied cell minima
    dims: np.ndarray  # (3,) int64 occupied extent in cells
    cell_keys: np.ndarray  # (C,) int64 sorted linearized keys
    starts: np.ndarray  # (C+1,) int64 CSR offsets into order
    order: np.ndarray = field(repr=False)  # (N,) int64 point ids grouped by cell

    @property
    def n_cells(self) -> int:
        return len(self.cell_keys)

    @property
    def occupancy(self) -> dict[tuple[int, int, int], np.ndarray]:
        """Mapping from integer cell coordinates to point-id buckets."""
        out = {}
        dy, dz = int(self.dims[1]), int(self.dims[2])
        for c in range(self.n_cells):
            key = int(self.cell_keys[c])
            cx, rem = divmod(key, dy * dz)
            cy, cz = divmod(rem, dz)
            coord = (cx + int(self.mins[0]), cy + int(self.mins[1]), cz + int(self.mins[2]))
            out[coord] = self.order[int(self.starts[c]) : int(self.starts[c + 1])].copy()
        return out

    def reach(self, radius: float) -> int:
        """Cells to scan in each direction for a ball query of ``radius``."""
        return int(np.ceil(float(radius) / self.cell_size))

    def ball_query(self, query: Tensor, radius: float, k_cap: int) -> NeighborTable:
        query = _as_points(query, "query")
        if not radius > 0:
            raise ParameterError(f"radius must be positive, got {radius}")
        if k_cap < 1:
            raise ParameterError(f"k_cap must be >= 1, got {k_cap}")
        backend = kernels.active
        idx, counts = backend.grid_ball(
            query, self.reference, float(radius), k_cap,
            self.cell_size, self.mins, self.dims, self.cell_keys, self.starts, self.order,
        )
        idx = _resolve_empty_balls(idx, counts, query, self.reference, backend)
        return NeighborTable(idx, counts, k_cap)

    def knn(self, query: Tensor, k: int) -> NeighborTable:
        query = _as_points(query, "query")
        if not 1 <= k <= self.reference.shape[0]:
            raise ParameterError(
                f"k={k} out of range for {self.reference.shape[0]} reference points"
            )
        idx = kernels.active.grid_knn(
            query, self.reference, k,
            self.cell_size, self.mins, self.dims, self.cell_keys, self.starts, self.order,
        )
        counts = np.full(query.shape[0], k, dtype=np.int64)
        return NeighborTable(idx, counts, k)


def build_grid(reference: Tensor, cell_size: float) -> GridIndex:
    """Bucket reference points into a uniform grid for accelerated queries."""
    reference = _as_points(reference, "reference")
    if not cell_size > 0:
        raise ParameterError(f"cell_size must be positive, got {cell_size}")
    cells = np.floor(reference.astype(np.float64) / float(cell_size)).astype(np.int64)
    mins = cells.min(axis=0)
    maxs = cells.max(axis=0)
    dims = maxs - mins + 1
    if int(dims[0]) * int(dims[1]) * int(dims[2]) >= 2**62:
        raise ParameterError(
            f"cell_size {cell_size} is too small for the cloud extent (grid of {dims} cells)"
        )
    key = ((cells[:, 0] - mins[0]) * dims[1] + (cells[:, 1] - mins[1])) * dims[2] + (
        cells[:, 2] - mins[2]
    )
    order = np.argsort(key, kind="stable").astype(np.int64)  # ascending id within a cell
    cell_keys, first = np.unique(key[order], return_index=True)
    starts = np.concatenate([first, [len(order)]]).astype(np.int64)
    return GridIndex(
        cell_size=float(cell_size),
        reference=reference,
        mins=mins,
        dims=dims,
        cell_keys=cell_keys.astype(np.int64),
        starts=starts,
        order=order,
    )


# Grids pay off once brute force would touch this many point pairs.
_AUTO_GRID_PAIRS = 262144


def ball_query_auto(query: Tensor, reference: Tensor, radius: float, k_cap: int) -> NeighborTable:
    """Ball query choosing grid acceleration for large instances.

    Results are identical to ``ball_query`` by the GridIndex contract.
    """
    query = _as_points(query, "query")
    reference = _as_points(reference, "reference")
    if query.shape[0] * reference.shape[0] >= _AUTO_GRID_PAIRS:
        return build_grid(reference, float(radius)).ball_query(query, radius, k_cap)
    return ball_query(query, reference, radius, k_cap)
