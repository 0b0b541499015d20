"""Point-cloud data model, file IO, farthest point sampling, interpolation.

Formats:
  xyz_text      UTF-8 lines; optional first line "# d=<int>" declaring the
                number of feature columns (default 0); then per point three
                position floats followed by d feature floats.
  pmeta_binary  magic "PMETA01" + 1 pad byte, little-endian u32 N and d,
                then N*3 float32 positions and N*d float32 features.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .errors import EmptyCloudError, FormatError, ParameterError
from .neighbors import knn
from .numkernel import Tensor, as_tensor

_MAGIC = b"PMETA01\x00"
_FORMATS = ("xyz_text", "pmeta_binary")

# inverse-distance interpolation guard for coincident points
INTERP_EPS = 1e-8


@dataclass(frozen=True)
class PointCloud:
    """Immutable per-point positions (N,3) and features (N,d), float32.

    Features default to a copy of the positions so coordinate-only inputs
    work unmodified.
    """

    positions: np.ndarray
    features: np.ndarray

    def __init__(self, positions, features=None):
        positions = as_tensor(positions, "positions")
        if positions.ndim != 2 or positions.shape[1] != 3:
            raise ParameterError(f"positions must be (N,3), got {positions.shape}")
        if positions.shape[0] < 1:
            raise EmptyCloudError("a point cloud needs at least one point")
        if features is None:
            features = positions.copy()
        else:
            features = as_tensor(features, "features")
            if features.ndim != 2 or features.shape[0] != positions.shape[0]:
                raise ParameterError(
                    f"features rows {features.shape} must match positions {positions.shape}"
                )
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "features", features)

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def with_features(self, features) -> "PointCloud":
        return PointCloud(self.positions, features)

    def select(self, indices) -> "PointCloud":
        idx = np.asarray(indices, dtype=np.int64)
        return PointCloud(self.positions[idx], self.features[idx])


@dataclass(frozen=True)
class SampleIndex:
    """Indices into a parent cloud, unique, in selection order."""

    indices: np.ndarray  # (m,) int64
    parent_size: int

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        if len(np.unique(idx)) != len(idx):
            raise ParameterError("sample indices must be unique")
        if idx.min(initial=0) < 0 or (len(idx) and idx.max() >= self.parent_size):
            raise ParameterError("sample index out of parent range")
        object.__setattr__(self, "indices", idx)

    def __len__(self) -> int:
        return len(self.indices)


def load_cloud(path, format: str = None) -> PointCloud:
    """Load a cloud; the format is inferred from the suffix when omitted."""
    path = Path(path)
    if format is None:
        format = "pmeta_binary" if path.suffix in (".bin", ".pmeta") else "xyz_text"
    if format not in _FORMATS:
        raise FormatError(f"unknown format {format!r}, expected one of {_FORMATS}")
    if format == "xyz_text":
        return _load_text(path)
    return _load_binary(path)


def save_cloud(cloud: PointCloud, path, format: str = None) -> None:
    path = Path(path)
    if format is None:
        format = "pmeta_binary" if path.suffix in (".bin", ".pmeta") else "xyz_text"
    if format not in _FORMATS:
        raise FormatError(f"unknown format {format!r}, expected one of {_FORMATS}")
    if format == "xyz_text":
        _save_text(cloud, path)
    else:
        _save_binary(cloud, path)


def _load_text(path: Path) -> PointCloud:
    n_feat = 0
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    start = 0
    if lines and lines[0].startswith("#"):
        header = lines[0].lstrip("#").strip()
        if header.startswith("d="):
            try:
                n_feat = int(header[2:])
            except ValueError:
                raise FormatError(f"{path}: line 1: bad feature count {header!r}") from None
            if n_feat < 0:
                raise FormatError(f"{path}: line 1: negative feature count")
        start = 1
    want = 3 + n_feat
    for ln, line in enumerate(lines[start:], start=start + 1):
        if not line.strip():
            continue
        cols = line.split()
        if len(cols) != want:
            raise FormatError(f"{path}: line {ln}: expected {want} columns, got {len(cols)}")
        try:
            rows.append([float(c) for c in cols])
        except ValueError as exc:
            raise FormatError(f"{path}: line {ln}: {exc}") from None
    if not rows:
        raise EmptyCloudError(f"{path}: no points")
    data = np.asarray(rows, dtype=np.float32)
    positions = data[:, :3]
    features = data[:, 3:] if n_feat else None
    return PointCloud(positions, features)


def _save_text(cloud: PointCloud, path: Path) -> None:
    parts = [cloud.positions]
    header = ""
    if not (cloud.d == 3 and np.array_equal(cloud.features, cloud.positions)):
        header = f"# d={cloud.d}\n"
        parts.append(cloud.features)
    data = np.concatenate(parts, axis=1)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header)
        for row in data:
            fh.write(" ".join(f"{v:.6f}" for v in row) + "\n")


def _load_binary(path: Path) -> PointCloud:
    raw = Path(path).read_bytes()
    if len(raw) < 16 or raw[:8] != _MAGIC:
        raise FormatError(f"{path}: offset 0: bad magic, not a pmeta_binary file")
    n, d = struct.unpack_from("<II", raw, 8)
    if n == 0:
        raise EmptyCloudError(f"{path}: no points")
    need = 16 + 4 * n * (3 + d)
    if len(raw) != need:
        raise FormatError(f"{path}: offset {len(raw)}: expected {need} bytes total")
    flat = np.frombuffer(raw, dtype="<f4", offset=16)
    positions = flat[: 3 * n].reshape(n, 3)
    features = flat[3 * n :].reshape(n, d) if d else None
    return PointCloud(positions, features)


def _save_binary(cloud: PointCloud, path: Path) -> None:
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", cloud.n, cloud.d))
        fh.write(np.ascontiguousarray(cloud.positions, dtype="<f4").tobytes())
        fh.write(np.ascontiguousarray(cloud.features, dtype="<f4").tobytes())


def farthest_point_sample(cloud: PointCloud, m: int, start: int = 0) -> SampleIndex:
    """Greedy FPS: repeatedly take the point farthest from the selected set.

    Deterministic: the first pick is ``start`` and distance ties go to the
    smaller index.
    """
    if not 1 <= m <= cloud.n:
        raise ParameterError(f"m={m} out of range for {cloud.n} points")
    if not 0 <= start < cloud.n:
        raise ParameterError(f"start={start} out of range for {cloud.n} points")
    idx = kernels.active.fps(cloud.positions, m, start)
    return SampleIndex(idx, cloud.n)


def interpolate_features(coarse: PointCloud, fine_positions: Tensor, k: int = 3) -> Tensor:
    """Inverse-squared-distance interpolation of coarse features.

    Each fine point takes the weighted average of its k nearest coarse points
    with weights 1/(dist^2 + eps), normalized. A fine point coincident with a
    coarse point reproduces that coarse feature to ~1e-4.
    """
    fine_positions = as_tensor(fine_positions, "fine_positions")
    if k < 1 or k > coarse.n:
        raise ParameterError(f"k={k} out of range for {coarse.n} coarse points")
    table = knn(fine_positions, coarse.positions, k)
    gathered = coarse.positions[table.indices]  # (M, k, 3)
    diff = fine_positions[:, None, :].astype(np.float64) - gathered.astype(np.float64)
    d2 = diff[:, :, 0] ** 2 + diff[:, :, 1] ** 2 + diff[:, :, 2] ** 2
    w = 1.0 / (d2 + INTERP_EPS)
    w /= w.sum(axis=1, keepdims=True)
    feats = coarse.features[table.indices].astype(np.float64)  # (M, k, d)
    out = np.einsum("mk,mkd->md", w, feats)
    return out.astype(np.float32)
