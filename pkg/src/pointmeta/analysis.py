"""Analytic FLOPs/parameter accounting, variant comparison tables, the
neighbor-update order verifier, and the neighbor-search benchmark harness.

Counting conventions (no execution involved):
  - an affine layer over R rows costs R*d_in*d_out MACs; "flops2x" doubles
    the multiplies and adds R*d_out bias additions;
  - MLPs applied after grouping run over N*K rows, before grouping over N;
  - reductions over K neighbors cost R*K*d;
  - softmax costs 5 ops per element;
  - neighbor search is accounted separately and excluded from totals unless
    requested (comparability across variants).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from . import kernels, zoo
from .errors import ParameterError
from .metablock import BlockSpec, block_dims, nu_concat_width
from .network import N_STAGES, Network, NetworkConfig, build_network
from .numkernel import MlpSpec
from .report import CostReport, CostRow, to_tsv  # noqa: F401  (re-exported)

MODES = ("macs", "flops2x")

SOFTMAX_OPS_PER_ELEMENT = 5
KERNEL_INFLUENCE_OPS = 5  # distance + clamp per (neighbor, kernel point)
SEARCH_OPS_PER_PAIR = 4


def _check_mode(mode: str) -> str:
    if mode not in MODES:
        raise ParameterError(f"counting mode must be one of {MODES}, got {mode!r}")
    return mode


def _affine_flops(rows: int, d_in: int, d_out: int, mode: str, bias: bool = True) -> int:
    macs = rows * d_in * d_out
    if mode == "macs":
        return macs
    return 2 * macs + (rows * d_out if bias else 0)


def _mlp_flops(spec: Optional[MlpSpec], rows: int, mode: str) -> int:
    if spec is None:
        return 0
    return sum(
        _affine_flops(rows, a, b, mode)
        for a, b in zip(spec.layer_dims[:-1], spec.layer_dims[1:])
    )


def _mlp_params(spec: Optional[MlpSpec]) -> int:
    return spec.param_count() if spec is not None else 0


def _block_rows(spec: BlockSpec, n: int, mode: str) -> list[tuple[str, int, int]]:
    """(suffix, params, flops) rows for one block run at n points."""
    nu, pe, agg, pu = (
        spec.neighbor_update,
        spec.position_embed,
        spec.aggregation,
        spec.point_update,
    )
    dims = block_dims(spec)
    k = nu.k
    out: list[tuple[str, int, int]] = []

    nu_rows = n if nu.order == "mlp_before_group" else n * k
    out.append(("nu", _mlp_params(nu.mlp), _mlp_flops(nu.mlp, nu_rows, mode)))

    if pe.kind == "epe":
        out.append(("pe", _mlp_params(pe.mlp), _mlp_flops(pe.mlp, n * k, mode)))
    elif pe.kind == "pp":
        out.append(("pe", 0, 0))  # repetition of coordinates, no arithmetic

    d = dims["grouped"]
    dm = dims["merged"]
    merge_cost = n * k * dm if (pe.kind in ("epe", "pp")) else 0
    a_params = 0
    if agg.kind in ("max", "mean", "sum"):
        a_flops = merge_cost + n * k * dm
    elif agg.kind == "position_pool":
        a_flops = n * k * dm + n * k * dm  # multiplicative weights + mean
        if pe.kind == "epe":
            a_flops += merge_cost
    elif agg.kind == "vsa":
        a_params = _mlp_params(agg.mlp_q) + _mlp_params(agg.mlp_k) + _mlp_params(agg.mlp_w)
        a_flops = (
            _mlp_flops(agg.mlp_q, n, mode)
            + _mlp_flops(agg.mlp_k, n * k, mode)
            + _mlp_flops(agg.mlp_w, n * k, mode)
            + 2 * n * k * d  # query-key differences and embedding add
            + SOFTMAX_OPS_PER_ELEMENT * n * k * d
            + 2 * n * k * d  # mask apply + sum
        )
    elif agg.kind == "attentive_pool":
        a_params = _mlp_params(agg.mlp_score)
        a_flops = (
            _mlp_flops(agg.mlp_score, n * k, mode)
            + merge_cost
            + SOFTMAX_OPS_PER_ELEMENT * n * k * dm
            + 2 * n * k * dm
        )
    elif agg.kind == "xconv":
        a_params = _mlp_params(agg.mlp_x) + (k * dm) * agg.out_dim + agg.out_dim
        a_flops = (
            _mlp_flops(agg.mlp_x, n, mode)
            + merge_cost
            + _affine_flops(n * k, k, dm, mode, bias=False)  # apply the KxK transform
            + _affine_flops(n, k * dm, agg.out_dim, mode)  # flattened affine lift
        )
    elif agg.kind == "eff_pointconv":
        a_params = _mlp_params(agg.mlp_m) + agg.out_dim * (agg.d_mid * dm)
        a_flops = (
            _mlp_flops(agg.mlp_m, n * k, mode)
            + merge_cost
            + _affine_flops(n * k, dm, agg.d_mid, mode, bias=False)  # outer products
            + _affine_flops(n, agg.d_mid * dm, agg.out_dim, mode, bias=False)
        )
    else:  # kpconv
        L = agg.n_kernel_points
        a_params = L * dm * agg.out_dim
        a_flops = (
            merge_cost
            + KERNEL_INFLUENCE_OPS * n * k * L
            + _affine_flops(n * k, L, dm, mode, bias=False)  # per-kernel gathers
            + _affine_flops(n, L * dm, agg.out_dim, mode, bias=False)
        )
    out.append(("agg", a_params, a_flops))

    pu_params = _mlp_params(pu.mlp)
    pu_flops = _mlp_flops(pu.mlp, n, mode)
    if dims["needs_residual_proj"]:
        pu_params += spec.in_dim * dims["out"] + dims["out"]
        pu_flops += _affine_flops(n, spec.in_dim, dims["out"], mode)
    out.append(("pu", pu_params, pu_flops))
    return out


def stage_point_counts(n_points: int, stride: int) -> list[int]:
    counts = [n_points]
    for _ in range(N_STAGES):
        counts.append(math.ceil(counts[-1] / stride))
    return counts


def count_flops(
    net: Network,
    n_points: int = 16384,
    mode: str = "macs",
    include_search: bool = False,
) -> CostReport:
    """Analytic cost of one forward pass at ``n_points`` input points."""
    mode = _check_mode(mode)
    cfg = net.cfg
    if n_points < net.min_points():
        raise ParameterError(
            f"n_points must be >= stride^{N_STAGES} = {net.min_points()}"
        )
    counts = stage_point_counts(n_points, cfg.stride)
    widths = cfg.stage_widths
    rows: list[CostRow] = []

    rows.append(
        CostRow("stem", net.stem.param_count(), _mlp_flops(net.stem, counts[0], mode))
    )

    for s, plan in enumerate(net.stages, start=1):
        n_prev, m = counts[s - 1], counts[s]
        red = plan.reduction
        rows.append(
            CostRow(
                f"enc{s}.sa.nu",
                red.mlp.param_count(),
                _mlp_flops(red.mlp, n_prev, mode),  # applied before sampling/grouping
            )
        )
        rows.append(
            CostRow(
                f"enc{s}.sa.pe",
                red.pe_mlp.param_count(),
                _mlp_flops(red.pe_mlp, m * red.k, mode),
            )
        )
        agg_flops = m * red.k * widths[s] * 2  # additive merge + max reduce
        rows.append(CostRow(f"enc{s}.sa.agg", 0, agg_flops))
        if include_search:
            rows.append(
                CostRow(f"enc{s}.sa.search", 0, SEARCH_OPS_PER_PAIR * m * n_prev)
            )
        for j, bspec in enumerate(plan.blocks):
            for suffix, p, f in _block_rows(bspec, m, mode):
                rows.append(CostRow(f"enc{s}.b{j}.{suffix}", p, f))
            if include_search:
                rows.append(
                    CostRow(f"enc{s}.b{j}.search", 0, SEARCH_OPS_PER_PAIR * m * m)
                )

    for i, dspec in enumerate(net.decoder):
        s = N_STAGES - i
        n_fine, n_coarse = counts[s - 1], counts[s]
        interp_flops = n_fine * 3 * widths[s]  # weighted sum of 3 coarse features
        rows.append(CostRow(f"dec{s}.interp", 0, interp_flops))
        rows.append(
            CostRow(f"dec{s}.mlp", dspec.param_count(), _mlp_flops(dspec, n_fine, mode))
        )
        if include_search:
            rows.append(
                CostRow(f"dec{s}.search", 0, SEARCH_OPS_PER_PAIR * n_fine * n_coarse)
            )

    if net.head is not None:
        rows.append(
            CostRow("head", net.head.param_count(), _mlp_flops(net.head, counts[0], mode))
        )

    return CostReport(
        tuple(rows),
        counting_mode=mode,
        n_points=n_points,
        k=cfg.k,
        strides=(cfg.stride,) * N_STAGES,
        label=cfg.block_variant,
    )


def count_params(net: Network) -> CostReport:
    """Independent parameter walk over the architecture specs (no weights)."""
    report = count_flops(net, n_points=net.min_points(), mode="macs")
    rows = tuple(CostRow(r.path, r.params, 0) for r in report.rows if r.params)
    return replace(report, rows=rows, n_points=0)


def verify_k_reduction(d: int, n: int, k: int, l: int) -> float:
    """Counted FLOPs ratio of the two neighbor-update orders for one MLP.

    The same l-layer d->d MLP runs over n*k rows after grouping but only n
    rows before grouping, so the ratio is exactly k for any (d, n, l).
    """
    if min(d, n, k, l) < 1:
        raise ParameterError("d, n, k, l must all be positive")
    spec = MlpSpec(tuple([d] * (l + 1)))
    after_group = _mlp_flops(spec, n * k, "macs")
    before_group = _mlp_flops(spec, n, "macs")
    return after_group / before_group


def compare_variants(
    ids: Sequence,
    cfg_template: Optional[NetworkConfig] = None,
    n_points: int = 16384,
    mode: str = "macs",
    include_search: bool = False,
) -> list[CostReport]:
    """One CostReport per variant, all at the identical macro configuration."""
    cfg_template = cfg_template or NetworkConfig()
    reports = []
    for vid in ids:
        name = vid.name if isinstance(vid, zoo.VariantId) else str(vid)
        zoo.variant_description(name)  # raises RegistryError for unknown names
        cfg = replace(cfg_template, block_variant=name)
        net = build_network(cfg)
        reports.append(count_flops(net, n_points, mode, include_search))
    return reports


@dataclass(frozen=True)
class BenchResult:
    method: str
    n_points: int
    radius: float
    k: int
    times: tuple[float, ...]  # raw wall times per repetition, seconds
    median_s: float
    speedup: float  # vs brute force; 1.0 for the brute rows


def radius_for_mean_neighbors(n_points: int, k: int) -> float:
    """Radius giving ~k neighbors per query in a unit cube of n uniform points."""
    return (3.0 * k / (4.0 * math.pi * n_points)) ** (1.0 / 3.0)


def bench_neighbors(
    n_points: Iterable[int],
    radius: Optional[float] = None,
    k: int = 32,
    repetitions: int = 3,
    seed: int = 42,
    backend: str = "active",
) -> list[BenchResult]:
    """Median wall time of brute-force vs grid ball query on seeded clouds.

    Grid results are compared with brute force before any timing; a mismatch
    raises, so reported speedups are always for identical outputs. Grid
    timings include building the grid.
    """
    if repetitions < 3:
        raise ParameterError("repetitions must be >= 3")
    from .neighbors import build_grid  # local import to keep module load light

    impl = kernels.get_backend(backend)
    results = []
    for n in n_points:
        rng = np.random.default_rng(seed)
        pts = rng.random((n, 3), dtype=np.float32)
        r = float(radius) if radius is not None else radius_for_mean_neighbors(n, k)
        grid = build_grid(pts, r)

        b_idx, b_cnt = impl.brute_ball(pts, pts, r, k)
        g_idx, g_cnt = impl.grid_ball(
            pts, pts, r, k, grid.cell_size, grid.mins, grid.dims,
            grid.cell_keys, grid.starts, grid.order,
        )
        if not (np.array_equal(b_idx, g_idx) and np.array_equal(b_cnt, g_cnt)):
            raise AssertionError(
                f"grid ball query disagrees with brute force at n={n}; refusing to time"
            )

        brute_times = []
        for _ in range(repetitions):
            t0 = time.perf_counter()
            impl.brute_ball(pts, pts, r, k)
            brute_times.append(time.perf_counter() - t0)
        grid_times = []
        for _ in range(repetitions):
            t0 = time.perf_counter()
            g = build_grid(pts, r)
            impl.grid_ball(
                pts, pts, r, k, g.cell_size, g.mins, g.dims, g.cell_keys, g.starts, g.order
            )
            grid_times.append(time.perf_counter() - t0)

        brute_med = float(np.median(brute_times))
        grid_med = float(np.median(grid_times))
        results.append(
            BenchResult("brute", n, r, k, tuple(brute_times), brute_med, 1.0)
        )
        results.append(
            BenchResult(
                "grid", n, r, k, tuple(grid_times), grid_med, brute_med / grid_med
            )
        )
    return results
