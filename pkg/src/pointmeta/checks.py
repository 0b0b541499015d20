"""Runtime invariant suites behind the ``check`` CLI command.

Each suite returns (name, passed, detail) triples; everything is seeded so
the emitted report is byte-identical across runs. These are self-checks of
the library's structural invariants, not a replacement for the test suite.
"""

from __future__ import annotations

import dataclasses
import os
import tempfile

import numpy as np

from . import analysis, cloud as cloud_mod, kernels, metablock as mb, network as net_mod, zoo
from .neighbors import ball_query, build_grid, knn
from .numkernel import MlpSpec, apply_mlp, matmul, reduce, softmax_axis

CheckResult = tuple[str, bool, str]


def _ok(name: str, cond, detail: str = "") -> CheckResult:
    return (name, bool(cond), detail)


def _identity_mlp_weights(d: int, prefix: str = "") -> dict[str, np.ndarray]:
    return {
        f"{prefix}l0.weight": np.eye(d, dtype=np.float32),
        f"{prefix}l0.bias": np.zeros(d, dtype=np.float32),
        f"{prefix}l0.scale": np.ones(d, dtype=np.float32),
        f"{prefix}l0.shift": np.zeros(d, dtype=np.float32),
    }


def check_numkernel() -> list[CheckResult]:
    rng = np.random.default_rng(7)
    out = []

    x = rng.normal(size=(6, 32)).astype(np.float32)
    s = softmax_axis(x, axis=1, temperature=0.7)
    out.append(_ok("softmax sums to 1", np.all(np.abs(s.sum(axis=1) - 1) < 1e-6)))

    g = rng.normal(size=(50, 16)).astype(np.float32)
    g[np.arange(50), rng.integers(0, 16, 50)] += 1.0  # unique max, gap >= 0.1
    w = softmax_axis(g, axis=1, temperature=1e-4)
    soft_max = (w * g).sum(axis=1)
    out.append(
        _ok(
            "softmax limit reaches the max",
            np.max(np.abs(soft_max - g.max(axis=1))) <= 1e-4,
        )
    )

    spec = MlpSpec((8, 8))
    ident = _identity_mlp_weights(8)
    xs = np.abs(rng.normal(size=(10, 8))).astype(np.float32)
    out.append(_ok("identity mlp is identity", np.array_equal(apply_mlp(xs, spec, ident), xs)))

    v = rng.normal(size=(4, 9, 5)).astype(np.float32)
    perm = rng.permutation(9)
    out.append(
        _ok(
            "max reduce permutation invariant",
            np.array_equal(reduce(v, 1, "max"), reduce(v[:, perm], 1, "max")),
        )
    )

    a, b, c = (rng.normal(size=(8, 8)).astype(np.float32) for _ in range(3))
    out.append(
        _ok(
            "matmul associativity",
            np.max(np.abs(matmul(matmul(a, b), c) - matmul(a, matmul(b, c)))) < 1e-4,
        )
    )
    return out


def check_cloud() -> list[CheckResult]:
    rng = np.random.default_rng(11)
    out = []
    pts = rng.random((64, 3), dtype=np.float32)
    pc = cloud_mod.PointCloud(pts)

    sel = cloud_mod.farthest_point_sample(pc, 16, start=0).indices
    d2 = ((pts[None, :, :] - pts[:, None, :]) ** 2).sum(-1)
    mins = [d2[sel[:i], sel[i]].min() for i in range(1, 16)]
    out.append(_ok("fps min-distance non-increasing", all(a >= b - 1e-12 for a, b in zip(mins, mins[1:]))))

    fine = rng.random((20, 3), dtype=np.float32)
    feats = cloud_mod.interpolate_features(pc, fine, k=3)
    out.append(_ok("interpolation produces finite features", np.all(np.isfinite(feats))))
    coincident = cloud_mod.interpolate_features(pc, pts[:5], k=3)
    out.append(
        _ok("coincident point reproduces its feature", np.max(np.abs(coincident - pc.features[:5])) < 1e-4)
    )

    with tempfile.TemporaryDirectory() as tmp:
        p = os.path.join(tmp, "c.bin")
        cloud_mod.save_cloud(pc, p, "pmeta_binary")
        again = cloud_mod.load_cloud(p, "pmeta_binary")
        out.append(
            _ok(
                "binary round trip bit-identical",
                np.array_equal(again.positions, pc.positions)
                and np.array_equal(again.features, pc.features),
            )
        )
    return out


def check_neighbors() -> list[CheckResult]:
    rng = np.random.default_rng(13)
    out = []
    mismatches = 0
    for trial in range(30):
        n = int(rng.integers(5, 200))
        pts = (rng.random((n, 3)) * rng.choice([0.5, 1.0, 4.0])).astype(np.float32)
        if trial % 5 == 0:
            pts = (np.round(pts * 4) / 4).astype(np.float32)  # cell-boundary points
        if trial % 7 == 0 and n > 4:
            pts[: n // 3] = pts[0]  # coincident block
        radius = float(rng.uniform(0.05, 0.9))
        k = int(rng.integers(1, 12))
        cell = radius * float(rng.choice([0.3, 1.0, 2.5]))
        grid = build_grid(pts, cell)
        bt = ball_query(pts, pts, radius, k)
        gt = grid.ball_query(pts, radius, k)
        if not (
            np.array_equal(bt.indices, gt.indices)
            and np.array_equal(bt.valid_counts, gt.valid_counts)
        ):
            mismatches += 1
        kk = min(n, 5)
        if not np.array_equal(knn(pts, pts, kk).indices, grid.knn(pts, kk).indices):
            mismatches += 1
    out.append(_ok("grid equals brute force (30 randomized instances)", mismatches == 0))

    pts = rng.random((40, 3), dtype=np.float32)
    t = ball_query(pts, pts, 0.3, 8)
    pad_ok = all(
        np.all(t.indices[i, t.valid_counts[i] :] == t.indices[i, 0])
        for i in range(40)
        if t.valid_counts[i] > 0
    )
    out.append(_ok("ball padding repeats the first neighbor", pad_ok))

    tk = knn(pts, pts, 6)
    d2 = ((pts[:, None, :] - pts[tk.indices]) ** 2).sum(-1)
    out.append(_ok("knn distances non-decreasing", np.all(np.diff(d2, axis=1) >= -1e-12)))
    out.append(_ok("knn self is first neighbor", np.array_equal(tk.indices[:, 0], np.arange(40))))
    return out


def check_metablock() -> list[CheckResult]:
    rng = np.random.default_rng(17)
    out = []
    d, kk, n = 24, 8, 40

    grouped = rng.normal(size=(n, kk, d)).astype(np.float32)
    relpos = rng.normal(size=(n, kk, 3)).astype(np.float32)
    center = rng.normal(size=(n, d)).astype(np.float32)
    perm = rng.permutation(kk)

    worst = 0.0
    for kind in ("max", "mean", "sum"):
        spec = mb.AggregationSpec(kind)
        a = mb.aggregate(grouped, None, center, spec, {})
        b = mb.aggregate(grouped[:, perm], None, center, spec, {})
        worst = max(worst, float(np.max(np.abs(a - b))))
    out.append(_ok("pooling aggregation permutation invariant", worst <= 1e-5, f"max dev {worst:.2e}"))

    vspec = mb.AggregationSpec(
        "vsa", mlp_q=MlpSpec((d, d), with_norm=False, activation="none"),
        mlp_k=MlpSpec((d, d), with_norm=False, activation="none"),
        mlp_w=MlpSpec((d, d), with_norm=False, activation="none"),
    )
    w = {}
    for p in ("agg.q.", "agg.k.", "agg.w."):
        w[p + "l0.weight"] = rng.normal(scale=0.3, size=(d, d)).astype(np.float32)
        w[p + "l0.bias"] = np.zeros(d, dtype=np.float32)
    a, mask = mb.aggregate(grouped, None, center, vspec, w, return_mask=True)
    b = mb.aggregate(grouped[:, perm], None, center, vspec, w)
    out.append(_ok("vsa permutation invariant", np.max(np.abs(a - b)) <= 1e-5))
    out.append(
        _ok("attention mask normalized per channel", np.max(np.abs(mask.values.sum(axis=1) - 1)) < 1e-5)
    )

    # order commutation: shared pointwise MLP, no coordinate inputs
    pts = rng.random((n, 3), dtype=np.float32)
    feats = rng.normal(size=(n, d)).astype(np.float32)
    pc = cloud_mod.PointCloud(pts, feats)
    wshared = {
        "nu.l0.weight": rng.normal(scale=0.3, size=(d, d)).astype(np.float32),
        "nu.l0.bias": rng.normal(scale=0.1, size=d).astype(np.float32),
        "nu.l0.scale": np.ones(d, dtype=np.float32),
        "nu.l0.shift": np.zeros(d, dtype=np.float32),
        "pu.l0.weight": np.eye(d, dtype=np.float32),
        "pu.l0.bias": np.zeros(d, dtype=np.float32),
        "pu.l0.scale": np.ones(d, dtype=np.float32),
        "pu.l0.shift": np.zeros(d, dtype=np.float32),
    }
    mk = lambda order: mb.BlockSpec(
        in_dim=d,
        neighbor_update=mb.NeighborUpdateSpec(order, MlpSpec((d, d)), "ball", 0.3, kk),
        aggregation=mb.AggregationSpec("max"),
        point_update=mb.PointUpdateSpec(mlp=MlpSpec((d, d))),
    )
    fa = mb.run_block(pc, mk("mlp_before_group"), wshared).features
    fb = mb.run_block(pc, mk("group_before_mlp"), wshared).features
    out.append(
        _ok("neighbor-update order commutes", np.max(np.abs(fa - fb)) <= 1e-5,
            f"max dev {np.max(np.abs(fa - fb)):.2e}")
    )
    return out


def check_zoo() -> list[CheckResult]:
    out = []
    rng = np.random.default_rng(19)
    names = [v.name for v in zoo.list_variants()]
    out.append(_ok("registry has 16+ variants", len(names) >= 16, f"{len(names)} registered"))
    ok = True
    for name in names:
        spec = zoo.make_block(name, 48, radius=0.25, k=8)
        if mb.block_dims(spec)["out"] != 48:
            ok = False
    out.append(_ok("all variants build and preserve width", ok))

    pts = rng.random((64, 3), dtype=np.float32)
    feats = rng.normal(size=(64, 48)).astype(np.float32)
    pc = cloud_mod.PointCloud(pts, feats)
    finite = True
    for name in names:
        spec = zoo.make_block(name, 48, radius=0.25, k=8)
        w = _zoo_weights(spec, rng)
        f = mb.run_block(pc, spec, w).features
        if not np.all(np.isfinite(f)):
            finite = False
    out.append(_ok("every variant forward finite on a seeded cloud", finite))

    a = zoo.make_block("plain_epe_max", 48)
    bmod = zoo.make_block("pointmetabase", 48)
    reduced = dataclasses.replace(
        bmod, point_update=mb.PointUpdateSpec(mlp=MlpSpec((48, 48)), residual=False)
    )
    out.append(_ok("plain_epe_max is the reduced base block", a == reduced))
    return out


def _zoo_weights(spec, rng) -> dict[str, np.ndarray]:
    w = {}
    for name, shape in mb.block_param_shapes(spec).items():
        if name.endswith(".weight"):
            w[name] = rng.normal(scale=0.2, size=shape).astype(np.float32)
        elif name.endswith(".scale"):
            w[name] = np.ones(shape, dtype=np.float32)
        else:
            w[name] = np.zeros(shape, dtype=np.float32)
    return w


def check_network() -> list[CheckResult]:
    rng = np.random.default_rng(23)
    out = []
    cfg = net_mod.family_config("S")
    net = net_mod.init_weights(net_mod.build_network(cfg), seed=42)
    pts = rng.random((300, 3), dtype=np.float32)
    pc = cloud_mod.PointCloud(pts)
    y1 = net_mod.forward(net, pc)
    y2 = net_mod.forward(net, pc)
    out.append(_ok("forward shape matches input count", y1.shape == (300, 32), str(y1.shape)))
    out.append(_ok("forward deterministic", np.array_equal(y1, y2)))

    counts = analysis.stage_point_counts(300, cfg.stride)
    out.append(
        _ok("stage point counts follow ceil division", counts == [300, 75, 19, 5, 2], str(counts))
    )

    p_net = net_mod.count_params(net).total_params
    p_ana = analysis.count_params(net).total_params
    out.append(_ok("two parameter walks agree", p_net == p_ana, f"{p_net} vs {p_ana}"))

    fams = [
        analysis.count_params(net_mod.build_network(net_mod.family_config(f))).total_params
        for f in ("S", "L", "XL", "XXL")
    ]
    out.append(_ok("family strictly increasing", all(a < b for a, b in zip(fams, fams[1:])), str(fams)))
    return out


def check_analysis() -> list[CheckResult]:
    out = []
    ok = all(analysis.verify_k_reduction(17, 100, k, 2) == k for k in (1, 8, 16, 32, 64))
    out.append(_ok("neighbor-update order ratio equals k", ok))

    net = net_mod.build_network(net_mod.family_config("L"))
    f1 = analysis.count_flops(net, 4096).total_flops
    f2 = analysis.count_flops(net, 16384).total_flops
    out.append(_ok("flops monotone in point count", f2 > f1))

    rep = analysis.compare_variants(["plain_max", "plain_epe_max"], net_mod.family_config("L"), 4096)
    out.append(
        _ok(
            "coordinate embedding adds flops but few params",
            rep[1].total_flops > rep[0].total_flops
            and rep[1].total_params < rep[0].total_params * 1.05,
        )
    )
    return out


SUITES = {
    "numkernel": check_numkernel,
    "cloud": check_cloud,
    "neighbors": check_neighbors,
    "metablock": check_metablock,
    "zoo": check_zoo,
    "network": check_network,
    "analysis": check_analysis,
}


def run_suites(names=("all",), stream=None) -> bool:
    """Run the named suites, print one line per check; True if all passed."""
    if stream is None:
        import sys

        stream = sys.stdout
    selected = list(SUITES) if "all" in names else list(names)
    all_ok = True
    for suite in selected:
        if suite not in SUITES:
            raise KeyError(f"unknown suite {suite!r}; have {', '.join(SUITES)} or all")
        for name, passed, detail in SUITES[suite]():
            all_ok &= passed
            status = "PASS" if passed else "FAIL"
            suffix = f"  ({detail})" if detail else ""
            print(f"[{status}] {suite}: {name}{suffix}", file=stream)
    return all_ok
