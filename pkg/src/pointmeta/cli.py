"""Command-line front end.

Commands: analyze, compare, infer, check, bench. Exit codes: 0 success,
1 usage error, 2 data/spec error. All randomness derives from --seed
(default 42, overridable by the PMETA_SEED environment variable).
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from . import analysis, checks, kernels, network as net_mod, zoo
from .cloud import PointCloud, load_cloud, save_cloud
from .errors import PointMetaError
from .report import to_tsv


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse exits 2 by default; we want 1
        raise UsageError(message)


def _default_seed() -> int:
    env = os.environ.get("PMETA_SEED", "").strip()
    return int(env) if env else 42


def build_parser() -> _Parser:
    parser = _Parser(prog="pointmeta", description=__doc__, allow_abbrev=False)
    parser.add_argument("--seed", type=int, default=_default_seed())
    sub = parser.add_subparsers(dest="command", required=True)

    def add_macro_flags(p):
        p.add_argument("--variant", default="pointmetabase")
        p.add_argument("--family", default="L", choices=sorted(net_mod.FAMILIES))
        p.add_argument("--points", type=int, default=16384)
        p.add_argument("--mode", default="macs", choices=analysis.MODES)
        p.add_argument("--stem-channels", type=int, default=0,
                       help="override the family stem width (0 = family default)")
        p.add_argument("--classes", type=int, default=0,
                       help="append a per-point logits head with this many classes")
        p.add_argument("--include-search", action="store_true",
                       help="include neighbor-search cost rows in totals")
        p.add_argument("--records", action="store_true",
                       help="emit per-layer key=value records instead of the summary table")
        p.add_argument("--output", default="",
                       help="write the table to this path instead of standard output")

    p_an = sub.add_parser("analyze", help="parameter/FLOPs table for one variant")
    add_macro_flags(p_an)

    p_cmp = sub.add_parser("compare", help="cost table across variants at one macro config")
    p_cmp.add_argument("--variants", required=True, help="comma-separated variant names")
    add_macro_flags(p_cmp)

    p_inf = sub.add_parser("infer", help="run a forward pass over a cloud file")
    p_inf.add_argument("--variant", default="pointmetabase")
    p_inf.add_argument("--family", default="S", choices=sorted(net_mod.FAMILIES))
    p_inf.add_argument("--input", required=True)
    p_inf.add_argument("--weights", default="",
                       help="PMWT01 weights file; omitted = seeded untrained init "
                            "(outputs good for shape/determinism checks only)")
    p_inf.add_argument("--output", required=True)
    p_inf.add_argument("--classes", type=int, default=0)
    p_inf.add_argument("--stem-channels", type=int, default=0)

    p_chk = sub.add_parser("check", help="run invariant self-check suites")
    p_chk.add_argument("--suite", default="all",
                       help=f"comma list of {', '.join(checks.SUITES)} or all")

    p_bench = sub.add_parser("bench", help="brute force vs grid neighbor search timing")
    p_bench.add_argument("--points", default="4096,16384",
                         help="comma-separated point counts")
    p_bench.add_argument("--radius", type=float, default=0.0,
                         help="ball radius (0 = choose for ~k mean neighbors)")
    p_bench.add_argument("--k", type=int, default=32)
    p_bench.add_argument("--reps", type=int, default=3)
    p_bench.add_argument("--backend", default="active",
                         help="active, python, compiled, or both")

    p_ls = sub.add_parser("variants", help="list registered block variants")
    p_ls.add_argument("--channels", type=int, default=48)
    return parser


def _make_config(args) -> net_mod.NetworkConfig:
    cfg = net_mod.family_config(args.family, variant=args.variant)
    if getattr(args, "stem_channels", 0):
        cfg = replace(cfg, stem_channels=args.stem_channels)
    if getattr(args, "classes", 0):
        cfg = replace(cfg, head="per_point_logits", num_classes=args.classes)
    return cfg


def _emit(text: str, path: str):
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _cmd_analyze(args) -> int:
    cfg = _make_config(args)
    net = net_mod.build_network(cfg)
    rep = analysis.count_flops(net, args.points, args.mode, args.include_search)
    text = "\n".join(rep.records()) if args.records else to_tsv([rep])
    _emit(text, args.output)
    return 0


def _cmd_compare(args) -> int:
    names = [v for v in args.variants.split(",") if v]
    cfg = _make_config(args)
    reps = analysis.compare_variants(names, cfg, args.points, args.mode, args.include_search)
    if args.records:
        text = "\n".join(line for rep in reps for line in rep.records())
    else:
        text = to_tsv(reps)
    _emit(text, args.output)
    return 0


def _cmd_infer(args) -> int:
    cloud = load_cloud(args.input)
    cfg = _make_config(args)
    cfg = replace(cfg, in_channels=cloud.d)
    net = net_mod.build_network(cfg)
    if args.weights:
        net_mod.load_weights(net, args.weights)
    else:
        net_mod.init_weights(net, seed=args.seed)
    out = net_mod.forward(net, cloud)
    save_cloud(PointCloud(cloud.positions, out), args.output, "pmeta_binary")
    print(f"wrote {out.shape[0]} points x {out.shape[1]} channels to {args.output}")
    return 0


def _cmd_check(args) -> int:
    suites = tuple(s for s in args.suite.split(",") if s)
    try:
        ok = checks.run_suites(suites)
    except KeyError as exc:
        raise UsageError(str(exc)) from None
    return 0 if ok else 2


def _cmd_bench(args) -> int:
    try:
        counts = [int(x) for x in args.points.split(",") if x]
    except ValueError:
        raise UsageError(f"--points must be a comma list of integers, got {args.points!r}")
    backends = kernels.available_backends() if args.backend == "both" else (args.backend,)
    radius = args.radius if args.radius > 0 else None
    print("backend\tmethod\tn_points\tradius\tk\tmedian_ms\tspeedup")
    for backend in backends:
        results = analysis.bench_neighbors(
            counts, radius, args.k, args.reps, seed=args.seed, backend=backend
        )
        for r in results:
            print(
                f"{backend}\t{r.method}\t{r.n_points}\t{r.radius:.4f}\t{r.k}"
                f"\t{r.median_s * 1e3:.3f}\t{r.speedup:.2f}"
            )
    return 0


def _cmd_variants(args) -> int:
    for vid in zoo.list_variants(args.channels):
        print(f"{vid.name}\t{zoo.variant_description(vid.name)}")
    return 0


_COMMANDS = {
    "analyze": _cmd_analyze,
    "compare": _cmd_compare,
    "infer": _cmd_infer,
    "check": _cmd_check,
    "bench": _cmd_bench,
    "variants": _cmd_variants,
}


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    np.random.seed(args.seed % (2**32))  # legacy consumers; library code uses default_rng
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except PointMetaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    raise SystemExit(run_cli())


if __name__ == "__main__":
    main()
