"""Command-line front end.

Subcommands: ``run``, ``scan``, ``generate``, ``score`` and ``baseline``.
Non-convergence is a result, not an error, so it still exits with 0.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import io as mlio
from .generators import (DirichletDcsbmParams, DsbmParams, InfeasibleParameters, dirichlet_dcsbm,
                         dsbm, planted_partition_sbm)
from .graph import NetworkError, build_network
from .louvain import greedy_multilayer_louvain
from .metrics import ami, layer_averaged_ami, modularity
from .model_selection import DEFAULT_THRESHOLD
from .scan import PipelineOptions, run_grid, run_pipeline

logger = logging.getLogger("multilayer_bp")


def _float_list(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _beta(text):
    if text == "auto":
        return None
    try:
        return float(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError("--beta takes a number or 'auto'") from exc


def _add_network_args(p, required=True):
    p.add_argument("--intra", required=required, help="intralayer edge list (layer,u,v,weight)")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--inter", help="interlayer edge list (node,layer_a,layer_b,weight)")
    src.add_argument("--coupling", choices=["temporal", "multiplex", "none"],
                     help="coupling preset used instead of --inter")
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--omega", type=float, default=1.0)


def _add_pipeline_args(p):
    p.add_argument("--qmax", type=int, default=4)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iters", type=int, default=None,
                   help="iteration cap (default: 300x the trivial-convergence count)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--spectral-init", action="store_true")
    p.add_argument("--align", choices=["auto", "temporal", "multiplex", "off"], default="auto")
    p.add_argument("--collapse-threshold", type=float, default=DEFAULT_THRESHOLD)
    p.add_argument("--q-mode", choices=["paired", "qmax"], default="paired")
    p.add_argument("--wide-scan", action="store_true",
                   help="also try evenly spaced beta values around the stability grid")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--format", choices=["csv", "json"], default="json")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="multilayer-bp",
                                     description="Multilayer modularity belief propagation")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="one pipeline over the beta grid")
    _add_network_args(p)
    _add_pipeline_args(p)
    p.add_argument("--beta", type=_beta, default=None, help="inverse temperature or 'auto'")

    p = sub.add_parser("scan", help="pipelines over a gamma x omega grid")
    _add_network_args(p)
    _add_pipeline_args(p)
    p.add_argument("--beta", type=_beta, default=None)
    p.add_argument("--gammas", type=_float_list, required=True)
    p.add_argument("--omegas", type=_float_list, required=True)
    p.add_argument("--n-jobs", type=int, default=1)

    p = sub.add_parser("generate", help="sample a benchmark network")
    p.add_argument("model", choices=["sbm", "dsbm", "dirichlet-dcsbm"])
    p.add_argument("--n", type=int, required=True, help="nodes (per layer)")
    p.add_argument("--layers", type=int, default=1)
    p.add_argument("--q", type=int, default=2)
    p.add_argument("--c", type=float, default=4.0, help="mean degree")
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--eta", type=float, default=1.0, help="label persistence (dsbm)")
    p.add_argument("--theta", type=float, default=1.0, help="Dirichlet concentration")
    p.add_argument("--p", type=float, default=0.9, help="label copy probability")
    p.add_argument("--mu", type=float, default=0.5)
    p.add_argument("--eta-k", type=float, default=-2.0)
    p.add_argument("--k-min", type=float, default=3.0)
    p.add_argument("--k-max", type=float, default=30.0)
    p.add_argument("--coupling", choices=["temporal", "multiplex", "block"], default="temporal")
    p.add_argument("--n-blocks", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".")

    p = sub.add_parser("score", help="compare partitions or score one")
    what = p.add_mutually_exclusive_group(required=True)
    what.add_argument("--ami", nargs=2, metavar=("A", "B"))
    what.add_argument("--layer-ami", nargs=2, metavar=("A", "B"))
    what.add_argument("--modularity", metavar="PARTITION")
    _add_network_args(p, required=False)

    p = sub.add_parser("baseline", help="greedy Louvain-style modularity optimiser")
    _add_network_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--iterate", action="store_true")
    p.add_argument("--random-moves", action="store_true")
    p.add_argument("--restarts", type=int, default=1)
    p.add_argument("--out", default=".")
    return parser


def _load(args):
    return mlio.read_network(args.intra, inter=args.inter,
                             coupling=None if args.inter else (args.coupling or "none"))


def _options(args) -> PipelineOptions:
    return PipelineOptions(seed=args.seed, tol=args.tol, max_iters=args.max_iters,
                           init="spectral" if args.spectral_init else "uniform",
                           align=args.align, collapse_threshold=args.collapse_threshold,
                           q_mode=args.q_mode, wide_scan=args.wide_scan,
                           betas=None if args.beta is None else (args.beta,))


def _emit(path_stem: Path, records, fmt):
    if fmt == "json":
        path_stem.with_suffix(".json").write_text(json.dumps(records, indent=2) + "\n",
                                                  encoding="utf-8")
    else:
        mlio.write_table(path_stem.with_suffix(".csv"),
                         records if isinstance(records, list) else [records])


def cmd_run(args) -> int:
    net = _load(args)
    result = run_pipeline(net, args.gamma, args.omega, args.qmax, _options(args))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = result.summary()
    _emit(out / "summary", summary, args.format)
    mlio.write_partition(out / "partition.csv", net, result.retrieval_partition)
    mlio.write_marginals(out / "marginals.csv", net, result.marginals)
    print(json.dumps(summary))
    return 0


def cmd_scan(args) -> int:
    net = _load(args)
    cells = run_grid(net, args.gammas, args.omegas, args.qmax, _options(args), n_jobs=args.n_jobs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = [c.row() for c in cells]
    _emit(out / "grid", rows, args.format)
    for r in rows:
        print(json.dumps(r))
    return 0


def cmd_generate(args) -> int:
    if args.model == "sbm":
        net, planted = planted_partition_sbm(args.n, args.q, args.c, args.epsilon, seed=args.seed)
    elif args.model == "dsbm":
        net, planted = dsbm(DsbmParams(args.n, args.layers, args.q, args.c, args.epsilon,
                                       args.eta, args.seed))
    else:
        net, planted = dirichlet_dcsbm(DirichletDcsbmParams(
            args.n, args.layers, args.q, args.theta, args.p, args.mu, args.eta_k, args.k_min,
            args.k_max, args.coupling, args.n_blocks, args.seed))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    mlio.write_network(net, out / "intra.csv", out / "inter.csv")
    mlio.write_partition(out / "planted.csv", net, planted)
    print(f"wrote {out / 'intra.csv'}, {out / 'inter.csv'}, {out / 'planted.csv'}")
    return 0


def cmd_score(args) -> int:
    if args.ami or args.layer_ami:
        a_path, b_path = args.ami or args.layer_ami
        a = mlio.read_partition(a_path)
        b = mlio.read_partition(b_path)
        if len(a) != len(b):
            raise NetworkError("partitions cover different numbers of node-layers")
        if args.ami:
            value = ami(a, b)
        else:
            size = mlio.read_size_hint(a_path)
            if size is None:
                raise NetworkError(f"{a_path}: layer AMI needs the n_nodes/n_layers comment")
            value = layer_averaged_ami(build_network([], "none", *size), a, b)
    else:
        if not args.intra:
            raise NetworkError("--modularity needs --intra")
        net = _load(args)
        part = mlio.read_partition(args.modularity, net.n_nodes, net.n_layers)
        value = modularity(net, part, args.gamma, args.omega)
    print(repr(float(value)))
    return 0


def cmd_baseline(args) -> int:
    net = _load(args)
    part, q = greedy_multilayer_louvain(net, args.gamma, args.omega, seed=args.seed,
                                        iterate=args.iterate, random_moves=args.random_moves,
                                        n_restarts=args.restarts)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    mlio.write_partition(out / "louvain_partition.csv", net, part)
    print(json.dumps({"modularity": q, "q_effective": part.q_effective}))
    return 0


COMMANDS = {"run": cmd_run, "scan": cmd_scan, "generate": cmd_generate, "score": cmd_score,
            "baseline": cmd_baseline}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (OSError, NetworkError, InfeasibleParameters, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
