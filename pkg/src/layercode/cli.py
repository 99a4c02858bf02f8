"""Command line front end: ensemble, threshold, memory, fit."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import bench, csscode

VARIANTS = ("original-termination", "extended")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0, help="master seed")
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument(
        "--decoder", choices=bench.DECODERS, default="cluster"
    )
    parser.add_argument("--K", type=int, default=1, help="surface code spacing")
    parser.add_argument("--variant", choices=VARIANTS, default="original-termination")
    parser.add_argument(
        "--candidates", type=int, default=2000, help="codes sampled per n"
    )
    parser.add_argument("--keep", type=int, default=20, help="codes kept per n")
    parser.add_argument("--out", type=Path, required=True)


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="layercode",
        description="Layer code experiments: ensembles, thresholds, memory times.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    ens = sub.add_parser("ensemble", help="sample and rank input codes")
    ens.add_argument("--n", type=int, nargs="+", required=True)
    _add_common(ens)

    thr = sub.add_parser("threshold", help="failure rate vs physical error rate")
    thr.add_argument("--n", type=int, nargs="+", required=True)
    thr.add_argument("--p", type=float, nargs="+", required=True)
    thr.add_argument("--trials", type=int, default=2000, help="trials per (n, p)")
    _add_common(thr)

    mem = sub.add_parser("memory", help="thermal memory time vs n and beta")
    mem.add_argument("--n", type=int, nargs="+", required=True)
    mem.add_argument("--beta", type=float, nargs="+", required=True)
    mem.add_argument("--trials", type=int, default=40, help="trials per (n, beta)")
    mem.add_argument("--t-max", type=float, default=1e7, dest="t_max")
    mem.add_argument("--growth", type=float, default=0.1)
    _add_common(mem)

    fit = sub.add_parser("fit", help="fit a memory aggregate CSV")
    fit.add_argument("input", type=Path, help="aggregate CSV from `memory`")
    fit.add_argument("--out", type=Path, required=True)
    return parser


def _spec(args, kind: str) -> bench.ExperimentSpec:
    return bench.ExperimentSpec(
        kind=kind,
        n_grid=tuple(args.n),
        p_grid=tuple(getattr(args, "p", ()) or ()),
        beta_grid=tuple(getattr(args, "beta", ()) or ()),
        trials=getattr(args, "trials", 1),
        candidates=args.candidates,
        keep=args.keep,
        seed=args.seed,
        workers=args.workers,
        decoder=args.decoder,
        K=args.K,
        variant=args.variant,
        t_max=getattr(args, "t_max", 1e7),
        growth=getattr(args, "growth", 0.1),
    )


def _run_ensemble(args) -> None:
    payload = {"seed": args.seed, "candidates": args.candidates, "keep": args.keep}
    codes_out = {}
    for n in args.n:
        rng = np.random.default_rng((args.seed, bench._TAG_ENSEMBLE, n))
        codes = bench.build_ensemble(n, args.candidates, args.keep, rng)
        entries = []
        for code in codes:
            dx, dz = csscode.min_distance(code)
            entries.append(
                {
                    "hash": bench.code_hash(code),
                    "hx": code.hx.to_dense().tolist(),
                    "hz": code.hz.to_dense().tolist(),
                    "k": code.k,
                    "dx": dx,
                    "dz": dz,
                }
            )
        codes_out[str(n)] = entries
    payload["codes"] = codes_out
    args.out.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(f"wrote {args.out}")


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = _parser().parse_args(argv)
    if args.command == "ensemble":
        _run_ensemble(args)
    elif args.command == "threshold":
        rows = bench.threshold_experiment(_spec(args, "threshold"), args.out)
        print(f"wrote {args.out} ({len(rows)} points)")
    elif args.command == "memory":
        rows = bench.memory_experiment(_spec(args, "memory"), args.out)
        print(f"wrote {args.out} ({len(rows)} points)")
    elif args.command == "fit":
        report = bench.fit_report(args.input)
        args.out.write_text(report.to_json() + "\n")
        print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
