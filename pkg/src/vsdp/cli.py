"""Command-line entry point: ``vsdp sweep | demod | selftest``."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

import numpy as np


def _sweep(args) -> int:
    from .ber import SweepConfig, emit_csv, emit_plot, resolve_threads

    cfg = SweepConfig.load(args.config)
    over = {"threads": resolve_threads(args.threads, cfg.threads)}
    if args.seed is not None:
        over["seed"] = args.seed
    if args.trials is not None:
        over["trials"] = args.trials
    cfg = replace(cfg, **over)
    out_csv = args.out_csv or cfg.out_csv
    if not out_csv:
        raise ValueError("no CSV output path: pass --out-csv or set out_csv in the config")
    out_plot = args.out_plot or cfg.out_plot

    from .ber import run_sweep

    def progress(cell):
        for r in cell:
            print(f"{r.preset} {r.ebn0_db:g} dB {r.detector}: {r.errors}/{r.bits} ber={r.ber:.3g} "
                  f"iters={r.iters:.1f} failures={r.failures}", file=sys.stderr)

    records = run_sweep(cfg, progress=None if args.quiet else progress)
    emit_csv(records, out_csv)
    if out_plot:
        emit_plot(out_csv, out_plot)
    return 0


def _demod(args) -> int:
    from .volterra import SolverOptions, demodulate_ml, demodulate_sdp, load_system

    system = load_system(args.system)
    opts = SolverOptions(gap_rel=args.gap_rel, max_iter=args.max_iter)
    r = demodulate_sdp(system, opts)
    fmt = " ".join(f"{int(v):+d}" for v in r.d_hat)
    print(f"sdp   d_hat = {fmt}")
    print(f"      iterations = {r.iterations}  gap = {r.gap:.6g}  f = {r.f_final:.6g}  converged = {r.converged}")
    if args.ml:
        d_ml, res = demodulate_ml(system)
        print(f"ml    d_hat = {' '.join(f'{int(v):+d}' for v in d_ml)}")
        print(f"      residual = {res:.6g}  agree = {bool(np.all(d_ml == r.d_hat))}")
    return 0


def _selftest(args) -> int:
    from .selftest import run_all

    return 0 if run_all(verbose=True) else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vsdp", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("sweep", help="Monte Carlo BER sweep from a config file")
    s.add_argument("config")
    s.add_argument("--out-csv")
    s.add_argument("--out-plot")
    s.add_argument("--seed", type=int)
    s.add_argument("--threads", type=int, help="worker processes (overrides VSDP_THREADS)")
    s.add_argument("--trials", type=int, help="override trials per point")
    s.add_argument("-q", "--quiet", action="store_true")
    s.set_defaults(func=_sweep)

    d = sub.add_parser("demod", help="demodulate one block stored as a system file")
    d.add_argument("system")
    d.add_argument("--gap-rel", type=float, default=1e-3)
    d.add_argument("--max-iter", type=int, default=300)
    d.add_argument("--ml", action="store_true", help="also run the exhaustive detector")
    d.set_defaults(func=_demod)

    t = sub.add_parser("selftest", help="run the built-in invariant checks")
    t.set_defaults(func=_selftest)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"vsdp {args.cmd}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
