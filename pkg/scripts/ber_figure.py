"""Run a paired SDP/ML BER sweep from a config file and draw the curves.

    python3 scripts/ber_figure.py configs/paired.cfg --out results/paired
"""
import argparse
import sys
import time
from dataclasses import replace
from pathlib import Path

from vsdp.ber import SweepConfig, emit_csv, emit_plot, resolve_threads, run_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config")
    ap.add_argument("--out", default=None, help="output stem; .csv and .svg are appended")
    ap.add_argument("--trials", type=int)
    ap.add_argument("--threads", type=int)
    args = ap.parse_args()

    cfg = SweepConfig.load(args.config)
    cfg = replace(cfg, threads=resolve_threads(args.threads, cfg.threads))
    if args.trials:
        cfg = replace(cfg, trials=args.trials)
    stem = Path(args.out) if args.out else Path("results") / Path(args.config).stem

    t0 = time.perf_counter()

    def progress(cell):
        line = "  ".join(f"{r.detector} {r.ber:.4f}" for r in cell)
        print(f"{cell[0].preset} {cell[0].ebn0_db:5.1f} dB  {line}  ({time.perf_counter() - t0:.0f} s)", flush=True)

    records = run_sweep(cfg, progress=progress)
    emit_csv(records, stem.with_suffix(".csv"))
    title = f"{', '.join(cfg.presets)}: {cfg.trials} blocks of {cfg.nb} bits per point"
    emit_plot(stem.with_suffix(".csv"), stem.with_suffix(".svg"), title=title)
    print(f"wrote {stem.with_suffix('.csv')} and {stem.with_suffix('.svg')}")


if __name__ == "__main__":
    sys.exit(main())
