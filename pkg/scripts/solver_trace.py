"""Convergence of the solver on one simulated block: gap and objective per iteration.

    python3 scripts/solver_trace.py --ebn0 14 --out results/trace.png
"""
import argparse
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from vsdp import sdp
from vsdp.uwb import BlockConfig, sample_channel, simulate_block
from vsdp.volterra import build_objective


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--preset", default="CM1")
    ap.add_argument("--ebn0", type=float, default=14.0)
    ap.add_argument("--iters", type=int, default=300)
    ap.add_argument("--seed", type=int, default=5)
    ap.add_argument("--out", default="results/trace.png")
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    cfg = BlockConfig(ebn0_db=args.ebn0)
    d = np.where(rng.random(cfg.nb) < 0.5, -1, 1)
    blk = simulate_block(cfg, sample_channel(args.preset, rng), d, rng)
    obj = build_objective(blk.system(cfg))

    fig, ax = plt.subplots(figsize=(6, 4))
    for policy in ("line_search", "schedule"):
        _, tr = sdp.solve(obj, gap_tol=1e-12, max_iter=args.iters, policy=policy)
        k = [r.k for r in tr.records]
        ax.semilogy(k, [r.g for r in tr.records], label=f"gap, {policy}")
        print(f"{policy}: {tr.iterations} iterations, final gap {tr.final_gap:.3g}, f {tr.records[-1].f:.6g}")
    ax.set_xlabel("iteration")
    ax.set_ylabel("duality gap")
    ax.legend()
    fig.tight_layout()
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(args.out, dpi=120)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
