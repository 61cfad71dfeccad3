"""Draw example impulse responses and the RMS delay-spread spread of each preset.

    python3 scripts/channel_profiles.py --out results/channels.png
"""
import argparse
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from vsdp.uwb import PRESETS, sample_channel


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/channels.png")
    ap.add_argument("--draws", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=3)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)

    fig, axes = plt.subplots(2, 2, figsize=(9, 6))
    for col, name in enumerate(("CM1", "CM6")):
        ch = sample_channel(name, rng)
        ax = axes[0, col]
        ax.vlines(ch.delays * 1e9, 0, ch.gains, linewidth=0.6)
        ax.set_title(f"{name}: one draw, {ch.delays.size} paths, rms {ch.rms_delay * 1e9:.1f} ns")
        ax.set_xlabel("delay (ns)")
        ax.set_ylabel("gain")

        rms = np.array([sample_channel(name, rng).rms_delay for _ in range(args.draws)]) * 1e9
        ax = axes[1, col]
        ax.hist(rms, bins=40, color="0.6")
        ax.axvline(PRESETS[name].rms_delay_target, color="k", linestyle="--", label="preset target")
        ax.axvline(rms.mean(), color="C3", label=f"mean {rms.mean():.1f} ns")
        ax.set_xlabel("rms delay spread (ns)")
        ax.legend(fontsize=8)
        print(f"{name}: mean rms {rms.mean():.2f} ns, target {PRESETS[name].rms_delay_target} ns")
    fig.tight_layout()
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(args.out, dpi=120)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
