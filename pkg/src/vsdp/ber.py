"""Monte Carlo bit-error-rate sweeps: config parsing, paired trials, CSV and SVG output.

Every trial owns a random stream seeded from ``(master_seed, trial_index)``,
so trial t draws the same channel, symbols and unit-variance noise sequence
at every Eb/N0 point and for every detector. Comparisons across detectors are
paired, and comparisons across Eb/N0 use common random numbers.
"""
from __future__ import annotations

import csv
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .uwb import TAU_M, BlockConfig, preset_name, sample_channel, simulate_block
from .volterra import DemodError, SolverOptions, demodulate_ml, demodulate_sdp

log = logging.getLogger(__name__)

DETECTORS = ("sdp", "ml")
CSV_HEADER = ("preset", "ebn0_db", "detector", "bits", "errors", "ber", "iters", "gap", "seed")
PLOT_FLOOR = 1e-6
BATCH = 25  # trials per work unit; early abort is checked at trial granularity


class ConfigError(ValueError):
    pass


def _floats(v: str) -> tuple:
    return tuple(float(x) for x in v.split(",") if x.strip())


def _words(v: str) -> tuple:
    return tuple(x.strip() for x in v.split(",") if x.strip())


@dataclass(frozen=True)
class SweepConfig:
    """One sweep. Times are in ns and rates in GHz, as in the config file."""
    presets: tuple = ("CM1",)
    ebn0_db: tuple = (8.0, 10.0, 12.0, 14.0, 16.0, 18.0, 20.0)
    trials: int = 1000
    seed: int = 1
    detectors: tuple = DETECTORS
    nb: int = 10
    npulse: int = 4
    ts_ns: float = 8.0
    tau_m_ns: float = TAU_M * 1e9
    code: tuple = (1, 1, -1, 1)
    fs_ghz: float = 80.0
    guard_ns: float = 250.0
    rx_band_ghz: Optional[tuple] = None
    gap_rel: float = 1e-3
    max_iter: int = 300
    policy: str = "line_search"
    max_errors: int = 200  # per cell, once every detector has reached it; 0 disables
    threads: int = 1
    out_csv: Optional[str] = None
    out_plot: Optional[str] = None

    def __post_init__(self):
        try:
            object.__setattr__(self, "presets", tuple(preset_name(p) for p in self.presets))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        object.__setattr__(self, "detectors", tuple(d.lower() for d in self.detectors))
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.ebn0_db:
            raise ConfigError("ebn0_db list is empty")
        if not self.presets:
            raise ConfigError("presets list is empty")
        if not self.detectors or any(d not in DETECTORS for d in self.detectors):
            raise ConfigError(f"detectors must be a nonempty subset of {DETECTORS}")
        if len(set(self.detectors)) != len(self.detectors):
            raise ConfigError("duplicate detector")
        if self.max_errors < 0 or self.threads < 1 or self.max_iter < 1 or not self.gap_rel > 0:
            raise ConfigError("max_errors >= 0, threads >= 1, max_iter >= 1 and gap_rel > 0 required")
        self.block_config(self.ebn0_db[0])  # surfaces BlockConfig errors early

    def block_config(self, ebn0_db: float) -> BlockConfig:
        band = None if self.rx_band_ghz is None else tuple(f * 1e9 for f in self.rx_band_ghz)
        try:
            return BlockConfig(nb=self.nb, npulse=self.npulse, ts=self.ts_ns * 1e-9, tau_m=self.tau_m_ns * 1e-9,
                               code=self.code, fs=self.fs_ghz * 1e9, ebn0_db=ebn0_db,
                               guard=self.guard_ns * 1e-9, rx_band=band)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def solver_options(self) -> SolverOptions:
        return SolverOptions(gap_rel=self.gap_rel, max_iter=self.max_iter, policy=self.policy)

    @classmethod
    def parse(cls, text: str) -> "SweepConfig":
        """Parse ``key = value`` lines; ``#`` starts a comment, lists are comma separated."""
        conv = {
            "presets": _words, "ebn0_db": _floats, "detectors": _words,
            "trials": int, "seed": int, "nb": int, "npulse": int, "max_iter": int,
            "max_errors": int, "threads": int,
            "ts_ns": float, "tau_m_ns": float, "fs_ghz": float, "guard_ns": float, "gap_rel": float,
            "code": lambda v: tuple(int(float(x)) for x in v.split(",")),
            "rx_band_ghz": lambda v: None if v.strip().lower() in ("", "none", "off") else _floats(v),
            "policy": str.strip, "out_csv": str.strip, "out_plot": str.strip,
        }
        kw = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value'")
            key, val = (s.strip() for s in line.split("=", 1))
            if key not in conv:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            if key in kw:
                raise ConfigError(f"line {lineno}: duplicate key {key!r}")
            try:
                kw[key] = conv[key](val)
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from exc
        if "rx_band_ghz" in kw and kw["rx_band_ghz"] is not None and len(kw["rx_band_ghz"]) != 2:
            raise ConfigError("rx_band_ghz needs two values: low, high")
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "SweepConfig":
        with open(path) as fh:
            return cls.parse(fh.read())

    def dumps(self) -> str:
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                if f.name == "rx_band_ghz":
                    out.append(f"{f.name} = none")
                continue
            if isinstance(v, tuple):
                v = ", ".join(repr(x) if isinstance(x, float) else str(x) for x in v)
            out.append(f"{f.name} = {v}")
        return "\n".join(out) + "\n"


@dataclass
class BerRecord:
    preset: str
    ebn0_db: float
    detector: str
    bits: int
    errors: int
    ber: float
    iters: float  # mean solver iterations (0 for ml)
    gap: float  # mean final duality gap (0 for ml)
    seed: int
    failures: int = field(default=0, compare=False)  # solver failures inside the cell

    def __post_init__(self):
        if not 0 <= self.errors <= self.bits:
            raise ValueError("need 0 <= errors <= bits")

    @property
    def sort_key(self):
        return (self.preset, self.ebn0_db, self.detector)


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, trial]))


def run_trial(cfg: SweepConfig, preset: str, ebn0_db: float, trial: int) -> dict:
    """One block through every requested detector on identical (z, B).

    Returns ``{detector: (errors, iterations, gap, failed)}``.
    """
    rng = trial_rng(cfg.seed, trial)
    channel = sample_channel(preset, rng)
    d = np.where(rng.random(cfg.nb) < 0.5, 1, -1)
    bc = cfg.block_config(ebn0_db)
    block = simulate_block(bc, channel, d, rng)
    system = block.system(bc)
    out = {}
    for det in cfg.detectors:
        if det == "ml":
            d_hat, _ = demodulate_ml(system)
            out[det] = (int(np.sum(d_hat != d)), 0, 0.0, False)
            continue
        try:
            r = demodulate_sdp(system, cfg.solver_options())
            out[det] = (int(np.sum(r.d_hat != d)), r.iterations, r.gap, False)
        except DemodError as exc:
            p = exc.partial
            if p is None:
                out[det] = (cfg.nb, 0, math.nan, True)
            else:
                out[det] = (int(np.sum(p.d_hat != d)), p.iterations, p.gap, True)
    return out


def _run_batch(args):
    cfg, preset, ebn0_db, start, stop = args
    return [run_trial(cfg, preset, ebn0_db, t) for t in range(start, stop)]


def _cell(cfg: SweepConfig, preset: str, ebn0_db: float, pool) -> list:
    errors = {d: 0 for d in cfg.detectors}
    iters = {d: 0.0 for d in cfg.detectors}
    gaps = {d: 0.0 for d in cfg.detectors}
    fails = {d: 0 for d in cfg.detectors}
    done = 0
    nxt = 0
    wave = BATCH * (cfg.threads if pool is not None else 1)
    stop = False
    while nxt < cfg.trials and not stop:
        jobs = [(cfg, preset, ebn0_db, s, min(s + BATCH, cfg.trials))
                for s in range(nxt, min(nxt + wave, cfg.trials), BATCH)]
        nxt = jobs[-1][4]
        results = pool.map(_run_batch, jobs) if pool is not None else map(_run_batch, jobs)
        # accumulate in trial order so the abort point does not depend on scheduling
        for batch in results:
            for res in batch:
                if stop:
                    break
                for d, (e, it, g, failed) in res.items():
                    errors[d] += e
                    iters[d] += it
                    gaps[d] += g
                    fails[d] += failed
                done += 1
                if cfg.max_errors and all(errors[d] >= cfg.max_errors for d in cfg.detectors):
                    stop = True
    records = []
    for d in cfg.detectors:
        bits = done * cfg.nb
        if fails[d]:
            log.warning("%s %.6g dB %s: %d solver failures in %d trials", preset, ebn0_db, d, fails[d], done)
        records.append(BerRecord(preset, float(ebn0_db), d, bits, errors[d], errors[d] / bits,
                                 iters[d] / done, gaps[d] / done, cfg.seed, fails[d]))
    return records


def run_sweep(cfg: SweepConfig, progress=None) -> list:
    """Every (preset, Eb/N0, detector) cell, sorted. Deterministic for a fixed seed."""
    records = []
    pool = ProcessPoolExecutor(max_workers=cfg.threads) if cfg.threads > 1 else None
    try:
        for preset in cfg.presets:
            for e in cfg.ebn0_db:
                cell = _cell(cfg, preset, e, pool)
                records.extend(cell)
                if progress is not None:
                    progress(cell)
    finally:
        if pool is not None:
            pool.shutdown()
    return sorted(records, key=lambda r: r.sort_key)


def resolve_threads(flag: Optional[int], cfg_threads: int = 1) -> int:
    """--threads flag, then the VSDP_THREADS environment variable, then the config."""
    if flag is not None:
        n = flag
    elif os.environ.get("VSDP_THREADS", "").strip():
        try:
            n = int(os.environ["VSDP_THREADS"])
        except ValueError as exc:
            raise ConfigError(f"VSDP_THREADS must be an integer, got {os.environ['VSDP_THREADS']!r}") from exc
    else:
        n = cfg_threads
    if n < 1:
        raise ConfigError("thread count must be >= 1")
    return n


# output ----------------------------------------------------------------------

def _g(x: float) -> str:
    return f"{x:.6g}"


def format_csv(records) -> str:
    lines = [",".join(CSV_HEADER)]
    for r in sorted(records, key=lambda r: r.sort_key):
        lines.append(",".join([r.preset, _g(r.ebn0_db), r.detector, str(r.bits), str(r.errors),
                               _g(r.ber), _g(r.iters), _g(r.gap), str(r.seed)]))
    return "\n".join(lines) + "\n"


def _parent(path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)


def emit_csv(records, path) -> None:
    _parent(path)
    with open(path, "w", newline="") as fh:
        fh.write(format_csv(records))


def read_csv(path) -> list:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != CSV_HEADER:
            raise ValueError(f"{path}: unexpected CSV header {header!r}")
        out = []
        for lineno, row in enumerate(reader, 2):
            if not row:
                continue
            if len(row) != len(CSV_HEADER):
                raise ValueError(f"{path}:{lineno}: expected {len(CSV_HEADER)} fields")
            try:
                out.append(BerRecord(row[0], float(row[1]), row[2], int(row[3]), int(row[4]),
                                     float(row[5]), float(row[6]), float(row[7]), int(row[8])))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
    return out


def emit_plot(csv_path, out_path, title: Optional[str] = None) -> None:
    """Semilog BER curves, one series per (preset, detector), written as SVG.

    Cells with zero errors sit on the PLOT_FLOOR line with hollow markers.
    The output is byte-stable for a given matplotlib version.
    """
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    records = read_csv(csv_path)
    series = {}
    for r in records:
        series.setdefault((r.preset, r.detector), []).append(r)
    with matplotlib.rc_context({"svg.hashsalt": "vsdp", "svg.fonttype": "path"}):
        fig, ax = plt.subplots(figsize=(6.0, 4.5))
        floor_hits = False
        for (preset, det), rs in sorted(series.items()):
            rs.sort(key=lambda r: r.ebn0_db)
            x = np.array([r.ebn0_db for r in rs])
            y = np.array([r.ber for r in rs])
            zero = y <= 0
            yc = np.where(zero, PLOT_FLOOR, y)
            style = "-" if det == "sdp" else "--"
            (line,) = ax.semilogy(x, yc, style, marker="o", label=f"{preset} {det.upper()}")
            line.set_gid(f"series-{preset}-{det}")
            if zero.any():
                floor_hits = True
                m = ax.semilogy(x[zero], yc[zero], linestyle="none", marker="v", markersize=9,
                                markerfacecolor="white", color=line.get_color())[0]
                m.set_gid(f"floor-{preset}-{det}")
        if floor_hits:
            ax.axhline(PLOT_FLOOR, color="0.6", linewidth=0.8, linestyle=":")
            ax.annotate("zero errors (clipped)", xy=(0.02, 0.03), xycoords="axes fraction", fontsize=8, color="0.4")
        ax.set_xlabel("Eb/N0 (dB)")
        ax.set_ylabel("BER")
        ax.set_ylim(bottom=PLOT_FLOOR / 2)
        ax.grid(True, which="both", alpha=0.3)
        if series:
            ax.legend()
        if title:
            ax.set_title(title)
        fig.tight_layout()
        _parent(out_path)
        fig.savefig(out_path, format="svg", metadata={"Date": None})
        plt.close(fig)
