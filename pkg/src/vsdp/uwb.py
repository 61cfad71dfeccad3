"""Waveform-level simulation of a differential UWB link.

Monocycle pulses are differentially encoded, passed through a multipath
channel, corrupted by white Gaussian noise and fed to an autocorrelation
receiver that integrates y(t) y(t - D) over one window per data pulse.

Internally all times are in nanoseconds, so correlator outputs and the B[m]
matrices carry units of amplitude^2 * ns. ``BlockConfig`` and
``ChannelRealization`` store SI seconds/Hz.

The B[m] matrices are built from the same sampled per-pulse channel
responses that synthesise the received waveform, and the correlator is a
fixed trapezoid rule, so the noiseless output equals the Volterra quadratic
form up to floating-point rounding.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.signal import firwin

from .volterra import VolterraSystem, make_system

TAU_M = 0.2877e-9
PULSE_SUPPORT = 5.0  # monocycle evaluated on |t| <= 5 tau_m; beyond that it is below 1e-60


def monocycle(t, tau_m):
    """Second-derivative Gaussian monocycle [1 - 4 pi (t/tau)^2] exp(-2 pi (t/tau)^2)."""
    if tau_m <= 0:
        raise ValueError("tau_m must be positive")
    u2 = (np.asarray(t, dtype=float) / tau_m) ** 2
    return (1.0 - 4.0 * np.pi * u2) * np.exp(-2.0 * np.pi * u2)


def _on_grid(x: float, fs: float) -> bool:
    v = x * fs
    return abs(v - round(v)) <= 1e-6


@dataclass(frozen=True)
class BlockConfig:
    nb: int = 10
    npulse: int = 4
    ts: float = 8e-9
    tau_m: float = TAU_M
    code: tuple = (1, 1, -1, 1)
    offsets: Optional[tuple] = None  # c_i; default i * ts / npulse
    delay: Optional[float] = None  # correlator delay D; default c_1 - c_0
    fs: float = 80e9
    ebn0_db: float = math.inf  # inf disables noise
    window: Optional[float] = None  # integration window width; default ts
    guard: float = 250e-9
    rx_band: Optional[tuple] = None  # (f_lo, f_hi) receiver bandpass in Hz; None = no filter
    rx_taps: int = 161  # odd FIR length of the receiver filter

    def __post_init__(self):
        if self.offsets is None:
            object.__setattr__(self, "offsets", tuple(i * self.ts / self.npulse for i in range(self.npulse)))
        if self.delay is None:
            object.__setattr__(self, "delay", self.offsets[1] - self.offsets[0])
        if self.window is None:
            object.__setattr__(self, "window", self.ts)
        object.__setattr__(self, "code", tuple(int(b) for b in self.code))
        object.__setattr__(self, "offsets", tuple(float(c) for c in self.offsets))
        if self.rx_band is not None:
            object.__setattr__(self, "rx_band", tuple(float(f) for f in self.rx_band))
        self.validate()

    def validate(self) -> None:
        if self.nb < 1 or self.npulse < 2 or self.npulse % 2:
            raise ValueError("need nb >= 1 and an even npulse >= 2")
        if len(self.code) != self.npulse or any(b not in (-1, 1) for b in self.code):
            raise ValueError("code must hold npulse entries of +-1")
        c = np.asarray(self.offsets)
        if c.shape != (self.npulse,) or c[0] < 0 or np.any(np.diff(c) <= 0) or c[-1] >= self.ts:
            raise ValueError("pulse offsets must satisfy 0 <= c_0 < ... < c_{Np-1} < Ts")
        if self.fs * self.tau_m < 20:
            raise ValueError(f"sample rate too low: fs*tau_m = {self.fs * self.tau_m:.2f} < 20")
        spacing = c[1::2] - c[0::2]
        if np.any(np.abs(spacing - self.delay) > 1e-6 / self.fs):
            raise ValueError("correlator delay must equal the reference-to-data pulse spacing")
        for name in ("ts", "delay", "window"):
            if not _on_grid(getattr(self, name), self.fs):
                raise ValueError(f"{name} must be a whole number of samples")
        if not all(_on_grid(ci, self.fs) for ci in c):
            raise ValueError("pulse offsets must fall on the sample grid")
        if self.rx_band is not None:
            lo, hi = self.rx_band
            if not 0 <= lo < hi < self.fs / 2:
                raise ValueError("rx_band must satisfy 0 <= f_lo < f_hi < fs/2")
            if self.rx_taps < 3 or self.rx_taps % 2 == 0:
                raise ValueError("rx_taps must be odd and >= 3")

    @property
    def tb(self) -> float:
        """Block duration including the guard interval."""
        return self.nb * self.ts + self.guard

    @property
    def npulses(self) -> int:
        return self.nb * self.npulse

    def pulse_times(self) -> np.ndarray:
        """t_i[n] = n Ts + c_i, flattened symbol-major (seconds)."""
        n = np.arange(self.nb)[:, None]
        return (n * self.ts + np.asarray(self.offsets)[None, :]).ravel()


def encode_block(config: BlockConfig, d) -> np.ndarray:
    """Differential pulse amplitudes a_i[n], flattened symbol-major.

    a_0[0] = 1; a_i[n] = a_{i-1}[n] d[n] b_{i-1}, and the first pulse of a
    symbol continues from the last pulse of the previous one.
    """
    d = np.asarray(d)
    if d.shape != (config.nb,):
        raise ValueError(f"expected {config.nb} symbols")
    b = config.code
    npl = config.npulse
    a = np.empty(config.npulses)
    a[0] = 1.0
    for k in range(1, config.npulses):
        n, i = divmod(k, npl)
        if i == 0:
            a[k] = a[k - 1] * d[n - 1] * b[npl - 1]
        else:
            a[k] = a[k - 1] * d[n] * b[i - 1]
    return a


def decode_isi_free(config: BlockConfig, a) -> np.ndarray:
    """Recover d from adjacent reference/data amplitude products (no ISI)."""
    a = np.asarray(a, dtype=float).reshape(config.nb, config.npulse)
    b = np.asarray(config.code, dtype=float)
    return np.sign(a[:, 1] * a[:, 0] * b[0]).astype(int)


# channels ------------------------------------------------------------------

@dataclass(frozen=True)
class SVPreset:
    """Simplified Saleh-Valenzuela parameters (rates per ns, decays in ns)."""

    name: str
    cluster_rate: float
    ray_rate: float
    cluster_decay: float
    ray_decay: float
    truncation: float

    def mean_pdp(self, step: float = 0.01):
        """Mean power-delay profile: (point mass at 0, grid t, continuous density)."""
        t = np.arange(0.0, self.truncation + step / 2, step)
        G, g = self.cluster_decay, self.ray_decay
        L, lam = self.cluster_rate, self.ray_rate
        dens = lam * np.exp(-t / g) + L * np.exp(-t / G)
        if abs(1 / g - 1 / G) > 1e-12:
            conv = L * lam * (np.exp(-t / G) - np.exp(-t / g)) / (1 / g - 1 / G)
        else:
            conv = L * lam * t * np.exp(-t / g)
        return 1.0, t, dens + conv

    @property
    def rms_delay_target(self) -> float:
        """RMS delay spread (ns) of the mean power-delay profile."""
        p0, t, dens = self.mean_pdp()
        w = dens * np.gradient(t)
        tot = p0 + w.sum()
        m1 = (w * t).sum() / tot
        m2 = (w * t * t).sum() / tot
        return float(np.sqrt(m2 - m1 * m1))


PRESETS = {
    "CM1": SVPreset("CM1", cluster_rate=0.047, ray_rate=1.54, cluster_decay=22.6, ray_decay=12.5, truncation=120.0),
    "CM6": SVPreset("CM6", cluster_rate=0.07, ray_rate=1.1, cluster_decay=60.0, ray_decay=30.0, truncation=250.0),
}
ALIASES = {"cm1": "CM1", "cm1-like": "CM1", "cm6": "CM6", "cm6-like": "CM6", "single": "single", "single-tap": "single"}


def preset_name(name: str) -> str:
    key = ALIASES.get(name.lower())
    if key is None:
        raise ValueError(f"unknown channel preset {name!r}")
    return key


@dataclass(frozen=True)
class ChannelRealization:
    delays: np.ndarray  # seconds, ascending
    gains: np.ndarray
    preset: str = "custom"

    def __post_init__(self):
        dl = np.asarray(self.delays, dtype=float)
        gn = np.asarray(self.gains, dtype=float)
        if dl.shape != gn.shape or dl.ndim != 1:
            raise ValueError("delays and gains must be 1-D and the same length")
        if np.any(dl < 0) or np.any(np.diff(dl) < 0):
            raise ValueError("delays must be nonnegative and ascending")
        object.__setattr__(self, "delays", dl)
        object.__setattr__(self, "gains", gn)

    @property
    def energy(self) -> float:
        return float(np.sum(self.gains ** 2))

    @property
    def rms_delay(self) -> float:
        """RMS delay spread in seconds."""
        p = self.gains ** 2
        if p.sum() == 0:
            return 0.0
        p = p / p.sum()
        m1 = p @ self.delays
        return float(np.sqrt(max(p @ self.delays ** 2 - m1 * m1, 0.0)))


def sample_channel(preset: str, rng: np.random.Generator) -> ChannelRealization:
    """Draw an energy-normalised channel from a preset.

    Clusters and rays arrive as Poisson processes (first of each at zero
    relative delay); mean power decays exponentially in both cluster and ray
    delay; amplitudes are Rayleigh with a random sign. ``"single"`` is the
    identity channel.
    """
    name = preset_name(preset)
    if name == "single":
        return ChannelRealization(np.array([0.0]), np.array([1.0]), "single")
    p = PRESETS[name]
    delays, powers = [], []
    T = 0.0
    while T <= p.truncation:
        tau = 0.0
        while T + tau <= p.truncation:
            delays.append(T + tau)
            powers.append(math.exp(-T / p.cluster_decay - tau / p.ray_decay))
            tau += rng.exponential(1.0 / p.ray_rate)
        T += rng.exponential(1.0 / p.cluster_rate)
    delays = np.asarray(delays)
    amp = np.sqrt(np.asarray(powers)) * rng.rayleigh(scale=np.sqrt(0.5), size=delays.size)
    amp *= rng.choice((-1.0, 1.0), size=delays.size)
    order = np.argsort(delays, kind="stable")
    delays, amp = delays[order], amp[order]
    amp /= np.sqrt(np.sum(amp ** 2))
    return ChannelRealization(delays * 1e-9, amp, name)


def write_channel(ch: ChannelRealization, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"# preset {ch.preset}\n")
        for dl, gn in zip(ch.delays, ch.gains):
            fh.write(f"{float(dl) * 1e9!r} {float(gn)!r}\n")


def read_channel(path) -> ChannelRealization:
    delays, gains, preset = [], [], "custom"
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if len(parts) == 2 and parts[0] == "preset":
                    preset = parts[1]
                continue
            a, b = line.split()
            delays.append(float(a) * 1e-9)
            gains.append(float(b))
    return ChannelRealization(np.array(delays), np.array(gains), preset)


# block simulation ------------------------------------------------------------

@dataclass
class Block:
    z: np.ndarray  # correlator outputs, one per data pulse
    B: np.ndarray  # (nr, npulses, npulses)
    z_clean: np.ndarray  # noiseless correlator outputs
    eb: float  # transmitted energy per bit
    n0: float  # noise density (0 when noise is off)
    d: np.ndarray

    def system(self, config: BlockConfig) -> VolterraSystem:
        return make_system(config.nb, config.npulse, self.B, self.z, config.code)


def _grid(config: BlockConfig):
    """Sample indices of pulses, windows and the simulation span."""
    fs_ns = config.fs * 1e-9
    pulse_idx = np.rint(config.pulse_times() * config.fs).astype(int)
    lag = int(round(config.delay * config.fs))
    half = int(round(config.window * config.fs)) // 2
    data_idx = pulse_idx.reshape(config.nb, config.npulse)[:, 1::2].ravel()
    starts = data_idx - half
    stops = starts + int(round(config.window * config.fs))
    support = int(math.ceil(PULSE_SUPPORT * config.tau_m * config.fs))
    if config.rx_band is not None:
        support += config.rx_taps // 2
    lo = min(int(starts.min()) - lag, int(pulse_idx.min()) - support)
    hi = max(int(stops.max()), int(pulse_idx.max()) + support)
    return fs_ns, pulse_idx, lag, starts, stops, support, lo, hi


def _pulse_response(ch: ChannelRealization, config: BlockConfig, support: int, n: int) -> np.ndarray:
    """Channel response to one pulse centred at sample 0, on samples -support .. n-1-support."""
    fs = config.fs
    keep = ch.delays * fs < n
    dl = ch.delays[keep]
    gn = ch.gains[keep]
    out = np.zeros(n)
    if dl.size == 0:
        return out
    base = np.floor(dl * fs).astype(int)
    offs = np.arange(-support, support + 2)
    idx = base[:, None] + offs[None, :]
    vals = gn[:, None] * monocycle(idx / fs - dl[:, None], config.tau_m)
    idx = idx + support
    ok = (idx >= 0) & (idx < n)
    out += np.bincount(idx[ok], weights=vals[ok], minlength=n)[:n]
    return out


def rx_filter(config: BlockConfig) -> Optional[np.ndarray]:
    """Linear-phase FIR taps of the receiver bandpass, or None without one."""
    if config.rx_band is None:
        return None
    lo, hi = config.rx_band
    bands = [hi] if lo == 0 else [lo, hi]
    return firwin(config.rx_taps, bands, pass_zero=(lo == 0), fs=config.fs)


def _apply_filter(h: Optional[np.ndarray], x: np.ndarray) -> np.ndarray:
    # centred convolution, so the filter adds no net delay
    return x if h is None else np.convolve(x, h, mode="same")


def simulate_block(config: BlockConfig, channel: ChannelRealization, d, rng: Optional[np.random.Generator] = None,
                   *, noise: Optional[bool] = None, dump_path=None) -> Block:
    """Transmit one block, return correlator outputs and the B[m] matrices.

    Noise is added when ``config.ebn0_db`` is finite (``noise=False`` forces
    it off). Eb is the transmitted waveform energy per information bit and
    the noise has two-sided density N0/2 over the simulation bandwidth fs.
    """
    d = np.asarray(d)
    a = encode_block(config, d)
    fs_ns, pulse_idx, lag, starts, stops, support, lo, hi = _grid(config)
    nsamp = hi - lo + 1
    dt = 1.0 / fs_ns

    # per-pulse channel responses g_k sampled on [lo, hi]
    h = rx_filter(config)
    g0 = _apply_filter(h, _pulse_response(channel, config, support, hi - int(pulse_idx.min()) + support + 1))
    K = config.npulses
    Gk = np.zeros((K, nsamp))
    for k, p in enumerate(pulse_idx):
        s0 = p - support - lo  # grid position of g0[0]
        take = min(g0.size, nsamp - s0)
        Gk[k, s0:s0 + take] = g0[:take]
    y = a @ Gk

    # transmitted energy per bit
    tx_support = int(math.ceil(PULSE_SUPPORT * config.tau_m * config.fs))
    tx_pulse = monocycle(np.arange(-tx_support, tx_support + 1) * dt * 1e-9, config.tau_m)
    tx = np.zeros(nsamp)
    for k, p in enumerate(pulse_idx):
        tx[p - tx_support - lo:p + tx_support + 1 - lo] += a[k] * tx_pulse
    eb = float(np.trapezoid(tx ** 2, dx=dt)) / config.nb if K else 0.0

    use_noise = np.isfinite(config.ebn0_db) if noise is None else noise
    n0 = 0.0
    yn = y
    if use_noise:
        if rng is None:
            raise ValueError("a random generator is required when noise is on")
        n0 = eb / 10.0 ** (config.ebn0_db / 10.0)
        sigma = math.sqrt(0.5 * n0 * fs_ns)
        yn = y + _apply_filter(h, sigma * rng.standard_normal(nsamp))

    nr = starts.size
    B = np.empty((nr, K, K))
    z = np.empty(nr)
    zc = np.empty(nr)
    for m in range(nr):
        i0, i1 = starts[m] - lo, stops[m] - lo + 1
        w = np.full(i1 - i0, dt)
        w[0] = w[-1] = 0.5 * dt
        cur = Gk[:, i0:i1]
        dly = Gk[:, i0 - lag:i1 - lag]
        C = (cur * w) @ dly.T
        B[m] = 0.5 * (C + C.T)
        zc[m] = (y[i0:i1] * w) @ y[i0 - lag:i1 - lag]
        z[m] = (yn[i0:i1] * w) @ yn[i0 - lag:i1 - lag]
    if dump_path is not None:
        write_waveform(dump_path, config.fs, yn)
    return Block(z=z, B=B, z_clean=zc, eb=eb, n0=n0, d=d.copy())


def write_waveform(path, fs: float, samples) -> None:
    """Binary dump: ASCII header line ``UWB1 fs n_samples`` then little-endian float64."""
    samples = np.asarray(samples, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(f"UWB1 {fs!r} {samples.size}\n".encode("ascii"))
        fh.write(samples.tobytes())


def read_waveform(path):
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").split()
        if len(header) != 3 or header[0] != "UWB1":
            raise ValueError("not a UWB1 waveform dump")
        fs, n = float(header[1]), int(header[2])
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != n:
        raise ValueError(f"expected {n} samples, found {data.size}")
    return fs, data
