import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vsdp.uwb import (PRESETS, TAU_M, BlockConfig, ChannelRealization, decode_isi_free, encode_block, monocycle,
                      read_channel, read_waveform, rx_filter, sample_channel, simulate_block, write_channel)
from vsdp.volterra import predict_z

DATA = __import__("pathlib").Path(__file__).parent / "data"
PULSE_ENERGY = 3.0 * TAU_M * 1e9 / 8.0  # closed form of the monocycle energy, in ns


def test_monocycle_values():
    assert monocycle(0.0, TAU_M) == 1.0
    assert monocycle(TAU_M / 2, TAU_M) == pytest.approx((1 - math.pi) * math.exp(-math.pi / 2))
    assert monocycle(TAU_M / 2, TAU_M) == pytest.approx(-0.4452, abs=1e-4)
    assert abs(monocycle(50 * TAU_M, TAU_M)) < 1e-300
    with pytest.raises(ValueError):
        monocycle(0.0, 0.0)


def test_monocycle_energy_closed_form():
    t = np.linspace(-6, 6, 200001) * TAU_M
    assert np.trapezoid(monocycle(t, TAU_M) ** 2, t) * 1e9 == pytest.approx(PULSE_ENERGY, rel=1e-9)


def test_encode_examples():
    cfg = BlockConfig(nb=3, npulse=4, code=(1, 1, 1, 1))
    assert np.all(encode_block(cfg, np.ones(3)) == 1)
    one = BlockConfig(nb=1, npulse=2, code=(1, 1), ts=8e-9, offsets=(0.0, 1e-9))
    assert np.array_equal(encode_block(one, [-1]), [1, -1])
    with pytest.raises(ValueError):
        encode_block(cfg, [1, 1])


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 12), st.sampled_from([2, 4, 6]), st.integers(0, 2**32 - 1))
def test_encode_decode_round_trip(nb, npulse, seed):
    rng = np.random.default_rng(seed)
    code = tuple(int(c) for c in np.where(rng.random(npulse) < 0.5, -1, 1))
    cfg = BlockConfig(nb=nb, npulse=npulse, code=code, ts=npulse * 2e-9)
    d = np.where(rng.random(nb) < 0.5, -1, 1)
    a = encode_block(cfg, d)
    assert a[0] == 1 and np.all(np.abs(a) == 1)
    assert np.array_equal(decode_isi_free(cfg, a), d)
    # the literal recursion, written out per symbol
    A = a.reshape(nb, npulse)
    for n in range(nb):
        for i in range(npulse):
            if i == 0 and n > 0:
                assert A[n, 0] == A[n - 1, -1] * d[n - 1] * code[-1]
            elif i > 0:
                assert A[n, i] == A[n, i - 1] * d[n] * code[i - 1]


def test_block_config_validation():
    with pytest.raises(ValueError, match="sample rate"):
        BlockConfig(fs=20e9)
    with pytest.raises(ValueError):
        BlockConfig(npulse=3, code=(1, 1, 1))
    with pytest.raises(ValueError):
        BlockConfig(offsets=(0.0, 2e-9, 1e-9, 6e-9))
    with pytest.raises(ValueError):
        BlockConfig(delay=1e-9)
    with pytest.raises(ValueError):
        BlockConfig(code=(1, 1, 0, 1))
    with pytest.raises(ValueError):
        BlockConfig(rx_band=(6e9, 1e9))
    cfg = BlockConfig()
    assert cfg.fs * cfg.tau_m >= 20
    assert cfg.tb == pytest.approx(10 * 8e-9 + 250e-9)
    assert cfg.pulse_times()[:5] == pytest.approx([0, 2e-9, 4e-9, 6e-9, 8e-9])


def test_single_tap_isolated_pulses_give_pulse_energy():
    cfg = BlockConfig(nb=6, npulse=2, code=(1, 1), ts=8e-9, offsets=(0.0, 1e-9))
    ch = sample_channel("single", np.random.default_rng(0))
    assert list(zip(ch.delays, ch.gains)) == [(0.0, 1.0)]
    d = np.array([1, -1, -1, 1, 1, -1])
    blk = simulate_block(cfg, ch, d)
    assert np.allclose(blk.z, d * PULSE_ENERGY, rtol=1e-6)
    assert np.array_equal(np.sign(blk.z), d)
    assert np.allclose(predict_z(blk.system(cfg), d), blk.z, rtol=1e-6, atol=0)
    assert blk.eb == pytest.approx(2 * PULSE_ENERGY, rel=1e-9)


def test_zero_channel_gives_noise_only():
    cfg = BlockConfig(ebn0_db=10.0)
    ch = ChannelRealization(np.array([0.0, 3e-9]), np.array([0.0, 0.0]))
    d = np.ones(10, dtype=int)
    blk = simulate_block(cfg, ch, d, np.random.default_rng(1))
    assert np.all(blk.B == 0) and np.all(blk.z_clean == 0)
    assert np.any(blk.z != 0)


def test_noise_density_calibration(tmp_path):
    cfg = BlockConfig(ebn0_db=5.0)
    ch = ChannelRealization(np.array([0.0]), np.array([0.0]))
    path = tmp_path / "w.bin"
    blk = simulate_block(cfg, ch, np.ones(10, dtype=int), np.random.default_rng(2), dump_path=path)
    fs, y = read_waveform(path)
    assert fs == cfg.fs
    assert blk.n0 == pytest.approx(blk.eb / 10 ** 0.5)
    # white noise of two-sided density N0/2 sampled at fs has variance N0 fs / 2
    assert np.var(y) == pytest.approx(0.5 * blk.n0 * cfg.fs * 1e-9, rel=0.05)


def test_filtered_noise_variance_matches_filter_energy(tmp_path):
    cfg = BlockConfig(ebn0_db=5.0, rx_band=(0.5e9, 6e9))
    ch = ChannelRealization(np.array([0.0]), np.array([0.0]))
    path = tmp_path / "w.bin"
    blk = simulate_block(cfg, ch, np.ones(10, dtype=int), np.random.default_rng(3), dump_path=path)
    _, y = read_waveform(path)
    h = rx_filter(cfg)
    inner = y[h.size:-h.size]
    assert np.var(inner) == pytest.approx(0.5 * blk.n0 * cfg.fs * 1e-9 * np.sum(h ** 2), rel=0.08)


def test_noise_off_limits_agree():
    ch = sample_channel("CM1", np.random.default_rng(4))
    d = np.where(np.random.default_rng(5).random(10) < 0.5, -1, 1)
    quiet = simulate_block(BlockConfig(), ch, d)
    forced = simulate_block(BlockConfig(ebn0_db=3.0), ch, d, noise=False)
    assert np.array_equal(quiet.z, quiet.z_clean)
    assert np.array_equal(forced.z, quiet.z)
    assert quiet.n0 == 0.0
    with pytest.raises(ValueError):
        simulate_block(BlockConfig(ebn0_db=3.0), ch, d)  # noise needs a generator


def test_energy_per_bit_independent_of_data():
    cfg = BlockConfig()
    ch = sample_channel("CM6", np.random.default_rng(6))
    rng = np.random.default_rng(7)
    ebs = [simulate_block(cfg, ch, np.where(rng.random(10) < 0.5, -1, 1)).eb for _ in range(20)]
    assert np.ptp(ebs) <= 1e-9 * ebs[0]
    assert ebs[0] == pytest.approx(4 * PULSE_ENERGY, rel=1e-9)


def _random_config(rng):
    npulse = int(rng.choice([2, 4, 6]))
    fs = 80e9
    ts_samples = int(rng.integers(npulse * 60, npulse * 120)) // npulse * npulse
    ts = ts_samples / fs
    gap = ts_samples // npulse
    code = tuple(int(c) for c in np.where(rng.random(npulse) < 0.5, -1, 1))
    band = None if rng.random() < 0.5 else (0.5e9, 6e9)
    return BlockConfig(nb=int(rng.integers(1, 7)), npulse=npulse, ts=ts, code=code,
                       offsets=tuple(i * gap / fs for i in range(npulse)), fs=fs, rx_band=band)


def test_waveform_matches_volterra_model():
    rng = np.random.default_rng(8)
    for _ in range(50):
        cfg = _random_config(rng)
        ch = sample_channel(str(rng.choice(["CM1", "CM6", "single"])), rng)
        d = np.where(rng.random(cfg.nb) < 0.5, -1, 1)
        blk = simulate_block(cfg, ch, d)
        zp = predict_z(blk.system(cfg), d)
        assert np.max(np.abs(zp - blk.z)) <= 1e-6 * np.max(np.abs(blk.z))


def test_b_matrices_symmetric_and_shaped():
    cfg = BlockConfig()
    blk = simulate_block(cfg, sample_channel("CM1", np.random.default_rng(9)), np.ones(10, dtype=int))
    assert blk.B.shape == (20, 40, 40)
    assert np.array_equal(blk.B, blk.B.transpose(0, 2, 1))


def test_seed_determinism():
    cfg = BlockConfig(ebn0_db=12.0)

    def run():
        rng = np.random.default_rng(10)
        ch = sample_channel("CM1", rng)
        return simulate_block(cfg, ch, np.where(rng.random(10) < 0.5, -1, 1), rng).z

    assert run().tobytes() == run().tobytes()


@pytest.mark.parametrize("name", ["CM1", "CM6"])
def test_channel_energy_and_ordering(name):
    rng = np.random.default_rng(11)
    for _ in range(200):
        ch = sample_channel(name, rng)
        assert abs(ch.energy - 1.0) <= 1e-9
        assert ch.delays[0] == 0.0 and np.all(np.diff(ch.delays) >= 0)
        assert ch.delays[-1] <= PRESETS[name].truncation * 1e-9


@pytest.mark.parametrize("name", ["CM1", "CM6"])
def test_mean_rms_delay_matches_preset_target(name):
    rng = np.random.default_rng(12)
    rms = np.mean([sample_channel(name, rng).rms_delay for _ in range(1000)]) * 1e9
    target = PRESETS[name].rms_delay_target
    assert abs(rms - target) <= 0.2 * target


def test_cm6_has_longer_configured_spread():
    assert PRESETS["CM6"].rms_delay_target > PRESETS["CM1"].rms_delay_target


def test_preset_aliases():
    rng = np.random.default_rng(0)
    assert sample_channel("cm1-like", rng).preset == "CM1"
    assert sample_channel("CM6-like", rng).preset == "CM6"
    with pytest.raises(ValueError):
        sample_channel("CM9", rng)


def test_golden_channel_fixture():
    ch = sample_channel("CM1", np.random.default_rng(20240601))
    ref = read_channel(DATA / "channel_cm1_seed20240601.txt")
    assert ref.preset == "CM1"
    assert ch.delays.shape == ref.delays.shape
    assert np.allclose(ch.delays, ref.delays, rtol=1e-14, atol=0)
    assert np.allclose(ch.gains, ref.gains, rtol=1e-14, atol=0)


def test_channel_file_round_trip(tmp_path):
    ch = sample_channel("CM6", np.random.default_rng(13))
    write_channel(ch, tmp_path / "c.txt")
    back = read_channel(tmp_path / "c.txt")
    assert back.preset == "CM6"
    assert np.allclose(back.delays, ch.delays, rtol=1e-14) and np.array_equal(back.gains, ch.gains)


def test_channel_realization_validation():
    with pytest.raises(ValueError):
        ChannelRealization(np.array([1e-9, 0.0]), np.array([1.0, 1.0]))
    with pytest.raises(ValueError):
        ChannelRealization(np.array([-1e-9]), np.array([1.0]))
    with pytest.raises(ValueError):
        ChannelRealization(np.array([0.0]), np.array([1.0, 2.0]))


def test_waveform_dump_format(tmp_path):
    cfg = BlockConfig(nb=2)
    path = tmp_path / "w.bin"
    simulate_block(cfg, sample_channel("single", None), np.array([1, -1]), dump_path=path)
    raw = path.read_bytes()
    header, body = raw.split(b"\n", 1)
    tag, fs, n = header.decode().split()
    assert tag == "UWB1" and float(fs) == cfg.fs and int(n) * 8 == len(body)
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"NOPE 1 1\n" + bytes(8))
    with pytest.raises(ValueError):
        read_waveform(bad)
