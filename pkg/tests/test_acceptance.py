"""Acceptance criteria. Each test prints one PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v -s`` to see only the summary lines.
"""

from dataclasses import replace

import numpy as np
import pytest

from oracles import (
    LEVELS,
    all_sequences,
    batch_least_squares,
    fading_closed_form_db,
    split_exhaustive_mlsd,
    tone_amplitude,
)
from pam4sim.channel import LinkConfig, transmit
from pam4sim.framing import FrameLayout
from pam4sim.harness import (
    SweepSpec,
    calibrate_alpha,
    emit_csv,
    preset,
    preset_sweep,
    run_single,
    run_sweep,
    threshold_crossing,
)
from pam4sim.metrics import FEC_THRESHOLDS, net_rate
from pam4sim.rxdsp import mlsd_viterbi, rls_train, tap_windows
from pam4sim.txdsp import rrc_taps
from pam4sim.waveform import SampledWaveform


@pytest.fixture
def report(capsys):
    def _report(n, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
        assert ok, detail
    return _report


def test_criterion_01_net_rate(report):
    r80 = net_rate(80e9, 2, 1.2, FrameLayout()) / 1e9
    r84 = net_rate(84e9, 2, 1.2, FrameLayout()) / 1e9
    ok = abs(r80 - 129.2) <= 0.05 and abs(r84 - 135.7) <= 0.05
    report(1, ok, f"net rate 80G {r80:.3f} Gb/s, 84G {r84:.3f} Gb/s (targets 129.2, 135.7 +/- 0.05)")


def _tone_response(length, freqs, amp=0.01):
    """Detected tone amplitude through the whole link, one small-signal tone at a time."""
    cfg = LinkConfig(fiber_length=length, osnr_db=None)
    n = 920  # 10 ns period: 100 MHz bins at the DAC, grid and ADC rates
    t = np.arange(n) / cfg.dac_rate
    out = []
    for f in freqs:
        dac = SampledWaveform(amp * np.cos(2 * np.pi * f * t), cfg.dac_rate)
        det = transmit(dac, cfg).detected
        out.append(abs(tone_amplitude(det.samples, det.sample_rate, f)))
    return np.array(out)


def _first_crossing(f, db, level=-3.0):
    i = int(np.argmax(db < level))
    return f[i - 1] + (level - db[i - 1]) * (f[i] - f[i - 1]) / (db[i] - db[i - 1])


def test_criterion_02_cd_fading(report):
    f = np.arange(5e9, 45e9 + 1, 0.5e9)
    ref = _tone_response(0.0, f)
    worst, f3 = 0.0, {}
    for length in (1000.0, 2000.0):
        sim = 20 * np.log10(_tone_response(length, f) / ref)
        closed = fading_closed_form_db(f, length, 17e-6, 1545.72e-9)
        worst = max(worst, float(np.max(np.abs(sim - closed))))
        f3[length] = _first_crossing(f, sim) / 1e9
    ok = worst <= 0.3 and abs(f3[1000.0] - 43.0) <= 0.5 and abs(f3[2000.0] - 30.4) <= 0.5
    report(2, ok, f"max |sim - closed form| {worst:.2e} dB over 5-45 GHz; first 3 dB "
                  f"{f3[1000.0]:.2f} GHz (1 km), {f3[2000.0]:.2f} GHz (2 km)")


def _brute_force_batch(Y, alpha, chunk=256):
    """Minimum-metric sequence for each row of Y over all 4**n candidates."""
    C = all_sequences(Y.shape[1])
    P = C.copy()
    P[:, 1:] += alpha * C[:, :-1]
    pp = np.sum(P**2, axis=1)
    best_i = np.empty(len(Y), dtype=np.int64)
    best_m = np.empty(len(Y))
    for lo in range(0, len(Y), chunk):
        y = Y[lo: lo + chunk]
        m = np.sum(y**2, axis=1)[:, None] - 2 * y @ P.T + pp[None, :]
        best_i[lo: lo + chunk] = np.argmin(m, axis=1)
        best_m[lo: lo + chunk] = m[np.arange(len(y)), best_i[lo: lo + chunk]]
    return C[best_i], best_m


def test_criterion_03_mlsd_oracle(report):
    alpha = 0.6
    rng = np.random.default_rng(3)
    S = all_sequences(8)
    noise = 0.8 * rng.standard_normal(8)
    Y = S.copy()
    Y[:, 1:] += alpha * S[:, :-1]
    Y += noise[None, :]
    ref_s, ref_m = _brute_force_batch(Y, alpha)
    dec_bad = metric_err = 0
    for y, rs, rm in zip(Y, ref_s, ref_m):
        s, m = mlsd_viterbi(y, alpha, return_metric=True)
        dec_bad += not np.array_equal(s, rs)
        metric_err = max(metric_err, abs(m - rm))
    rand_bad = rand_err = 0
    for _ in range(1000):
        s = rng.choice(LEVELS, 12)
        y = s.copy()
        y[1:] += alpha * s[:-1]
        y += 0.8 * rng.standard_normal(12)
        vs, vm = mlsd_viterbi(y, alpha, return_metric=True)
        bs, bm = split_exhaustive_mlsd(y, alpha)
        rand_bad += not np.array_equal(vs, bs)
        rand_err = max(rand_err, abs(vm - bm))
    ok = dec_bad == 0 and rand_bad == 0 and metric_err < 1e-9 and rand_err < 1e-9
    report(3, ok, f"4^8 exhaustive: {dec_bad} decision mismatches, max metric diff {metric_err:.1e}; "
                  f"1000 length-12: {rand_bad} mismatches, max metric diff {rand_err:.1e}")


def test_criterion_04_rrc_nyquist(report):
    sps = 2
    h = rrc_taps(0.01, sps, 64).taps
    g = np.convolve(h, h)
    c = len(h) - 1
    at = g[c % sps::sps]
    k = c // sps
    isi = float(np.max(np.abs(np.delete(at, k))) / at[k])
    report(4, isi < 1e-3, f"span-64 beta-0.01 RRC cascade symbol-instant ISI {isi:.3e} (limit 1e-3)")


def _three_tap(rng, n, snr_db):
    a = rng.choice(LEVELS, n).astype(float)
    y = 0.9 * a + 0.4 * np.roll(a, 1) + 0.2 * np.roll(a, 2)
    x = np.zeros(2 * n)
    x[::2] = y
    x[1::2] = 0.5 * (y + np.roll(y, -1))
    x += rng.standard_normal(2 * n) * np.sqrt(np.mean(x**2) / 10 ** (snr_db / 10))
    return a, x


def test_criterion_05_rls(report):
    rng = np.random.default_rng(5)
    a, x = _three_tap(rng, 6000, 30.0)
    eq = rls_train(x, a, n_taps=15, forgetting=1.0, delta=1e-6)
    ls = batch_least_squares(tap_windows(x, 2 * np.arange(len(a)), 15), a)
    diff = float(np.max(np.abs(eq.taps - ls)))
    a, x = _three_tap(rng, 4096, 30.0)
    mse_db = 10 * np.log10(rls_train(x, a[:512], n_taps=61).mse / np.mean(a**2))
    ok = diff <= 1e-3 and mse_db <= -20
    report(5, ok, f"lambda=1 RLS vs batch LS max tap diff {diff:.1e}; 512-symbol MSE {mse_db:.1f} dB")


def test_criterion_06_clean_loopback(report):
    cfg = preset("clean-loopback")["config"]
    r = run_single(cfg, 6)
    ber = getattr(r, "ber", float("nan"))
    ok = r.bits_compared >= 2e5 and r.bit_errors == 0 if hasattr(r, "bits_compared") else False
    report(6, ok, f"clean loopback {getattr(r, 'bit_errors', 'n/a')} errors in "
                  f"{getattr(r, 'bits_compared', 0)} bits (BER {ber})")


def test_criterion_07_alpha_trend(report):
    lines, ok = [], True
    for baud in ("80g", "84g"):
        opt = []
        for length in ("btb", "1km", "2km"):
            spec = preset_sweep(f"fig3-alpha-{baud}-{length}", master_seed=7)
            m = run_sweep(spec).mean_ber()
            i = int(np.nanargmin(m))
            interior = 0 < i < len(m) - 1
            ok &= interior
            opt.append(spec.values[i])
        ok &= opt[2] >= opt[1] >= opt[0]
        lines.append(f"{baud} optima btb/1km/2km {opt[0]}/{opt[1]}/{opt[2]}")
    report(7, ok, "; ".join(lines) + " (need interior optima, 2km >= 1km >= btb)")


def test_criterion_08_mlsd_never_worse(report):
    base = preset("fig4-rate-btb")
    cells = passed = 0
    for baud in base["values"]:
        cfg = base["config"].with_param("baud", baud)
        alpha = calibrate_alpha(replace(cfg, n_frames=2))
        cfg = cfg.with_param("alpha", alpha)
        res = run_sweep(SweepSpec("use_mlsd", (True, False), 10, cfg, 8))
        by = {(c.point, c.trial): c.ber for c in res.cells}
        for t in range(10):
            cells += 1
            passed += bool(by[(0, t)] <= by[(1, t)])
    frac = passed / cells
    report(8, frac >= 0.95, f"MLSD <= no-MLSD in {passed}/{cells} (rate, seed) cells ({frac:.1%}, need 95%)")


def test_criterion_09_rop_penalty(report):
    x = {}
    for length in ("btb", "1km", "2km"):
        spec = preset_sweep(f"fig5b-rop-{length}", master_seed=11)
        x[length] = threshold_crossing(spec.values, run_sweep(spec).mean_ber(), FEC_THRESHOLDS["hd20"])
    p1, p2 = x["1km"] - x["btb"], x["2km"] - x["btb"]
    ok = p2 > p1 > 0 and p2 >= 3 * p1
    report(9, ok, f"HD 20% required ROP btb {x['btb']:.2f}, 1km {x['1km']:.2f}, 2km {x['2km']:.2f} dBm; "
                  f"penalties {p1:.2f} and {p2:.2f} dB")


def test_criterion_10_determinism(report, tmp_path):
    ok, names = True, ("fig3-alpha-80g-2km", "fig4-rate-1km")
    for name in names:
        spec = preset_sweep(name, trials=2, master_seed=10)
        outs = [emit_csv(run_sweep(spec, jobs), tmp_path / f"{name}-{i}.csv").read_bytes()
                for i, jobs in enumerate((1, 2, 1))]
        ok &= outs[0] == outs[1] == outs[2]
    report(10, ok, f"byte-identical CSV across reruns and 1 vs 2 workers for {', '.join(names)}")
