import csv

import numpy as np
import pytest

from oracles import fading_closed_form_db
from pam4sim.framing import FrameLayout
from pam4sim.metrics import (
    FEC_THRESHOLDS,
    BerReport,
    count_ber,
    fading_profile,
    fec_verdicts,
    net_rate,
    occupied_bandwidth,
    optical_spectrum,
    write_curve_csv,
)
from pam4sim.txdsp import rrc_taps, shape_and_resample
from pam4sim.waveform import OpticalField, resample_periodic, rate_ratio


def test_identical_streams(rng):
    b = rng.integers(0, 2, 1000)
    r = count_ber(b, b)
    assert r.ber == 0 and all(r.verdicts.values())


def test_three_errors_in_2e5():
    tx = np.zeros(200_000, dtype=np.uint8)
    rx = tx.copy()
    rx[[5, 500, 50_000]] = 1
    r = count_ber(tx, rx)
    assert r.bit_errors == 3
    assert r.ber == pytest.approx(1.5e-5)
    assert r.verdicts["kp4"]


def test_verdicts_at_1e2():
    assert fec_verdicts(1e-2) == {"kp4": False, "hd7": False, "hd20": True}


@pytest.mark.parametrize("name", list(FEC_THRESHOLDS))
def test_threshold_equality_passes(name):
    assert fec_verdicts(FEC_THRESHOLDS[name])[name]
    assert not fec_verdicts(np.nextafter(FEC_THRESHOLDS[name], 1))[name]


def test_threshold_values():
    assert FEC_THRESHOLDS == {"kp4": 2.2e-4, "hd7": 3.8e-3, "hd20": 1.5e-2}


def test_count_ber_length_mismatch():
    with pytest.raises(ValueError):
        count_ber(np.zeros(4), np.zeros(5))


def test_report_invariants():
    with pytest.raises(ValueError):
        BerReport(0, 0)
    with pytest.raises(ValueError):
        BerReport(10, 11)
    s = BerReport(100, 1) + BerReport(300, 3)
    assert s.bits_compared == 400 and s.ber == 0.01


def test_net_rates():
    assert net_rate(80e9, 2, 1.2, FrameLayout()) / 1e9 == pytest.approx(129.2, abs=0.05)
    assert net_rate(84e9, 2, 1.2, FrameLayout()) / 1e9 == pytest.approx(135.7, abs=0.05)
    assert net_rate(80e9, 2, 1.2) == pytest.approx(80e9 * 2 / 1.2 / 20640 * 20000, rel=1e-15)
    assert net_rate(80e9, 2, 1.0, None) == 160e9
    with pytest.raises(ValueError):
        net_rate(80e9, 2, 0.9)


FS = 320e9


def test_spectrum_single_tone():
    n = 1 << 16
    rbw_nominal = 299792458.0 * 0.02e-9 / 1545.72e-9**2
    nper = round(1.5 * FS / rbw_nominal)
    f0 = 40 * FS / nper  # centred on a Welch bin
    p = 2e-3
    fld = OpticalField(np.sqrt(p) * np.exp(2j * np.pi * f0 * np.arange(n) / FS), FS)
    f, psd, dbm = optical_spectrum(fld)
    k = int(np.argmax(psd))
    assert f[k] == pytest.approx(f0)
    df = f[1] - f[0]
    rbw = FS * 1.5 / nper
    # equivalent noise width of the peak is the resolution bandwidth
    assert np.sum(psd) * df / psd[k] == pytest.approx(rbw, rel=0.01)
    assert dbm[k] == pytest.approx(10 * np.log10(p / 1e-3), abs=0.05)


def nyquist_field(baud=80e9, n_sym=8000, seed=0):
    rng = np.random.default_rng(seed)
    a = rng.choice([-3.0, -1.0, 1.0, 3.0], n_sym)
    w = shape_and_resample(a, 23, 20, rrc_taps(0.01, 23, 64), baud)
    x = resample_periodic(w.samples, rate_ratio(FS, w.sample_rate))
    return OpticalField(x * 1e-2, FS)


def test_spectrum_nyquist_pam4_width():
    fld = nyquist_field()
    f, psd, _ = optical_spectrum(fld, resolution_bw=0.5e9)
    assert occupied_bandwidth(f, psd, 0.99) == pytest.approx(80e9 * 1.01, rel=0.05)


def test_spectrum_parseval():
    fld = nyquist_field()
    f, psd, _ = optical_spectrum(fld)
    assert np.sum(psd) * (f[1] - f[0]) == pytest.approx(np.mean(fld.power), rel=0.01)


def test_spectrum_too_short():
    with pytest.raises(ValueError):
        optical_spectrum(OpticalField(np.ones(64), FS))


def test_fading_profile_values():
    p0 = fading_profile(0.0)
    assert np.all(p0.attenuation_db == 0)
    p1 = fading_profile(1000.0)
    p2 = fading_profile(2000.0)
    assert p1.first_3db_hz == pytest.approx(43e9, abs=0.5e9)
    assert p2.first_3db_hz == pytest.approx(30.4e9, abs=0.5e9)
    assert p2.first_3db_hz == pytest.approx(p1.first_3db_hz / np.sqrt(2), rel=1e-14)
    assert p1.first_3db_hz > 40e9 and p2.first_3db_hz > 30e9
    f = np.linspace(1e9, 40e9, 40)
    np.testing.assert_allclose(fading_profile(1000.0, f_grid=f).attenuation_db,
                               fading_closed_form_db(f, 1000.0, 17e-6, 1545.72e-9), atol=1e-9)


def test_curve_csv(tmp_path):
    p = write_curve_csv(tmp_path / "c.csv", [1.0, 2.0], [-0.5, -3.0], "attenuation_db")
    rows = list(csv.reader(open(p)))
    assert rows[0] == ["frequency_hz", "attenuation_db"]
    assert [float(v) for v in rows[2]] == [2.0, -3.0]
    assert open(p).read().endswith("\n")
    with pytest.raises(OSError, match="missing"):
        write_curve_csv(tmp_path / "missing" / "c.csv", [1.0], [0.0])
