"""BER accounting, FEC threshold verdicts, net rate, optical spectrum and
dispersion-fading analysis."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import signal as ssig

from .channel import C_LIGHT, cd_phase
from .framing import FrameLayout
from .waveform import OpticalField

# Pre-FEC BER limits. A BER equal to a threshold passes.
FEC_THRESHOLDS = {
    "kp4": 2.2e-4,
    "hd7": 3.8e-3,
    "hd20": 1.5e-2,
}


def fec_verdicts(ber: float) -> dict:
    return {name: bool(ber <= thr) for name, thr in FEC_THRESHOLDS.items()}


@dataclass
class BerReport:
    bits_compared: int
    bit_errors: int
    net_rate: float = float("nan")
    diagnostics: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.bits_compared < 1:
            raise ValueError("bits_compared must be >= 1")
        if not 0 <= self.bit_errors <= self.bits_compared:
            raise ValueError("bit_errors out of range")

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits_compared

    @property
    def verdicts(self) -> dict:
        return fec_verdicts(self.ber)

    def __add__(self, other: "BerReport") -> "BerReport":
        return BerReport(self.bits_compared + other.bits_compared,
                         self.bit_errors + other.bit_errors, self.net_rate)


def count_ber(tx_bits, rx_bits, net_rate: float = float("nan")) -> BerReport:
    tx = np.asarray(tx_bits, dtype=np.uint8)
    rx = np.asarray(rx_bits, dtype=np.uint8)
    if tx.shape != rx.shape:
        raise ValueError(f"bit stream lengths differ: {tx.shape} vs {rx.shape}")
    return BerReport(int(tx.size), int(np.count_nonzero(tx != rx)), net_rate)


def net_rate(baud: float, bits_per_symbol: int = 2, fec_overhead_ratio: float = 1.2,
             layout: Optional[FrameLayout] = FrameLayout()) -> float:
    """Payload information rate after frame and FEC overhead, in bit/s.

    ``layout=None`` means no preamble overhead.
    """
    if fec_overhead_ratio < 1:
        raise ValueError("fec_overhead_ratio must be >= 1")
    gross = baud * bits_per_symbol / fec_overhead_ratio
    if layout is None:
        return gross
    return gross * layout.payload_len / layout.total_len


def _rbw_to_hz(resolution_nm: float, wavelength: float) -> float:
    return C_LIGHT * resolution_nm * 1e-9 / wavelength**2


def optical_spectrum(field_: OpticalField, resolution_bw: float = None, resolution_nm: float = 0.02):
    """Welch power spectrum with Hann segments sized for the resolution bandwidth.

    Returns ``(freq_offset_hz, psd_w_per_hz, power_dbm_per_rbw)``, sorted by
    frequency. ``resolution_bw`` (Hz) overrides ``resolution_nm``.
    """
    fs = field_.sample_rate
    rbw = resolution_bw if resolution_bw is not None else _rbw_to_hz(resolution_nm, field_.wavelength)
    # Hann equivalent noise bandwidth is 1.5 bins
    nperseg = int(round(1.5 * fs / rbw))
    if nperseg < 8 or len(field_.samples) < nperseg:
        raise ValueError(
            f"field of {len(field_.samples)} samples too short for {rbw / 1e9:.3g} GHz resolution "
            f"(needs {nperseg})"
        )
    f, psd = ssig.welch(field_.samples, fs=fs, window="hann", nperseg=nperseg,
                        noverlap=nperseg // 2, detrend=False, return_onesided=False,
                        scaling="density")
    order = np.argsort(f)
    f, psd = f[order], psd[order]
    with np.errstate(divide="ignore"):
        dbm = 10 * np.log10(psd * rbw / 1e-3)
    return f, psd, dbm


def occupied_bandwidth(f, psd, fraction: float = 0.99) -> float:
    """Width of the centred band holding ``fraction`` of the total power."""
    df = np.median(np.diff(f))
    c = np.cumsum(psd) * df
    total = c[-1]
    lo = np.interp((1 - fraction) / 2 * total, c, f)
    hi = np.interp((1 + fraction) / 2 * total, c, f)
    return float(hi - lo)


@dataclass
class FadingProfile:
    freq_hz: np.ndarray
    attenuation_db: np.ndarray
    first_3db_hz: float
    first_null_hz: float


def fading_profile(length: float, D: float = 17e-6, wavelength: float = 1545.72e-9, f_grid=None) -> FadingProfile:
    """Small-signal IM/DD dispersion fading 20 log10 |cos(pi lambda^2 D L f^2 / c)|."""
    f = np.linspace(0, 60e9, 601) if f_grid is None else np.asarray(f_grid, dtype=float)
    if length == 0 or D == 0:
        return FadingProfile(f, np.zeros_like(f), np.inf, np.inf)
    with np.errstate(divide="ignore"):
        att = 20 * np.log10(np.abs(np.cos(cd_phase(f, length, D, wavelength))))
    k = wavelength**2 * abs(D) * length
    f3 = np.sqrt(C_LIGHT / (4 * k))
    f0 = np.sqrt(C_LIGHT / (2 * k))
    return FadingProfile(f, att, float(f3), float(f0))


def write_curve_csv(path, freq_hz, value_db, value_name: str = "value_db"):
    """Two-column CSV: frequency_hz, value_db."""
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["frequency_hz", value_name])
            for f, v in zip(freq_hz, value_db):
                w.writerow([repr(float(f)), repr(float(v))])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path
