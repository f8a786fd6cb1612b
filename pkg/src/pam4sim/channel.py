"""Analog link model: driver/modulator response, MZM, fiber dispersion, ASE
loading, square-law detection and ADC capture.

The analog path is discretized on an internal grid at twice the larger of the
DAC and ADC rates. All operations act on one period of a repeating pattern.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, fields, replace
from typing import Optional

import numpy as np
from scipy import constants

from .waveform import (
    OpticalField,
    SampledWaveform,
    apply_frequency_response,
    check_alias,
    rate_ratio,
    resample_periodic,
)

C_LIGHT = constants.c
OSNR_REF_BANDWIDTH = 12.5e9  # 0.1 nm at 1550 nm


@dataclass(frozen=True)
class LinkConfig:
    baud: float = 80e9
    dac_rate: float = 92e9
    adc_rate: float = 160e9
    eo_3db_bandwidth: float = 21e9
    eo_order: int = 2
    rx_3db_bandwidth: float = 50e9
    rx_order: int = 2
    vpi: float = 5.0
    drive_swing: float = 1.0
    fiber_length: float = 0.0
    dispersion_D: float = 17e-6  # s/m^2, i.e. 17 ps/nm/km
    wavelength: float = 1545.72e-9
    osnr_db: Optional[float] = None  # None disables ASE loading
    launch_power: float = 1e-3  # W at the MZM input
    responsivity: float = 0.8  # A/W
    rolloff: float = 0.01
    rrc_span: int = 64
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("baud", "dac_rate", "adc_rate", "eo_3db_bandwidth", "rx_3db_bandwidth",
                     "vpi", "wavelength", "launch_power", "responsivity"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.fiber_length < 0:
            raise ValueError("fiber_length must be >= 0")
        if not 0 <= self.drive_swing < 2 * self.vpi:
            raise ValueError("drive_swing must be in [0, 2 * vpi)")
        if self.osnr_db is not None and not np.isfinite(self.osnr_db):
            raise ValueError("osnr_db must be finite or None")

    @property
    def grid_rate(self) -> float:
        return 2 * max(self.dac_rate, self.adc_rate)

    def replace(self, **changes) -> "LinkConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "LinkConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown LinkConfig fields: {sorted(unknown)}")
        return cls(**d)


def butterworth_magnitude(f, f3db: float, order: int = 2):
    return 1.0 / np.sqrt(1.0 + (np.abs(f) / f3db) ** (2 * order))


def eo_response(wave: SampledWaveform, f3db: float, order: int = 2) -> SampledWaveform:
    """Zero-phase Butterworth-magnitude lowpass with its -3 dB point at ``f3db``."""
    if not f3db > 0:
        raise ValueError("f3db must be > 0")
    y = apply_frequency_response(
        wave.samples, wave.sample_rate, lambda f: butterworth_magnitude(f, f3db, order)
    )
    return wave.with_samples(y)


def drive_signal(wave: SampledWaveform, cfg: LinkConfig) -> SampledWaveform:
    """Scale a level-unit waveform so PAM level +-3 maps to -+drive_swing.

    The polarity is inverted so that higher PAM levels transmit more light
    through the quadrature-biased MZM.
    """
    return wave.with_samples(-cfg.drive_swing / 3.0 * wave.samples)


def mzm_modulate(drive: SampledWaveform, cfg: LinkConfig) -> OpticalField:
    """Push-pull MZM biased at quadrature: E = E0 cos(pi/4 + pi v / (2 Vpi))."""
    v = drive.samples
    if np.max(np.abs(v), initial=0.0) > cfg.vpi:
        warnings.warn("drive exceeds the 2*Vpi transfer span; over-modulation", RuntimeWarning)
    e0 = np.sqrt(cfg.launch_power)
    field = e0 * np.cos(np.pi / 4 + np.pi * v / (2 * cfg.vpi))
    return OpticalField(field.astype(np.complex128), drive.sample_rate, cfg.wavelength)


def cd_phase(f, length: float, D: float, wavelength: float):
    return np.pi * wavelength**2 * D * length * f**2 / C_LIGHT


def fiber_cd(field: OpticalField, length: float, D: float = 17e-6, wavelength: Optional[float] = None) -> OpticalField:
    """All-pass dispersion H(f) = exp(+j pi lambda^2 D L f^2 / c) on the envelope."""
    if length == 0:
        return field
    lam = field.wavelength if wavelength is None else wavelength
    y = apply_frequency_response(
        field.samples, field.sample_rate, lambda f: np.exp(1j * cd_phase(f, length, D, lam))
    )
    return field.with_samples(y)


def ase_noise_variance(signal_power: float, sample_rate: float, osnr_db: float) -> float:
    """Complex noise variance on a grid of ``sample_rate`` for a given OSNR (0.1 nm ref)."""
    return signal_power * sample_rate / (OSNR_REF_BANDWIDTH * 10 ** (osnr_db / 10))


def load_ase_noise(field: OpticalField, osnr_db: Optional[float], rng) -> OpticalField:
    """Add circular complex Gaussian noise in the signal polarization."""
    if osnr_db is None:
        return field
    rng = np.random.default_rng(rng)
    p_sig = float(np.mean(field.power))
    var = ase_noise_variance(p_sig, field.sample_rate, osnr_db)
    n = len(field.samples)
    noise = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) * np.sqrt(var / 2)
    return field.with_samples(field.samples + noise)


def square_law(field: OpticalField, responsivity: float) -> SampledWaveform:
    return SampledWaveform(responsivity * field.power, field.sample_rate)


def photodiode(field: OpticalField, responsivity: float, rx_f3db: float, order: int = 2) -> SampledWaveform:
    """Photocurrent R|E|^2 followed by the receiver electrical lowpass."""
    return eo_response(square_law(field, responsivity), rx_f3db, order)


def adc_model(wave: SampledWaveform, adc_rate: float, baud: Optional[float] = None) -> SampledWaveform:
    """Band-limited rational resampling of the analog-grid waveform to ``adc_rate``."""
    if baud is not None and adc_rate < baud:
        raise ValueError(f"ADC rate {adc_rate:g} below baud {baud:g}: sub-Nyquist capture")
    check_alias(wave.bandwidth, adc_rate)
    ratio = rate_ratio(adc_rate, wave.sample_rate)
    y = resample_periodic(wave.samples, ratio)
    bw = None if wave.bandwidth is None else min(wave.bandwidth, adc_rate / 2)
    return SampledWaveform(y, adc_rate, bw)


@dataclass
class ChannelOutput:
    detected: SampledWaveform  # at the ADC rate
    field: OpticalField  # received optical field, after noise loading
    launched: OpticalField


def transmit(dac_wave: SampledWaveform, cfg: LinkConfig, rng=None) -> ChannelOutput:
    """Run a DAC-rate waveform (level units) through the whole analog link."""
    grid = cfg.grid_rate
    x = resample_periodic(dac_wave.samples, rate_ratio(grid, dac_wave.sample_rate))
    analog = SampledWaveform(x, grid)
    analog = eo_response(analog, cfg.eo_3db_bandwidth, cfg.eo_order)
    launched = mzm_modulate(drive_signal(analog, cfg), cfg)
    field = fiber_cd(launched, cfg.fiber_length, cfg.dispersion_D, cfg.wavelength)
    field = load_ase_noise(field, cfg.osnr_db, rng)
    current = photodiode(field, cfg.responsivity, cfg.rx_3db_bandwidth, cfg.rx_order)
    detected = adc_model(current, cfg.adc_rate, cfg.baud)
    return ChannelOutput(detected, field, launched)
