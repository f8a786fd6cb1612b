"""Sampled signal containers and exact rational-rate helpers.

Every waveform in the simulator is one period of a periodically repeated
pattern (the AWG loops its memory), so filtering is circular and Fourier
resampling is exact for band-limited content.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np
from scipy import fft as sfft
from scipy import signal as ssig

from .exceptions import AliasingError


@dataclass
class SampledWaveform:
    samples: np.ndarray
    sample_rate: float
    # One-sided occupied bandwidth in Hz, when known. Used for alias checks.
    bandwidth: Optional[float] = None

    def __post_init__(self):
        self.samples = np.asarray(self.samples)
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be > 0")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("waveform contains non-finite samples")

    def __len__(self):
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    def with_samples(self, samples, sample_rate=None, bandwidth=None):
        return SampledWaveform(
            samples,
            self.sample_rate if sample_rate is None else sample_rate,
            self.bandwidth if bandwidth is None else bandwidth,
        )


@dataclass
class OpticalField:
    """Complex envelope in sqrt(W) on a uniform grid."""

    samples: np.ndarray
    sample_rate: float
    wavelength: float = 1545.72e-9

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.complex128)
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be > 0")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("optical field contains non-finite samples")

    @property
    def power(self) -> np.ndarray:
        return np.abs(self.samples) ** 2

    def with_samples(self, samples):
        return OpticalField(samples, self.sample_rate, self.wavelength)


def rate_ratio(out_rate: float, in_rate: float) -> Fraction:
    """Exact ratio of two integer-Hz sample rates."""
    num, den = round(out_rate), round(in_rate)
    if not (math.isclose(num, out_rate, abs_tol=1e-3) and math.isclose(den, in_rate, abs_tol=1e-3)):
        raise ValueError("sample rates must be integer multiples of 1 Hz")
    return Fraction(num, den)


def pattern_multiple(baud: float, rates) -> int:
    """Smallest symbol count N such that N * rate / baud is integral for all rates."""
    m = 1
    for r in rates:
        m = math.lcm(m, rate_ratio(r, baud).denominator)
    return m


def resample_periodic(x: np.ndarray, ratio: Fraction) -> np.ndarray:
    """Fourier resampling of one signal period by an exact rational ratio."""
    ratio = Fraction(ratio)
    n_in = len(x)
    n_out = n_in * ratio
    if n_out.denominator != 1:
        raise ValueError(f"length {n_in} times {ratio} is not an integer")
    n_out = int(n_out)
    if n_out == n_in:
        return np.array(x, copy=True)
    return ssig.resample(x, n_out)


def check_alias(bandwidth: Optional[float], new_rate: float):
    if bandwidth is not None and bandwidth > new_rate / 2 * (1 + 1e-12):
        raise AliasingError(
            f"occupied bandwidth {bandwidth / 1e9:.3f} GHz exceeds Nyquist "
            f"{new_rate / 2e9:.3f} GHz"
        )


def circular_filter(x: np.ndarray, taps: np.ndarray, center: int) -> np.ndarray:
    """Circular convolution with ``taps`` whose time origin is at index ``center``.

    Direct summation for short signals, FFT product above 2**12 samples.
    """
    n = len(x)
    if n <= 4096 and len(taps) <= n:
        out = np.zeros(n, dtype=np.result_type(x, taps))
        for k, h in enumerate(taps):
            if h != 0:
                out += h * np.roll(x, k - center)
        return out
    kernel = np.zeros(n, dtype=np.result_type(taps, float))
    idx = (np.arange(len(taps)) - center) % n
    np.add.at(kernel, idx, taps)
    if np.isrealobj(x) and np.isrealobj(kernel):
        return sfft.irfft(sfft.rfft(x) * sfft.rfft(kernel), n)
    return sfft.ifft(sfft.fft(x) * sfft.fft(kernel))


def apply_frequency_response(x: np.ndarray, sample_rate: float, response) -> np.ndarray:
    """Multiply the DFT of one period by ``response(f)`` (f in Hz, two-sided)."""
    n = len(x)
    if np.isrealobj(x):
        f = sfft.rfftfreq(n, 1 / sample_rate)
        return sfft.irfft(sfft.rfft(x) * response(f), n)
    f = sfft.fftfreq(n, 1 / sample_rate)
    return sfft.ifft(sfft.fft(x) * response(f))


def delay_periodic(x: np.ndarray, sample_rate: float, tau: float) -> np.ndarray:
    """Delay one period of a band-limited real signal by ``tau`` seconds."""
    n = len(x)
    f = sfft.rfftfreq(n, 1 / sample_rate)
    return sfft.irfft(sfft.rfft(x) * np.exp(-2j * np.pi * f * tau), n)
