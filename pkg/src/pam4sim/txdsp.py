"""Transmitter DSP: root-raised-cosine shaping and rational resampling to the DAC rate."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import signal as ssig

from .framing import SymbolFrame
from .waveform import SampledWaveform, check_alias, circular_filter, rate_ratio


@dataclass(frozen=True)
class RrcFilter:
    rolloff: float
    sps: int
    span: int
    taps: np.ndarray

    @property
    def center(self) -> int:
        return (len(self.taps) - 1) // 2


def rrc_impulse(t, rolloff: float) -> np.ndarray:
    """Closed-form RRC impulse response, ``t`` in symbol periods.

    Peak value is ``1 - beta + 4 beta / pi``. The removable singularities at
    ``t = 0`` and ``|t| = 1 / (4 beta)`` are replaced by their limits.
    """
    b = float(rolloff)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    h = np.empty_like(t)
    at_zero = t == 0
    singular = np.isclose(np.abs(4 * b * t), 1.0, rtol=0, atol=1e-9)
    regular = ~(at_zero | singular)

    tr = t[regular]
    h[regular] = (
        np.sin(np.pi * tr * (1 - b)) + 4 * b * tr * np.cos(np.pi * tr * (1 + b))
    ) / (np.pi * tr * (1 - (4 * b * tr) ** 2))
    h[at_zero] = 1 - b + 4 * b / np.pi
    h[singular] = (b / np.sqrt(2)) * (
        (1 + 2 / np.pi) * np.sin(np.pi / (4 * b)) + (1 - 2 / np.pi) * np.cos(np.pi / (4 * b))
    )
    return h


def rrc_taps(rolloff: float, sps: int, span: int = 64) -> RrcFilter:
    """Unit-energy RRC FIR covering ``span`` symbols at ``sps`` samples per symbol."""
    if not 0 < rolloff <= 1:
        raise ValueError("rolloff must be in (0, 1]")
    if sps < 1:
        raise ValueError("sps must be >= 1")
    if span < 8:
        raise ValueError("span must be >= 8 symbols to contain the main lobe")
    half = (span * sps) // 2
    n = np.arange(-half, half + 1)
    h = rrc_impulse(n / sps, rolloff)
    h /= np.sqrt(np.sum(h**2))
    return RrcFilter(float(rolloff), int(sps), int(span), h)


def _symbols_of(frame) -> np.ndarray:
    if isinstance(frame, SymbolFrame):
        return frame.symbols.astype(float)
    return np.asarray(frame, dtype=float)


def upsample_and_shape(frame, up: int, rrc: RrcFilter, baud: float = 1.0) -> SampledWaveform:
    """Zero-insert by ``up`` and apply the RRC filter over one pattern period.

    Sample 0 of the output is the centre of symbol 0.
    """
    if rrc.sps != up:
        raise ValueError(f"filter designed for {rrc.sps} sps, upsampling by {up}")
    a = _symbols_of(frame)
    x = np.zeros(len(a) * up)
    x[::up] = a
    y = circular_filter(x, rrc.taps, rrc.center)
    return SampledWaveform(y, baud * up, bandwidth=baud * (1 + rrc.rolloff) / 2)


def downsample(wave: SampledWaveform, down: int) -> SampledWaveform:
    """Keep every ``down``-th sample of a periodic waveform."""
    if down < 1:
        raise ValueError("down must be >= 1")
    if down == 1:
        return wave
    new_rate = wave.sample_rate / down
    check_alias(wave.bandwidth, new_rate)
    if len(wave) % down:
        raise ValueError(f"pattern length {len(wave)} is not a multiple of {down}")
    return SampledWaveform(wave.samples[::down].copy(), new_rate, wave.bandwidth)


def shape_and_resample(frame, up: int, down: int, rrc: RrcFilter, baud: float = 1.0) -> SampledWaveform:
    """Polyphase equivalent of ``downsample(upsample_and_shape(...), down)``.

    The ``up``-times grid is never materialized.
    """
    if rrc.sps != up:
        raise ValueError(f"filter designed for {rrc.sps} sps, upsampling by {up}")
    a = _symbols_of(frame)
    n = len(a)
    out_rate = baud * up / down
    check_alias(baud * (1 + rrc.rolloff) / 2, out_rate)
    if (n * up) % down:
        raise ValueError(f"{n} symbols x {up}/{down} is not an integer sample count")
    m = n * up // down

    c = rrc.center
    half = -(-len(rrc.taps) // (2 * up)) + 1
    lead = next(
        (p for p in range(half, half + down + 1) if (p * up + c) % down == 0), None
    )
    if lead is None:
        raise ValueError(f"cannot align {up}/{down} resampling grid")
    reps = -(-(lead + half) // n) + 1
    tiled = np.tile(a, 2 * reps + 1)
    ext = tiled[reps * n - lead: reps * n + n + half]
    y = ssig.upfirdn(rrc.taps, ext, up, down)
    start = (lead * up + c) // down
    return SampledWaveform(y[start: start + m], out_rate, bandwidth=baud * (1 + rrc.rolloff) / 2)


def resampling_factors(baud: float, dac_rate: float) -> tuple[int, int]:
    """Integer (up, down) with ``baud * up / down == dac_rate`` exactly."""
    r = rate_ratio(dac_rate, baud)
    return r.numerator, r.denominator


def dac_model(wave: SampledWaveform, clip_ratio: float = 1.0, n_bits=None) -> SampledWaveform:
    """Optional AWG clipping and uniform quantization; a no-op by default."""
    if not 0 < clip_ratio <= 1:
        raise ValueError("clip_ratio must be in (0, 1]")
    if clip_ratio == 1.0 and n_bits is None:
        return wave
    x = wave.samples
    full = clip_ratio * np.max(np.abs(x))
    if full == 0:
        return wave
    y = np.clip(x, -full, full)
    if n_bits is not None:
        if not 4 <= n_bits <= 10:
            raise ValueError("n_bits must be in [4, 10]")
        step = 2 * full / 2**n_bits
        # mid-rise quantizer: 2**n_bits levels across [-full, full]
        idx = np.clip(np.floor(y / step), -(2 ** (n_bits - 1)), 2 ** (n_bits - 1) - 1)
        y = (idx + 0.5) * step
    return wave.with_samples(y)


def exact_rate(baud: float, up: int, down: int) -> Fraction:
    return Fraction(round(baud)) * Fraction(up, down)
