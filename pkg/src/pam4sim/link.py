"""One-frame end-to-end simulation: framing -> TX DSP -> channel -> RX DSP."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional

import numpy as np

from .channel import ChannelOutput, LinkConfig, transmit
from .framing import FrameLayout, SymbolFrame, build_frame, demap_pam4, make_preamble
from .rxdsp import (
    EqualizerState,
    dd_rls_track,
    equalize,
    matched_filter,
    mlsd_viterbi,
    normalize_power,
    post_filter,
    resample_to_2sps,
    rls_train,
    slice_levels,
    synchronize,
)
from .txdsp import dac_model, resampling_factors, rrc_taps, shape_and_resample
from .waveform import SampledWaveform, delay_periodic, pattern_multiple


@dataclass(frozen=True)
class DspConfig:
    alpha: float = 0.6
    use_mlsd: bool = True  # post filter + MLSD; plain slicing when False
    use_dd: bool = True
    use_ffe: bool = True  # False slices matched-filter samples at symbol centres
    ffe_taps: int = 61
    rls_forgetting: float = 0.999
    rls_delta: float = 0.01
    dd_taps: int = 11
    dd_forgetting: float = 0.9999
    dd_delta: float = 1.0
    dac_clip_ratio: float = 1.0
    dac_bits: Optional[int] = None
    random_delay: bool = True  # random capture start and sampling phase

    def __post_init__(self):
        if not 0 <= self.alpha <= 1:
            raise ValueError("alpha must be in [0, 1]")
        if self.ffe_taps % 2 == 0 or self.dd_taps % 2 == 0:
            raise ValueError("tap counts must be odd")
        if not (0.9 < self.rls_forgetting <= 1 and 0.9 < self.dd_forgetting <= 1):
            raise ValueError("forgetting factors must be in (0.9, 1]")

    def replace(self, **changes) -> "DspConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "DspConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown DspConfig fields: {sorted(unknown)}")
        return cls(**d)


@dataclass
class Transmission:
    frame: SymbolFrame
    pattern: np.ndarray  # frame symbols plus idle padding, one AWG period
    dac: SampledWaveform


@dataclass
class ReceiverOutput:
    """Payload-aligned soft outputs of each receiver stage."""

    ffe: np.ndarray
    tracked: Optional[np.ndarray]
    sync_offset: int
    sync_metrics: dict
    equalizer: Optional[EqualizerState]
    dd_frozen_at: int = -1
    capture_delay: float = 0.0

    @property
    def soft(self) -> np.ndarray:
        return self.ffe if self.tracked is None else self.tracked


def _seeds(seed: int):
    ss = np.random.SeedSequence(int(seed))
    bits, noise, delay = ss.spawn(3)
    return (np.random.default_rng(bits), np.random.default_rng(noise),
            np.random.default_rng(delay))


def transmitter(cfg: LinkConfig, layout: FrameLayout, seed: int, dsp: DspConfig = DspConfig(),
                rng=None) -> Transmission:
    """Build a random-payload frame and shape it to the DAC rate.

    The AWG pattern is padded with random idle symbols so that its duration
    is an integer number of samples on every grid in the link.
    """
    rng = _seeds(seed)[0] if rng is None else rng
    bits = rng.integers(0, 2, size=2 * layout.payload_len, dtype=np.uint8)
    frame = build_frame(layout, bits, seed)

    m = pattern_multiple(cfg.baud, [cfg.dac_rate, cfg.grid_rate, cfg.adc_rate, 2 * cfg.baud])
    n_pad = (-layout.total_len) % m
    idle = rng.choice(np.array([-3, -1, 1, 3], dtype=np.int8), size=n_pad)
    pattern = np.concatenate([frame.symbols, idle])

    up, down = resampling_factors(cfg.baud, cfg.dac_rate)
    rrc = rrc_taps(cfg.rolloff, up, cfg.rrc_span)
    wave = shape_and_resample(pattern, up, down, rrc, cfg.baud)
    # unit-energy taps scale the pulse by 1/sqrt(up); restore level units
    wave = wave.with_samples(wave.samples * np.sqrt(up))
    wave = dac_model(wave, dsp.dac_clip_ratio, dsp.dac_bits)
    return Transmission(frame, pattern, wave)


def receiver(detected: SampledWaveform, cfg: LinkConfig, layout: FrameLayout, frame_seed: int,
             dsp: DspConfig = DspConfig()) -> ReceiverOutput:
    """Recover payload soft symbols from an ADC capture of one pattern period."""
    sync, train = make_preamble(layout, frame_seed)
    x2 = resample_to_2sps(detected, cfg.baud, cfg.rolloff)
    mf = matched_filter(x2, rrc_taps(cfg.rolloff, 2, cfg.rrc_span))
    x = normalize_power(mf.samples)

    # training blocks are M-sequences too; the whole preamble sharpens the peak
    offset, metrics = synchronize(x, np.concatenate([sync, train]), sps=2, return_metrics=True)
    start = offset + 2 * layout.sync_len
    n_eq = layout.train_len + layout.payload_len
    if dsp.use_ffe:
        eq = rls_train(x, train, dsp.ffe_taps, dsp.rls_forgetting, dsp.rls_delta, start=start)
        soft = equalize(x, eq, start=start, n_symbols=n_eq)
    else:
        eq = None
        soft = x[(start + 2 * np.arange(n_eq)) % len(x)]

    tracked = None
    frozen_at = -1
    if dsp.use_dd:
        res = dd_rls_track(soft, dsp.dd_taps, dsp.dd_forgetting, dsp.dd_delta, reference=train)
        tracked = res.output[layout.train_len:]
        frozen_at = res.frozen_at
    return ReceiverOutput(soft[layout.train_len:], tracked, offset, metrics, eq, frozen_at)


def detect(soft: np.ndarray, alpha: float, use_mlsd: bool = True) -> np.ndarray:
    """Hard PAM-4 decisions: post filter + MLSD, or nearest-level slicing."""
    if use_mlsd:
        return mlsd_viterbi(post_filter(soft, alpha), alpha)
    return slice_levels(soft)


@dataclass
class FrameResult:
    tx_bits: np.ndarray
    rx_bits: np.ndarray
    rx: ReceiverOutput
    channel: Optional[ChannelOutput] = field(default=None, repr=False)


def simulate_frame(cfg: LinkConfig, layout: FrameLayout, dsp: DspConfig, seed: int,
                   keep_channel: bool = False) -> FrameResult:
    rng_bits, rng_noise, rng_delay = _seeds(seed)
    tx = transmitter(cfg, layout, seed, dsp, rng=rng_bits)
    ch = transmit(tx.dac, cfg, rng_noise)

    detected = ch.detected
    tau = 0.0
    if dsp.random_delay:
        tau = rng_delay.uniform(0, detected.duration)
        detected = detected.with_samples(delay_periodic(detected.samples, detected.sample_rate, tau))

    rx = receiver(detected, cfg, layout, seed, dsp)
    rx.capture_delay = tau
    levels = detect(rx.soft, dsp.alpha, dsp.use_mlsd)
    return FrameResult(tx.frame.payload_bits, demap_pam4(levels), rx, ch if keep_channel else None)
