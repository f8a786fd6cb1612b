"""Receiver DSP: 2-SPS resampling, matched filtering, preamble sync, RLS
feed-forward equalization, decision-directed RLS tracking, two-tap post
filter and Viterbi MLSD.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit

from .exceptions import DivergenceError, SyncError
from .framing import LEVELS, demap_pam4
from .txdsp import RrcFilter
from .waveform import SampledWaveform, circular_filter, rate_ratio, resample_periodic

_LEVELS_F = LEVELS.astype(np.float64)


@dataclass
class EqualizerState:
    taps: np.ndarray
    P: np.ndarray
    forgetting: float
    delta: float
    sps: int = 2
    mse: float = np.nan  # mean squared a-priori error over the last quarter of training

    def __post_init__(self):
        if len(self.taps) % 2 == 0:
            raise ValueError("tap count must be odd")
        if not 0 < self.forgetting <= 1:
            raise ValueError("forgetting factor must be in (0, 1]")

    @property
    def n_taps(self) -> int:
        return len(self.taps)

    @property
    def mse_db(self) -> float:
        return 10 * np.log10(self.mse)


@dataclass
class TrackingResult:
    output: np.ndarray
    taps: np.ndarray
    frozen_at: int = -1  # index where adaptation froze, -1 if never

    @property
    def frozen(self) -> bool:
        return self.frozen_at >= 0


def resample_to_2sps(wave: SampledWaveform, baud: float, rolloff: float = 0.01) -> SampledWaveform:
    target = 2 * baud
    if wave.sample_rate < baud * (1 + rolloff):
        raise ValueError(
            f"input rate {wave.sample_rate:g} too low for {baud:g} Bd with rolloff {rolloff}"
        )
    y = resample_periodic(wave.samples, rate_ratio(target, wave.sample_rate))
    return SampledWaveform(y, target, baud * (1 + rolloff) / 2)


def matched_filter(wave: SampledWaveform, rrc: RrcFilter) -> SampledWaveform:
    """Circular correlation with the RRC taps, scaled by 1/sqrt(sps).

    With a transmit pulse of unit symbol amplitude the output at symbol
    instants is the transmitted level.
    """
    y = circular_filter(wave.samples, rrc.taps[::-1], rrc.center) / np.sqrt(rrc.sps)
    return wave.with_samples(y)


def normalize_power(x: np.ndarray, target_rms: float = np.sqrt(5.0)) -> np.ndarray:
    """Remove the mean and scale to the RMS of equiprobable PAM-4 levels."""
    x = x - np.mean(x)
    rms = np.sqrt(np.mean(x**2))
    return x if rms == 0 else x * (target_rms / rms)


def _circular_xcorr(x, ref_stuffed):
    n = len(x)
    r = np.zeros(n)
    r[: len(ref_stuffed)] = ref_stuffed
    return np.fft.irfft(np.fft.rfft(x) * np.conj(np.fft.rfft(r)), n)


def synchronize(wave_2sps, sync_reference, sps: int = 2, min_psr: float = 3.0,
                return_metrics: bool = False, guard_symbols: int = 4):
    """Offset (in samples) of the first sync symbol's centre.

    Maximizes the normalized circular cross-correlation against the sync
    symbols placed at ``sps`` spacing. The peak-to-sidelobe ratio compares
    the peak with the largest magnitude at lags inside the reference's
    correlation support but more than ``guard_symbols`` away, which keeps
    band-limiting shoulders of the main lobe out of the sidelobes.
    """
    x = np.asarray(getattr(wave_2sps, "samples", wave_2sps), dtype=float)
    s = np.asarray(sync_reference, dtype=float)
    n = len(x)
    if sps * len(s) > n:
        raise SyncError("waveform shorter than the sync preamble")
    ref = np.zeros(sps * len(s))
    ref[::sps] = s
    mask = np.zeros(sps * len(s))
    mask[::sps] = 1.0
    corr = _circular_xcorr(x, ref)
    energy = np.maximum(_circular_xcorr(x * x, mask), 1e-300)
    ncc = corr / np.sqrt(energy * np.sum(s * s))

    peak = int(np.argmax(ncc))
    guard = guard_symbols * sps
    dist = np.abs((np.arange(n) - peak + n // 2) % n - n // 2)
    lobes = np.abs(ncc[(dist > guard) & (dist <= min(sps * len(s), n // 2))])
    side = lobes.max() if len(lobes) else 0.0
    psr = ncc[peak] / side if side > 0 else np.inf
    if not psr >= min_psr:
        raise SyncError(f"sync peak-to-sidelobe ratio {psr:.2f} below {min_psr}")
    if return_metrics:
        return peak, {"ncc": float(ncc[peak]), "psr": float(psr)}
    return peak


def tap_windows(x: np.ndarray, centers, n_taps: int, wrap: bool = True) -> np.ndarray:
    """Rows of ``n_taps`` samples centred on each index in ``centers``."""
    half = n_taps // 2
    idx = np.asarray(centers)[:, None] + np.arange(-half, half + 1)
    if wrap:
        return x[idx % len(x)]
    xp = np.concatenate([np.zeros(half), x, np.zeros(half)])
    return xp[idx + half]


@njit(cache=True)
def _nearest_level(v):
    if v < -2.0:
        return -3.0
    if v < 0.0:
        return -1.0
    if v < 2.0:
        return 1.0
    return 3.0


@njit(cache=True)
def _rls_kernel(U, d, known, w, P, lam, window, growth, floor):
    n, T = U.shape
    y = np.empty(n)
    e = np.empty(n)
    frozen_at = -1
    status = 0
    hist = np.zeros(window)
    n_dd = 0
    init_mean = 0.0
    run_sum = 0.0
    Pu = np.empty(T)
    for i in range(n):
        u = U[i]
        yi = 0.0
        for j in range(T):
            yi += w[j] * u[j]
        if known[i]:
            ref = d[i]
        else:
            ref = _nearest_level(yi)
        ei = ref - yi
        y[i] = yi
        e[i] = ei
        if not np.isfinite(yi):
            status = 1
            break

        if not known[i] and window > 0:
            a = abs(ei)
            slot = n_dd % window
            run_sum += a - hist[slot]
            hist[slot] = a
            n_dd += 1
            if n_dd == window:
                init_mean = max(run_sum / window, floor)
            elif n_dd > window and frozen_at < 0 and run_sum / window > growth * init_mean:
                frozen_at = i

        if frozen_at >= 0:
            continue
        denom = lam
        for j in range(T):
            acc = 0.0
            for k in range(T):
                acc += P[j, k] * u[k]
            Pu[j] = acc
            denom += u[j] * acc
        for j in range(T):
            w[j] += Pu[j] / denom * ei
            for k in range(T):
                # Pu[j] * Pu[k] is commutative, so P stays exactly symmetric
                P[j, k] = (P[j, k] - Pu[j] * Pu[k] / denom) / lam
    return y, e, frozen_at, status


def _run_rls(U, d, known, w, P, lam, window=0, growth=2.0, floor=1e-3):
    U = np.ascontiguousarray(U, dtype=np.float64)
    y, e, frozen_at, status = _rls_kernel(
        U, np.ascontiguousarray(d, dtype=np.float64), np.ascontiguousarray(known, dtype=np.bool_),
        w, P, float(lam), int(window), float(growth), float(floor),
    )
    if status or not (np.all(np.isfinite(w)) and np.all(np.isfinite(P))):
        finite = np.abs(w[np.isfinite(w)])
        raise DivergenceError(
            "RLS recursion produced non-finite values",
            {"last_error": float(e[-1]) if len(e) else np.nan,
             "max_abs_tap": float(finite.max()) if finite.size else np.nan,
             "nonfinite_taps": int(np.count_nonzero(~np.isfinite(w)))},
        )
    return y, e, int(frozen_at)


def rls_train(rx_train, tx_train, n_taps: int = 61, forgetting: float = 0.999,
              delta: float = 0.01, start: int = 0, sps: int = 2, wrap: bool = True,
              init: Optional[EqualizerState] = None) -> EqualizerState:
    """Train a fractionally spaced FFE on known symbols with exponentially weighted RLS.

    ``rx_train[start + sps*k]`` is the centre sample of training symbol ``k``.
    P is initialized to ``I / delta``.
    """
    x = np.asarray(getattr(rx_train, "samples", rx_train), dtype=float)
    a = np.asarray(tx_train, dtype=float)
    if n_taps % 2 == 0:
        raise ValueError("n_taps must be odd")
    if sps * len(a) < 2 * n_taps:
        raise ValueError("training too short: need at least 2*n_taps samples")
    U = tap_windows(x, start + sps * np.arange(len(a)), n_taps, wrap)
    if init is None:
        w = np.zeros(n_taps)
        P = np.eye(n_taps) / delta
    else:
        w, P = init.taps.copy(), init.P.copy()
    _, e, _ = _run_rls(U, a, np.ones(len(a), dtype=bool), w, P, forgetting)
    tail = e[-max(1, len(e) // 4):]
    return EqualizerState(w, P, forgetting, delta, sps, float(np.mean(tail**2)))


def equalize(wave_2sps, eq: EqualizerState, start: int = 0, n_symbols: Optional[int] = None,
             wrap: bool = True) -> np.ndarray:
    """Apply the FFE at symbol rate; output ``k`` estimates the symbol centred at ``start + sps*k``."""
    x = np.asarray(getattr(wave_2sps, "samples", wave_2sps), dtype=float)
    if n_symbols is None:
        n_symbols = (len(x) - start) // eq.sps if not wrap else len(x) // eq.sps
    U = tap_windows(x, start + eq.sps * np.arange(n_symbols), eq.n_taps, wrap)
    return U @ eq.taps


def dd_rls_track(soft, n_taps: int = 11, forgetting: float = 0.9999, delta: float = 1.0,
                 reference=None, window: int = 256, growth: float = 2.0) -> TrackingResult:
    """Symbol-spaced RLS filter driven by nearest-level decisions.

    Starts from a centre-spike filter. Where ``reference`` is given (finite
    entries), the known symbol replaces the decision. Adaptation freezes if the
    running mean |error| over ``window`` decision-directed symbols exceeds
    ``growth`` times its value over the first window.
    """
    x = np.asarray(soft, dtype=float)
    n = len(x)
    if n_taps % 2 == 0:
        raise ValueError("n_taps must be odd")
    U = tap_windows(x, np.arange(n), n_taps, wrap=False)
    d = np.zeros(n)
    known = np.zeros(n, dtype=bool)
    if reference is not None:
        ref = np.asarray(reference, dtype=float)
        m = min(len(ref), n)
        ok = np.isfinite(ref[:m])
        d[:m][ok] = ref[:m][ok]
        known[:m] = ok
    w = np.zeros(n_taps)
    w[n_taps // 2] = 1.0
    P = np.eye(n_taps) / delta
    y, _, frozen_at = _run_rls(U, d, known, w, P, forgetting, window, growth)
    return TrackingResult(y, w, frozen_at)


def post_filter(soft, alpha: float) -> np.ndarray:
    """y[n] = x[n] + alpha * x[n-1], zero history before the first sample."""
    if not 0 <= alpha <= 1:
        raise ValueError("alpha must be in [0, 1]")
    x = np.asarray(soft, dtype=float)
    y = x.copy()
    y[1:] += alpha * x[:-1]
    return y


@njit(cache=True)
def _viterbi_kernel(y, alpha, levels):
    n = len(y)
    S = len(levels)
    back = np.empty((n, S), dtype=np.int8)
    metric = np.empty(S)
    new = np.empty(S)
    for s in range(S):
        r = y[0] - levels[s]
        metric[s] = r * r
        back[0, s] = -1
    for i in range(1, n):
        yi = y[i]
        for s in range(S):
            best = np.inf
            arg = 0
            for p in range(S):
                r = yi - (levels[s] + alpha * levels[p])
                m = metric[p] + r * r
                if m < best:
                    best = m
                    arg = p
            new[s] = best
            back[i, s] = arg
        for s in range(S):
            metric[s] = new[s]
    last = 0
    for s in range(1, S):
        if metric[s] < metric[last]:
            last = s
    path = np.empty(n, dtype=np.int8)
    state = last
    for i in range(n - 1, -1, -1):
        path[i] = state
        if i > 0:
            state = back[i, state]
    return path, metric[last]


def mlsd_viterbi(colored, alpha: float, return_metric: bool = False):
    """Maximum-likelihood PAM-4 sequence for the ``[1, alpha]`` post-filtered signal.

    Four-state memory-1 trellis, squared-Euclidean branch metric, full-length
    traceback. Ties resolve toward the lower level.
    """
    y = np.ascontiguousarray(colored, dtype=np.float64)
    if len(y) == 0:
        out = np.empty(0, dtype=np.int8)
        return (out, 0.0) if return_metric else out
    path, metric = _viterbi_kernel(y, float(alpha), _LEVELS_F)
    levels = LEVELS[path]
    return (levels, float(metric)) if return_metric else levels


def sequence_metric(colored, levels, alpha: float) -> float:
    """Squared distance between ``colored`` and the post-filtered ``levels``."""
    expected = post_filter(np.asarray(levels, dtype=float), alpha)
    return float(np.sum((np.asarray(colored, dtype=float) - expected) ** 2))


def slice_levels(x) -> np.ndarray:
    """Nearest PAM-4 level; a value exactly on a threshold goes to the upper level."""
    x = np.asarray(x, dtype=float)
    idx = np.searchsorted(np.array([-2.0, 0.0, 2.0]), x, side="right")
    return LEVELS[idx]


def slice_and_demap(symbols) -> np.ndarray:
    return demap_pam4(slice_levels(symbols))
