"""PAM-4 symbol mapping, M-sequence generation and frame assembly.

A frame is ``[sync x2 | train x4 | payload]``. Sync sequences are binary
antipodal (levels -3/+3) so the correlation peak is as large as possible;
training sequences use all four levels so the equalizer sees the whole
constellation. Both are regenerated at the receiver from the frame seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LEVELS = np.array([-3, -1, 1, 3], dtype=np.int8)

# Fibonacci LFSR feedback taps (exponents of primitive polynomials), several
# per order so that blocks of one preamble need not be shifts of each other.
PRIMITIVE_POLYNOMIALS = {
    3: ((3, 2), (3, 1)),
    4: ((4, 3), (4, 1)),
    5: ((5, 3), (5, 2), (5, 3, 2, 1), (5, 4, 2, 1)),
    6: ((6, 5), (6, 1), (6, 5, 2, 1), (6, 4, 3, 1)),
    7: ((7, 6), (7, 1), (7, 3), (7, 4)),
    8: ((8, 6, 5, 4), (8, 7, 2, 1), (8, 5, 3, 1), (8, 6, 5, 1)),
    9: ((9, 5), (9, 4), (9, 7, 2, 1), (9, 4, 3, 1)),
    10: ((10, 7), (10, 3), (10, 5, 2, 1), (10, 4, 3, 1)),
    11: ((11, 9), (11, 2), (11, 4, 2, 1), (11, 6, 2, 1)),
    12: ((12, 11, 10, 4), (12, 8, 2, 1), (12, 10, 2, 1), (12, 6, 4, 1)),
    13: ((13, 12, 11, 8), (13, 5, 2, 1), (13, 11, 2, 1), (13, 4, 3, 1)),
    14: ((14, 13, 12, 2), (14, 12, 2, 1), (14, 5, 3, 1), (14, 10, 3, 1)),
    15: ((15, 14), (15, 1), (15, 4), (15, 7)),
    16: ((16, 15, 13, 4), (16, 12, 3, 1), (16, 6, 4, 1), (16, 15, 4, 1)),
}
PRIMITIVE_TAPS = {order: polys[0] for order, polys in PRIMITIVE_POLYNOMIALS.items()}


@dataclass(frozen=True)
class FrameLayout:
    """Lengths (in symbols) of the frame sections."""

    sync_seq_len: int = 64
    sync_seq_count: int = 2
    train_seq_len: int = 128
    train_seq_count: int = 4
    payload_len: int = 20000

    def __post_init__(self):
        for name in ("sync_seq_len", "sync_seq_count", "train_seq_len", "train_seq_count"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.payload_len < 0:
            raise ValueError("payload_len must be >= 0")

    @property
    def sync_len(self) -> int:
        return self.sync_seq_len * self.sync_seq_count

    @property
    def train_len(self) -> int:
        return self.train_seq_len * self.train_seq_count

    @property
    def preamble_len(self) -> int:
        return self.sync_len + self.train_len

    @property
    def total_len(self) -> int:
        return self.preamble_len + self.payload_len

    @property
    def train_slice(self) -> slice:
        return slice(self.sync_len, self.preamble_len)

    @property
    def payload_slice(self) -> slice:
        return slice(self.preamble_len, self.total_len)


@dataclass
class SymbolFrame:
    layout: FrameLayout
    symbols: np.ndarray
    payload_bits: np.ndarray
    seed: int = 0
    sync: np.ndarray = field(default=None, repr=False)
    train: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if len(self.symbols) != self.layout.total_len:
            raise ValueError("symbol count does not match the frame layout")
        if len(self.payload_bits) != 2 * self.layout.payload_len:
            raise ValueError("payload bit count must be 2 * payload_len")

    @property
    def payload(self) -> np.ndarray:
        return self.symbols[self.layout.payload_slice]


def msequence_bits(register_order: int, seed_state: int, out_len: int, taps=None) -> np.ndarray:
    """Maximal-length LFSR output bits, cyclically extended to ``out_len``.

    ``taps`` picks a feedback polynomial; the default is ``PRIMITIVE_TAPS``.
    """
    if register_order not in PRIMITIVE_TAPS:
        raise ValueError(f"register_order must be in [3, 16], got {register_order}")
    period = (1 << register_order) - 1
    seed_state = int(seed_state) & period
    if seed_state == 0:
        raise ValueError("LFSR seed state must be nonzero")
    if out_len < 1:
        raise ValueError("out_len must be >= 1")

    taps = PRIMITIVE_TAPS[register_order] if taps is None else tuple(taps)
    if taps[0] != register_order:
        raise ValueError("taps must start with the register order")
    state = seed_state
    n = min(out_len, period)
    bits = np.empty(n, dtype=np.uint8)
    for i in range(n):
        bits[i] = state & 1
        fb = 0
        for t in taps:
            fb ^= (state >> (register_order - t)) & 1
        state = (state >> 1) | (fb << (register_order - 1))
    if out_len > period:
        bits = np.resize(bits, out_len)
    return bits


def generate_msequence(register_order: int, seed_state: int, out_len: int) -> np.ndarray:
    """Binary antipodal M-sequence: LFSR bit 0 -> -3, bit 1 -> +3."""
    bits = msequence_bits(register_order, seed_state, out_len)
    return np.where(bits == 1, 3, -3).astype(np.int8)


def map_bits_to_pam4(bits) -> np.ndarray:
    """Gray-map bit pairs (MSB first): 00->-3, 01->-1, 11->+1, 10->+3."""
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.ndim != 1 or len(bits) % 2:
        raise ValueError("bit count must be even")
    msb, lsb = bits[0::2], bits[1::2]
    idx = 2 * msb + (msb ^ lsb)
    return LEVELS[idx]


def demap_pam4(levels) -> np.ndarray:
    """Inverse of :func:`map_bits_to_pam4` for exact levels."""
    idx = (np.asarray(levels, dtype=np.int64) + 3) // 2
    if np.any((idx < 0) | (idx > 3)):
        raise ValueError("levels must be in {-3, -1, 1, 3}")
    msb = (idx >> 1).astype(np.uint8)
    lsb = msb ^ (idx & 1).astype(np.uint8)
    out = np.empty(2 * len(idx), dtype=np.uint8)
    out[0::2] = msb
    out[1::2] = lsb
    return out


def _order_for(length: int) -> int:
    return int(min(16, max(3, np.ceil(np.log2(length)))))


def _distinct_states(rng, order, count):
    period = (1 << order) - 1
    if count > period:
        raise ValueError("more sequences requested than distinct LFSR states")
    return rng.choice(np.arange(1, period + 1), size=count, replace=False)


def make_preamble(layout: FrameLayout, rng_seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Sync and training symbol sequences for a frame seed.

    Odd-numbered sync copies are time reversed (the M-sequence of the
    reciprocal polynomial); cyclic shifts of one sequence would match the
    reference over partial overlaps and leave half-height sidelobes. Training
    symbol ``k`` takes its MSB from the M-sequence and its LSB from the
    same sequence delayed by half a period. Each training block uses its own
    primitive polynomial (cycling when blocks outnumber the table).
    """
    rng = np.random.default_rng([int(rng_seed), 0x5EED])
    s_order = _order_for(layout.sync_seq_len)
    sync = np.concatenate([
        generate_msequence(s_order, st, layout.sync_seq_len)[:: -1 if i % 2 else 1]
        for i, st in enumerate(_distinct_states(rng, s_order, layout.sync_seq_count))
    ])

    t_order = _order_for(layout.train_seq_len)
    t_period = (1 << t_order) - 1
    train = []
    polys = PRIMITIVE_POLYNOMIALS[t_order]
    for i, st in enumerate(_distinct_states(rng, t_order, layout.train_seq_count)):
        m = msequence_bits(t_order, st, t_period, polys[i % len(polys)])
        k = np.arange(layout.train_seq_len)
        pairs = np.empty(2 * layout.train_seq_len, dtype=np.uint8)
        pairs[0::2] = m[k % t_period]
        pairs[1::2] = m[(k + t_period // 2) % t_period]
        train.append(map_bits_to_pam4(pairs))
    return sync, np.concatenate(train)


def build_frame(layout: FrameLayout, payload_bits, rng_seed: int) -> SymbolFrame:
    payload_bits = np.asarray(payload_bits, dtype=np.uint8)
    if len(payload_bits) != 2 * layout.payload_len:
        raise ValueError(
            f"expected {2 * layout.payload_len} payload bits, got {len(payload_bits)}"
        )
    sync, train = make_preamble(layout, rng_seed)
    symbols = np.concatenate([sync, train, map_bits_to_pam4(payload_bits)]).astype(np.int8)
    return SymbolFrame(layout, symbols, payload_bits, int(rng_seed), sync, train)


def random_frame(layout: FrameLayout, rng_seed: int, rng=None) -> SymbolFrame:
    """Frame with uniformly random payload bits."""
    rng = np.random.default_rng(rng_seed) if rng is None else rng
    bits = rng.integers(0, 2, size=2 * layout.payload_len, dtype=np.uint8)
    return build_frame(layout, bits, rng_seed)
