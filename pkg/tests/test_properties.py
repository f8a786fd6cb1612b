"""Property-based checks with hypothesis."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import brute_force_mlsd, colored_metric
from pam4sim.channel import fiber_cd
from pam4sim.framing import LEVELS, demap_pam4, map_bits_to_pam4
from pam4sim.rxdsp import mlsd_viterbi, sequence_metric, slice_levels
from pam4sim.waveform import OpticalField

finite = st.floats(-6, 6, allow_nan=False, allow_infinity=False)


@given(st.lists(st.integers(0, 1), min_size=0, max_size=200).filter(lambda b: len(b) % 2 == 0))
def test_map_demap_roundtrip(bits):
    bits = np.array(bits, dtype=np.uint8)
    np.testing.assert_array_equal(demap_pam4(map_bits_to_pam4(bits)), bits)


@given(st.lists(st.sampled_from([-3, -1, 1, 3]), min_size=2, max_size=100))
def test_gray_adjacent_levels_differ_in_one_bit(levels):
    lv = np.array(levels)
    bits = demap_pam4(lv).reshape(-1, 2)
    up = np.minimum(lv + 2, 3)
    bits_up = demap_pam4(up).reshape(-1, 2)
    moved = up != lv
    assert np.all(np.sum(bits[moved] != bits_up[moved], axis=1) == 1)


@given(arrays(np.float64, st.integers(1, 200), elements=finite))
def test_slicer_is_nearest_level(x):
    out = slice_levels(x)
    d = np.abs(x[:, None] - LEVELS[None, :])
    assert np.all(np.abs(x - out) <= d.min(axis=1) + 1e-12)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.integers(1, 6), elements=finite), st.floats(0, 1))
def test_viterbi_equals_exhaustive_search(y, alpha):
    seq, metric = mlsd_viterbi(y, alpha, return_metric=True)
    _, best = brute_force_mlsd(y, alpha)
    np.testing.assert_allclose(metric, best, rtol=1e-9, atol=1e-9)
    np.testing.assert_allclose(sequence_metric(y, seq, alpha),
                               colored_metric(y, seq[None, :].astype(float), alpha)[0], atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, st.integers(1, 8), elements=finite), st.floats(0, 1),
       st.lists(st.sampled_from([-3, -1, 1, 3]), min_size=8, max_size=8))
def test_viterbi_never_worse_than_any_candidate(y, alpha, cand):
    seq, metric = mlsd_viterbi(y, alpha, return_metric=True)
    c = np.array(cand[: len(y)], dtype=float)
    assert metric <= colored_metric(y, c[None, :], alpha)[0] + 1e-9


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0, 5000), st.integers(4, 10))
def test_cd_is_unitary_and_reversible(seed, length, log_n):
    rng = np.random.default_rng(seed)
    n = 2**log_n
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    f = OpticalField(x, 320e9)
    y = fiber_cd(f, length)
    np.testing.assert_allclose(np.sum(np.abs(y.samples) ** 2), np.sum(np.abs(x) ** 2), rtol=1e-10)
    back = fiber_cd(y, length, D=-17e-6)
    np.testing.assert_allclose(back.samples, x, atol=1e-9)
