import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crackle.audio_core import (
    MAX_CYCLE_SAMPLES,
    STANDARD_RATIOS,
    AudioSignal,
    PhaseRatio,
    fixed_lengths_for,
    resample,
    sample_pad,
    split_phases,
    zero_pad,
)
from crackle.errors import EmptySignal, InvalidRatio, InvalidSignal, TooShort

from oracles import naive_resample, unrolled_sample_pad


def test_resample_equal_rate_is_identical_copy():
    x = np.random.default_rng(0).standard_normal(1000)
    out = resample(AudioSignal(x, 16000), 16000)
    assert out.sample_rate_hz == 16000
    assert np.array_equal(out.samples, x)
    assert out.samples is not x


def test_resample_length_formula():
    out = resample(AudioSignal(np.zeros(4410), 44100), 16000)
    assert len(out) == 1600 and out.sample_rate_hz == 16000


def test_resample_constant_interior():
    out = resample(AudioSignal(np.full(2000, 0.5), 8000), 16000)
    assert len(out) == 4000
    assert np.max(np.abs(out.samples[200:-200] - 0.5)) < 1e-6


@pytest.mark.parametrize("src,dst,n", [(8000, 16000, 300), (44100, 16000, 500), (4000, 16000, 100), (22050, 16000, 400)])
def test_resample_matches_naive_oracle(src, dst, n):
    x = np.random.default_rng(src).standard_normal(n)
    fast = resample(AudioSignal(x, src), dst).samples
    slow = naive_resample(x, src, dst)
    assert fast.shape == slow.shape
    np.testing.assert_allclose(fast, slow, atol=1e-10)


def test_resample_linear():
    rng = np.random.default_rng(3)
    x, y = rng.standard_normal(700), rng.standard_normal(700)
    r = lambda s: resample(AudioSignal(s, 8000), 16000).samples
    np.testing.assert_allclose(r(2.5 * x - 0.7 * y), 2.5 * r(x) - 0.7 * r(y), atol=1e-9)


def test_resample_errors():
    with pytest.raises(EmptySignal):
        resample(AudioSignal(np.zeros(0), 8000), 16000)
    with pytest.raises(InvalidSignal):
        resample(AudioSignal(np.array([0.0, np.nan, 1.0]), 8000), 16000)


def test_split_examples():
    insp, exp = split_phases(np.arange(3000), PhaseRatio(1, 3))
    assert (len(insp), len(exp)) == (1000, 2000)
    insp, exp = split_phases(np.arange(5), PhaseRatio(1, 2))
    assert (len(insp), len(exp)) == (3, 2)
    with pytest.raises(TooShort):
        split_phases(np.ones(1), PhaseRatio(1, 2))


@given(st.integers(2, 5000), st.sampled_from(STANDARD_RATIOS))
def test_split_partition(n, ratio):
    x = np.arange(n)
    insp, exp = split_phases(x, ratio)
    assert np.array_equal(np.concatenate([insp, exp]), x)
    # round half up of n * num / den, in exact integers
    assert len(insp) == (2 * n * ratio.insp_num + ratio.cycle_den) // (2 * ratio.cycle_den)


def test_fixed_lengths():
    assert fixed_lengths_for(PhaseRatio(1, 2)).insp_len == 65980
    assert fixed_lengths_for(PhaseRatio(1, 2)).exp_len == 65980
    fl = fixed_lengths_for(PhaseRatio(1, 3))
    assert (fl.insp_len, fl.exp_len) == (43987, 87973)
    fl = fixed_lengths_for(PhaseRatio(2, 5))
    assert (fl.insp_len, fl.exp_len) == (52784, 79176)
    for r in STANDARD_RATIOS:
        fl = fixed_lengths_for(r)
        assert fl.cycle_len == MAX_CYCLE_SAMPLES == fl.insp_len + fl.exp_len


def test_phase_ratio_validation():
    assert PhaseRatio.parse("1:2") == PhaseRatio.parse("12") == PhaseRatio(1, 2)
    assert PhaseRatio.parse("49").token == "49"
    with pytest.raises(InvalidRatio):
        PhaseRatio(2, 3)
    with pytest.raises(InvalidRatio):
        PhaseRatio.parse("abc")


def test_sample_pad_examples():
    assert sample_pad([1, 2, 3, 4, 5], 8).tolist() == [1, 2, 3, 4, 5, 5, 4, 3]
    assert sample_pad([1, 2, 3], 3).tolist() == [1, 2, 3]
    assert sample_pad([1, 2], 7).tolist() == [1, 2, 2, 1, 1, 2, 2]
    assert sample_pad([1, 2, 3, 4], 2).tolist() == [1, 2]
    with pytest.raises(EmptySignal):
        sample_pad([], 4)


def test_zero_pad_examples():
    assert zero_pad([1, 2, 3], 5).tolist() == [1, 2, 3, 0, 0]
    assert zero_pad([1, 2, 3], 3).tolist() == [1, 2, 3]
    assert zero_pad([1, 2, 3, 4], 2).tolist() == [1, 2]
    with pytest.raises(EmptySignal):
        zero_pad([], 4)


@settings(max_examples=200)
@given(st.lists(st.floats(-1, 1, allow_nan=False), min_size=1, max_size=40), st.integers(1, 200))
def test_sample_pad_properties(values, target):
    s = np.array(values)
    out = sample_pad(s, target)
    assert len(out) == target
    k = min(len(s), target)
    assert np.array_equal(out[:k], s[:k])
    if target > len(s):
        assert out[len(s) - 1] == out[len(s)]
    assert out.tolist() == unrolled_sample_pad(values, target)
