import numpy as np
import pytest

from crackle.audio_core import MAX_CYCLE_SAMPLES, PhaseRatio, fixed_lengths_for, sample_pad
from crackle.errors import InvalidFrequency, InvalidRange, ShapeError, TooShort
from crackle.features import (
    LOG_FLOOR,
    build_mel_filterbank,
    default_filterbank,
    extract,
    hann_window,
    hz_to_mel,
    log_mel,
    mel_to_hz,
    normalize,
    read_feature_dump,
    stft_magnitude,
    write_feature_dump,
)

from oracles import naive_dft_magnitude


def test_stft_shapes_and_zero():
    assert stft_magnitude(np.zeros(1024)).shape == (2, 257)
    assert not stft_magnitude(np.zeros(1024)).any()
    assert stft_magnitude(np.zeros(1100)).shape == (2, 257)
    with pytest.raises(TooShort):
        stft_magnitude(np.zeros(511))


def test_stft_tone_argmax():
    t = np.arange(16000) / 16000
    spec = stft_magnitude(np.sin(2 * np.pi * 1000 * t))
    assert (spec.argmax(axis=1) == 32).all()


def test_stft_matches_naive_dft():
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(50):
        x = rng.standard_normal(int(rng.integers(512, 4097)))
        fast, slow = stft_magnitude(x), naive_dft_magnitude(x)
        worst = max(worst, np.max(np.abs(fast - slow)) / np.max(np.abs(slow)))
    assert worst < 1e-6


def test_parseval():
    # sum_k |X_k|^2 over the full spectrum equals N * sum_n |x_n w_n|^2;
    # the one-sided spectrum counts bins 1..255 twice.
    x = np.random.default_rng(1).standard_normal(2048)
    spec = stft_magnitude(x)
    w = hann_window()
    for t in range(spec.shape[0]):
        frame = x[512 * t : 512 * (t + 1)] * w
        power = spec[t, 0] ** 2 + spec[t, -1] ** 2 + 2 * (spec[t, 1:-1] ** 2).sum()
        assert abs(power - 512 * (frame**2).sum()) <= 1e-6 * power


def test_mel_scale():
    assert hz_to_mel(0) == 0
    assert abs(hz_to_mel(700) - 2595 * np.log10(2)) < 1e-9
    assert abs(hz_to_mel(700) - 781.17) < 0.01
    assert abs(mel_to_hz(hz_to_mel(4000)) - 4000) < 1e-9
    with pytest.raises(InvalidFrequency):
        hz_to_mel(-1)


def test_filterbank_structure():
    fb = default_filterbank()
    assert fb.shape == (45, 257)
    assert (fb >= 0).all() and (fb <= 1).all()
    assert (fb.max(axis=1) > 0).all()
    assert (fb.sum(axis=0) <= 2 + 1e-12).all()
    edges = mel_to_hz(np.linspace(0, hz_to_mel(8000), 47))
    bins = np.arange(257) * 16000 / 512
    assert (fb[0, bins > edges[2]] == 0).all()
    centers = edges[1:-1]
    assert (np.diff(centers) > 0).all()
    for row in fb:
        nz = np.flatnonzero(row)
        peak = row.argmax()
        # unimodal: rises to the peak then falls
        assert (np.diff(row[nz[0] : peak + 1]) >= 0).all()
        assert (np.diff(row[peak : nz[-1] + 1]) <= 0).all()
    with pytest.raises(InvalidRange):
        build_mel_filterbank(f_max=9000)


def test_filterbank_triangle_formula():
    fb = default_filterbank()
    edges = mel_to_hz(np.linspace(0, hz_to_mel(8000), 47))
    f = np.arange(257) * 16000 / 512
    for m in range(45):
        lo, c, hi = edges[m], edges[m + 1], edges[m + 2]
        expect = np.clip(np.minimum((f - lo) / (c - lo), (hi - f) / (hi - c)), 0, None)
        np.testing.assert_allclose(fb[m], expect, atol=1e-12)


def test_log_mel_matches_matrix_oracle():
    spec = np.abs(np.random.default_rng(2).standard_normal((7, 257)))
    fb = default_filterbank()
    oracle = np.array([[np.log(sum(fb[m, k] * spec[t, k] for k in range(257)) + 1e-10)
                        for m in range(45)] for t in range(7)])
    assert np.max(np.abs(log_mel(spec, fb) - oracle)) < 1e-9


def test_log_mel_examples():
    assert np.allclose(log_mel(np.zeros((3, 257))), np.log(LOG_FLOOR))
    spec = np.abs(np.random.default_rng(3).standard_normal((4, 257))) + 1.0
    np.testing.assert_allclose(log_mel(2 * spec) - log_mel(spec), np.log(2), atol=1e-9)
    with pytest.raises(ShapeError):
        log_mel(np.zeros((3, 256)))


def test_log_mel_tone_row():
    t = np.arange(4096) / 16000
    spec = stft_magnitude(np.sin(2 * np.pi * 1000 * t))
    fb = default_filterbank()
    assert (log_mel(spec).argmax(axis=1) == fb[:, 32].argmax()).all()


def test_normalize():
    assert normalize(np.array([[1.0, 3.0], [1.0, 3.0]])).tolist() == [[-1, 1], [-1, 1]]
    assert not normalize(np.full((3, 4), 7.0)).any()
    x = np.random.default_rng(4).standard_normal((20, 45)) * 3 + 5
    y = normalize(x)
    assert abs(y.mean()) < 1e-9 and abs(y.std() - 1) < 1e-9
    assert np.max(np.abs(normalize(y) - y)) < 1e-9


def test_fixed_input_shapes():
    rng = np.random.default_rng(5)
    cycle = sample_pad(rng.standard_normal(40000), MAX_CYCLE_SAMPLES)
    assert extract(cycle).shape == (257, 45)
    lengths = fixed_lengths_for(PhaseRatio(1, 2))
    insp = sample_pad(rng.standard_normal(20000), lengths.insp_len)
    assert extract(insp).shape == (65980 // 512, 45) == (128, 45)


def test_feature_dump_roundtrip(tmp_path):
    x = np.random.default_rng(6).standard_normal((5, 45)).astype(np.float32)
    path = tmp_path / "a.feat"
    write_feature_dump(path, x)
    raw = path.read_bytes()
    assert raw[:8] == (5).to_bytes(4, "little") + (45).to_bytes(4, "little")
    assert len(raw) == 8 + 5 * 45 * 4
    assert np.array_equal(read_feature_dump(path), x)
