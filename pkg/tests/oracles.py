"""Slow, obviously-correct reference implementations used by the tests."""

import math

import numpy as np
from scipy.special import i0


def naive_resample(x, src, dst, taps=64, beta=8.6, cutoff_frac=0.9):
    """Windowed-sinc interpolation written as a plain double loop."""
    scale = min(1.0, dst / src)
    fc = 0.5 * cutoff_frac * scale
    hw = (taps / 2) / scale
    n_out = (2 * len(x) * dst + src) // (2 * src)
    out = np.zeros(n_out)
    for n in range(n_out):
        t = n * src / dst
        acc = norm = 0.0
        for k in range(math.floor(t - hw), math.ceil(t + hw) + 1):
            tau = t - k
            # exact support test: |n*src - k*dst| < taps/2 * max(src, dst)
            if 2 * abs(n * src - k * dst) >= taps * max(src, dst):
                continue
            r = tau / hw
            arg = 2 * fc * tau
            sinc = math.sin(math.pi * arg) / (math.pi * arg) if arg else 1.0
            h = sinc * i0(beta * math.sqrt(1 - r * r)) / i0(beta)
            norm += h
            if 0 <= k < len(x):
                acc += h * x[k]
        out[n] = acc / norm
    return out


def naive_dft_magnitude(x, n_fft=512):
    """Per-frame |DFT| of periodic-Hann-windowed, non-overlapping frames, O(N^2) per frame."""
    window = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n_fft) / n_fft)
    frames = len(x) // n_fft
    k = np.arange(n_fft // 2 + 1)[:, None]
    n = np.arange(n_fft)[None, :]
    basis = np.exp(-2j * np.pi * k * n / n_fft)
    out = np.zeros((frames, n_fft // 2 + 1))
    for t in range(frames):
        seg = x[t * n_fft : (t + 1) * n_fft] * window
        out[t] = np.abs(basis @ seg)
    return out


def unrolled_sample_pad(s, target_len):
    """Walk the sequence s, reverse(s), s, ... one sample at a time."""
    s = list(s)
    if len(s) >= target_len:
        return s[:target_len]
    out, forward = [], True
    while len(out) < target_len:
        chunk = s if forward else s[::-1]
        for v in chunk:
            if len(out) == target_len:
                break
            out.append(v)
        forward = not forward
    return out


def conv3x3_loops(x, w, b):
    """Zero-padded 'same' 3x3 convolution (cross-correlation), six nested loops."""
    n, h, wd, ci = x.shape
    co = w.shape[3]
    out = np.zeros((n, h, wd, co))
    for a in range(n):
        for i in range(h):
            for j in range(wd):
                for o in range(co):
                    acc = b[o]
                    for di in range(3):
                        for dj in range(3):
                            ii, jj = i + di - 1, j + dj - 1
                            if 0 <= ii < h and 0 <= jj < wd:
                                acc += float(np.dot(x[a, ii, jj, :], w[di, dj, :, o]))
                    out[a, i, j, o] = acc
    return out


def confusion_recount(pred, labels):
    tp = fp = tn = fn = 0
    for p, y in zip(pred, labels):
        if p == 1 and y == 1:
            tp += 1
        elif p == 1:
            fp += 1
        elif y == 1:
            fn += 1
        else:
            tn += 1
    return tp, fp, tn, fn
