"""Layers with explicit forward/backward passes.

Activations are stored channels-last: ``(batch, height, width, channels)``
with height = time frames and width = mel bins. Each layer caches what its
backward pass needs during ``forward`` and writes parameter gradients into
``self.grads``.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeError


class Layer:
    params: dict
    grads: dict

    def __init__(self):
        self.params = {}
        self.grads = {}

    def zero_grad(self):
        for k, v in self.params.items():
            self.grads[k] = np.zeros_like(v)


def glorot_uniform_init(fan_in: int, fan_out: int, shape=None, rng=None, seed=None, dtype=np.float32):
    """Uniform samples on ``[-L, L]`` with ``L = sqrt(6 / (fan_in + fan_out))``."""
    if fan_in <= 0 or fan_out <= 0:
        raise ValueError("fans must be positive")
    if rng is None:
        rng = np.random.default_rng(seed)
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    shape = (fan_in, fan_out) if shape is None else shape
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class Conv2D(Layer):
    """3x3 convolution (cross-correlation), stride 1, zero 'same' padding.

    ``weight`` has shape ``(3, 3, c_in, c_out)``.
    """

    kernel = 3

    def __init__(self, c_in: int, c_out: int, rng=None, dtype=np.float32):
        super().__init__()
        k = self.kernel
        self.c_in, self.c_out = c_in, c_out
        self.params["weight"] = glorot_uniform_init(
            k * k * c_in, k * k * c_out, shape=(k, k, c_in, c_out), rng=rng, dtype=dtype
        )
        self.params["bias"] = np.zeros(c_out, dtype=dtype)

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 4 or x.shape[3] != self.c_in:
            raise ShapeError(f"Conv2D expects (N, H, W, {self.c_in}) input, got {x.shape}")
        n, h, w, c = x.shape
        k = self.kernel
        xp = np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0)))
        # (n, h, w, c, kh, kw) -> rows of (kh, kw, c) patches matching the weight layout
        cols = sliding_window_view(xp, (k, k), axis=(1, 2)).transpose(0, 1, 2, 4, 5, 3)
        cols = cols.reshape(n * h * w, k * k * c)
        self._cols = cols
        self._in_shape = x.shape
        out = cols @ self.params["weight"].reshape(k * k * c, self.c_out)
        out += self.params["bias"]
        return out.reshape(n, h, w, self.c_out)

    def backward(self, dout: np.ndarray, need_input_grad: bool = True,
                 need_param_grad: bool = True) -> np.ndarray | None:
        n, h, w, c = self._in_shape
        k = self.kernel
        d2 = dout.reshape(n * h * w, self.c_out)
        if need_param_grad:
            self.grads["weight"] = (self._cols.T @ d2).reshape(self.params["weight"].shape)
            self.grads["bias"] = d2.sum(axis=0)
        self._cols = None
        if not need_input_grad:
            return None
        weight = self.params["weight"]
        dxp = np.zeros((n, h + 2, w + 2, c), dtype=dout.dtype)
        for i in range(k):
            for j in range(k):
                dxp[:, i : i + h, j : j + w, :] += (d2 @ weight[i, j].T).reshape(n, h, w, c)
        return dxp[:, 1:-1, 1:-1, :]


class BatchNorm(Layer):
    """Per-channel batch normalisation over (batch, height, width)."""

    def __init__(self, channels: int, momentum: float = 0.9, eps: float = 1e-5, dtype=np.float32):
        super().__init__()
        self.channels = channels
        self.momentum = momentum
        self.eps = eps
        self.params["gamma"] = np.ones(channels, dtype=dtype)
        self.params["beta"] = np.zeros(channels, dtype=dtype)
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        # frozen layers normalise with, and never update, their running statistics
        self.frozen = False
        self.track_running_stats = True

    def forward(self, x: np.ndarray, train: bool = True) -> np.ndarray:
        if x.ndim != 4 or x.shape[3] != self.channels:
            raise ShapeError(f"BatchNorm expects (N, H, W, {self.channels}) input, got {x.shape}")
        train = train and not self.frozen
        if train:
            axes = (0, 1, 2)
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            if self.track_running_stats:
                m = self.momentum
                n = x.shape[0] * x.shape[1] * x.shape[2]
                unbiased = var * n / max(n - 1, 1)
                self.running_mean = (m * self.running_mean + (1 - m) * mean).astype(self.running_mean.dtype)
                self.running_var = (m * self.running_var + (1 - m) * unbiased).astype(self.running_var.dtype)
        else:
            mean, var = self.running_mean, self.running_var
        inv_std = 1.0 / np.sqrt(var + self.eps)
        x_hat = (x - mean) * inv_std
        self._cache = (x_hat, inv_std, train)
        return x_hat * self.params["gamma"] + self.params["beta"]

    def backward(self, dout: np.ndarray, need_input_grad: bool = True,
                 need_param_grad: bool = True) -> np.ndarray | None:
        x_hat, inv_std, train = self._cache
        self._cache = None
        axes = (0, 1, 2)
        if need_param_grad:
            self.grads["gamma"] = (dout * x_hat).sum(axis=axes)
            self.grads["beta"] = dout.sum(axis=axes)
        if not need_input_grad:
            return None
        dx_hat = dout * self.params["gamma"]
        if not train:
            return dx_hat * inv_std
        mean_dx_hat = dx_hat.mean(axis=axes)
        mean_dx_hat_x = (dx_hat * x_hat).mean(axis=axes)
        return (dx_hat - mean_dx_hat - x_hat * mean_dx_hat_x) * inv_std


class ReLU(Layer):
    def forward(self, x):
        self._mask = x > 0
        return x * self._mask

    def backward(self, dout):
        return dout * self._mask

    def decisions(self):
        return self._mask


class MaxPool2x2(Layer):
    """2x2 max pooling with stride 2; odd trailing rows/columns are dropped.

    An axis of size 1 is left as is so that short inputs survive the
    five pooling stages. Ties go to the first window element in row-major
    order, so exactly one input receives each output's gradient.
    """

    def forward(self, x):
        n, h, w, c = x.shape
        ph = 2 if h >= 2 else 1
        pw = 2 if w >= 2 else 1
        ho, wo = h // ph, w // pw
        views = [x[:, i : ho * ph : ph, j : wo * pw : pw, :] for i in range(ph) for j in range(pw)]
        y = views[0]
        for v in views[1:]:
            y = np.maximum(y, v)
        masks, taken = [], np.zeros(y.shape, dtype=bool)
        for v in views:
            m = (v == y) & ~taken
            taken |= m
            masks.append(m)
        self._cache = (x.shape, ph, pw, masks)
        return np.ascontiguousarray(y)

    def backward(self, dout):
        shape, ph, pw, masks = self._cache
        ho, wo = dout.shape[1], dout.shape[2]
        dx = np.zeros(shape, dtype=dout.dtype)
        k = 0
        for i in range(ph):
            for j in range(pw):
                dx[:, i : ho * ph : ph, j : wo * pw : pw, :] = dout * masks[k]
                k += 1
        return dx

    def decisions(self):
        return np.stack(self._cache[3])


class GlobalAvgPool(Layer):
    def forward(self, x):
        self._shape = x.shape
        return x.mean(axis=(1, 2))

    def backward(self, dout):
        n, h, w, c = self._shape
        return np.broadcast_to(dout[:, None, None, :] / (h * w), self._shape).astype(dout.dtype)


class Dense(Layer):
    def __init__(self, n_in: int, n_out: int, rng=None, dtype=np.float32):
        super().__init__()
        self.n_in, self.n_out = n_in, n_out
        self.params["weight"] = glorot_uniform_init(n_in, n_out, rng=rng, dtype=dtype)
        self.params["bias"] = np.zeros(n_out, dtype=dtype)

    def forward(self, x):
        if x.ndim != 2 or x.shape[1] != self.n_in:
            raise ShapeError(f"Dense expects (N, {self.n_in}) input, got {x.shape}")
        self._x = x
        return x @ self.params["weight"] + self.params["bias"]

    def backward(self, dout):
        self.grads["weight"] = self._x.T @ dout
        self.grads["bias"] = dout.sum(axis=0)
        return dout @ self.params["weight"].T


def softmax(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def softmax_backward(probs: np.ndarray, dprobs: np.ndarray) -> np.ndarray:
    return probs * (dprobs - (dprobs * probs).sum(axis=-1, keepdims=True))
