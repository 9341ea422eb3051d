"""The 7-block BN-Conv2D-ReLU network, with one to three input branches."""

from __future__ import annotations

import copy
import hashlib
from dataclasses import dataclass

import numpy as np

from ..errors import ShapeError
from .layers import BatchNorm, Conv2D, Dense, GlobalAvgPool, MaxPool2x2, ReLU, softmax

DEFAULT_CHANNELS = (16, 32, 64, 64, 128, 128, 256)


@dataclass(frozen=True)
class ArchitectureSpec:
    """Per-branch layout: one conv width per block, 2x2 max pooling after ``pool_after`` blocks."""

    channels: tuple = DEFAULT_CHANNELS
    pool_after: tuple = (1, 2, 3, 4, 5)
    in_channels: int = 1
    bn_momentum: float = 0.9
    bn_eps: float = 1e-5

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))
        object.__setattr__(self, "pool_after", tuple(int(b) for b in self.pool_after))
        if len(self.channels) != 7:
            raise ValueError(f"the network has exactly 7 blocks, got {len(self.channels)} widths")

    @property
    def n_blocks(self) -> int:
        return len(self.channels)

    @property
    def feature_width(self) -> int:
        return self.channels[-1]


class ConvBlock:
    def __init__(self, c_in, c_out, pool, arch, rng, dtype):
        self.bn = BatchNorm(c_in, momentum=arch.bn_momentum, eps=arch.bn_eps, dtype=dtype)
        self.conv = Conv2D(c_in, c_out, rng=rng, dtype=dtype)
        self.relu = ReLU()
        self.pool = MaxPool2x2() if pool else None

    def forward(self, x, train):
        x = self.relu.forward(self.conv.forward(self.bn.forward(x, train)))
        return self.pool.forward(x) if self.pool else x

    def backward(self, d, bn_grads=True, conv_grads=True, input_grad=True):
        if self.pool:
            d = self.pool.backward(d)
        d = self.relu.backward(d)
        d = self.conv.backward(d, need_input_grad=bn_grads or input_grad, need_param_grad=conv_grads)
        if d is None:
            return None
        return self.bn.backward(d, need_input_grad=input_grad, need_param_grad=bn_grads)


class Branch:
    def __init__(self, arch: ArchitectureSpec, rng, dtype):
        widths = (arch.in_channels, *arch.channels)
        self.blocks = [
            ConvBlock(widths[i], widths[i + 1], (i + 1) in arch.pool_after, arch, rng, dtype)
            for i in range(arch.n_blocks)
        ]
        self.gap = GlobalAvgPool()

    def forward(self, x, train):
        for block in self.blocks:
            x = block.forward(x, train)
        return self.gap.forward(x)


class Model:
    """Multi-branch CNN classifier.

    Parameters are organised in named groups that are the unit of freezing:
    ``b{branch}.block{i}.bn`` (gamma, beta and running statistics),
    ``b{branch}.block{i}.conv`` (weight, bias) and ``head`` (the output Dense).
    Inputs are ``(batch, frames, mel_bins)`` arrays, one per branch.
    """

    def __init__(self, arch: ArchitectureSpec = ArchitectureSpec(), n_branches: int = 1,
                 num_classes: int = 2, seed: int | None = 0, dtype=np.float32):
        if not 1 <= n_branches <= 3:
            raise ValueError(f"1 to 3 branches supported, got {n_branches}")
        self.arch = arch
        self.num_classes = num_classes
        self.dtype = np.dtype(dtype)
        rng = np.random.default_rng(seed)
        self.branches = [Branch(arch, rng, dtype) for _ in range(n_branches)]
        self.head = Dense(arch.feature_width * n_branches, num_classes, rng=rng, dtype=dtype)
        self.trainable = {name: True for name in self.groups()}

    @property
    def n_branches(self) -> int:
        return len(self.branches)

    # -- parameter bookkeeping -------------------------------------------------

    def groups(self) -> dict:
        out = {}
        for b, branch in enumerate(self.branches):
            for i, block in enumerate(branch.blocks, start=1):
                out[f"b{b}.block{i}.bn"] = block.bn
                out[f"b{b}.block{i}.conv"] = block.conv
        out["head"] = self.head
        return out

    def named_parameters(self):
        for gname, layer in self.groups().items():
            for pname, value in layer.params.items():
                yield gname, pname, value

    def state_dict(self) -> dict:
        state = {}
        for gname, layer in self.groups().items():
            for pname, value in layer.params.items():
                state[f"{gname}.{pname}"] = value.copy()
            if isinstance(layer, BatchNorm):
                state[f"{gname}.running_mean"] = layer.running_mean.copy()
                state[f"{gname}.running_var"] = layer.running_var.copy()
        return state

    def load_state_dict(self, state: dict) -> None:
        expected = set(self.state_dict())
        if set(state) != expected:
            missing = sorted(expected - set(state))[:3]
            extra = sorted(set(state) - expected)[:3]
            raise ShapeError(f"state mismatch: missing {missing}, unexpected {extra}")
        for gname, layer in self.groups().items():
            for pname in layer.params:
                layer.params[pname] = self._take(state[f"{gname}.{pname}"], layer.params[pname].shape)
            if isinstance(layer, BatchNorm):
                layer.running_mean = self._take(state[f"{gname}.running_mean"], layer.running_mean.shape)
                layer.running_var = self._take(state[f"{gname}.running_var"], layer.running_var.shape)

    def _take(self, value, shape):
        value = np.asarray(value)
        if value.shape != shape:
            raise ShapeError(f"expected shape {shape}, got {value.shape}")
        return value.astype(self.dtype, copy=True)

    def copy(self) -> "Model":
        return copy.deepcopy(self)

    def astype(self, dtype) -> "Model":
        out = self.copy()
        out.dtype = np.dtype(dtype)
        for gname, layer in out.groups().items():
            for pname in layer.params:
                layer.params[pname] = layer.params[pname].astype(dtype)
            if isinstance(layer, BatchNorm):
                layer.running_mean = layer.running_mean.astype(dtype)
                layer.running_var = layer.running_var.astype(dtype)
        return out

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for name, value in sorted(self.state_dict().items()):
            h.update(name.encode())
            h.update(np.ascontiguousarray(value).tobytes())
        return h.hexdigest()

    # -- computation -----------------------------------------------------------

    def _prepare(self, inputs):
        if isinstance(inputs, np.ndarray):
            inputs = [inputs]
        if len(inputs) != self.n_branches:
            raise ShapeError(f"model has {self.n_branches} branches, got {len(inputs)} inputs")
        out = []
        for x in inputs:
            x = np.asarray(x, dtype=self.dtype)
            if x.ndim == 3:
                x = x[..., None]
            if x.ndim != 4 or x.shape[3] != self.arch.in_channels:
                raise ShapeError(f"expected (batch, frames, bins[, channels]) input, got {x.shape}")
            out.append(x)
        return out

    def forward(self, inputs, train: bool = False) -> np.ndarray:
        """Return logits for a batch."""
        for name, layer in self.groups().items():
            if isinstance(layer, BatchNorm):
                layer.frozen = not self.trainable[name]
        feats = [branch.forward(x, train) for branch, x in zip(self.branches, self._prepare(inputs))]
        z = feats[0] if len(feats) == 1 else np.concatenate(feats, axis=1)
        return self.head.forward(z)

    def backward(self, dlogits: np.ndarray) -> None:
        """Backpropagate into every trainable group, stopping below the lowest one."""
        dz = self.head.backward(dlogits)
        width = self.arch.feature_width
        for b, branch in enumerate(self.branches):
            flags = [
                (self.trainable[f"b{b}.block{i}.bn"], self.trainable[f"b{b}.block{i}.conv"])
                for i in range(1, len(branch.blocks) + 1)
            ]
            active = [i for i, (bn, conv) in enumerate(flags) if bn or conv]
            if not active:
                continue
            lowest = active[0]
            d = branch.gap.backward(np.ascontiguousarray(dz[:, b * width : (b + 1) * width]))
            for i in range(len(branch.blocks) - 1, lowest - 1, -1):
                bn, conv = flags[i]
                d = branch.blocks[i].backward(d, bn_grads=bn, conv_grads=conv, input_grad=i > lowest)

    def predict_proba(self, inputs, batch_size: int = 64) -> np.ndarray:
        inputs = self._prepare(inputs)
        n = len(inputs[0])
        out = []
        for start in range(0, n, batch_size):
            batch = [x[start : start + batch_size] for x in inputs]
            out.append(softmax(self.forward(batch, train=False).astype(np.float64)))
        return np.concatenate(out) if out else np.zeros((0, self.num_classes))

    def predict(self, inputs, batch_size: int = 64) -> np.ndarray:
        return self.predict_proba(inputs, batch_size).argmax(axis=1)

    def decisions(self):
        """Current ReLU masks and max-pool choices, used to detect kinks in gradient checks."""
        for branch in self.branches:
            for block in branch.blocks:
                yield block.relu.decisions()
                if block.pool:
                    yield block.pool.decisions()
