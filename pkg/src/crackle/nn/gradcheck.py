"""Central finite-difference verification of the analytic gradients (float64)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .layers import BatchNorm, Conv2D, Dense, GlobalAvgPool, MaxPool2x2, ReLU, softmax, softmax_backward
from .losses import focal_loss
from .model import ArchitectureSpec, Model

FD_STEP = 1e-5
# gradients below the floor are compared in absolute terms; the layer checks
# sum ~100 products, so their difference quotients carry ~1e-9 of rounding noise
GRAD_FLOOR = 1e-6
LAYER_GRAD_FLOOR = 1e-4


def relative_error(analytic, numeric, floor: float = GRAD_FLOOR) -> np.ndarray:
    analytic, numeric = np.asarray(analytic), np.asarray(numeric)
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / scale


@dataclass
class GradCheckReport:
    errors: dict = field(default_factory=dict)  # group -> max relative error, or "skipped"
    nudged: int = 0

    @property
    def max_error(self) -> float:
        vals = [v for v in self.errors.values() if not isinstance(v, str)]
        return max(vals) if vals else 0.0

    def passed(self, tolerance: float = 1e-4) -> bool:
        return self.max_error < tolerance

    def lines(self):
        for name, err in self.errors.items():
            yield f"{name:28s} {err}" if isinstance(err, str) else f"{name:28s} {err:.3e}"


def _fingerprint(model) -> bytes:
    return b"".join(np.packbits(np.asarray(d).astype(bool)).tobytes() if d.dtype == bool
                    else np.asarray(d).tobytes() for d in model.decisions())


def grad_check(model: Model, inputs, labels, eps: float = FD_STEP, coords_per_group: int = 6,
               seed: int = 0, gamma: float = 2.0, alpha=None) -> GradCheckReport:
    """Compare backprop with central differences on a sample of coordinates per group.

    The model is converted to float64 and BN runs on batch statistics without
    touching its running averages. A coordinate whose perturbation flips any
    ReLU mask or max-pool choice sits on a kink; it is replaced by another
    coordinate and counted in ``nudged``. Frozen groups are reported as "skipped".
    """
    model = model.astype(np.float64)
    for layer in model.groups().values():
        if isinstance(layer, BatchNorm):
            layer.track_running_stats = False
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)

    def loss_at():
        logits = model.forward(inputs, train=True)
        return focal_loss(logits, labels, gamma, alpha)

    _, dlogits, _ = loss_at()
    base = _fingerprint(model)
    model.backward(dlogits)
    analytic = {g: {p: layer.grads[p].copy() for p in layer.params}
                for g, layer in model.groups().items() if model.trainable[g]}

    report = GradCheckReport()
    for gname, layer in model.groups().items():
        if not model.trainable[gname]:
            report.errors[gname] = "skipped"
            continue
        worst = 0.0
        for pname, w in layer.params.items():
            checked, attempts = 0, 0
            while checked < min(coords_per_group, w.size) and attempts < 20 * coords_per_group:
                attempts += 1
                idx = np.unravel_index(rng.integers(w.size), w.shape)
                orig = w[idx]
                w[idx] = orig + eps
                plus, _, _ = loss_at()
                fp_plus = _fingerprint(model)
                w[idx] = orig - eps
                minus, _, _ = loss_at()
                fp_minus = _fingerprint(model)
                w[idx] = orig
                if fp_plus != base or fp_minus != base:
                    report.nudged += 1
                    continue
                numeric = (plus - minus) / (2 * eps)
                worst = max(worst, float(relative_error(analytic[gname][pname][idx], numeric)))
                checked += 1
        report.errors[gname] = worst
    return report


# ---------------------------------------------------------------------------
# single-layer checks


def _numeric_grad(f, x, eps):
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        orig = x[i]
        x[i] = orig + eps
        fp = f()
        x[i] = orig - eps
        fm = f()
        x[i] = orig
        g[i] = (fp - fm) / (2 * eps)
    return g


def check_layer(layer, x, eps: float = FD_STEP, seed: int = 0, **forward_kw) -> float:
    """Max relative error over the input gradient and all parameter gradients of ``layer``.

    The scalar objective is ``sum(forward(x) * R)`` for a fixed random ``R``.
    """
    rng = np.random.default_rng(seed)
    out = layer.forward(x, **forward_kw)
    r = rng.standard_normal(out.shape)

    def f():
        return float((layer.forward(x, **forward_kw) * r).sum())

    layer.forward(x, **forward_kw)
    dx = layer.backward(r)
    errs = [relative_error(dx, _numeric_grad(f, x, eps), LAYER_GRAD_FLOOR).max()]
    for pname, w in layer.params.items():
        errs.append(relative_error(layer.grads[pname], _numeric_grad(f, w, eps), LAYER_GRAD_FLOOR).max())
    return float(max(errs))


def check_all_layers(seed: int = 0) -> dict:
    """Finite-difference check of every layer type plus the softmax/focal-loss head."""
    rng = np.random.default_rng(seed)
    f64 = np.float64
    x = rng.standard_normal((2, 5, 4, 3))
    out = {}

    conv = Conv2D(3, 4, rng=rng, dtype=f64)
    conv.params["bias"] = rng.standard_normal(4)
    out["conv2d"] = check_layer(conv, x.copy())

    bn = BatchNorm(3, dtype=f64)
    bn.params["gamma"] = rng.uniform(0.5, 1.5, 3)
    bn.params["beta"] = rng.standard_normal(3)
    bn.track_running_stats = False
    out["batchnorm_train"] = check_layer(bn, x.copy(), train=True)
    bn.running_mean = rng.standard_normal(3)
    bn.running_var = rng.uniform(0.5, 2.0, 3)
    out["batchnorm_infer"] = check_layer(bn, x.copy(), train=False)

    # keep ReLU inputs away from the kink
    xr = rng.standard_normal((2, 5, 4, 3))
    xr = np.where(np.abs(xr) < 0.05, 0.1 * np.sign(xr) + 0.05, xr)
    out["relu"] = check_layer(ReLU(), xr)

    # distinct values so max-pool choices are stable under the perturbation
    xp = rng.permutation(2 * 5 * 4 * 3).reshape(2, 5, 4, 3).astype(f64) * 0.01
    out["maxpool2x2"] = check_layer(MaxPool2x2(), xp)
    out["gap"] = check_layer(GlobalAvgPool(), x.copy())

    dense = Dense(6, 3, rng=rng, dtype=f64)
    dense.params["bias"] = rng.standard_normal(3)
    out["dense"] = check_layer(dense, rng.standard_normal((4, 6)))

    class _Softmax:
        params: dict = {}

        def forward(self, z):
            self._p = softmax(z)
            return self._p

        def backward(self, d):
            return softmax_backward(self._p, d)

    out["softmax"] = check_layer(_Softmax(), rng.standard_normal((4, 3)))

    z = rng.standard_normal((5, 3))
    labels = rng.integers(0, 3, 5)
    alpha = rng.uniform(0.5, 1.5, 3)
    _, dz, _ = focal_loss(z, labels, 2.0, alpha)
    num = _numeric_grad(lambda: focal_loss(z, labels, 2.0, alpha)[0], z, FD_STEP)
    out["focal_loss"] = float(relative_error(dz, num).max())

    # Dense -> softmax -> focal loss stack, checked end to end
    dense = Dense(6, 3, rng=rng, dtype=f64)
    feats = rng.standard_normal((5, 6))

    def stack_loss():
        return focal_loss(dense.forward(feats), labels, 2.0, alpha)[0]

    _, dz, _ = focal_loss(dense.forward(feats), labels, 2.0, alpha)
    dense.backward(dz)
    errs = [relative_error(dense.grads[p], _numeric_grad(stack_loss, dense.params[p], FD_STEP)).max()
            for p in dense.params]
    out["dense_softmax_focal"] = float(max(errs))
    return out


def check_full_model(arch: ArchitectureSpec = ArchitectureSpec(), n_branches: int = 1,
                     input_shape=(4, 8, 45), seed: int = 0, coords_per_group: int = 6) -> GradCheckReport:
    rng = np.random.default_rng(seed)
    model = Model(arch, n_branches=n_branches, num_classes=4, seed=seed, dtype=np.float64)
    # perturb BN affine parameters away from the identity so their gradients are generic
    for layer in model.groups().values():
        if isinstance(layer, BatchNorm):
            layer.params["gamma"] = rng.uniform(0.8, 1.2, layer.channels)
            layer.params["beta"] = rng.uniform(-0.1, 0.1, layer.channels)
    inputs = [rng.standard_normal(input_shape) for _ in range(n_branches)]
    labels = np.arange(input_shape[0]) % 4
    return grad_check(model, inputs, labels, coords_per_group=coords_per_group, seed=seed)
