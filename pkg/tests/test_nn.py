import numpy as np
import pytest

from crackle.errors import EmptyDataset, IncompatibleCheckpoint, ShapeError
from crackle.nn import (
    AdamState,
    ArchitectureSpec,
    ArrayDataset,
    BatchNorm,
    Conv2D,
    Dense,
    GlobalAvgPool,
    MaxPool2x2,
    Model,
    ReLU,
    TrainConfig,
    adam_step,
    focal_loss,
    glorot_uniform_init,
    softmax,
    train,
)
from crackle.nn import checkpoint
from crackle.nn.gradcheck import check_all_layers, check_full_model, grad_check
from crackle.nn.losses import class_balanced_alpha, focal_loss_from_probs
from crackle.nn.optim import adam_update

from oracles import conv3x3_loops

TINY = ArchitectureSpec((2, 2, 4, 4, 4, 4, 4))


def test_glorot_bounds_and_stats():
    assert np.sqrt(6 / 6) == 1.0
    w = glorot_uniform_init(100, 200, seed=0)
    limit = np.sqrt(0.02)
    assert np.abs(w).max() <= limit
    big = glorot_uniform_init(3, 3, shape=(100_000,), seed=1, dtype=np.float64)
    assert np.abs(big).max() <= 1.0 and abs(big.mean()) < 0.01
    assert np.array_equal(glorot_uniform_init(5, 7, seed=3), glorot_uniform_init(5, 7, seed=3))


def test_conv_identity_and_sum():
    conv = Conv2D(1, 1, dtype=np.float64)
    conv.params["weight"][:] = 0
    conv.params["weight"][1, 1, 0, 0] = 1
    x = np.random.default_rng(0).standard_normal((2, 4, 5, 1))
    assert np.array_equal(conv.forward(x), x)
    conv.params["weight"][:] = 1
    assert conv.forward(np.ones((1, 3, 3, 1)))[0, 1, 1, 0] == 9


def test_conv_matches_loops():
    rng = np.random.default_rng(1)
    for shape, c_out in (((1, 5, 5, 1), 1), ((2, 4, 6, 3), 2)):
        conv = Conv2D(shape[3], c_out, rng=rng, dtype=np.float64)
        conv.params["bias"] = rng.standard_normal(c_out)
        x = rng.standard_normal(shape)
        ref = conv3x3_loops(x, conv.params["weight"], conv.params["bias"])
        assert np.max(np.abs(conv.forward(x) - ref)) < 1e-10
    with pytest.raises(ShapeError):
        conv.forward(np.zeros((1, 3, 3, 5)))


def test_batchnorm_rules():
    bn = BatchNorm(2, dtype=np.float64)
    x = np.zeros((3, 2, 2, 2))
    x[..., 1] = 4.0
    assert not bn.forward(x, train=True).any()
    x = np.random.default_rng(2).standard_normal((4, 3, 3, 2)) * 5 + 2
    y = bn.forward(x, train=True)
    assert np.abs(y.mean(axis=(0, 1, 2))).max() < 1e-6
    assert np.abs(y.var(axis=(0, 1, 2)) - 1).max() < 1e-5
    bn.params["gamma"][:] = 2
    bn.params["beta"][:] = 3
    np.testing.assert_allclose(bn.forward(x, train=True), 2 * y + 3)
    # running stats: momentum 0.9 towards the unbiased batch variance
    bn2 = BatchNorm(2, dtype=np.float64)
    bn2.forward(x, train=True)
    n = 4 * 3 * 3
    np.testing.assert_allclose(bn2.running_mean, 0.1 * x.mean(axis=(0, 1, 2)))
    np.testing.assert_allclose(bn2.running_var, 0.9 + 0.1 * x.var(axis=(0, 1, 2)) * n / (n - 1))


def test_small_layers():
    relu = ReLU()
    assert relu.forward(np.array([-1.0, 2.0])).tolist() == [0, 2]
    assert GlobalAvgPool().forward(np.ones((1, 4, 4, 2))).tolist() == [[1.0, 1.0]]
    assert np.allclose(softmax(np.array([0.0, 0.0])), 0.5)
    z = np.random.default_rng(3).standard_normal((5, 4))
    assert np.max(np.abs(softmax(z + 17.3) - softmax(z))) < 1e-12
    p = softmax(z)
    assert np.max(np.abs(p.sum(axis=1) - 1)) < 1e-12 and (p > 0).all()
    pool = MaxPool2x2()
    x = np.arange(2 * 5 * 4).reshape(1, 5, 4, 2).astype(float)
    y = pool.forward(x)
    assert y.shape == (1, 2, 2, 2)
    assert y[0, 0, 0, 0] == x[0, :2, :2, 0].max()
    assert pool.forward(np.ones((1, 1, 6, 1))).shape == (1, 1, 3, 1)
    with pytest.raises(ShapeError):
        Dense(3, 2).forward(np.zeros((2, 4)))


def test_focal_loss_values():
    assert abs(focal_loss_from_probs([[0.5, 0.5]], [0], gamma=0)[0] - np.log(2)) < 1e-12
    assert focal_loss_from_probs([[1.0, 0.0]], [0])[0] == 0
    assert abs(focal_loss_from_probs([[0.9, 0.1]], [0], gamma=2)[0] - 0.01 * -np.log(0.9)) < 1e-15
    assert abs(focal_loss_from_probs([[0.9, 0.1]], [0], gamma=2)[0] - 1.0536e-3) < 1e-7
    probs = softmax(np.random.default_rng(4).standard_normal((20, 3)))
    labels = np.arange(20) % 3
    ce = -np.log(probs[np.arange(20), labels])
    assert np.max(np.abs(focal_loss_from_probs(probs, labels, gamma=0) - ce)) < 1e-12
    # clamp instead of -inf
    assert np.isfinite(focal_loss_from_probs([[0.0, 1.0]], [0])).all()


def test_focal_loss_gradient_matches_from_probs():
    z = np.random.default_rng(5).standard_normal((6, 4))
    y = np.array([0, 1, 2, 3, 1, 0])
    loss, dz, probs = focal_loss(z, y, 2.0, np.array([1.0, 2.0, 0.5, 1.0]))
    assert abs(loss - focal_loss_from_probs(probs, y, 2.0, [1.0, 2.0, 0.5, 1.0]).mean()) < 1e-12


def test_balanced_alpha():
    a = class_balanced_alpha([0, 0, 0, 1], 2)
    assert abs(a.mean() - 1) < 1e-12 and abs(a[1] / a[0] - 3) < 1e-12


def test_adam_closed_forms():
    s = AdamState(lr=1e-4, l2_lambda=0)
    w = np.zeros(1)
    adam_update(s, "w", w, np.ones(1), decay=False, t=1)
    assert abs(w[0] + 1e-4) < 1e-12
    s = AdamState(l2_lambda=0)
    w = np.array([0.3, -2.0])
    for t in range(1, 4):
        adam_update(s, "w", w, np.zeros(2), decay=True, t=t)
    assert w.tolist() == [0.3, -2.0]
    s = AdamState(lr=0.01, l2_lambda=0)
    w = np.ones(1)
    for t in range(1, 101):
        adam_update(s, "w", w, 2 * w, decay=False, t=t)
    assert abs(w[0]) < 0.5


def test_adam_l2_only_on_weights():
    model = Model(TINY, seed=0, dtype=np.float64)
    for layer in model.groups().values():
        layer.zero_grad()
    before = model.state_dict()
    adam_step(AdamState(lr=1e-2, l2_lambda=1e-3), model)
    after = model.state_dict()
    for name in before:
        changed = not np.array_equal(before[name], after[name])
        is_weight = name.endswith(".weight")
        decays = is_weight and bool(np.any(before[name]))
        assert changed == decays, name


def test_gradcheck_layers_and_stack():
    errs = check_all_layers(seed=0)
    assert max(errs.values()) < 1e-4
    assert errs["dense_softmax_focal"] < 1e-6


def test_gradcheck_full_model():
    report = check_full_model(ArchitectureSpec(), input_shape=(4, 8, 45), seed=0)
    assert report.max_error < 1e-4


def test_gradcheck_skips_frozen():
    model = Model(TINY, seed=0, dtype=np.float64)
    model.trainable["b0.block1.conv"] = False
    x = np.random.default_rng(0).standard_normal((4, 8, 8))
    report = grad_check(model, [x], np.array([0, 1, 0, 1]), coords_per_group=2)
    assert report.errors["b0.block1.conv"] == "skipped"
    assert report.max_error < 1e-4


def _toy(n=20, frames=16, bins=12, seed=0):
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % 2
    x = rng.standard_normal((n, frames, bins)) * 0.5
    x[labels == 1, : frames // 2] += 1.5
    return ArrayDataset((x,), labels)


def test_overfit_toy_set():
    data = _toy()
    model = Model(ArchitectureSpec((8, 8, 16, 16, 16, 16, 16)), seed=0)
    result = train(model, data, None, TrainConfig(batch_size=10, epochs=200, lr=1e-3, stop_at_train_acc=1.0))
    assert result.history[-1]["train_acc"] == 1.0
    assert len(result.history) <= 200


def test_train_zero_epochs_and_empty():
    model = Model(TINY, seed=0)
    state = model.fingerprint()
    train(model, _toy(), _toy(seed=1), TrainConfig(epochs=0))
    assert model.fingerprint() == state
    with pytest.raises(EmptyDataset):
        train(model, ArrayDataset((np.zeros((0, 4, 4)),), np.zeros(0)), None, TrainConfig())


def test_train_deterministic_and_selects_best():
    runs = []
    for _ in range(2):
        model = Model(TINY, seed=3)
        res = train(model, _toy(), _toy(seed=1), TrainConfig(batch_size=8, epochs=4, lr=1e-3, shuffle_seed=5))
        runs.append((res.history, model.fingerprint()))
    assert runs[0] == runs[1]
    hist = runs[0][0]
    best = max(h["val_acc"] for h in hist)
    first = next(h["epoch"] for h in hist if h["val_acc"] == best)
    model = Model(TINY, seed=3)
    res = train(model, _toy(), _toy(seed=1), TrainConfig(batch_size=8, epochs=4, lr=1e-3, shuffle_seed=5))
    assert res.best_epoch == first


def test_frozen_groups_bitwise_unchanged():
    model = Model(TINY, n_branches=2, seed=0)
    for name in ("b0.block1.conv", "b1.block1.conv", "b0.block2.bn"):
        model.trainable[name] = False
    before = model.state_dict()
    x = _toy()
    data = ArrayDataset((x.inputs[0], x.inputs[0][::-1]), x.labels)
    train(model, data, None, TrainConfig(batch_size=10, epochs=2, lr=1e-3))
    after = model.state_dict()
    for key in before:
        if not model.trainable[key.rsplit(".", 1)[0]]:
            assert np.array_equal(before[key], after[key]), key
    assert not np.array_equal(before["b0.block2.conv.weight"], after["b0.block2.conv.weight"])


def test_checkpoint_roundtrip(tmp_path):
    model = Model(TINY, n_branches=2, num_classes=4, seed=7)
    bn = model.groups()["b1.block3.bn"]
    bn.running_var = bn.running_var * 1.5
    path = tmp_path / "m.ckpt"
    checkpoint.save(model, path)
    loaded = checkpoint.load(path)
    assert loaded.n_branches == 2 and loaded.num_classes == 4 and loaded.arch.channels == TINY.channels
    assert loaded.fingerprint() == model.fingerprint()
    raw = path.read_bytes()
    assert raw[:4] == b"CRKW" and int.from_bytes(raw[4:8], "little") == 1
    with pytest.raises(IncompatibleCheckpoint):
        checkpoint.decode(b"XXXX" + raw[4:])
    with pytest.raises(IncompatibleCheckpoint):
        checkpoint.decode(raw[:-10])
