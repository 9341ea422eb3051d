import numpy as np
import pytest

from crackle.errors import ComboMismatch, DegenerateDataset, IncompatibleCheckpoint, InvalidPolicy
from crackle.nn import ArchitectureSpec, ArrayDataset, Model, TrainConfig
from crackle.nn.layers import BatchNorm
from crackle.pipeline import SegmentKind
from crackle.transfer import (
    BranchCombo,
    FreezePolicy,
    PretrainedModel,
    StartKind,
    apply_freeze_policy,
    build_multi_input,
    build_single_from_pretrained,
    fine_tune,
    pretrain,
)

SMALL = ArchitectureSpec((4, 8, 8, 8, 16, 16, 16))
TABLE_POLICIES = [(2, StartKind.CONV), (4, StartKind.BN), (3, StartKind.BN), (3, StartKind.CONV)]


def _four_class(n=40, seed=0):
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % 4
    x = rng.standard_normal((n, 16, 12)) * 0.3
    for c in range(4):
        x[labels == c, 4 * c : 4 * c + 4, :] += 2.0
    return ArrayDataset((x,), labels)


def _pm(seed=0, arch=SMALL):
    return PretrainedModel(Model(arch, num_classes=4, seed=seed), {"seed": seed})


def test_pretrain_converges_and_is_deterministic():
    cfg = TrainConfig(batch_size=32, epochs=150, lr=1e-3, stop_at_train_acc=0.95)
    pm, res = pretrain(_four_class(), None, cfg, SMALL, seed=1)
    assert res.history[-1]["train_acc"] >= 0.95
    pm2, _ = pretrain(_four_class(), None, cfg, SMALL, seed=1)
    assert pm.model.fingerprint() == pm2.model.fingerprint()


def test_pretrain_zero_epochs_is_init():
    pm, _ = pretrain(_four_class(), None, TrainConfig(epochs=0), SMALL, seed=4)
    assert pm.model.fingerprint() == Model(SMALL, num_classes=4, seed=4).fingerprint()


def test_pretrain_needs_all_classes():
    data = _four_class()
    keep = data.labels != 3
    with pytest.raises(DegenerateDataset):
        pretrain(data.subset(keep), None, TrainConfig(epochs=1), SMALL)


def test_multi_input_widths():
    pm = _pm(arch=ArchitectureSpec())
    m2 = build_multi_input(pm, BranchCombo.CYC_INS)
    assert m2.n_branches == 2 and m2.head.params["weight"].shape == (512, 2)
    m3 = build_multi_input(pm, BranchCombo.CYC_INS_EXP)
    assert m3.head.params["weight"].shape == (768, 2)
    single = build_single_from_pretrained(pm)
    assert single.head.params["weight"].shape == (256, 2)


def test_branches_are_independent_copies():
    pm = _pm()
    src = pm.model.state_dict()
    model = build_multi_input(pm, BranchCombo.CYC_INS_EXP, seed=3)
    state = model.state_dict()
    for key, value in src.items():
        if key.startswith("b0."):
            for b in range(3):
                assert np.array_equal(state[f"b{b}." + key[3:]], value)
    x = np.random.default_rng(0).standard_normal((3, 16, 12, 1)).astype(np.float32)
    gaps = [branch.forward(x, train=False) for branch in model.branches]
    assert np.array_equal(gaps[0], gaps[1]) and np.array_equal(gaps[1], gaps[2])
    # untied: editing one branch leaves the others alone
    model.branches[0].blocks[0].conv.params["weight"] += 1
    assert not np.array_equal(model.branches[1].blocks[0].conv.params["weight"],
                              model.branches[0].blocks[0].conv.params["weight"])
    assert pm.model.state_dict()["b0.block1.conv.weight"].tolist() == src["b0.block1.conv.weight"].tolist()


def test_incompatible_checkpoint():
    with pytest.raises(IncompatibleCheckpoint):
        PretrainedModel(Model(SMALL, n_branches=2, num_classes=4))


def test_pretrained_save_load(tmp_path):
    pm = _pm(seed=2)
    pm.save(tmp_path / "p.ckpt")
    back = PretrainedModel.load(tmp_path / "p.ckpt")
    assert back.model.fingerprint() == pm.model.fingerprint()
    assert back.provenance == {"seed": 2}


def test_policy_flags():
    m = build_multi_input(_pm(), BranchCombo.CYC_INS)
    f = apply_freeze_policy(m, FreezePolicy(2, StartKind.CONV))
    for b in range(2):
        assert not f.trainable[f"b{b}.block1.conv"]
        assert all(f.trainable[f"b{b}.block{i}.conv"] for i in range(2, 8))
        assert all(f.trainable[f"b{b}.block{i}.bn"] for i in range(1, 8))
    f = apply_freeze_policy(m, FreezePolicy(4, StartKind.BN))
    assert [f.trainable[f"b0.block{i}.conv"] for i in range(1, 8)] == [False] * 3 + [True] * 4
    f = apply_freeze_policy(m, FreezePolicy(1, StartKind.BN))
    assert all(f.trainable.values())
    assert f.trainable["head"]
    with pytest.raises(InvalidPolicy):
        FreezePolicy(8)
    with pytest.raises(InvalidPolicy):
        FreezePolicy(0)


def test_policy_without_bn_override():
    p = FreezePolicy(3, StartKind.CONV, bn_always_trainable=False)
    assert [p.bn_trainable(i) for i in range(1, 8)] == [False, False, False] + [True] * 4
    p = FreezePolicy(3, StartKind.BN, bn_always_trainable=False)
    assert [p.bn_trainable(i) for i in range(1, 8)] == [False, False, True] + [True] * 4


def _two_input(n=10, seed=0):
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % 2
    cyc = rng.standard_normal((n, 16, 12))
    ins = rng.standard_normal((n, 8, 12))
    cyc[labels == 1] += 1.0
    return ArrayDataset((cyc, ins), labels)


@pytest.mark.parametrize("block,kind", TABLE_POLICIES)
def test_freeze_contract(block, kind):
    model = apply_freeze_policy(build_multi_input(_pm(), BranchCombo.CYC_INS), FreezePolicy(block, kind))
    before = model.state_dict()
    fine_tune(model, _two_input(), None, TrainConfig(batch_size=2, epochs=1, lr=1e-3))  # 5 steps
    after = model.state_dict()
    for name, layer in model.groups().items():
        keys = [k for k in before if k.startswith(name + ".")]
        if isinstance(layer, BatchNorm):
            for k in keys:
                assert not np.array_equal(before[k], after[k]), k
        elif not model.trainable[name]:
            for k in keys:
                assert np.array_equal(before[k], after[k]), k


def test_linear_probe_trains():
    model = build_single_from_pretrained(_pm())
    for name in model.trainable:
        model.trainable[name] = name == "head"
    data = _two_input().subset(slice(None))
    data = ArrayDataset((data.inputs[0],), data.labels)
    before = {k: v for k, v in model.state_dict().items() if not k.startswith("head")}
    _, res = fine_tune(model, data, None, TrainConfig(batch_size=10, epochs=50, lr=1e-2))
    assert res.history[-1]["train_loss"] < res.history[0]["train_loss"]
    after = model.state_dict()
    for k, v in before.items():
        if "running" not in k:
            assert np.array_equal(v, after[k]), k


def test_combo_mismatch():
    model = build_multi_input(_pm(), BranchCombo.CYC_INS)
    data = _two_input()
    with pytest.raises(ComboMismatch):
        fine_tune(model, ArrayDataset((data.inputs[0],), data.labels), None, TrainConfig(epochs=1))
    with pytest.raises(ComboMismatch):
        BranchCombo.from_segments([SegmentKind.INSPIRATION])
    assert BranchCombo.from_segments(["Cyc", "Ins"]) is BranchCombo.CYC_INS
    assert [c.n_branches for c in BranchCombo] == [1, 2, 2, 2, 3]
