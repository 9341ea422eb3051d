"""Subject-wise cross-validation folds in which every IPF subject is tested once."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InsufficientSubjects

N_FOLDS = 7
VAL_HEALTHY = 2


@dataclass(frozen=True)
class Fold:
    train: frozenset
    val: frozenset
    test: frozenset


@dataclass(frozen=True)
class FoldPlan:
    folds: tuple

    def __len__(self):
        return len(self.folds)

    def __iter__(self):
        return iter(self.folds)

    def __getitem__(self, i):
        return self.folds[i]

    def validate(self, subjects) -> None:
        everyone = {s.subject_id for s in subjects}
        for i, f in enumerate(self.folds):
            if f.train & f.val or f.train & f.test or f.val & f.test:
                raise AssertionError(f"fold {i}: overlapping subject sets")
            if f.train | f.val | f.test != everyone:
                raise AssertionError(f"fold {i}: subjects not fully assigned")


def build_folds(subjects, seed: int = 0, n_folds: int = N_FOLDS) -> FoldPlan:
    """Assign subjects to train/val/test for each fold.

    IPF subjects are taken in id order and IPF subject ``j`` is tested in
    fold ``j mod n_folds``. Healthy subjects are shuffled with ``seed`` and dealt
    round-robin into ``n_folds`` groups; fold ``i`` tests healthy group ``i``.
    Validation holds the IPF subject(s) of the next fold plus two healthy
    subjects taken from the following groups; everything else trains.
    """
    ipf = sorted(s.subject_id for s in subjects if s.is_ipf)
    healthy = sorted(s.subject_id for s in subjects if not s.is_ipf)
    if len(ipf) < n_folds:
        raise InsufficientSubjects(f"{n_folds} folds need at least {n_folds} IPF subjects, got {len(ipf)}")
    if n_folds < 2:
        raise InsufficientSubjects("need at least two folds to hold out a validation IPF subject")
    order = np.random.default_rng(seed).permutation(len(healthy))
    healthy = [healthy[i] for i in order]
    ipf_groups = [ipf[i::n_folds] for i in range(n_folds)]
    healthy_groups = [healthy[i::n_folds] for i in range(n_folds)]

    folds = []
    everyone = set(ipf) | set(healthy)
    for i in range(n_folds):
        test = set(ipf_groups[i]) | set(healthy_groups[i])
        val = set(ipf_groups[(i + 1) % n_folds][:1])
        pool = [h for step in range(1, n_folds) for h in healthy_groups[(i + step) % n_folds]]
        val |= set(pool[:VAL_HEALTHY])
        train = everyone - test - val
        folds.append(Fold(frozenset(train), frozenset(val), frozenset(test)))
    return FoldPlan(tuple(folds))
