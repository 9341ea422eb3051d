"""Focal loss on softmax outputs."""

from __future__ import annotations

import numpy as np

from .layers import softmax

PROB_FLOOR = 1e-12


def class_balanced_alpha(labels, num_classes: int) -> np.ndarray:
    """Inverse class frequency weights scaled to mean 1 over the classes present."""
    counts = np.bincount(np.asarray(labels, dtype=int), minlength=num_classes).astype(np.float64)
    alpha = np.zeros(num_classes)
    present = counts > 0
    alpha[present] = 1.0 / counts[present]
    alpha[present] *= present.sum() / alpha[present].sum()
    return alpha


def focal_loss_from_probs(probs, targets, gamma: float = 2.0, alpha=None) -> np.ndarray:
    """Per-sample ``-alpha_t * (1 - p_t)**gamma * ln(p_t)``."""
    probs = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    targets = np.atleast_1d(np.asarray(targets, dtype=int))
    p_t = np.maximum(probs[np.arange(len(targets)), targets], PROB_FLOOR)
    alpha_t = 1.0 if alpha is None else np.asarray(alpha, dtype=np.float64)[targets]
    return -alpha_t * (1.0 - p_t) ** gamma * np.log(p_t)


def focal_loss(logits, targets, gamma: float = 2.0, alpha=None):
    """Mean focal loss over the batch and its exact gradient w.r.t. the logits.

    Returns ``(loss, dlogits, probs)``.
    """
    logits = np.asarray(logits)
    targets = np.asarray(targets, dtype=int)
    n, n_classes = logits.shape
    probs = softmax(logits)
    rows = np.arange(n)
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_p_t = shifted[rows, targets] - np.log(np.exp(shifted).sum(axis=1))
    log_p_t = np.maximum(log_p_t, np.log(PROB_FLOOR))
    p_t = np.exp(log_p_t)
    alpha_t = np.ones(n) if alpha is None else np.asarray(alpha, dtype=np.float64)[targets]

    one_minus = 1.0 - p_t
    modulator = one_minus**gamma
    loss = -alpha_t * modulator * log_p_t

    # dL/dz_j = g * (delta_tj - p_j)
    if gamma == 0:
        g = -alpha_t
    else:
        g = alpha_t * (gamma * one_minus ** (gamma - 1.0) * p_t * log_p_t - modulator)
    onehot = np.zeros_like(probs)
    onehot[rows, targets] = 1.0
    dlogits = (g[:, None] * (onehot - probs)) / n
    return float(loss.mean()), dlogits.astype(logits.dtype), probs
