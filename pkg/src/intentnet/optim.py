"""Adam, learning-rate plateau schedule, early stopping, gradient checking."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import NumericError

BETA1 = 0.9
BETA2 = 0.999
EPS = 1e-8

# Minimum change of the monitored metric that counts as an improvement,
# shared by the plateau schedule and early stopping.
MIN_DELTA = 1e-4


@dataclass
class EpochRecord:
    """One epoch of training history."""

    epoch: int
    train_loss: float
    val_loss: float
    val_f1: float
    lr: float


History = list  # list[EpochRecord]


class AdamState:
    """First/second moment estimates mirroring a named parameter dict."""

    def __init__(self, params: dict[str, np.ndarray]):
        self.m = {name: np.zeros_like(arr) for name, arr in params.items()}
        self.v = {name: np.zeros_like(arr) for name, arr in params.items()}
        self.t = 0


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
              state: AdamState, lr: float) -> None:
    """Bias-corrected Adam update, in place; one step-counter tick per call."""
    if set(params) != set(state.m):
        raise ValueError("optimizer state does not mirror the parameters")
    state.t += 1
    t = state.t
    for name, theta in params.items():
        g = grads[name]
        if g.shape != theta.shape:
            raise ValueError(f"gradient shape mismatch for {name}: {g.shape} vs {theta.shape}")
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient in {name}")
        m = state.m[name]
        v = state.v[name]
        m *= BETA1
        m += (1.0 - BETA1) * g
        v *= BETA2
        v += (1.0 - BETA2) * g * g
        m_hat = m / (1.0 - BETA1 ** t)
        v_hat = v / (1.0 - BETA2 ** t)
        theta -= lr * m_hat / (np.sqrt(v_hat) + EPS)


def clip_by_global_norm(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Scale all gradients so their joint L2 norm is at most ``max_norm``."""
    total = 0.0
    for g in grads.values():
        total += float(np.sum(g.astype(np.float64) ** 2))
    norm = float(np.sqrt(total))
    if norm > max_norm > 0:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return norm


def reduce_lr_on_plateau(history: Sequence[EpochRecord], factor: float = 0.1,
                         patience: int = 3, min_lr: float = 1e-6,
                         min_delta: float = MIN_DELTA) -> float:
    """Learning rate for the next epoch under the reduce-on-plateau rule.

    Replays the recorded validation losses from the first epoch: whenever
    the best loss fails to improve by at least ``min_delta`` for
    ``patience`` consecutive epochs, the rate is multiplied by ``factor``
    (floored at ``min_lr``) and the stagnation counter resets. Being a pure
    function of the history keeps reruns reproducible.
    """
    if not history:
        raise ValueError("history is empty")
    lr = history[0].lr
    best = float("inf")
    stale = 0
    for record in history:
        if record.val_loss < best - min_delta:
            best = record.val_loss
            stale = 0
        else:
            stale += 1
            if stale >= patience:
                lr = max(lr * factor, min_lr)
                stale = 0
    return lr


def should_stop(history: Sequence[EpochRecord], patience: int = 8,
                min_delta: float = MIN_DELTA) -> bool:
    """True when validation micro-F1 has stagnated for ``patience`` epochs."""
    if not history:
        raise ValueError("history is empty")
    best = -float("inf")
    stale = 0
    for record in history:
        if record.val_f1 > best + min_delta:
            best = record.val_f1
            stale = 0
        else:
            stale += 1
    return stale >= patience


@dataclass
class GradCheckResult:
    max_error: float
    per_block: dict[str, float]

    @property
    def passed(self) -> bool:
        return self.max_error <= 1e-4


def gradient_check(model, sample, eps: float = 1e-5) -> GradCheckResult:
    """Compare analytic gradients against central finite differences.

    ``model`` must expose ``parameters() -> dict[str, ndarray]``,
    ``loss(sample) -> float`` and ``loss_and_gradients(sample)``; the
    parameter arrays are perturbed in place and restored. Run in float64
    with dropout disabled, on small shapes.
    """
    base_loss, analytic = model.loss_and_gradients(sample)
    if not np.isfinite(base_loss):
        raise NumericError("non-finite loss at the check point")
    per_block: dict[str, float] = {}
    for name, theta in model.parameters().items():
        worst = 0.0
        it = np.nditer(theta, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = theta[idx]
            theta[idx] = orig + eps
            plus = model.loss(sample)
            theta[idx] = orig - eps
            minus = model.loss(sample)
            theta[idx] = orig
            numeric = (plus - minus) / (2.0 * eps)
            a = float(analytic[name][idx])
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, err)
        per_block[name] = worst
    return GradCheckResult(max_error=max(per_block.values()), per_block=per_block)
