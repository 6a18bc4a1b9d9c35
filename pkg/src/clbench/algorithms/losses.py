"""Training losses with hand-derived gradients.

Every loss returns (scalar value, gradient wrt the logits argument) so
learners can compose and backpropagate them without an autograd engine.
Class masks restrict the softmax support: masked-out columns contribute
nothing and receive zero gradient.
"""

from __future__ import annotations

import numpy as np


def log_softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def softmax(z: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(z))


def _masked(logits: np.ndarray, class_mask: np.ndarray | None) -> np.ndarray:
    if class_mask is None:
        return logits
    out = np.full_like(logits, -np.inf)
    out[:, class_mask] = logits[:, class_mask]
    return out


def cross_entropy(
    logits: np.ndarray, labels: np.ndarray, class_mask: np.ndarray | None = None
) -> tuple[float, np.ndarray]:
    """Mean softmax cross-entropy over the batch, restricted to a class mask."""
    if logits.shape[0] == 0:
        return 0.0, np.zeros_like(logits)
    z = _masked(logits, class_mask)
    logp = log_softmax(z)
    n = len(labels)
    loss = -logp[np.arange(n), labels].mean()
    grad = np.exp(logp)
    grad[np.arange(n), labels] -= 1.0
    grad /= n
    if class_mask is not None:
        keep = np.zeros(logits.shape[1], dtype=bool)
        keep[class_mask] = True
        grad[:, ~keep] = 0.0
    return float(loss), grad


def distill_loss(
    new_logits: np.ndarray, old_logits: np.ndarray, tau: float
) -> tuple[float, np.ndarray]:
    """Temperature-scaled distillation: KL(soft(old/tau) || soft(new/tau)) * tau^2.

    Averaged over the batch; non-negative and zero iff the two softened
    distributions coincide. The gradient is wrt ``new_logits``.
    """
    if tau <= 0:
        raise ValueError("temperature must be positive")
    if new_logits.shape != old_logits.shape:
        raise ValueError(f"shape mismatch {new_logits.shape} vs {old_logits.shape}")
    if new_logits.shape[0] == 0:
        return 0.0, np.zeros_like(new_logits)
    n = new_logits.shape[0]
    logp = log_softmax(old_logits / tau)
    logq = log_softmax(new_logits / tau)
    p = np.exp(logp)
    kl = (p * (logp - logq)).sum(axis=1)
    loss = float(tau**2 * kl.mean())
    grad = (tau / n) * (np.exp(logq) - p)
    return loss, grad


def replay_loss(loss_new: float, loss_mem: float, beta: float) -> float:
    """Composite rehearsal objective: new-task loss plus beta-weighted memory loss."""
    if beta < 0:
        raise ValueError("beta must be >= 0")
    return float(loss_new + beta * loss_mem)


def erace_masked_loss(
    logits: np.ndarray,
    labels: np.ndarray,
    current_classes: np.ndarray,
    origin: str,
) -> tuple[float, np.ndarray]:
    """Asymmetric cross-entropy that shields old classes from stream updates.

    Stream samples score only over the current task's classes joined with
    the classes present in the batch (old-class logits are masked out, so
    perturbing them cannot change the loss); buffer samples use the full
    class range.
    """
    if origin not in ("stream", "buffer"):
        raise ValueError(f"origin must be 'stream' or 'buffer', got '{origin}'")
    if origin == "buffer":
        return cross_entropy(logits, labels)
    mask = np.union1d(np.asarray(current_classes, dtype=np.int64), np.unique(labels))
    if mask.size == 0:
        raise ValueError("empty class mask")
    return cross_entropy(logits, labels, class_mask=mask)
