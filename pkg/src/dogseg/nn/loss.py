"""Class-weighted multinomial logistic loss over per-pixel logits.

The loss is the plain multinomial logistic loss with each pixel's
contribution multiplied by the weight of its true class:

    loss = - sum_i c[y_i] * log softmax(logits_i)[y_i]

summed (not averaged) over every pixel i of the batch.  With all weights
equal to 1 this is exactly the unweighted loss.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import GridValidationError
from ..grid import LabelMask


@dataclass(frozen=True)
class ClassWeights:
    """Per-class loss weights, indexed by class label (0 static, 1 dynamic)."""

    c: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.c, dtype=np.float64)
        if arr.ndim != 1 or arr.size < 2:
            raise GridValidationError(f"class weights must be 1-D (K>=2), got {arr.shape}")
        if not np.all(np.isfinite(arr)) or (arr < 0).any():
            raise GridValidationError(f"class weights must be finite and >= 0: {arr}")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "c", arr)

    @classmethod
    def for_dynamic_weight(cls, c1: float = 40.0, c2: float = 1.0) -> "ClassWeights":
        """Weights with the dynamic class (label 1) weighted ``c1``."""
        return cls(np.array([c2, c1], dtype=np.float64))

    @property
    def n_classes(self) -> int:
        return self.c.size


def softmax(logits: np.ndarray, axis: int = 0) -> np.ndarray:
    """Numerically stable softmax along ``axis``."""
    z = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def _log_softmax(logits: np.ndarray, axis: int) -> np.ndarray:
    z = logits - logits.max(axis=axis, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=axis, keepdims=True))


def weighted_softmax_loss(logits, labels, cw: ClassWeights):
    """Loss and its exact gradient w.r.t. the logits.

    Args:
        logits: ``(K, H, W)`` or ``(B, K, H, W)`` float array.
        labels: matching ``(H, W)`` / ``(B, H, W)`` integer classes in
            ``[0, K)``, or a :class:`LabelMask`.
        cw: per-class weights.

    Returns:
        ``(loss, grad)`` where loss is a python float (the weighted sum
        over every pixel) and grad has the shape and dtype of ``logits``:
        per pixel ``c[y] * (softmax - onehot)``.
    """
    if isinstance(labels, LabelMask):
        labels = labels.labels
    labels = np.asarray(labels)
    squeeze = logits.ndim == 3
    if squeeze:
        logits = logits[None]
        labels = labels[None]
    if logits.ndim != 4:
        raise GridValidationError(
            f"logits must be (B, K, H, W) or (K, H, W), got shape {logits.shape}"
        )
    k = logits.shape[1]
    if k != cw.n_classes:
        raise GridValidationError(
            f"logits have {k} classes but weights have {cw.n_classes}"
        )
    if labels.shape != logits.shape[:1] + logits.shape[2:]:
        raise GridValidationError(
            f"labels shape {labels.shape} does not match logits {logits.shape}"
        )
    if labels.dtype == np.bool_:
        labels = labels.astype(np.intp)
    if labels.min() < 0 or labels.max() >= k:
        raise GridValidationError(
            f"labels must be in [0, {k}), found range "
            f"[{labels.min()}, {labels.max()}]"
        )
    logq = _log_softmax(logits, axis=1)
    y = labels[:, None]  # (B, 1, H, W)
    logq_true = np.take_along_axis(logq, y, axis=1)[:, 0]
    weights = cw.c[labels]  # (B, H, W) float64
    loss = -float(np.sum(weights * logq_true, dtype=np.float64))
    grad = np.exp(logq)
    np.put_along_axis(
        grad, y, np.take_along_axis(grad, y, axis=1) - 1.0, axis=1
    )
    grad *= weights[:, None].astype(logits.dtype)
    if squeeze:
        grad = grad[0]
    return loss, grad.astype(logits.dtype, copy=False)
