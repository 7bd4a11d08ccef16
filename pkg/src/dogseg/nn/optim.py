"""Stochastic gradient descent with classical momentum."""

from __future__ import annotations

import numpy as np

from ..errors import TrainingError


def sgd_step(param, grad, buf, lr: float, momentum: float):
    """One momentum update: ``buf <- momentum*buf + grad; w <- w - lr*buf``.

    Returns the updated ``(param, buf)`` pair (new arrays; inputs untouched).
    """
    if not lr > 0:
        raise ValueError(f"lr must be > 0, got {lr}")
    if not 0 <= momentum < 1:
        raise ValueError(f"momentum must be in [0, 1), got {momentum}")
    buf = momentum * buf + grad
    return param - lr * buf, buf


class SgdMomentum:
    """Keeps one momentum buffer per named parameter and updates in place.

    Raises :class:`TrainingError` naming the parameter when a gradient
    contains non-finite values.
    """

    def __init__(self, lr: float = 1e-2, momentum: float = 0.9):
        if not lr > 0:
            raise ValueError(f"lr must be > 0, got {lr}")
        if not 0 <= momentum < 1:
            raise ValueError(f"momentum must be in [0, 1), got {momentum}")
        self.lr = lr
        self.momentum = momentum
        self.buffers: dict[str, np.ndarray] = {}

    def step(self, named_params: dict, named_grads: dict) -> None:
        for name, param in named_params.items():
            grad = named_grads[name]
            if not np.all(np.isfinite(grad)):
                raise TrainingError(f"non-finite gradient in {name}")
            buf = self.buffers.get(name)
            if buf is None:
                buf = np.zeros_like(param)
            buf *= self.momentum
            buf += grad
            param -= self.lr * buf
            self.buffers[name] = buf
