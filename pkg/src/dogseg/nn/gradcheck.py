"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

import numpy as np

from .loss import ClassWeights, weighted_softmax_loss


def grad_check(net, x, labels, cw: ClassWeights, eps: float = 1e-5) -> float:
    """Compare backprop gradients against central finite differences.

    Perturbs every parameter element of ``net`` by +-eps, evaluating the
    weighted loss each time, and returns the maximum relative error
    ``|fd - bp| / max(|fd|, |bp|, 1e-6)`` over all parameters.  The net
    must be built in float64 for the comparison to be meaningful.

    Args:
        net: object exposing ``forward(x)``, ``backward(dlogits)``, and
            ``named_params()`` / ``named_grads()`` dicts of arrays.
        x: input batch (B, C, H, W), float64.
        labels: (B, H, W) integer classes.
        cw: loss class weights.
        eps: finite-difference step, in [1e-6, 1e-4].
    """
    if not 1e-6 <= eps <= 1e-4:
        raise ValueError(f"eps must be in [1e-6, 1e-4], got {eps}")

    def loss_only() -> float:
        return weighted_softmax_loss(net.forward(x), labels, cw)[0]

    logits = net.forward(x)
    _, dlogits = weighted_softmax_loss(logits, labels, cw)
    net.backward(dlogits)
    analytic = {k: v.copy() for k, v in net.named_grads().items()}

    worst = 0.0
    for name, param in net.named_params().items():
        an = analytic[name]
        flat = param.reshape(-1)
        an_flat = an.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            lp = loss_only()
            flat[i] = orig - eps
            lm = loss_only()
            flat[i] = orig
            fd = (lp - lm) / (2.0 * eps)
            bp = an_flat[i]
            rel = abs(fd - bp) / max(abs(fd), abs(bp), 1e-6)
            worst = max(worst, rel)
    return worst
