"""From-scratch numpy neural-network core: layers, loss, optimizer,
and finite-difference gradient verification."""

from .gradcheck import grad_check
from .layers import (
    Conv2d,
    Deconv2d,
    LayerSpec,
    MaxPool2x2,
    ReLU,
    bilinear_kernel,
    conv2d_backward,
    conv2d_forward,
    deconv2d_backward,
    deconv2d_forward,
    he_uniform,
    maxpool2x2_backward,
    maxpool2x2_forward,
)
from .loss import ClassWeights, softmax, weighted_softmax_loss
from .optim import SgdMomentum, sgd_step

__all__ = [
    "ClassWeights",
    "Conv2d",
    "Deconv2d",
    "LayerSpec",
    "MaxPool2x2",
    "ReLU",
    "SgdMomentum",
    "bilinear_kernel",
    "conv2d_backward",
    "conv2d_forward",
    "deconv2d_backward",
    "deconv2d_forward",
    "grad_check",
    "he_uniform",
    "maxpool2x2_backward",
    "maxpool2x2_forward",
    "softmax",
    "sgd_step",
    "weighted_softmax_loss",
]
