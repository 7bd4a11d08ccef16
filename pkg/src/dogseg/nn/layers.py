"""Convolutional network building blocks in plain numpy.

All spatial ops take NCHW tensors.  Forward passes are built on strided
window views fed to BLAS through ``tensordot``; backward passes return
exact gradients (verified against central finite differences in the test
suite).  Layers own their parameters and gradients as plain arrays; a
layer caches whatever its backward pass needs from the last forward call.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import GridValidationError


@dataclass(frozen=True)
class LayerSpec:
    """Static description of one layer (for wiring checks and FLOP counts)."""

    kind: str  # conv | relu | maxpool | deconv | fuse_sum | score1x1 | softmax
    in_ch: int = 0
    out_ch: int = 0
    kernel: int = 0
    stride: int = 1
    pad: int = 0

    KINDS = ("conv", "relu", "maxpool", "deconv", "fuse_sum", "score1x1", "softmax")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")
        if self.kind == "deconv" and self.kernel != 2 * self.stride:
            raise ValueError(
                f"deconv kernel must equal 2*stride, got kernel {self.kernel} "
                f"for stride {self.stride}"
            )


def _pad2d(x: np.ndarray, ph: int, pw: int) -> np.ndarray:
    if ph == 0 and pw == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))


def _windows(x: np.ndarray, kh: int, kw: int, stride: int):
    """Strided (B, C, Ho, Wo, kh, kw) view over an already padded input."""
    b, c, h, w = x.shape
    ho = (h - kh) // stride + 1
    wo = (w - kw) // stride + 1
    sb, sc, sh, sw = x.strides
    view = np.lib.stride_tricks.as_strided(
        x,
        shape=(b, c, ho, wo, kh, kw),
        strides=(sb, sc, sh * stride, sw * stride, sh, sw),
        writeable=False,
    )
    return view, ho, wo


def _check_nchw(x: np.ndarray, what: str) -> None:
    if x.ndim != 4:
        raise GridValidationError(f"{what} must be NCHW (4-D), got shape {x.shape}")


# ---------------------------------------------------------------------------
# Cross-correlation ("convolution") with zero padding


def conv2d_forward(x, w, b=None, stride: int = 1, pad: int = 0) -> np.ndarray:
    """Cross-correlate ``x`` (B, Ci, H, W) with ``w`` (Co, Ci, kh, kw)."""
    _check_nchw(x, "conv input")
    if w.ndim != 4:
        raise GridValidationError(f"conv weights must be 4-D, got shape {w.shape}")
    if x.shape[1] != w.shape[1]:
        raise GridValidationError(
            f"conv channel mismatch: input has {x.shape[1]} channels, "
            f"weights expect {w.shape[1]}"
        )
    kh, kw = w.shape[2:]
    if x.shape[2] + 2 * pad < kh or x.shape[3] + 2 * pad < kw:
        raise GridValidationError(
            f"conv input {x.shape[2]}x{x.shape[3]} (pad {pad}) smaller than "
            f"kernel {kh}x{kw}"
        )
    xp = _pad2d(x, pad, pad)
    win, _, _ = _windows(xp, kh, kw, stride)
    out = np.tensordot(win, w, axes=([1, 4, 5], [1, 2, 3]))  # (B, Ho, Wo, Co)
    out = np.ascontiguousarray(np.moveaxis(out, 3, 1))
    if b is not None:
        out += b[None, :, None, None]
    return out


def conv2d_backward(x, w, dout, stride: int = 1, pad: int = 0, need_dx: bool = True):
    """Gradients of :func:`conv2d_forward` w.r.t. input, weights, and bias."""
    kh, kw = w.shape[2:]
    db = dout.sum(axis=(0, 2, 3))
    xp = _pad2d(x, pad, pad)
    win, _, _ = _windows(xp, kh, kw, stride)
    dw = np.tensordot(dout, win, axes=([0, 2, 3], [0, 2, 3]))  # (Co, Ci, kh, kw)
    dx = None
    if need_dx:
        b_, co, ho, wo = dout.shape
        if stride > 1:
            dil = np.zeros(
                (b_, co, (ho - 1) * stride + 1, (wo - 1) * stride + 1), dtype=dout.dtype
            )
            dil[:, :, ::stride, ::stride] = dout
        else:
            dil = dout
        dpad = _pad2d(dil, kh - 1, kw - 1)
        wflip = w[:, :, ::-1, ::-1]
        dwin, hf, wf = _windows(dpad, kh, kw, 1)
        dxp = np.tensordot(dwin, wflip, axes=([1, 4, 5], [0, 2, 3]))  # (B, hf, wf, Ci)
        dxp = np.moveaxis(dxp, 3, 1)
        hp, wp = xp.shape[2:]
        full = np.zeros((x.shape[0], x.shape[1], hp, wp), dtype=dout.dtype)
        full[:, :, :hf, :wf] = dxp
        dx = np.ascontiguousarray(
            full[:, :, pad : pad + x.shape[2], pad : pad + x.shape[3]]
        )
    return dx, dw, db


# ---------------------------------------------------------------------------
# 2x2 max pooling


def _pool_windows(x):
    b, c, h, w = x.shape
    if h % 2 or w % 2:
        raise GridValidationError(f"maxpool2x2 needs even spatial dims, got {h}x{w}")
    win = x.reshape(b, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5)
    return win.reshape(b, c, h // 2, w // 2, 4)


def maxpool2x2_forward(x):
    """Stride-2 window max; returns (output, argmax) with row-major ties."""
    _check_nchw(x, "maxpool input")
    win = _pool_windows(x)
    idx = win.argmax(axis=-1)  # first (row-major) maximum wins ties
    out = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]
    return out, idx


def maxpool2x2_backward(x_shape, idx, dout):
    """Route upstream gradient to each window's argmax position."""
    b, c, h, w = x_shape
    dwin = np.zeros((b, c, h // 2, w // 2, 4), dtype=dout.dtype)
    np.put_along_axis(dwin, idx[..., None], dout[..., None], axis=-1)
    dx = dwin.reshape(b, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5)
    return np.ascontiguousarray(dx.reshape(b, c, h, w))


# ---------------------------------------------------------------------------
# Transposed convolution (learned upsampling), kernel 2S, stride S, pad S/2,
# so the output is exactly S x the input size.


def _phase_kernel(w: np.ndarray, s: int) -> np.ndarray:
    """Rearrange a (Ci, Co, 2S, 2S) kernel into per-output-phase taps.

    Output ``(Ci, 3, 3, Co, S, S)``: tap ``a`` (0..2) refers to input offset
    ``a - 1``; phase (dr, dc) selects the output subpixel.  Each output
    pixel receives exactly two taps per axis; invalid taps are zeroed.
    """
    ci, co, kh, kw = w.shape
    a = np.arange(3)
    d = np.arange(s)
    rho = s * (1 - a)[:, None] + d[None, :] + s // 2  # (tap, phase)
    valid = (rho >= 0) & (rho < 2 * s)
    rho_c = np.clip(rho, 0, 2 * s - 1)
    gathered = w[:, :, rho_c[:, None, :, None], rho_c[None, :, None, :]]
    gathered = gathered * (valid[:, None, :, None] & valid[None, :, None, :])
    # (Ci, Co, ta, tb, dr, dc) -> (Ci, ta, tb, Co, dr, dc)
    return np.ascontiguousarray(gathered.transpose(0, 2, 3, 1, 4, 5))


def deconv2d_forward(x, w, stride: int) -> np.ndarray:
    """Transposed convolution of ``x`` (B, Ci, H, W) by ``w`` (Ci, Co, 2S, 2S)."""
    _check_nchw(x, "deconv input")
    s = stride
    if s < 2 or s % 2:
        raise GridValidationError(f"deconv stride must be even and >= 2, got {s}")
    if w.ndim != 4 or w.shape[2] != 2 * s or w.shape[3] != 2 * s:
        raise GridValidationError(
            f"deconv kernel must be (Ci, Co, {2*s}, {2*s}) for stride {s}, "
            f"got shape {w.shape}"
        )
    if x.shape[1] != w.shape[0]:
        raise GridValidationError(
            f"deconv channel mismatch: input has {x.shape[1]} channels, "
            f"weights expect {w.shape[0]}"
        )
    b, ci, h, wd = x.shape
    co = w.shape[1]
    xp = _pad2d(x, 1, 1)
    win, ho, wo = _windows(xp, 3, 3, 1)  # ho = h, wo = wd
    kall = _phase_kernel(w, s)
    out = np.tensordot(win, kall, axes=([1, 4, 5], [0, 1, 2]))  # (B,H,W,Co,S,S)
    out = out.transpose(0, 3, 1, 4, 2, 5).reshape(b, co, h * s, wd * s)
    return np.ascontiguousarray(out)


def deconv2d_backward(x, w, dout, stride: int):
    """Gradients of :func:`deconv2d_forward` w.r.t. input and weights."""
    s = stride
    k = 2 * s
    p = s // 2
    # dx: correlate dout with the kernel read as a (Ci out, Co in) conv weight.
    dx = conv2d_forward(dout, w, None, stride=s, pad=p)
    dpad = _pad2d(dout, p, p)
    win, _, _ = _windows(dpad, k, k, s)  # (B, Co, H, W, k, k)
    dw = np.tensordot(x, win, axes=([0, 2, 3], [0, 2, 3]))  # (Ci, Co, k, k)
    return dx, dw


def bilinear_kernel(channels: int, k: int, dtype=np.float32) -> np.ndarray:
    """Per-channel bilinear upsampling kernel of size k (channel-diagonal)."""
    factor = (k + 1) // 2
    center = factor - 1 if k % 2 else factor - 0.5
    og = np.arange(k, dtype=np.float64)
    filt1d = 1.0 - np.abs(og - center) / factor
    filt = np.outer(filt1d, filt1d)
    w = np.zeros((channels, channels, k, k), dtype=dtype)
    for c in range(channels):
        w[c, c] = filt
    return w


def he_uniform(rng: np.random.Generator, shape, fan_in: int, dtype) -> np.ndarray:
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


# ---------------------------------------------------------------------------
# Layer objects (own params + grads, cache for backward)


class Conv2d:
    """Trainable cross-correlation layer with bias."""

    def __init__(
        self,
        in_ch: int,
        out_ch: int,
        kernel: int,
        stride: int = 1,
        pad: int = 0,
        rng: np.random.Generator | None = None,
        dtype=np.float32,
        kind: str = "conv",
    ):
        self.spec = LayerSpec(kind, in_ch, out_ch, kernel, stride, pad)
        rng = rng or np.random.default_rng(0)
        self.w = he_uniform(
            rng, (out_ch, in_ch, kernel, kernel), in_ch * kernel * kernel, dtype
        )
        self.b = np.zeros(out_ch, dtype=dtype)
        self.dw = np.zeros_like(self.w)
        self.db = np.zeros_like(self.b)
        self._x = None

    @property
    def params(self):
        return {"w": self.w, "b": self.b}

    @property
    def grads(self):
        return {"w": self.dw, "b": self.db}

    def forward(self, x):
        self._x = x
        return conv2d_forward(x, self.w, self.b, self.spec.stride, self.spec.pad)

    def backward(self, dout, need_dx: bool = True):
        dx, self.dw, self.db = conv2d_backward(
            self._x, self.w, dout, self.spec.stride, self.spec.pad, need_dx
        )
        return dx


class ReLU:
    spec = LayerSpec("relu")
    params = {}
    grads = {}

    def __init__(self):
        self._mask = None

    def forward(self, x):
        self._mask = x > 0
        return np.where(self._mask, x, 0)

    def backward(self, dout, need_dx: bool = True):
        return dout * self._mask


class MaxPool2x2:
    spec = LayerSpec("maxpool", kernel=2, stride=2)
    params = {}
    grads = {}

    def __init__(self):
        self._shape = None
        self._idx = None

    def forward(self, x):
        self._shape = x.shape
        out, self._idx = maxpool2x2_forward(x)
        return out

    def backward(self, dout, need_dx: bool = True):
        return maxpool2x2_backward(self._shape, self._idx, dout)


class Deconv2d:
    """Trainable transposed-convolution upsampler (no bias), bilinear init."""

    def __init__(self, channels: int, stride: int, dtype=np.float32):
        k = 2 * stride
        self.spec = LayerSpec("deconv", channels, channels, k, stride, stride // 2)
        self.w = bilinear_kernel(channels, k, dtype)
        self.dw = np.zeros_like(self.w)
        self._x = None

    @property
    def params(self):
        return {"w": self.w}

    @property
    def grads(self):
        return {"w": self.dw}

    def forward(self, x):
        self._x = x
        return deconv2d_forward(x, self.w, self.spec.stride)

    def backward(self, dout, need_dx: bool = True):
        dx, self.dw = deconv2d_backward(self._x, self.w, dout, self.spec.stride)
        return dx
