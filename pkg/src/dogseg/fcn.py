"""Miniature fully convolutional segmentation networks.

Four variants share one family pattern: a stack of (conv3x3, relu,
maxpool2) stages, a 1x1 score layer onto the two classes, then learned
transposed-convolution upsampling back to the input size.  The deeper
variants upsample stepwise and fuse 1x1-scored copies of shallower pool
outputs by elementwise sum on the way up:

* ``mini-8s``   three stages (/8), one deconv x8 back up.
* ``mini-4s``   deconv x2, fuse score(pool2), deconv x4.
* ``mini-2s``   deconv x2, fuse score(pool2), deconv x2, fuse score(pool1),
  deconv x2.
* ``mini-fast`` runtime-trimmed: half-resolution 64x64 input, 8 channels,
  two stages (/4), one deconv x4.

Every variant's output spatial size equals its input size.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator

from . import io as dio
from .dataset import rotate_frame
from .encoding import EncodedImage, encode
from .errors import GridValidationError, NotFittedError, TrainingError
from .grid import DogGrid, LabelMask, occupied_mask
from .nn import (
    ClassWeights,
    Conv2d,
    Deconv2d,
    LayerSpec,
    MaxPool2x2,
    ReLU,
    SgdMomentum,
    softmax,
    weighted_softmax_loss,
)

#: variant name -> (nominal input, stage channels, stage count,
#:                  [(deconv stride, fused stage index or None), ...],
#:                  runs at half the source resolution)
VARIANTS = {
    "mini-8s": (128, 16, 3, [(8, None)], False),
    "mini-4s": (128, 16, 3, [(2, 1), (4, None)], False),
    "mini-2s": (128, 16, 3, [(2, 1), (2, 0), (2, None)], False),
    "mini-fast": (64, 8, 2, [(4, None)], True),
}


@dataclass(frozen=True)
class NetworkSpec:
    """Static structure of a built network."""

    variant: str
    input_hw: int
    in_channels: int
    n_classes: int
    layers: tuple[LayerSpec, ...]
    fusions: tuple[tuple[int, int], ...]  # (upstep index, fused stage index)

    def validate(self) -> None:
        down = 1
        up = 1
        for spec in self.layers:
            if spec.kind == "maxpool":
                down *= spec.stride
            elif spec.kind == "deconv":
                up *= spec.stride
        if down != up:
            raise GridValidationError(
                f"{self.variant}: total downsample {down} != total upsample {up}"
            )
        n_stages = sum(1 for s in self.layers if s.kind == "maxpool")
        last = n_stages - 1
        for _, stage in self.fusions:
            if not stage < last:
                raise GridValidationError(
                    f"{self.variant}: fusion must tap a strictly shallower "
                    f"pool, got stage {stage} of {n_stages}"
                )
            last = stage


class Network:
    """Executable network: owns layers, runs forward/backward."""

    def __init__(self, variant, input_hw, in_channels, n_classes, stages, score,
                 upsteps, half_input=False, dtype=np.float32):
        self.variant = variant
        self.input_hw = input_hw
        self.in_channels = in_channels
        self.n_classes = n_classes
        self.stages = stages  # [(name, conv, relu, pool)]
        self.score = score
        self.upsteps = upsteps  # [(name, deconv, fuse_stage, fuse_conv|None)]
        self.half_input = half_input
        self.dtype = dtype
        self._pooled = None
        self.spec.validate()

    # -- structure -----------------------------------------------------

    @property
    def spec(self) -> NetworkSpec:
        layers = []
        for _, conv, _, _ in self.stages:
            ch = conv.spec.out_ch
            layers += [
                conv.spec,
                LayerSpec("relu", in_ch=ch, out_ch=ch),
                LayerSpec("maxpool", in_ch=ch, out_ch=ch, kernel=2, stride=2),
            ]
        layers.append(self.score.spec)
        fusions = []
        for k, (_, deconv, fuse_stage, fuse_conv) in enumerate(self.upsteps):
            layers.append(deconv.spec)
            if fuse_stage is not None:
                layers.append(fuse_conv.spec)
                layers.append(LayerSpec("fuse_sum"))
                fusions.append((k, fuse_stage))
        layers.append(LayerSpec("softmax"))
        return NetworkSpec(
            self.variant, self.input_hw, self.in_channels, self.n_classes,
            tuple(layers), tuple(fusions),
        )

    def _named_layers(self):
        for name, conv, _, _ in self.stages:
            yield name, conv
        yield "score", self.score
        for name, deconv, _, fuse_conv in self.upsteps:
            yield name, deconv
            if fuse_conv is not None:
                yield f"{name}_fuse", fuse_conv

    def named_params(self) -> dict[str, np.ndarray]:
        out = {}
        for lname, layer in self._named_layers():
            for pname, arr in layer.params.items():
                out[f"{lname}.{pname}"] = arr
        return out

    def named_grads(self) -> dict[str, np.ndarray]:
        out = {}
        for lname, layer in self._named_layers():
            for pname, arr in layer.grads.items():
                out[f"{lname}.{pname}"] = arr
        return out

    def n_params(self) -> int:
        return sum(p.size for p in self.named_params().values())

    # -- execution -------------------------------------------------------

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Logits (B, K, H, W) for a batch (B, C, H, W)."""
        if x.ndim != 4:
            raise GridValidationError(f"input must be (B, C, H, W), got {x.shape}")
        if x.shape[1] != self.in_channels:
            raise GridValidationError(
                f"input has {x.shape[1]} channels, network expects {self.in_channels}"
            )
        x = np.ascontiguousarray(x, dtype=self.dtype)
        pooled = []
        h = x
        for _, conv, relu, pool in self.stages:
            h = pool.forward(relu.forward(conv.forward(h)))
            pooled.append(h)
        self._pooled = pooled
        h = self.score.forward(pooled[-1])
        for _, deconv, fuse_stage, fuse_conv in self.upsteps:
            h = deconv.forward(h)
            if fuse_stage is not None:
                h = h + fuse_conv.forward(pooled[fuse_stage])
        return h

    def backward(self, dlogits: np.ndarray) -> None:
        """Populate every layer's gradients from a loss gradient."""
        extra = [None] * len(self.stages)
        d = dlogits
        for _, deconv, fuse_stage, fuse_conv in reversed(self.upsteps):
            if fuse_stage is not None:
                d_tap = fuse_conv.backward(d)
                if extra[fuse_stage] is None:
                    extra[fuse_stage] = d_tap
                else:
                    extra[fuse_stage] = extra[fuse_stage] + d_tap
            d = deconv.backward(d)
        d = self.score.backward(d)
        for i in range(len(self.stages) - 1, -1, -1):
            if extra[i] is not None:
                d = d + extra[i]
            _, conv, relu, pool = self.stages[i]
            d = pool.backward(d)
            d = relu.backward(d)
            d = conv.backward(d, need_dx=i > 0)

    # -- persistence -----------------------------------------------------

    def save_params(self, path) -> None:
        dio.write_params(path, list(self.named_params().items()))

    def load_params(self, path) -> None:
        stored = dict(dio.read_params(path))
        own = self.named_params()
        if set(stored) != set(own):
            raise GridValidationError(
                f"{path}: weight names do not match network "
                f"(missing {sorted(set(own) - set(stored))}, "
                f"unexpected {sorted(set(stored) - set(own))})"
            )
        for name, arr in own.items():
            if stored[name].shape != arr.shape:
                raise GridValidationError(
                    f"{path}: {name} has shape {stored[name].shape}, "
                    f"expected {arr.shape}"
                )
            arr[...] = stored[name].astype(self.dtype)


def build_network(
    variant: str,
    in_channels: int = 3,
    n_classes: int = 2,
    seed: int = 0,
    input_hw: int | None = None,
    dtype=np.float32,
) -> Network:
    """Assemble a variant with deterministic seeded initialization.

    ``input_hw`` overrides the nominal input size (useful for desk-size
    gradient checks); it must remain divisible by the total downsample.
    """
    key = variant.lower()
    if key not in VARIANTS:
        raise GridValidationError(
            f"unknown variant {variant!r}; expected one of {sorted(VARIANTS)}"
        )
    nominal_hw, channels, n_stages, up, half_input = VARIANTS[key]
    hw = nominal_hw if input_hw is None else int(input_hw)
    total_down = 2**n_stages
    if hw % total_down:
        raise GridValidationError(
            f"{variant}: input size {hw} not divisible by downsample {total_down}"
        )
    rng = np.random.default_rng(seed)
    stages = []
    c_in = in_channels
    for i in range(n_stages):
        conv = Conv2d(c_in, channels, 3, stride=1, pad=1, rng=rng, dtype=dtype)
        stages.append((f"conv{i + 1}", conv, ReLU(), MaxPool2x2()))
        c_in = channels
    score = Conv2d(channels, n_classes, 1, rng=rng, dtype=dtype, kind="score1x1")
    upsteps = []
    for k, (stride, fuse_stage) in enumerate(up):
        fuse_conv = None
        if fuse_stage is not None:
            fuse_conv = Conv2d(
                channels, n_classes, 1, rng=rng, dtype=dtype, kind="score1x1"
            )
        upsteps.append((f"up{k + 1}", Deconv2d(n_classes, stride, dtype), fuse_stage, fuse_conv))
    return Network(key, hw, in_channels, n_classes, stages, score, upsteps,
                   half_input, dtype)


def network_flops(net: Network) -> int:
    """Static forward multiply-add count (x2) over the layer graph."""
    hw = net.input_hw
    total = 0
    for spec in net.spec.layers:
        if spec.kind in ("conv", "score1x1"):
            total += 2 * spec.kernel**2 * spec.in_ch * spec.out_ch * hw * hw
        elif spec.kind == "maxpool":
            total += 3 * spec.in_ch * hw * hw
            hw //= 2
        elif spec.kind == "deconv":
            total += 2 * spec.kernel**2 * spec.in_ch * spec.out_ch * hw * hw
            hw *= spec.stride
        elif spec.kind in ("relu", "fuse_sum", "softmax"):
            total += spec.in_ch * hw * hw if spec.in_ch else hw * hw
    return total


# ---------------------------------------------------------------------------
# Inference and refinement


def infer(net: Network, encoded) -> tuple[np.ndarray, LabelMask]:
    """Per-cell dynamic probability and argmax mask for one encoded image.

    Ties (probability exactly 0.5) resolve to static: a dynamic claim
    requires a strict majority.
    """
    channels = encoded.channels if isinstance(encoded, EncodedImage) else np.asarray(encoded)
    if channels.ndim != 3:
        raise GridValidationError(
            f"encoded image must be (C, H, W), got shape {channels.shape}"
        )
    if channels.shape[1] != net.input_hw or channels.shape[2] != net.input_hw:
        raise GridValidationError(
            f"encoded image is {channels.shape[1]}x{channels.shape[2]}, "
            f"{net.variant} expects {net.input_hw}x{net.input_hw}"
        )
    logits = net.forward(channels[None])
    probs = softmax(logits, axis=1)[0]
    score_map = probs[1].astype(np.float32)
    mask = LabelMask(logits[0, 1] > logits[0, 0])
    return score_map, mask


def refine(mask: LabelMask, grid: DogGrid, occ_thresh: float = 0.6) -> LabelMask:
    """Keep a dynamic label only where the cell is occupied (occ > thresh).

    Pure intersection: never adds dynamic cells, hence idempotent and
    monotone non-increasing in the dynamic set.
    """
    if mask.shape != grid.shape:
        raise GridValidationError(
            f"mask shape {mask.shape} does not match grid {grid.shape}"
        )
    return LabelMask(mask.labels & occupied_mask(grid, occ_thresh))


# ---------------------------------------------------------------------------
# Resolution helpers for the half-input variant


def downsample2x_mean(channels: np.ndarray) -> np.ndarray:
    """(C, H, W) -> (C, H/2, W/2) by 2x2 block averaging."""
    c, h, w = channels.shape
    if h % 2 or w % 2:
        raise GridValidationError(f"cannot halve odd dims {h}x{w}")
    return channels.reshape(c, h // 2, 2, w // 2, 2).mean(axis=(2, 4))


def downsample2x_any(labels: np.ndarray) -> np.ndarray:
    """(H, W) bool -> (H/2, W/2): a block is dynamic if any member is."""
    h, w = labels.shape
    return labels.reshape(h // 2, 2, w // 2, 2).any(axis=(1, 3))


def upsample2x_nearest(arr: np.ndarray) -> np.ndarray:
    return np.repeat(np.repeat(arr, 2, axis=-2), 2, axis=-1)


# ---------------------------------------------------------------------------
# Trainable estimator


class FcnSegmenter(BaseEstimator):
    """Per-cell motion segmenter: encoded grid in, refined label mask out.

    Parameters:
        variant: one of ``mini-8s``, ``mini-4s``, ``mini-2s``, ``mini-fast``.
        config_id: encoding configuration applied to input grids.
        c1: loss weight of the dynamic class (static class fixed at c2).
        c2: loss weight of the static class.
        lr: initial learning rate (halved every ``lr_halve_every`` epochs).
        momentum: SGD momentum.
        epochs: training epochs.
        batch_size: images per SGD step.
        augment: train on all 36 10-degree rotations of each frame.
        occ_thresh: occupancy gate used by ``predict``'s refinement.
        seed: controls init, shuffling, and augmentation determinism.

    ``fit`` consumes grids plus their label masks; ``predict`` returns
    refined label masks; ``predict_proba`` returns per-cell dynamic
    probabilities (the ROC score maps).
    """

    def __init__(
        self,
        variant: str = "mini-8s",
        config_id: int = 2,
        c1: float = 40.0,
        c2: float = 1.0,
        lr: float = 1e-2,
        lr_halve_every: int = 10,
        momentum: float = 0.9,
        epochs: int = 30,
        batch_size: int = 8,
        augment: bool = True,
        occ_thresh: float = 0.6,
        seed: int = 0,
    ):
        self.variant = variant
        self.config_id = config_id
        self.c1 = c1
        self.c2 = c2
        self.lr = lr
        self.lr_halve_every = lr_halve_every
        self.momentum = momentum
        self.epochs = epochs
        self.batch_size = batch_size
        self.augment = augment
        self.occ_thresh = occ_thresh
        self.seed = seed

    @property
    def model_id(self) -> str:
        return f"{self.variant.lower()}-c{self.config_id}"

    # -- data preparation ------------------------------------------------

    def _encode_one(self, grid: DogGrid) -> np.ndarray:
        channels = encode(grid, self.config_id).channels
        if VARIANTS[self.variant.lower()][4]:
            channels = downsample2x_mean(channels).astype(np.float32)
        return channels

    def _labels_one(self, mask: LabelMask) -> np.ndarray:
        labels = mask.labels
        if VARIANTS[self.variant.lower()][4]:
            labels = downsample2x_any(labels)
        return labels.astype(np.uint8)

    def _prepare(self, grids, masks) -> tuple[np.ndarray, np.ndarray]:
        angles = range(0, 360, 10) if self.augment else (0,)
        xs, ys = [], []
        for grid, mask in zip(grids, masks):
            for theta in angles:
                g, m = (grid, mask) if theta == 0 else rotate_frame(grid, mask, theta)
                xs.append(self._encode_one(g))
                ys.append(self._labels_one(m))
        return np.stack(xs), np.stack(ys)

    # -- training ----------------------------------------------------------

    def fit(self, X, y, X_val=None, y_val=None, verbose: bool = False):
        """Train on grids ``X`` with label masks ``y``.

        Optional ``X_val``/``y_val`` adds a per-epoch validation loss to
        ``history_``.  Returns ``self``.
        """
        if self.variant.lower() not in VARIANTS:
            raise GridValidationError(f"unknown variant {self.variant!r}")
        grids = [X] if isinstance(X, DogGrid) else list(X)
        masks = [y] if isinstance(y, LabelMask) else list(y)
        if len(grids) != len(masks) or not grids:
            raise GridValidationError(
                f"need equally many grids and masks, got {len(grids)}/{len(masks)}"
            )
        data, labels = self._prepare(grids, masks)
        val = None
        if X_val is not None:
            val = self._prepare(list(X_val), list(y_val))
        hw = data.shape[2]
        cw = ClassWeights.for_dynamic_weight(self.c1, self.c2)
        self.net_ = build_network(
            self.variant, in_channels=3, n_classes=2, seed=self.seed, input_hw=hw
        )
        opt = SgdMomentum(self.lr, self.momentum)
        rng = np.random.default_rng(self.seed)
        n = data.shape[0]
        px = hw * hw
        self.history_ = []
        for epoch in range(self.epochs):
            opt.lr = self.lr * 0.5 ** (epoch // self.lr_halve_every)
            perm = rng.permutation(n)
            total = 0.0
            for step, start in enumerate(range(0, n, self.batch_size)):
                idx = perm[start : start + self.batch_size]
                logits = self.net_.forward(data[idx])
                loss, dlogits = weighted_softmax_loss(logits, labels[idx], cw)
                if not np.isfinite(loss):
                    raise TrainingError(
                        f"non-finite loss at epoch {epoch}, step {step}"
                    )
                total += loss
                self.net_.backward(dlogits / (len(idx) * px))
                opt.step(self.net_.named_params(), self.net_.named_grads())
            row = {
                "epoch": epoch,
                "lr": opt.lr,
                "train_loss": total / n,
                "val_loss": self._eval_loss(val, cw) if val else float("nan"),
            }
            self.history_.append(row)
            if verbose:
                print(
                    f"epoch {epoch:3d}  lr {row['lr']:.4g}  "
                    f"train {row['train_loss']:.2f}  val {row['val_loss']:.2f}"
                )
        return self

    def _eval_loss(self, val, cw) -> float:
        data, labels = val
        total = 0.0
        for start in range(0, data.shape[0], self.batch_size):
            logits = self.net_.forward(data[start : start + self.batch_size])
            total += weighted_softmax_loss(
                logits, labels[start : start + self.batch_size], cw
            )[0]
        return total / data.shape[0]

    # -- inference ---------------------------------------------------------

    def _check_fitted(self):
        if not hasattr(self, "net_"):
            raise NotFittedError(
                "this FcnSegmenter has no weights; call fit() or load()"
            )

    def _proba_one(self, grid: DogGrid) -> np.ndarray:
        score_map, _ = infer(self.net_, self._encode_one(grid))
        if self.net_.half_input:
            score_map = upsample2x_nearest(score_map)
        return score_map

    def predict_proba(self, X):
        """Per-cell dynamic probability map(s) at source resolution."""
        self._check_fitted()
        if isinstance(X, DogGrid):
            return self._proba_one(X)
        return [self._proba_one(g) for g in X]

    def _predict_one(self, grid: DogGrid) -> LabelMask:
        mask = LabelMask(self._proba_one(grid) > 0.5)
        return refine(mask, grid, self.occ_thresh)

    def predict(self, X):
        """Refined label mask(s): argmax class intersected with occupancy."""
        self._check_fitted()
        if isinstance(X, DogGrid):
            return self._predict_one(X)
        return [self._predict_one(g) for g in X]

    # -- persistence ---------------------------------------------------------

    def save(self, path) -> None:
        """Write weights (binary) plus a JSON sidecar of the configuration."""
        self._check_fitted()
        path = Path(path)
        self.net_.save_params(path)
        meta = dict(
            variant=self.net_.variant,
            config_id=self.config_id,
            c1=self.c1,
            c2=self.c2,
            occ_thresh=self.occ_thresh,
            input_hw=self.net_.input_hw,
            seed=self.seed,
        )
        path.with_suffix(path.suffix + ".json").write_text(
            json.dumps(meta, indent=2) + "\n"
        )

    @classmethod
    def load(cls, path) -> "FcnSegmenter":
        """Rebuild a fitted segmenter from ``save()`` output."""
        path = Path(path)
        meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
        est = cls(
            variant=meta["variant"],
            config_id=meta["config_id"],
            c1=meta["c1"],
            c2=meta["c2"],
            occ_thresh=meta["occ_thresh"],
            seed=meta["seed"],
        )
        est.net_ = build_network(
            meta["variant"], in_channels=3, n_classes=2, seed=meta["seed"],
            input_hw=meta["input_hw"],
        )
        est.net_.load_params(path)
        est.history_ = []
        return est
