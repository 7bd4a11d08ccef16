"""Scratch: empirical check of scene statistics and baseline EER landscape."""
import time

import numpy as np

from dogseg.baseline import MahalanobisBaseline
from dogseg.grid import occupied_mask
from dogseg.metrics import pooled_roc
from dogseg.simulate import default_scene_spec, generate_scene

for corrupted in (False, True):
    t0 = time.time()
    spec = default_scene_spec(corrupted=corrupted, frames=32, seed=7)
    frames = generate_scene(spec)
    gen_s = time.time() - t0

    n_dyn = 0
    n_cells = 0
    n_vis = 0          # dynamic truth cells that are also occupied (occ > 0.6)
    n_gated = 0
    n_gated_pos = 0
    for fr in frames:
        occ = occupied_mask(fr.grid)
        lab = fr.mask.labels
        n_dyn += int(lab.sum())
        n_cells += lab.size
        n_vis += int((lab & occ).sum())
        n_gated += int(occ.sum())
        n_gated_pos += int((lab & occ).sum())

    curve = pooled_roc(MahalanobisBaseline(), frames)
    ratio = n_cells / max(n_dyn, 1)
    tag = "corrupted" if corrupted else "clean    "
    print(
        f"{tag} gen={gen_s:5.1f}s ratio=1:{ratio:5.0f} "
        f"dyn/frame={n_dyn / len(frames):6.1f} vis={100 * n_vis / max(n_dyn, 1):5.1f}% "
        f"gated/frame={n_gated / len(frames):7.1f} pos_in_gate={n_gated_pos / len(frames):6.1f} "
        f"accEER={100 * curve.accuracy_at_eer:6.2f} AUC={curve.auc:.4f}"
    )
