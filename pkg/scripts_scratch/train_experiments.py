"""Scratch: full training experiments mirroring acceptance criteria 8-11."""
import sys
import time

import numpy as np

from dogseg.baseline import MahalanobisBaseline
from dogseg.dataset import VALID_ANGLES, rotate_frame
from dogseg.fcn import FcnSegmenter
from dogseg.metrics import pooled_roc, rotation_sweep
from dogseg.simulate import default_scene_spec, generate_scene

EPOCHS = int(sys.argv[1]) if len(sys.argv) > 1 else 30

t0 = time.time()
spec = default_scene_spec(corrupted=True, frames=32, seed=7)
frames = generate_scene(spec)
n = len(frames)
n_val = max(1, round(0.1 * n))
n_test = max(1, round(0.1 * n))
n_train = n - n_val - n_test
order = np.random.default_rng(0).permutation(n)
train_idx = order[:n_train]
val_idx = order[n_train:n_train + n_val]
test_idx = order[n_train + n_val:]
print(f"split train={sorted(train_idx)} val={sorted(val_idx)} test={sorted(test_idx)}", flush=True)

Xtr = [frames[i].grid for i in train_idx]
ytr = [frames[i].mask for i in train_idx]
Xva = [frames[i].grid for i in val_idx]
yva = [frames[i].mask for i in val_idx]

test_pairs = []
for i in test_idx:
    for theta in VALID_ANGLES:
        if theta == 0:
            test_pairs.append((frames[i].grid, frames[i].mask))
        else:
            test_pairs.append(rotate_frame(frames[i].grid, frames[i].mask, theta))
print(f"test entries: {len(test_pairs)}  setup {time.time() - t0:.1f}s", flush=True)

base_curve = pooled_roc(MahalanobisBaseline(), test_pairs)
print(f"baseline: accEER={100 * base_curve.accuracy_at_eer:6.2f} AUC={base_curve.auc:.4f}", flush=True)

results = {}


def run(tag, **kw):
    t1 = time.time()
    est = FcnSegmenter(variant="mini-8s", epochs=EPOCHS, seed=0, **kw)
    est.fit(Xtr, ytr, Xva, yva, verbose=True)
    t_fit = time.time() - t1
    curve = pooled_roc(est, test_pairs)
    results[tag] = curve
    print(
        f"{tag}: accEER={100 * curve.accuracy_at_eer:6.2f} AUC={curve.auc:.4f} "
        f"fit={t_fit:.0f}s (vs baseline {100 * base_curve.accuracy_at_eer:6.2f})",
        flush=True,
    )
    est.save(f"/root/pkg/scripts_scratch/{tag}.nnp")
    return est


est_c2 = run("c2_w40", config_id=2, c1=40)
run("c1_w40", config_id=1, c1=40)
run("c3_w40", config_id=3, c1=40)
run("c2_w1", config_id=2, c1=1)

# criterion 11: rotation sweep on the clean counterpart of the first test frame
clean = generate_scene(default_scene_spec(corrupted=False, frames=32, seed=7))
frame0 = clean[test_idx[0]]
rows_fcn = rotation_sweep(est_c2, frame0)
rows_base = rotation_sweep(MahalanobisBaseline(), frame0)
std_fcn = 100 * float(np.std([r.accuracy for r in rows_fcn]))
std_base = 100 * float(np.std([r.accuracy for r in rows_base]))
print(f"rotation std (clean frame {test_idx[0]}): fcn={std_fcn:.2f} baseline={std_base:.2f}", flush=True)

# corrupted-frame sweep, for reference
frame0c = frames[test_idx[0]]
rows_fcn_c = rotation_sweep(est_c2, frame0c)
std_fcn_c = 100 * float(np.std([r.accuracy for r in rows_fcn_c]))
print(f"rotation std (corrupted frame {test_idx[0]}): fcn={std_fcn_c:.2f}", flush=True)
print(f"total {time.time() - t0:.0f}s", flush=True)
