"""Scratch: baseline clean/corrupted accEER across the fixed seed set."""
import numpy as np

from dogseg.baseline import MahalanobisBaseline
from dogseg.metrics import pooled_roc
from dogseg.simulate import default_scene_spec, generate_scene

cleans, drops = [], []
for seed in (7, 21, 35):
    res = {}
    for corrupted in (False, True):
        spec = default_scene_spec(corrupted=corrupted, frames=32, seed=seed)
        curve = pooled_roc(MahalanobisBaseline(), generate_scene(spec))
        res[corrupted] = 100 * curve.accuracy_at_eer
    drop = res[False] - res[True]
    cleans.append(res[False])
    drops.append(drop)
    print(f"seed {seed}: clean={res[False]:6.2f} corrupted={res[True]:6.2f} drop={drop:5.2f}")
print(f"clean spread={max(cleans) - min(cleans):.2f} drop spread={max(drops) - min(drops):.2f}")
