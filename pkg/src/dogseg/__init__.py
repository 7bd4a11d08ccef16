"""Moving-object detection on dynamic occupancy grid maps.

A desk-scale toolkit: synthetic scene simulation, velocity-statistics
encodings, small from-scratch fully convolutional segmentation networks,
a Mahalanobis-threshold baseline, automatic labeling, and ROC/EER
evaluation, all behind one CLI (``dogseg``).
"""

from .autolabel import (
    Polygon,
    autolabel_pipeline,
    autolabel_polygons,
    convex_hull,
    dbscan,
    rasterize,
)
from .baseline import MahalanobisBaseline, baseline_classify, baseline_scores
from .dataset import DatasetIndex, class_ratio, make_split, rotate_frame
from .encoding import (
    CONFIG_IDS,
    EncodedImage,
    GridImageEncoder,
    encode,
    mahalanobis,
    normalized_velocity,
    overall_variance,
    render_dog,
)
from .errors import (
    DegenerateCurveError,
    DogsegError,
    FileFormatError,
    FileLengthError,
    GridValidationError,
    NotFittedError,
    SceneGenerationError,
    TrainingError,
)
from .fcn import (
    FcnSegmenter,
    Network,
    NetworkSpec,
    build_network,
    infer,
    network_flops,
    refine,
)
from .grid import CellState, DogGrid, LabelMask, occupied_mask
from .io import (
    read_dog,
    read_encd,
    read_mask,
    read_params,
    read_ppm,
    write_dog,
    write_encd,
    write_mask,
    write_params,
    write_ppm,
)
from .metrics import (
    BenchRow,
    MetricRow,
    RocCurve,
    bench,
    pooled_roc,
    pr_accuracy,
    roc,
    roc_from_cells,
    rotation_sweep,
)
from .nn import (
    ClassWeights,
    SgdMomentum,
    grad_check,
    sgd_step,
    softmax,
    weighted_softmax_loss,
)
from .simulate import (
    LabeledFrame,
    MovingBox,
    SceneSpec,
    StaticShape,
    apply_aperture_corruption,
    default_scene_spec,
    generate_scene,
    inject_clutter,
)

__version__ = "0.1.0"

__all__ = [
    "BenchRow", "CellState", "ClassWeights", "CONFIG_IDS", "DatasetIndex",
    "DegenerateCurveError", "DogGrid", "DogsegError", "EncodedImage",
    "FcnSegmenter", "FileFormatError", "FileLengthError", "GridImageEncoder",
    "GridValidationError", "LabelMask", "LabeledFrame", "MahalanobisBaseline",
    "MetricRow", "MovingBox", "Network", "NetworkSpec", "NotFittedError",
    "Polygon", "RocCurve", "SceneGenerationError", "SceneSpec", "SgdMomentum",
    "StaticShape", "TrainingError", "apply_aperture_corruption",
    "autolabel_pipeline", "autolabel_polygons", "baseline_classify",
    "baseline_scores", "bench", "build_network", "class_ratio", "convex_hull",
    "dbscan", "default_scene_spec", "encode", "generate_scene", "grad_check",
    "infer", "inject_clutter", "mahalanobis", "make_split", "network_flops",
    "normalized_velocity", "occupied_mask", "overall_variance", "pooled_roc",
    "pr_accuracy", "rasterize", "read_dog", "read_encd", "read_mask",
    "read_params", "read_ppm", "refine", "render_dog", "roc",
    "roc_from_cells", "rotate_frame",
    "rotation_sweep", "sgd_step", "softmax", "weighted_softmax_loss",
    "write_dog", "write_encd", "write_mask", "write_params", "write_ppm",
]
