"""Command-line pipeline driver.

One binary, eight subcommands::

    dogseg simulate  generate a scene to DOGG+PGM pairs plus an index
    dogseg encode    encode frames to 3-channel images (ENCD, optional PPM)
    dogseg label     run the automatic labeler over frames
    dogseg train     train an FCN variant on the train split
    dogseg infer     run a trained model over frames, write PGM masks
    dogseg eval      ROC/EER comparison of baseline + trained models
    dogseg bench     stage timing for the network variants
    dogseg render    color visualization (PPM) of grids

Exit codes: 0 success, 1 usage error, 2 domain error.  All data goes to
files under --out; messages go to stderr.  Runs are deterministic for a
fixed config and seed when --threads=1 (the default); simulate and
encode parallelize per frame without changing their output.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import hashlib
import json
import sys
import time
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import io as dio
from .autolabel import autolabel_pipeline, autolabel_polygons, write_polygons
from .baseline import MahalanobisBaseline
from .dataset import DatasetIndex, class_ratio, make_split, rotate_frame
from .encoding import CONFIG_IDS, encode, render_dog
from .errors import DogsegError
from .fcn import VARIANTS, FcnSegmenter, build_network, infer as net_infer, refine
from .grid import LabelMask
from .metrics import (
    bench,
    pooled_roc,
    rotation_sweep,
    write_bench_csv,
    write_curve_csv,
    write_curve_svg,
    write_rows_csv,
)
from .simulate import (
    LabeledFrame,
    default_scene_spec,
    format_scene_config,
    generate_scene,
    parse_scene_config,
)


@dataclass(frozen=True)
class RunConfig:
    """Run parameters, from a key=value file overridden by flags."""

    scene: str = ""
    seed: int = 0
    config_id: int = 2
    variant: str = "mini-8s"
    occ_thresh: float = 0.6
    c1: float = 40.0
    c2: float = 1.0
    lr: float = 1e-2
    momentum: float = 0.9
    epochs: int = 30
    batch_size: int = 8
    out: str = "runs"

    @classmethod
    def from_sources(cls, config_path: str | None, overrides: dict) -> "RunConfig":
        values = {}
        if config_path:
            text = Path(config_path).read_text()
            types = {f.name: f.type for f in fields(cls)}
            casts = {"seed": int, "config_id": int, "epochs": int,
                     "batch_size": int, "occ_thresh": float, "c1": float,
                     "c2": float, "lr": float, "momentum": float}
            for lineno, raw in enumerate(text.splitlines(), 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise DogsegError(f"{config_path}:{lineno}: expected key=value")
                key, value = (p.strip() for p in line.split("=", 1))
                if key not in types:
                    raise DogsegError(f"{config_path}:{lineno}: unknown key {key!r}")
                try:
                    values[key] = casts.get(key, str)(value)
                except ValueError as exc:
                    raise DogsegError(f"{config_path}:{lineno}: {exc}") from exc
        values.update({k: v for k, v in overrides.items() if v is not None})
        cfg = cls(**values)
        if cfg.config_id not in CONFIG_IDS:
            raise DogsegError(f"config_id must be one of {CONFIG_IDS}, got {cfg.config_id}")
        if cfg.variant.lower() not in VARIANTS:
            raise DogsegError(f"unknown variant {cfg.variant!r}")
        return cfg


# ---------------------------------------------------------------------------
# Shared helpers


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_manifest(out_dir: Path, command: str, cfg: RunConfig,
                    inputs, outputs) -> None:
    manifest = {
        "command": command,
        "seed": cfg.seed,
        "config": {f.name: getattr(cfg, f.name) for f in fields(cfg)},
        "inputs": [str(p) for p in inputs],
        "outputs": {str(p.relative_to(out_dir)): _sha256(p) for p in sorted(outputs)},
    }
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _frame_name(k: int) -> str:
    return f"frame_{k:04d}"


def _load_scene_spec(cfg: RunConfig, corrupted: bool):
    if cfg.scene:
        return parse_scene_config(Path(cfg.scene).read_text())
    return default_scene_spec(corrupted=corrupted, seed=cfg.seed)


def _read_frame(path: Path):
    grid = dio.read_dog(path, frame_id=_frame_index(path))
    mask = dio.read_mask(path.with_suffix(".pgm"))
    return grid, mask


def _frame_index(path: Path) -> int:
    stem = path.stem
    digits = "".join(ch for ch in stem if ch.isdigit())
    return int(digits) if digits else 0


def _index_rows_to_frames(index: DatasetIndex, split: str, root: Path,
                          rotation: int | None = None):
    """Yield (grid, mask, row) with the row's rotation applied."""
    for row in index.select(split, rotation):
        grid = dio.read_dog(root / row.path, frame_id=_frame_index(Path(row.path)))
        mask = dio.read_mask(root / row.mask_path)
        if row.rotation_deg:
            grid, mask = rotate_frame(grid, mask, row.rotation_deg)
        yield grid, mask, row


def _pool_map(fn, items, threads: int):
    if threads <= 1:
        return [fn(item) for item in items]
    with concurrent.futures.ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(cfg: RunConfig, corrupted: bool) -> int:
    # frame generation shares precomputed geometry and is draw-order
    # deterministic, so it stays sequential regardless of --threads
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    spec = _load_scene_spec(cfg, corrupted)
    frames = generate_scene(spec, seed=cfg.seed)
    outputs = []
    for frame in frames:
        dog = out_dir / f"{_frame_name(frame.frame_id)}.dogg"
        pgm = out_dir / f"{_frame_name(frame.frame_id)}.pgm"
        dio.write_dog(dog, frame.grid)
        dio.write_mask(pgm, frame.mask)
        outputs += [dog, pgm]
    entries = [
        (f"{_frame_name(f.frame_id)}.dogg", f"{_frame_name(f.frame_id)}.pgm")
        for f in frames
    ]
    index = make_split(entries, seed=cfg.seed)
    index_path = out_dir / "index.csv"
    index.save(index_path)
    outputs.append(index_path)
    scene_path = out_dir / "scene.cfg"
    scene_path.write_text(format_scene_config(spec))
    outputs.append(scene_path)
    dyn, total, ratio = class_ratio(index, "train", root=out_dir)
    _write_manifest(out_dir, "simulate", cfg, [cfg.scene] if cfg.scene else [],
                    outputs)
    print(f"wrote {len(frames)} frames to {out_dir} "
          f"(train dynamic ratio 1:{total / max(dyn, 1):.0f})", file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# encode / render / label


def _encode_job(args):
    in_path, out_dir, config_id, ppm = args
    grid = dio.read_dog(Path(in_path))
    image = encode(grid, config_id)
    out = Path(out_dir) / (Path(in_path).stem + f".c{config_id}.encd")
    dio.write_encd(out, image.channels, image.config_id)
    written = [out]
    if ppm:
        ppm_path = out.with_suffix(".ppm")
        dio.write_ppm(ppm_path, image.to_rgb8())
        written.append(ppm_path)
    return written


def cmd_encode(cfg: RunConfig, frames_dir: str, ppm: bool, threads: int) -> int:
    in_dir = Path(frames_dir or cfg.out)
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = sorted(in_dir.glob("*.dogg"))
    if not paths:
        raise DogsegError(f"no .dogg frames found in {in_dir}")
    jobs = [(str(p), str(out_dir), cfg.config_id, ppm) for p in paths]
    results = _pool_map(_encode_job, jobs, threads)
    outputs = [p for group in results for p in group]
    _write_manifest(out_dir, "encode", cfg, paths, outputs)
    print(f"encoded {len(paths)} frames with config {cfg.config_id}",
          file=sys.stderr)
    return 0


def cmd_render(cfg: RunConfig, frames_dir: str) -> int:
    in_dir = Path(frames_dir or cfg.out)
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = sorted(in_dir.glob("*.dogg"))
    if not paths:
        raise DogsegError(f"no .dogg frames found in {in_dir}")
    outputs = []
    for p in paths:
        grid = dio.read_dog(p)
        out = out_dir / (p.stem + ".render.ppm")
        dio.write_ppm(out, render_dog(grid))
        outputs.append(out)
    _write_manifest(out_dir, "render", cfg, paths, outputs)
    print(f"rendered {len(paths)} frames", file=sys.stderr)
    return 0


def cmd_label(cfg: RunConfig, frames_dir: str, m_tau: float) -> int:
    in_dir = Path(frames_dir or cfg.out)
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = sorted(in_dir.glob("*.dogg"))
    if not paths:
        raise DogsegError(f"no .dogg frames found in {in_dir}")
    outputs = []
    for p in paths:
        grid = dio.read_dog(p)
        polys = autolabel_polygons(grid, m_tau=m_tau, occ_tau=cfg.occ_thresh)
        mask = autolabel_pipeline(grid, m_tau=m_tau, occ_tau=cfg.occ_thresh)
        mask_path = out_dir / (p.stem + ".auto.pgm")
        poly_path = out_dir / (p.stem + ".polygons.csv")
        dio.write_mask(mask_path, mask)
        write_polygons(poly_path, polys)
        outputs += [mask_path, poly_path]
    _write_manifest(out_dir, "label", cfg, paths, outputs)
    print(f"labeled {len(paths)} frames", file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# train / infer


def cmd_train(cfg: RunConfig, data_dir: str, augment: bool) -> int:
    root = Path(data_dir or cfg.out)
    index_path = root / "index.csv"
    if not index_path.exists():
        raise DogsegError(f"dataset index not found: {index_path}")
    index = DatasetIndex.load(index_path)
    train = [(g, m) for g, m, _ in _index_rows_to_frames(index, "train", root, 0)]
    val = [(g, m) for g, m, _ in _index_rows_to_frames(index, "val", root, 0)]
    est = FcnSegmenter(
        variant=cfg.variant, config_id=cfg.config_id, c1=cfg.c1, c2=cfg.c2,
        lr=cfg.lr, momentum=cfg.momentum, epochs=cfg.epochs,
        batch_size=cfg.batch_size, augment=augment, occ_thresh=cfg.occ_thresh,
        seed=cfg.seed,
    )
    t0 = time.perf_counter()
    est.fit([g for g, _ in train], [m for _, m in train],
            X_val=[g for g, _ in val] or None,
            y_val=[m for _, m in val] or None, verbose=True)
    elapsed = time.perf_counter() - t0
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    weights = out_dir / f"{est.model_id}.nnp"
    est.save(weights)
    log_path = out_dir / f"{est.model_id}.loss.csv"
    with open(log_path, "w", newline="") as fh:
        fh.write("epoch,lr,train_loss,val_loss\n")
        for row in est.history_:
            fh.write(f"{row['epoch']},{row['lr']!r},"
                     f"{row['train_loss']!r},{row['val_loss']!r}\n")
    _write_manifest(out_dir, "train", cfg, [index_path],
                    [weights, weights.with_suffix(".nnp.json"), log_path])
    print(f"trained {est.model_id} on {len(train)} frames "
          f"in {elapsed:.1f}s -> {weights}", file=sys.stderr)
    return 0


def cmd_infer(cfg: RunConfig, weights: str, frames_dir: str) -> int:
    weights_path = Path(weights)
    if not weights_path.exists():
        raise DogsegError(f"weights not found: {weights_path}")
    est = FcnSegmenter.load(weights_path)
    in_dir = Path(frames_dir or cfg.out)
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = sorted(in_dir.glob("*.dogg"))
    if not paths:
        raise DogsegError(f"no .dogg frames found in {in_dir}")
    outputs = []
    for p in paths:
        grid = dio.read_dog(p)
        mask = est.predict(grid)
        out = out_dir / (p.stem + f".{est.model_id}.pgm")
        dio.write_mask(out, mask)
        outputs.append(out)
    _write_manifest(out_dir, "infer", cfg, [weights_path, *paths], outputs)
    print(f"inferred {len(paths)} frames with {est.model_id}", file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# eval / bench


def cmd_eval(cfg: RunConfig, data_dir: str, weights: list[str]) -> int:
    root = Path(data_dir or cfg.out)
    index_path = root / "index.csv"
    if not index_path.exists():
        raise DogsegError(f"dataset index not found: {index_path}")
    index = DatasetIndex.load(index_path)
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    test_rows = list(_index_rows_to_frames(index, "test", root))
    if not test_rows:
        raise DogsegError("test split is empty")

    models = [MahalanobisBaseline()]
    for w in weights:
        path = Path(w)
        if not path.exists():
            raise DogsegError(f"weights not found for model: {path}")
        models.append(FcnSegmenter.load(path))

    outputs = []
    summary = []
    for model in models:
        curve = pooled_roc(model, [(g, m) for g, m, _ in test_rows],
                           occ_gate=cfg.occ_thresh)
        mid = model.model_id
        curve_csv = out_dir / f"roc_{mid}.csv"
        curve_svg = out_dir / f"roc_{mid}.svg"
        write_curve_csv(curve_csv, curve)
        write_curve_svg(curve_svg, curve, title=mid)
        outputs += [curve_csv, curve_svg]
        summary.append((mid, curve.accuracy_at_eer, curve.auc))

    summary_path = out_dir / "summary.csv"
    with open(summary_path, "w", newline="") as fh:
        fh.write("model_id,accuracy_at_eer,auc\n")
        for mid, acc, auc in summary:
            fh.write(f"{mid},{acc!r},{auc!r}\n")
    outputs.append(summary_path)

    # rotation sweep analog on the first un-rotated test frame
    first = next(iter(_index_rows_to_frames(index, "test", root, 0)))
    frame = LabeledFrame(grid=first[0], mask=first[1], frame_id=0)
    for model in models:
        rows = rotation_sweep(model, frame, occ_gate=cfg.occ_thresh)
        sweep_path = out_dir / f"sweep_{model.model_id}.csv"
        write_rows_csv(sweep_path, rows)
        outputs.append(sweep_path)

    _write_manifest(out_dir, "eval", cfg, [index_path, *weights], outputs)
    for mid, acc, auc in summary:
        print(f"{mid}: accuracy@EER {100 * acc:.1f}%  AUC {auc:.3f}",
              file=sys.stderr)
    return 0


def cmd_bench(cfg: RunConfig, frames_dir: str, repetitions: int) -> int:
    in_dir = Path(frames_dir or cfg.out)
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = sorted(in_dir.glob("*.dogg"))[:4]
    if not paths:
        raise DogsegError(f"no .dogg frames found in {in_dir}")
    grids = [dio.read_dog(p) for p in paths]
    outputs = []
    for variant in ("mini-8s", "mini-fast"):
        est = FcnSegmenter(variant=variant, config_id=cfg.config_id, seed=cfg.seed)
        hw = grids[0].height // 2 if VARIANTS[variant][4] else grids[0].height
        est.net_ = build_network(variant, seed=cfg.seed, input_hw=hw)
        stages = [
            ("encode", lambda g, e=est: (g, e._encode_one(g))),
            ("inference", lambda gx, e=est: (gx[0], net_infer(e.net_, gx[1]))),
            ("refine", lambda gsm, e=est: refine(
                gsm[1][1] if not e.net_.half_input
                else LabelMask(np.repeat(np.repeat(gsm[1][1].labels, 2, 0), 2, 1)),
                gsm[0], e.occ_thresh)),
        ]
        rows = bench(stages, grids, repetitions=repetitions)
        path = out_dir / f"bench_{variant}.csv"
        write_bench_csv(path, rows)
        outputs.append(path)
        stats = {r.stage: r.median_ms for r in rows}
        print(f"{variant}: encode {stats['encode']:.2f} ms, "
              f"inference {stats['inference']:.2f} ms, "
              f"refine {stats['refine']:.2f} ms (medians)", file=sys.stderr)
    _write_manifest(out_dir, "bench", cfg, paths, outputs)
    return 0


# ---------------------------------------------------------------------------
# Argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _add_common(sub):
    sub.add_argument("--config", help="key=value run configuration file")
    sub.add_argument("--out", help="output directory (default: runs)")
    sub.add_argument("--seed", type=int, help="run seed")
    sub.add_argument("--threads", type=int, default=1,
                     help="worker processes for per-frame stages (default 1)")
    sub.add_argument("--config-id", type=int, dest="config_id",
                     help="encoding configuration 1-5")
    sub.add_argument("--variant", help="network variant")
    sub.add_argument("--occ-thresh", type=float, dest="occ_thresh",
                     help="occupancy gate/refinement threshold")
    sub.add_argument("--c1", type=float, help="dynamic class weight")
    sub.add_argument("--lr", type=float, help="initial learning rate")
    sub.add_argument("--momentum", type=float, help="SGD momentum")
    sub.add_argument("--epochs", type=int, help="training epochs")
    sub.add_argument("--batch-size", type=int, dest="batch_size",
                     help="images per SGD step")


def _config_from_args(args) -> RunConfig:
    overrides = {
        name: getattr(args, name, None)
        for name in ("seed", "config_id", "variant", "occ_thresh", "c1",
                     "lr", "momentum", "epochs", "batch_size", "out")
    }
    if getattr(args, "scene", None):
        overrides["scene"] = args.scene
    return RunConfig.from_sources(args.config, overrides)


def build_parser() -> _Parser:
    parser = _Parser(prog="dogseg", description=__doc__.split("\n\n")[0])
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("simulate", help="generate a synthetic scene")
    p.add_argument("--scene", help="scene key=value file (default: built-in street)")
    p.add_argument("--corrupted", action="store_true",
                   help="enable clutter + aperture corruption")
    _add_common(p)

    p = subs.add_parser("encode", help="encode frames to 3-channel images")
    p.add_argument("--frames", help="directory of .dogg frames (default: --out)")
    p.add_argument("--ppm", action="store_true", help="also write PPM previews")
    _add_common(p)

    p = subs.add_parser("label", help="auto-label frames (cluster + hull)")
    p.add_argument("--frames", help="directory of .dogg frames (default: --out)")
    p.add_argument("--m-tau", type=float, default=1.0,
                   help="Mahalanobis candidate threshold (default 1.0)")
    _add_common(p)

    p = subs.add_parser("train", help="train a variant on the train split")
    p.add_argument("--data", help="dataset directory with index.csv (default: --out)")
    p.add_argument("--no-augment", action="store_true",
                   help="disable rotation augmentation")
    _add_common(p)

    p = subs.add_parser("infer", help="run a trained model over frames")
    p.add_argument("--weights", required=True, help="trained .nnp weights")
    p.add_argument("--frames", help="directory of .dogg frames (default: --out)")
    _add_common(p)

    p = subs.add_parser("eval", help="ROC/EER comparison on the test split")
    p.add_argument("--data", help="dataset directory with index.csv (default: --out)")
    p.add_argument("--weights", action="append", default=[],
                   help="trained model weights (repeatable)")
    _add_common(p)

    p = subs.add_parser("bench", help="stage timing for network variants")
    p.add_argument("--frames", help="directory of .dogg frames (default: --out)")
    p.add_argument("--repetitions", type=int, default=13,
                   help="timing repetitions incl. 3 warm-ups (default 13)")
    _add_common(p)

    p = subs.add_parser("render", help="write color PPM visualizations")
    p.add_argument("--frames", help="directory of .dogg frames (default: --out)")
    _add_common(p)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = _config_from_args(args)
        if args.command == "simulate":
            return cmd_simulate(cfg, args.corrupted)
        if args.command == "encode":
            return cmd_encode(cfg, args.frames, args.ppm, args.threads)
        if args.command == "label":
            return cmd_label(cfg, args.frames, args.m_tau)
        if args.command == "train":
            return cmd_train(cfg, args.data, not args.no_augment)
        if args.command == "infer":
            return cmd_infer(cfg, args.weights, args.frames)
        if args.command == "eval":
            return cmd_eval(cfg, args.data, args.weights)
        if args.command == "bench":
            return cmd_bench(cfg, args.frames, args.repetitions)
        if args.command == "render":
            return cmd_render(cfg, args.frames)
        parser.error(f"unknown command {args.command!r}")
    except DogsegError as exc:
        print(f"dogseg {args.command}: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"dogseg {args.command}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
