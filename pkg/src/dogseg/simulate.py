"""Seeded synthetic scene generator for dynamic occupancy grids.

Produces short sequences of ego-centered grids with exact ground-truth
dynamic masks.  Each frame is built the same way:

1. rasterize static shapes and the moving boxes at their current pose;
2. ray-cast visibility from the ego at the grid center: unobstructed
   in-range cells become freespace, obstacle cells in range are measured
   occupied, everything else stays unknown;
3. draw per-cell statistics (occupancy, mean velocity, covariance) for
   the measured cells;
4. optionally corrupt thin static structures with spurious tangential
   velocities and inject clutter into unknown regions;
5. the mask marks exactly the moving-box footprints.

Determinism: a fixed (spec, seed) pair yields a bit-identical sequence.
Each frame draws from its own child generator, so frames could be built
in parallel without changing the output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridValidationError, SceneGenerationError
from .grid import DogGrid, LabelMask

#: tangential aperture speed is drawn from U(0, APERTURE_MAX_SPEED * scale)
APERTURE_MAX_SPEED = 8.0
#: variance along the corrupted tangent: floor + coupling * speed^2
APERTURE_VAR_FLOOR = 16.0
APERTURE_VAR_COUPLING = 0.5
#: isotropic clutter variance floor, m^2/s^2 (scaled by clutter_var_scale)
CLUTTER_VAR_FLOOR = 25.0
#: normalized speed |v|/sqrt(var) band the clutter variance is solved
#: from; drawn comonotone with the clump speed so fast phantoms are also
#: the uncertain ones
CLUTTER_NORM_SPEED_RANGE = (1.3, 3.4)
CLUTTER_NORM_JITTER = 0.08
#: clutter clump speed range, m/s, plus per-cell jitter per component
CLUTTER_SPEED_RANGE = (6.5, 18.0)
CLUTTER_VEL_JITTER = 0.5
#: clutter occupancy range (inside the 0.6 refinement gate, overlapping
#: the measured-obstacle range so occupancy alone cannot flag a phantom)
CLUTTER_OCC_RANGE = (0.85, 0.9)
#: true-mover per-cell variance: U(range) + coupling * |v|^2
MOVER_VAR_RANGE = (0.2, 0.8)
MOVER_VAR_COUPLING = 0.08
#: measured static cells: velocity noise factor and variance range
STATIC_NOISE_FACTOR = 0.4
STATIC_VAR_RANGE = (0.2, 0.5)


@dataclass(frozen=True)
class MovingBox:
    """Axis-aligned box translating at constant velocity.

    Coordinates are meters in the ego frame: x to the right (columns),
    y upward (rows decrease), origin at the grid center.
    """

    center: tuple[float, float]
    extent: tuple[float, float]
    velocity: tuple[float, float]

    def center_at(self, t_sec: float) -> tuple[float, float]:
        return (
            self.center[0] + self.velocity[0] * t_sec,
            self.center[1] + self.velocity[1] * t_sec,
        )


@dataclass(frozen=True)
class StaticShape:
    """Thin polyline structure (wall, corner, curb).

    ``blocks`` controls whether the shape occludes the ray cast; low
    curbs are measured but do not shadow what lies behind them.
    """

    kind: str
    points: tuple[tuple[float, float], ...]
    thickness: float = 0.25
    blocks: bool = True

    def __post_init__(self):
        if len(self.points) < 2:
            raise GridValidationError(
                f"static shape needs at least 2 points, got {len(self.points)}"
            )
        if self.thickness <= 0:
            raise GridValidationError(f"thickness must be > 0, got {self.thickness}")

    def segments(self):
        return list(zip(self.points[:-1], self.points[1:]))


@dataclass(frozen=True)
class SceneSpec:
    """Full description of a synthetic scene."""

    height: int = 128
    width: int = 128
    cell_size: float = 0.25
    max_range: float = 15.0
    movers: tuple[MovingBox, ...] = ()
    shapes: tuple[StaticShape, ...] = ()
    clutter_density: float = 0.0
    occ_noise_sigma: float = 0.02
    vel_noise_sigma: float = 0.5
    clutter_var_scale: float = 1.0
    aperture_scale: float = 0.0
    frames: int = 1
    dt: float = 0.1
    seed: int = 0

    def validate(self) -> None:
        if self.height <= 0 or self.width <= 0 or self.height % 2 or self.width % 2:
            raise GridValidationError(
                f"grid dims must be positive and even, got {self.height}x{self.width}"
            )
        if self.cell_size <= 0:
            raise GridValidationError(f"cell_size must be > 0, got {self.cell_size}")
        if self.max_range <= 0:
            raise GridValidationError(f"max_range must be > 0, got {self.max_range}")
        if not 0.0 <= self.clutter_density <= 1.0:
            raise GridValidationError(
                f"clutter_density must be in [0, 1], got {self.clutter_density}"
            )
        for name in ("occ_noise_sigma", "vel_noise_sigma", "clutter_var_scale",
                     "aperture_scale"):
            if getattr(self, name) < 0:
                raise GridValidationError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.frames < 1:
            raise GridValidationError(f"frames must be >= 1, got {self.frames}")
        if self.dt <= 0:
            raise GridValidationError(f"dt must be > 0, got {self.dt}")


@dataclass(frozen=True)
class LabeledFrame:
    grid: DogGrid
    mask: LabelMask
    frame_id: int = 0


# ---------------------------------------------------------------------------
# Geometry helpers (ego frame <-> cell indices)


def cell_center_coords(height, width, cell_size):
    """Per-cell center coordinates: (xs, ys), each (H, W), meters."""
    xs = (np.arange(width) + 0.5 - width / 2.0) * cell_size
    ys = (height / 2.0 - np.arange(height) - 0.5) * cell_size
    return np.broadcast_to(xs, (height, width)).copy(), np.broadcast_to(
        ys[:, None], (height, width)
    ).copy()


def _box_footprint(xs, ys, center, extent) -> np.ndarray:
    return (np.abs(xs - center[0]) <= extent[0] / 2.0) & (
        np.abs(ys - center[1]) <= extent[1] / 2.0
    )


def _shape_footprint(xs, ys, shape: StaticShape):
    """Boolean footprint and per-cell tangent angle of a polyline shape."""
    mask = np.zeros(xs.shape, dtype=bool)
    tangent = np.zeros(xs.shape, dtype=np.float64)
    radius = shape.thickness / 2.0
    for (ax, ay), (bx, by) in shape.segments():
        dx, dy = bx - ax, by - ay
        norm2 = dx * dx + dy * dy
        if norm2 == 0.0:
            continue
        t = np.clip(((xs - ax) * dx + (ys - ay) * dy) / norm2, 0.0, 1.0)
        dist = np.hypot(xs - (ax + t * dx), ys - (ay + t * dy))
        seg = dist <= radius
        mask |= seg
        tangent[seg] = np.arctan2(dy, dx)
    return mask, tangent


def _blocked_map(obstacles, xs, ys, dist, cell_size, max_range):
    """Cells whose line of sight to the ego crosses a blocking obstacle."""
    h, w = obstacles.shape
    n = max(2, int(np.ceil(max_range / (0.5 * cell_size))))
    # stop sampling short of the target cell so it never blocks itself
    margin = 0.75 * cell_size
    length = np.maximum(dist - margin, 0.0) / np.maximum(dist, 1e-12)
    frac = np.linspace(0.0, 1.0, n)
    sx = xs[..., None] * (length[..., None] * frac)
    sy = ys[..., None] * (length[..., None] * frac)
    col = np.clip(((sx / cell_size) + w / 2.0).astype(np.int64), 0, w - 1)
    row = np.clip(((h / 2.0) - (sy / cell_size)).astype(np.int64), 0, h - 1)
    return obstacles[row, col].any(axis=-1)


# ---------------------------------------------------------------------------
# Corruption operators


def apply_aperture_corruption(grid: DogGrid, walls, scale: float, rng) -> DogGrid:
    """Give occupied cells of thin structures spurious tangential motion.

    Each corrupted cell gets mean velocity along its structure's tangent
    with magnitude U(0, 8*scale) and random sign, variance along the
    tangent of ``16*scale^2 + speed^2/2`` (uncertainty grows with the
    spurious speed), and a small variance across it.  Ground truth is
    unaffected: these cells remain static.
    """
    if scale < 0:
        raise GridValidationError(f"scale must be >= 0, got {scale}")
    if scale == 0.0 or not walls:
        return grid
    xs, ys = cell_center_coords(grid.height, grid.width, grid.cell_size)
    occ, vx, vy, var_x, var_y, cov_xy = (p.astype(np.float64) for p in grid.planes())
    for shape in walls:
        mask, tangent = _shape_footprint(xs, ys, shape)
        mask &= occ > 0.6
        k = int(mask.sum())
        if k == 0:
            continue
        speed = rng.uniform(0.0, APERTURE_MAX_SPEED * scale, k)
        sign = rng.integers(0, 2, k) * 2.0 - 1.0
        var_t = APERTURE_VAR_FLOOR * scale**2 + APERTURE_VAR_COUPLING * speed**2
        var_n = rng.uniform(0.2, 0.5, k)
        c = np.cos(tangent[mask])
        s = np.sin(tangent[mask])
        vx[mask] = sign * speed * c
        vy[mask] = sign * speed * s
        var_x[mask] = c**2 * var_t + s**2 * var_n
        var_y[mask] = s**2 * var_t + c**2 * var_n
        cov_xy[mask] = c * s * (var_t - var_n)
    return DogGrid(occ, vx, vy, var_x, var_y, cov_xy,
                   cell_size=grid.cell_size, frame_id=grid.frame_id)


def _clutter_clumps(unknown, target: int, rng) -> list[list[int]]:
    """Pick clumps of 4 to 12 adjacent unknown cells totalling ``target``.

    A clump can come out smaller when it runs out of adjacent unknown
    cells or when the remaining cell budget is below the drawn size.
    """
    h, w = unknown.shape
    remaining = unknown.copy()
    clumps = []
    total = 0
    while total < target and remaining.any():
        flat = np.flatnonzero(remaining)
        clump = [int(flat[rng.integers(flat.size)])]
        remaining.flat[clump[0]] = False
        size = min(int(rng.integers(4, 13)), target - total)
        while len(clump) < size:
            cand = set()
            for idx in clump:
                r, c = divmod(idx, w)
                for rr, cc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
                    if 0 <= rr < h and 0 <= cc < w and remaining[rr, cc]:
                        cand.add(rr * w + cc)
            if not cand:
                break
            pick = sorted(cand)[rng.integers(len(cand))]
            remaining.flat[pick] = False
            clump.append(pick)
        clumps.append(clump)
        total += len(clump)
    return clumps


def inject_clutter(grid: DogGrid, density: float, rng,
                   var_scale: float = 1.0) -> DogGrid:
    """Turn a random subset of unknown cells into phantom obstacle clumps.

    Clutter arrives in clumps of 4 to 12 adjacent cells (pedestrian- to
    bicycle-sized footprints) with occupancy U(0.85, 0.9) and a shared
    fast mean velocity (direction U(0, 2pi), speed U(6.5, 18), small
    uniform per-cell jitter), mimicking a coherent phantom object the
    particle filter hallucinated in unobserved space.  The isotropic
    variance is solved from a target normalized speed |v|/sqrt(var)
    spanning the mover band and is clamped to a floor of 25 (both
    scaled by ``var_scale``); it grows comonotone with the clump speed,
    so the faster the phantom, the less certain its velocity, and
    clutter normalized speed stays stochastically below the mover
    population's.  Ground truth is unaffected: clutter is static.
    """
    if not 0.0 <= density <= 1.0:
        raise GridValidationError(f"density must be in [0, 1], got {density}")
    occ, vx, vy, var_x, var_y, cov_xy = (p.astype(np.float64) for p in grid.planes())
    unknown = occ == 0.5
    target = int(round(density * int(unknown.sum())))
    if target == 0:
        return grid
    speed_lo, speed_hi = CLUTTER_SPEED_RANGE
    z_lo, z_hi = CLUTTER_NORM_SPEED_RANGE
    for clump in _clutter_clumps(unknown, target, rng):
        idx = np.array(clump, dtype=np.int64)
        k = idx.size
        u = rng.uniform()
        speed = speed_lo + u * (speed_hi - speed_lo)
        angle = rng.uniform(0.0, 2.0 * np.pi)
        jitter = rng.uniform(-CLUTTER_VEL_JITTER, CLUTTER_VEL_JITTER, (2, k))
        u_cell = np.clip(
            u + rng.uniform(-CLUTTER_NORM_JITTER, CLUTTER_NORM_JITTER, k), 0.0, 1.0
        )
        z = z_lo + u_cell * (z_hi - z_lo)
        var = np.maximum((speed / z) ** 2, CLUTTER_VAR_FLOOR) * var_scale
        occ.flat[idx] = rng.uniform(*CLUTTER_OCC_RANGE, k)
        vx.flat[idx] = speed * np.cos(angle) + jitter[0]
        vy.flat[idx] = speed * np.sin(angle) + jitter[1]
        var_x.flat[idx] = var
        var_y.flat[idx] = var
        cov_xy.flat[idx] = 0.0
    return DogGrid(occ, vx, vy, var_x, var_y, cov_xy,
                   cell_size=grid.cell_size, frame_id=grid.frame_id)


# ---------------------------------------------------------------------------
# Frame assembly


def _make_frame(spec: SceneSpec, k: int, rng,
                static_mask, blockers, xs, ys, dist) -> LabeledFrame:
    t = k * spec.dt
    h, w = spec.height, spec.width

    mover_masks = [
        _box_footprint(xs, ys, box.center_at(t), box.extent) for box in spec.movers
    ]
    for i in range(len(mover_masks)):
        for j in range(i + 1, len(mover_masks)):
            if (mover_masks[i] & mover_masks[j]).any():
                raise SceneGenerationError(
                    f"moving boxes {i} and {j} overlap at frame {k}: "
                    "ground truth would be ambiguous"
                )
    dynamic = np.zeros((h, w), dtype=bool)
    for m in mover_masks:
        dynamic |= m

    static = static_mask & ~dynamic
    obstacles = static_mask | dynamic
    in_range = dist <= spec.max_range
    blocked = _blocked_map(blockers, xs, ys, dist, spec.cell_size, spec.max_range)

    measured_obst = obstacles & in_range
    free = in_range & ~obstacles & ~blocked
    measured = free | measured_obst

    occ = np.full((h, w), 0.5, dtype=np.float64)
    occ[free] = rng.uniform(0.05, 0.2, int(free.sum()))
    occ[measured_obst] = rng.uniform(0.85, 1.0, int(measured_obst.sum()))
    if spec.occ_noise_sigma > 0:
        occ[measured] += rng.normal(0.0, spec.occ_noise_sigma, int(measured.sum()))
        occ = np.clip(occ, 0.0, 1.0)

    vx = np.zeros((h, w), dtype=np.float64)
    vy = np.zeros_like(vx)
    var_x = np.zeros_like(vx)
    var_y = np.zeros_like(vx)
    cov_xy = np.zeros_like(vx)

    stat_meas = static & in_range
    ns = int(stat_meas.sum())
    sigma_s = STATIC_NOISE_FACTOR * spec.vel_noise_sigma
    vx[stat_meas] = rng.normal(0.0, sigma_s, ns) if sigma_s > 0 else 0.0
    vy[stat_meas] = rng.normal(0.0, sigma_s, ns) if sigma_s > 0 else 0.0
    var_x[stat_meas] = rng.uniform(*STATIC_VAR_RANGE, ns)
    var_y[stat_meas] = rng.uniform(*STATIC_VAR_RANGE, ns)

    for box, m in zip(spec.movers, mover_masks):
        cells = m & in_range
        nm = int(cells.sum())
        if nm == 0:
            continue
        speed2 = box.velocity[0] ** 2 + box.velocity[1] ** 2
        for plane, v in ((vx, box.velocity[0]), (vy, box.velocity[1])):
            noise = rng.normal(0.0, spec.vel_noise_sigma, nm) if spec.vel_noise_sigma > 0 else 0.0
            plane[cells] = v + noise
        var = rng.uniform(*MOVER_VAR_RANGE, nm) + MOVER_VAR_COUPLING * speed2
        var_x[cells] = var
        var_y[cells] = rng.uniform(*MOVER_VAR_RANGE, nm) + MOVER_VAR_COUPLING * speed2

    grid = DogGrid(occ, vx, vy, var_x, var_y, cov_xy,
                   cell_size=spec.cell_size, frame_id=k)
    if spec.aperture_scale > 0 and spec.shapes:
        grid = apply_aperture_corruption(grid, spec.shapes, spec.aperture_scale, rng)
    if spec.clutter_density > 0:
        grid = inject_clutter(grid, spec.clutter_density, rng, spec.clutter_var_scale)
    return LabeledFrame(grid=grid, mask=LabelMask(dynamic), frame_id=k)


def generate_scene(spec: SceneSpec, seed: int | None = None) -> list[LabeledFrame]:
    """Generate the full frame sequence for a scene.

    ``seed`` overrides ``spec.seed``.  Deterministic: the same (spec,
    seed) always yields bit-identical frames.  Raises
    SceneGenerationError if two moving boxes ever overlap.
    """
    spec.validate()
    root = np.random.SeedSequence(spec.seed if seed is None else seed)
    children = root.spawn(spec.frames)
    xs, ys = cell_center_coords(spec.height, spec.width, spec.cell_size)
    dist = np.hypot(xs, ys)
    static_mask = np.zeros((spec.height, spec.width), dtype=bool)
    blockers = np.zeros((spec.height, spec.width), dtype=bool)
    for shape in spec.shapes:
        smask, _ = _shape_footprint(xs, ys, shape)
        static_mask |= smask
        if shape.blocks:
            blockers |= smask
    return [
        _make_frame(spec, k, np.random.default_rng(children[k]),
                    static_mask, blockers, xs, ys, dist)
        for k in range(spec.frames)
    ]


# ---------------------------------------------------------------------------
# Default scene and plain-text configuration


def default_scene_spec(corrupted: bool = False, frames: int = 32,
                       seed: int = 7) -> SceneSpec:
    """Street-like default: two walls, an L-corner, a curb, six movers.

    One box-van, two bicycles, and three pedestrians on disjoint lanes,
    all inside sensor range for the whole sequence.  ``corrupted``
    switches on clutter injection and aperture corruption.
    """
    movers = (
        MovingBox((-11.0, 3.0), (2.25, 1.0), (6.0, 0.0)),
        MovingBox((-10.0, -4.0), (1.5, 0.5), (4.0, 0.0)),
        MovingBox((9.0, -5.5), (1.5, 0.5), (-4.0, 0.0)),
        MovingBox((-2.0, 8.0), (0.5, 0.5), (1.5, 0.0)),
        MovingBox((7.0, 5.0), (0.5, 0.5), (-1.5, 0.0)),
        MovingBox((1.0, -7.0), (0.5, 0.5), (0.0, 1.5)),
    )
    shapes = (
        StaticShape("wall", ((-13.875, 11.125), (13.875, 11.125))),
        StaticShape("wall", ((-13.125, -9.875), (-13.125, 7.875))),
        StaticShape("corner", ((6.875, -8.125), (11.125, -8.125), (11.125, -3.125))),
        StaticShape("curb", ((-7.875, -1.625), (9.875, -1.625)), blocks=False),
    )
    return SceneSpec(
        movers=movers,
        shapes=shapes,
        clutter_density=0.05 if corrupted else 0.0,
        aperture_scale=1.0 if corrupted else 0.0,
        frames=frames,
        seed=seed,
    )


_SCALAR_FIELDS = {
    "height": int, "width": int, "cell_size": float, "max_range": float,
    "clutter_density": float, "occ_noise_sigma": float, "vel_noise_sigma": float,
    "clutter_var_scale": float, "aperture_scale": float, "frames": int,
    "dt": float, "seed": int,
}


def parse_scene_config(text: str) -> SceneSpec:
    """Build a SceneSpec from key=value lines.

    Scalars use their field names.  Repeatable lines:
    ``mover=cx,cy,ex,ey,vx,vy`` and
    ``shape=kind;thickness;blocks;x1,y1;x2,y2[;...]``.
    ``#`` starts a comment; blank lines are ignored.
    """
    scalars = {}
    movers = []
    shapes = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise GridValidationError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        try:
            if key == "mover":
                nums = [float(v) for v in value.split(",")]
                if len(nums) != 6:
                    raise ValueError(f"expected 6 numbers, got {len(nums)}")
                movers.append(MovingBox(tuple(nums[0:2]), tuple(nums[2:4]), tuple(nums[4:6])))
            elif key == "shape":
                parts = value.split(";")
                if len(parts) < 5:
                    raise ValueError("expected kind;thickness;blocks;x1,y1;x2,y2[;...]")
                pts = tuple(
                    tuple(float(v) for v in p.split(",")) for p in parts[3:]
                )
                if any(len(p) != 2 for p in pts):
                    raise ValueError("each point must be x,y")
                shapes.append(StaticShape(parts[0], pts, float(parts[1]),
                                          bool(int(parts[2]))))
            elif key in _SCALAR_FIELDS:
                scalars[key] = _SCALAR_FIELDS[key](value)
            else:
                raise ValueError(f"unknown key {key!r}")
        except (ValueError, GridValidationError) as exc:
            raise GridValidationError(f"line {lineno}: {exc}") from exc
    spec = SceneSpec(movers=tuple(movers), shapes=tuple(shapes), **scalars)
    spec.validate()
    return spec


def format_scene_config(spec: SceneSpec) -> str:
    """Inverse of parse_scene_config (round-trips exactly)."""
    lines = [f"{name}={getattr(spec, name)}" for name in _SCALAR_FIELDS]
    for box in spec.movers:
        vals = (*box.center, *box.extent, *box.velocity)
        lines.append("mover=" + ",".join(repr(float(v)) for v in vals))
    for shape in spec.shapes:
        pts = ";".join(f"{x!r},{y!r}" for x, y in shape.points)
        lines.append(f"shape={shape.kind};{shape.thickness!r};{int(shape.blocks)};{pts}")
    return "\n".join(lines) + "\n"
