"""Bit-exact file formats for grids, masks, encodings, and model weights.

Formats (all multi-byte integers and floats little-endian):

* ``.dogg``  grid snapshot: magic ``DOGG``, u32 version=1, u32 width,
  u32 height, f32 cell_size, then one 24-byte record per cell in row-major
  order: f32 occ, vx, vy, var_x, var_y, cov_xy.
* ``.pgm``   binary PGM (P5), maxval 255: 0 = static, 255 = dynamic.
* ``.ppm``   binary PPM (P6): 8-bit renderings of encoded images.
* ``.encd``  raw encoded image: magic ``ENCD``, u32 version=1, u32 width,
  u32 height, u32 config_id, then three full-resolution f32 planes
  (channel-major, row-major within a plane) in the stored channel order.
* ``.nnp``   network weights: magic ``NNP1``, u32 tensor count, then per
  tensor: u16 name length, UTF-8 name, u8 rank, u32 dims, f32 payload.
  Tensor order is the network's deterministic layer order.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import FileFormatError, FileLengthError
from .grid import DogGrid, LabelMask

DOGG_MAGIC = b"DOGG"
ENCD_MAGIC = b"ENCD"
NNP_MAGIC = b"NNP1"
DOGG_VERSION = 1
ENCD_VERSION = 1

_CELL_BYTES = 24  # six f32 values


def _read_exact(data: bytes, offset: int, count: int, path, what: str) -> bytes:
    if offset + count > len(data):
        raise FileLengthError(
            f"{path}: truncated reading {what}: need {offset + count} bytes, "
            f"file has {len(data)}"
        )
    return data[offset : offset + count]


# ---------------------------------------------------------------------------
# DOGG grids


def write_dog(path, grid: DogGrid) -> None:
    """Write a grid to a ``.dogg`` file, validating invariants first."""
    grid.validate()
    header = DOGG_MAGIC + struct.pack(
        "<IIIf", DOGG_VERSION, grid.width, grid.height, np.float32(grid.cell_size)
    )
    cells = np.empty((grid.height, grid.width, 6), dtype="<f4")
    for k, name in enumerate(("occ", "vx", "vy", "var_x", "var_y", "cov_xy")):
        cells[:, :, k] = getattr(grid, name)
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(cells.tobytes())
    except OSError as exc:
        raise FileFormatError(f"cannot write grid to {path}: {exc}") from exc


def read_dog(path, frame_id: int = 0) -> DogGrid:
    """Read a ``.dogg`` file back into a validated :class:`DogGrid`.

    The format does not store a frame id; pass one (the command line tools
    derive it from the file name) or accept the default 0.
    """
    data = Path(path).read_bytes()
    magic = _read_exact(data, 0, 4, path, "magic")
    if magic != DOGG_MAGIC:
        raise FileFormatError(f"{path}: bad magic {magic!r}, expected {DOGG_MAGIC!r}")
    version, width, height = struct.unpack_from("<III", _read_exact(data, 4, 12, path, "header"))
    if version != DOGG_VERSION:
        raise FileFormatError(f"{path}: unsupported version {version}")
    (cell_size,) = struct.unpack_from("<f", _read_exact(data, 16, 4, path, "cell size"))
    expected = 20 + _CELL_BYTES * width * height
    if len(data) != expected:
        raise FileLengthError(
            f"{path}: expected {expected} bytes for {width}x{height} cells, "
            f"got {len(data)}"
        )
    cells = np.frombuffer(data, dtype="<f4", count=6 * width * height, offset=20)
    cells = cells.reshape(height, width, 6)
    return DogGrid(
        occ=cells[:, :, 0],
        vx=cells[:, :, 1],
        vy=cells[:, :, 2],
        var_x=cells[:, :, 3],
        var_y=cells[:, :, 4],
        cov_xy=cells[:, :, 5],
        cell_size=cell_size,
        frame_id=frame_id,
    )


# ---------------------------------------------------------------------------
# Netpbm masks and renderings


def write_mask(path, mask: LabelMask) -> None:
    """Write a label mask as binary PGM: 0 static, 255 dynamic."""
    h, w = mask.shape
    data = np.where(mask.labels, 255, 0).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def _parse_netpbm_header(data: bytes, path, magic: bytes, n_fields: int):
    """Parse a netpbm header, tolerating comments; return fields and offset."""
    if data[:2] != magic:
        raise FileFormatError(f"{path}: bad magic {data[:2]!r}, expected {magic!r}")
    fields = []
    pos = 2
    while len(fields) < n_fields:
        if pos >= len(data):
            raise FileLengthError(f"{path}: truncated header")
        ch = data[pos : pos + 1]
        if ch.isspace():
            pos += 1
        elif ch == b"#":
            nl = data.find(b"\n", pos)
            pos = len(data) if nl < 0 else nl + 1
        elif ch.isdigit():
            end = pos
            while end < len(data) and data[end : end + 1].isdigit():
                end += 1
            fields.append(int(data[pos:end]))
            pos = end
        else:
            raise FileFormatError(f"{path}: unexpected byte {ch!r} in header")
    return fields, pos + 1  # single whitespace after maxval


def read_mask(path) -> LabelMask:
    """Read a PGM mask; only values 0 and 255 are legal."""
    data = Path(path).read_bytes()
    (w, h, maxval), offset = _parse_netpbm_header(data, path, b"P5", 3)
    if maxval != 255:
        raise FileFormatError(f"{path}: maxval must be 255, got {maxval}")
    raw = _read_exact(data, offset, w * h, path, "pixel data")
    pixels = np.frombuffer(raw, dtype=np.uint8).reshape(h, w)
    legal = (pixels == 0) | (pixels == 255)
    if not legal.all():
        bad = pixels.reshape(-1)[np.flatnonzero(~legal.reshape(-1))[0]]
        raise FileFormatError(
            f"{path}: illegal mask value {int(bad)} (only 0 and 255 allowed)"
        )
    return LabelMask(pixels == 255)


def write_ppm(path, rgb: np.ndarray) -> None:
    """Write an ``(H, W, 3)`` uint8 array as binary PPM."""
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3 or rgb.dtype != np.uint8:
        raise FileFormatError(
            f"PPM payload must be (H, W, 3) uint8, got {rgb.shape} {rgb.dtype}"
        )
    h, w = rgb.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(rgb.tobytes())


def read_ppm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    (w, h, maxval), offset = _parse_netpbm_header(data, path, b"P6", 3)
    if maxval != 255:
        raise FileFormatError(f"{path}: maxval must be 255, got {maxval}")
    raw = _read_exact(data, offset, w * h * 3, path, "pixel data")
    return np.frombuffer(raw, dtype=np.uint8).reshape(h, w, 3).copy()


# ---------------------------------------------------------------------------
# Raw encoded images


def write_encd(path, channels: np.ndarray, config_id: int) -> None:
    """Write a 3-channel float32 encoding as a raw ``ENCD`` file."""
    channels = np.asarray(channels, dtype=np.float32)
    if channels.ndim != 3 or channels.shape[0] != 3:
        raise FileFormatError(
            f"encoding must be (3, H, W), got shape {channels.shape}"
        )
    h, w = channels.shape[1:]
    with open(path, "wb") as fh:
        fh.write(ENCD_MAGIC)
        fh.write(struct.pack("<IIII", ENCD_VERSION, w, h, int(config_id)))
        fh.write(channels.astype("<f4").tobytes())


def read_encd(path) -> tuple[np.ndarray, int]:
    """Read an ``ENCD`` file; returns ``(channels (3, H, W) f32, config_id)``."""
    data = Path(path).read_bytes()
    magic = _read_exact(data, 0, 4, path, "magic")
    if magic != ENCD_MAGIC:
        raise FileFormatError(f"{path}: bad magic {magic!r}, expected {ENCD_MAGIC!r}")
    version, w, h, config_id = struct.unpack_from(
        "<IIII", _read_exact(data, 4, 16, path, "header")
    )
    if version != ENCD_VERSION:
        raise FileFormatError(f"{path}: unsupported version {version}")
    expected = 20 + 4 * 3 * w * h
    if len(data) != expected:
        raise FileLengthError(
            f"{path}: expected {expected} bytes for 3x{h}x{w} planes, got {len(data)}"
        )
    channels = np.frombuffer(data, dtype="<f4", count=3 * h * w, offset=20)
    return channels.reshape(3, h, w).copy(), config_id


# ---------------------------------------------------------------------------
# Network weights


def write_params(path, named_tensors: list[tuple[str, np.ndarray]]) -> None:
    """Write named float tensors in the given (deterministic) order."""
    with open(path, "wb") as fh:
        fh.write(NNP_MAGIC)
        fh.write(struct.pack("<I", len(named_tensors)))
        for name, tensor in named_tensors:
            encoded = name.encode("utf-8")
            arr = np.ascontiguousarray(tensor, dtype="<f4")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())


def read_params(path) -> list[tuple[str, np.ndarray]]:
    """Read tensors written by :func:`write_params`, preserving order."""
    data = Path(path).read_bytes()
    magic = _read_exact(data, 0, 4, path, "magic")
    if magic != NNP_MAGIC:
        raise FileFormatError(f"{path}: bad magic {magic!r}, expected {NNP_MAGIC!r}")
    (count,) = struct.unpack_from("<I", _read_exact(data, 4, 4, path, "tensor count"))
    offset = 8
    out: list[tuple[str, np.ndarray]] = []
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", _read_exact(data, offset, 2, path, "name length"))
        offset += 2
        name = _read_exact(data, offset, name_len, path, "name").decode("utf-8")
        offset += name_len
        (rank,) = struct.unpack_from("<B", _read_exact(data, offset, 1, path, "rank"))
        offset += 1
        shape = struct.unpack_from(
            f"<{rank}I", _read_exact(data, offset, 4 * rank, path, "shape")
        )
        offset += 4 * rank
        n = int(np.prod(shape, dtype=np.int64)) if rank else 1
        raw = _read_exact(data, offset, 4 * n, path, f"payload of {name}")
        offset += 4 * n
        out.append((name, np.frombuffer(raw, dtype="<f4").reshape(shape).copy()))
    if offset != len(data):
        raise FileLengthError(
            f"{path}: {len(data) - offset} trailing bytes after {count} tensors"
        )
    return out
