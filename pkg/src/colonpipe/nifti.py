"""Single-file NIfTI-1 reading and writing.

Only the parts of the format the pipeline needs: 348-byte headers, scalar
volumes, optional gzip compression (detected by content, not filename), and
axis-aligned orientation handling. On read, arrays are reoriented into the
canonical layout (axis 0 left-to-right, axis 1 anterior-to-posterior, axis 2
inferior-to-superior) using the sform when present, the qform otherwise.
Files carrying neither raise MissingOrientation rather than guessing.
"""
from __future__ import annotations

import gzip
import struct
from pathlib import Path

import numpy as np

from .errors import (
    MissingOrientation,
    UnreadableFile,
    UnsupportedFormat,
    UnwritablePath,
)
from .volume import LabelMap, Volume

_HDR_SIZE = 348
_VOX_OFFSET = 352
_GZIP_MAGIC = b"\x1f\x8b"

# NIfTI datatype code -> numpy dtype
_DTYPES = {
    2: np.uint8,
    4: np.int16,
    8: np.int32,
    16: np.float32,
    64: np.float64,
    256: np.int8,
    512: np.uint16,
    768: np.uint32,
}
_DTYPE_CODES = {np.dtype(v): k for k, v in _DTYPES.items()}

# Desired world-direction sign for each canonical array axis, in RAS+
# coordinates: axis 0 grows rightward (+x), axis 1 grows posterior (-y),
# axis 2 grows superior (+z).
_TARGET_SIGNS = (1.0, -1.0, 1.0)


def _read_bytes(path: Path) -> bytes:
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise UnreadableFile(f"cannot read {path}: {exc}") from exc
    if raw[:2] == _GZIP_MAGIC:
        try:
            raw = gzip.decompress(raw)
        except (OSError, EOFError) as exc:
            raise UnreadableFile(f"corrupt gzip stream in {path}: {exc}") from exc
    return raw


def _quaternion_rotation(b: float, c: float, d: float) -> np.ndarray:
    a2 = 1.0 - (b * b + c * c + d * d)
    a = float(np.sqrt(a2)) if a2 > 0 else 0.0
    return np.array(
        [
            [a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c)],
            [2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b)],
            [2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - b * b - c * c],
        ]
    )


def _canonicalize(arr: np.ndarray, direction: np.ndarray) -> tuple[np.ndarray, tuple[float, float, float]]:
    """Permute/flip ``arr`` so each axis runs along its canonical direction.

    ``direction`` is the 3x3 block of the voxel-to-world affine: column j is
    the world step taken per index step along array axis j.
    """
    norms = np.linalg.norm(direction, axis=0)
    if np.any(norms == 0):
        raise MissingOrientation("affine has a zero-length axis")
    dominant = [int(np.argmax(np.abs(direction[:, j]))) for j in range(3)]
    if sorted(dominant) != [0, 1, 2]:
        raise UnsupportedFormat(
            "orientation is too oblique to align with the image axes"
        )
    perm = [dominant.index(world_axis) for world_axis in range(3)]
    arr = np.transpose(arr, perm)
    spacing = []
    for canonical_axis, voxel_axis in enumerate(perm):
        spacing.append(float(norms[voxel_axis]))
        sign = np.sign(direction[canonical_axis, voxel_axis])
        if sign != _TARGET_SIGNS[canonical_axis]:
            arr = np.flip(arr, axis=canonical_axis)
    return np.ascontiguousarray(arr), tuple(spacing)


def read_array(path: str | Path) -> tuple[np.ndarray, tuple[float, float, float]]:
    """Read a NIfTI-1 file into a canonically oriented array plus mm spacing."""
    path = Path(path)
    raw = _read_bytes(path)
    if len(raw) < _VOX_OFFSET:
        raise UnreadableFile(f"{path}: file shorter than a NIfTI-1 header")

    (sizeof_hdr,) = struct.unpack_from("<i", raw, 0)
    if sizeof_hdr == _HDR_SIZE:
        end = "<"
    elif struct.unpack_from(">i", raw, 0)[0] == _HDR_SIZE:
        end = ">"
    else:
        raise UnsupportedFormat(f"{path}: not a NIfTI-1 file (bad header size)")

    magic = raw[344:348]
    if magic == b"ni1\x00":
        raise UnsupportedFormat(f"{path}: two-file NIfTI pairs are not supported")
    if magic != b"n+1\x00":
        raise UnsupportedFormat(f"{path}: bad magic {magic!r}")

    dim = struct.unpack_from(f"{end}8h", raw, 40)
    ndim = dim[0]
    if ndim < 3:
        raise UnsupportedFormat(f"{path}: need a 3-D image, header says {ndim}-D")
    if any(d > 1 for d in dim[4 : 1 + ndim]):
        raise UnsupportedFormat(f"{path}: multi-volume files are not supported")
    nx, ny, nz = dim[1], dim[2], dim[3]
    if nx <= 0 or ny <= 0 or nz <= 0:
        raise UnreadableFile(f"{path}: non-positive dimensions {dim[1:4]}")

    (datatype,) = struct.unpack_from(f"{end}h", raw, 70)
    if datatype not in _DTYPES:
        raise UnsupportedFormat(f"{path}: unsupported datatype code {datatype}")
    dtype = np.dtype(_DTYPES[datatype]).newbyteorder(end)

    pixdim = struct.unpack_from(f"{end}8f", raw, 76)
    (vox_offset,) = struct.unpack_from(f"{end}f", raw, 108)
    scl_slope, scl_inter = struct.unpack_from(f"{end}2f", raw, 112)
    qform_code, sform_code = struct.unpack_from(f"{end}2h", raw, 252)

    offset = int(vox_offset) if vox_offset >= _VOX_OFFSET else _VOX_OFFSET
    count = nx * ny * nz
    nbytes = count * dtype.itemsize
    if len(raw) < offset + nbytes:
        raise UnreadableFile(f"{path}: data truncated "
                             f"(need {offset + nbytes} bytes, have {len(raw)})")
    flat = np.frombuffer(raw, dtype=dtype, count=count, offset=offset)
    arr = flat.reshape((nx, ny, nz), order="F")
    if end == ">":
        arr = arr.astype(arr.dtype.newbyteorder("<"))

    if scl_slope not in (0.0, 1.0) or (scl_slope == 1.0 and scl_inter != 0.0):
        arr = arr * scl_slope + scl_inter

    if sform_code > 0:
        rows = [struct.unpack_from(f"{end}4f", raw, 280 + 16 * r) for r in range(3)]
        direction = np.array(rows, dtype=np.float64)[:, :3]
    elif qform_code > 0:
        b, c, d = struct.unpack_from(f"{end}3f", raw, 256)
        rot = _quaternion_rotation(b, c, d)
        qfac = -1.0 if pixdim[0] < 0 else 1.0
        scales = np.array([pixdim[1], pixdim[2], pixdim[3] * qfac])
        direction = rot * scales[np.newaxis, :]
    else:
        raise MissingOrientation(f"{path}: neither sform nor qform is set")

    return _canonicalize(arr, direction)


def read_volume(path: str | Path) -> Volume:
    arr, spacing = read_array(path)
    if not np.issubdtype(arr.dtype, np.integer):
        arr = np.rint(arr)
    arr = np.clip(arr, np.iinfo(np.int16).min, np.iinfo(np.int16).max)
    return Volume(arr.astype(np.int16), spacing)


def read_labels(path: str | Path) -> LabelMap:
    arr, spacing = read_array(path)
    if not np.issubdtype(arr.dtype, np.integer):
        arr = np.rint(arr).astype(np.int64)
    return LabelMap(arr, spacing)


def _build_header(shape: tuple[int, int, int], spacing: tuple[float, float, float],
                  dtype: np.dtype) -> bytes:
    hdr = bytearray(_HDR_SIZE)
    struct.pack_into("<i", hdr, 0, _HDR_SIZE)
    struct.pack_into("<8h", hdr, 40, 3, shape[0], shape[1], shape[2], 1, 1, 1, 1)
    struct.pack_into("<h", hdr, 70, _DTYPE_CODES[dtype])
    struct.pack_into("<h", hdr, 72, dtype.itemsize * 8)
    sx, sy, sz = spacing
    struct.pack_into("<8f", hdr, 76, 1.0, sx, sy, sz, 0.0, 0.0, 0.0, 0.0)
    struct.pack_into("<f", hdr, 108, float(_VOX_OFFSET))
    struct.pack_into("<2f", hdr, 112, 1.0, 0.0)  # scl_slope, scl_inter
    struct.pack_into("<2h", hdr, 252, 0, 1)  # qform off, sform on
    # Canonical layout written as a diagonal RAS+ affine: +x, -y, +z.
    struct.pack_into("<4f", hdr, 280, sx, 0.0, 0.0, 0.0)
    struct.pack_into("<4f", hdr, 296, 0.0, -sy, 0.0, 0.0)
    struct.pack_into("<4f", hdr, 312, 0.0, 0.0, sz, 0.0)
    hdr[344:348] = b"n+1\x00"
    return bytes(hdr)


def _write_bytes(path: Path, payload: bytes) -> None:
    try:
        if path.name.endswith(".gz"):
            # mtime=0 keeps output byte-identical across runs
            payload = gzip.compress(payload, mtime=0)
        path.write_bytes(payload)
    except OSError as exc:
        raise UnwritablePath(f"cannot write {path}: {exc}") from exc


def write_array(path: str | Path, arr: np.ndarray,
                spacing: tuple[float, float, float]) -> None:
    path = Path(path)
    dtype = np.dtype(arr.dtype)
    if dtype not in _DTYPE_CODES:
        raise UnsupportedFormat(f"cannot store dtype {dtype} in NIfTI-1")
    header = _build_header(arr.shape, spacing, dtype)
    body = np.asfortranarray(arr).tobytes(order="F")
    _write_bytes(path, header + b"\x00\x00\x00\x00" + body)


def write_volume(path: str | Path, volume: Volume) -> None:
    write_array(path, volume.values, volume.spacing)


def write_labels(path: str | Path, labels: LabelMap) -> None:
    write_array(path, labels.labels, labels.spacing)
