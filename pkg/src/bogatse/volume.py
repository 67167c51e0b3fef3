"""Volumetric value types, bit-exact container I/O, and slice rendering.

Conventions used everywhere in the package:

* in-memory arrays are shaped ``(nx, ny, nz)`` and indexed ``data[x, y, z]``;
* the flat voxel index, and the on-disk payload, are x-fastest
  (``index = x + nx*(y + ny*z)``, i.e. ``ravel(order="F")``);
* computation runs at 64-bit, files store 32-bit floats little-endian.

A volume container is a ``<name>.vol.json`` text header plus a
``<name>.vol.raw`` payload. Complex payloads interleave (re, im) float32;
real payloads are float32 followed by a little-endian packed validity
bitset. Slice renders are written as binary PGM (P5).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DimMismatchError,
    NonFiniteSampleError,
    TruncatedPayloadError,
    UnknownDtypeError,
)

FORMAT_NAME = "bogatse-volume"
FORMAT_VERSION = 1

_AXES = {"x": 0, "y": 1, "z": 2}


@dataclass(frozen=True)
class Grid:
    """Regular voxel grid: counts per axis and voxel size in mm."""

    nx: int
    ny: int
    nz: int
    dx: float = 1.0
    dy: float = 1.0
    dz: float = 1.0

    def __post_init__(self):
        if min(self.nx, self.ny, self.nz) < 1:
            raise ValueError("voxel counts must be >= 1")
        if min(self.dx, self.dy, self.dz) <= 0:
            raise ValueError("voxel sizes must be > 0")

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.nx, self.ny, self.nz)

    @property
    def n_voxels(self) -> int:
        return self.nx * self.ny * self.nz

    @property
    def voxel_size(self) -> tuple[float, float, float]:
        return (self.dx, self.dy, self.dz)


def _frozen_array(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


def _check_shape(grid: Grid, data: np.ndarray):
    if tuple(data.shape) != grid.shape:
        raise DimMismatchError(
            f"data shape {tuple(data.shape)} does not match grid {grid.shape}"
        )


@dataclass(frozen=True, eq=False)
class ComplexVolume:
    """3D complex-valued samples on a grid; immutable after construction."""

    grid: Grid
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.complex128)
        _check_shape(self.grid, data)
        if not np.isfinite(data).all():
            raise NonFiniteSampleError("complex volume holds non-finite samples")
        object.__setattr__(self, "data", _frozen_array(data))

    def _binary(self, other, op) -> "ComplexVolume":
        if isinstance(other, ComplexVolume):
            if other.grid != self.grid:
                raise DimMismatchError("volumes live on different grids")
            return ComplexVolume(self.grid, op(self.data, other.data))
        return ComplexVolume(self.grid, op(self.data, other))

    def __add__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __mul__(self, other):
        return self._binary(other, np.multiply)

    def __rmul__(self, other):
        return ComplexVolume(self.grid, other * self.data)

    def __neg__(self):
        return ComplexVolume(self.grid, -self.data)

    def conj(self) -> "ComplexVolume":
        return ComplexVolume(self.grid, np.conj(self.data))

    def magnitude(self) -> "RealVolume":
        return RealVolume(self.grid, np.abs(self.data))

    def flat(self) -> np.ndarray:
        """Samples in x-fastest voxel order."""
        return self.data.ravel(order="F")

    def allclose(self, other: "ComplexVolume", rtol=1e-12, atol=0.0) -> bool:
        return self.grid == other.grid and np.allclose(
            self.data, other.data, rtol=rtol, atol=atol
        )


@dataclass(frozen=True, eq=False)
class RealVolume:
    """3D real samples with a per-voxel validity flag.

    Invalid voxels carry the explicit sentinel value 0.0, never NaN, so a
    stage that invalidates a voxel is visible in the flags rather than in
    silent NaN propagation.
    """

    grid: Grid
    data: np.ndarray
    valid: np.ndarray | None = None

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        _check_shape(self.grid, data)
        if self.valid is None:
            valid = np.ones(self.grid.shape, dtype=bool)
        else:
            valid = np.asarray(self.valid, dtype=bool)
            _check_shape(self.grid, valid)
        data = np.where(valid, data, 0.0)
        if valid.any() and not np.isfinite(data[valid]).all():
            raise NonFiniteSampleError("real volume holds non-finite valid samples")
        object.__setattr__(self, "data", _frozen_array(data))
        object.__setattr__(self, "valid", _frozen_array(valid))

    @property
    def all_valid(self) -> bool:
        return bool(self.valid.all())

    def flat(self) -> np.ndarray:
        return self.data.ravel(order="F")

    def scaled(self, factor: float) -> "RealVolume":
        return RealVolume(self.grid, self.data * factor, self.valid)


@dataclass(frozen=True, eq=False)
class Mask:
    """One boolean per voxel on a grid."""

    grid: Grid
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=bool)
        _check_shape(self.grid, data)
        object.__setattr__(self, "data", _frozen_array(data))

    def count(self) -> int:
        return int(self.data.sum())

    def __and__(self, other: "Mask") -> "Mask":
        if other.grid != self.grid:
            raise DimMismatchError("masks live on different grids")
        return Mask(self.grid, self.data & other.data)

    def __invert__(self) -> "Mask":
        return Mask(self.grid, ~self.data)


@dataclass(frozen=True)
class LineSpec:
    """A profile line along one axis with the other two coordinates fixed.

    ``fixed`` lists the held coordinates of the remaining axes in x,y,z
    order with the profile axis skipped: axis "x" -> (y, z),
    axis "y" -> (x, z), axis "z" -> (x, y).
    """

    axis: str
    fixed: tuple[int, int]

    def __post_init__(self):
        if self.axis not in _AXES:
            raise ValueError(f"axis must be one of x,y,z, got {self.axis!r}")

    def check_bounds(self, grid: Grid):
        dims = list(grid.shape)
        dims.pop(_AXES[self.axis])
        for coord, dim in zip(self.fixed, dims):
            if not 0 <= coord < dim:
                raise IndexError(f"line coordinate {coord} outside grid dim {dim}")

    def extract(self, data: np.ndarray) -> np.ndarray:
        i, j = self.fixed
        if self.axis == "x":
            return data[:, i, j]
        if self.axis == "y":
            return data[i, :, j]
        return data[i, j, :]


# ---------------------------------------------------------------------------
# container I/O


def _strip_container_suffix(path: Path) -> Path:
    name = path.name
    for suffix in (".vol.json", ".vol.raw"):
        if name.endswith(suffix):
            return path.with_name(name[: -len(suffix)])
    return path


def _pack_validity(valid: np.ndarray) -> bytes:
    flat = valid.ravel(order="F")
    return np.packbits(flat, bitorder="little").tobytes()


def _unpack_validity(raw: bytes, shape) -> np.ndarray:
    n = int(np.prod(shape))
    bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8), bitorder="little")[:n]
    return bits.astype(bool).reshape(shape, order="F")


def save_volume(v: ComplexVolume | RealVolume, path) -> None:
    """Write ``<path>.vol.json`` + ``<path>.vol.raw``.

    Data is cast to 32-bit floats; pass float32-representable samples when
    bit-exact round-trips matter.
    """
    base = _strip_container_suffix(Path(path))
    if isinstance(v, ComplexVolume):
        dtype = "complex64"
        payload = np.ascontiguousarray(
            v.data.transpose(2, 1, 0).astype(np.complex64)
        ).tobytes()
        has_validity = False
    elif isinstance(v, RealVolume):
        dtype = "float32"
        payload = np.ascontiguousarray(
            v.data.transpose(2, 1, 0).astype(np.float32)
        ).tobytes()
        payload += _pack_validity(v.valid)
        has_validity = True
    else:
        raise TypeError(f"cannot save object of type {type(v).__name__}")

    g = v.grid
    header = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "dims": [g.nx, g.ny, g.nz],
        "voxel_size_mm": [g.dx, g.dy, g.dz],
        "dtype": dtype,
        "byte_order": "little",
        "order": "x-fastest",
        "validity_bitset": has_validity,
        "bit_order": "little",
        "payload_bytes": len(payload),
    }
    base.parent.mkdir(parents=True, exist_ok=True)
    base.with_name(base.name + ".vol.json").write_text(
        json.dumps(header, indent=2, sort_keys=True) + "\n"
    )
    base.with_name(base.name + ".vol.raw").write_bytes(payload)


def load_volume(path) -> ComplexVolume | RealVolume:
    """Load a volume container; returns the type the header declares."""
    base = _strip_container_suffix(Path(path))
    header_path = base.with_name(base.name + ".vol.json")
    raw_path = base.with_name(base.name + ".vol.raw")
    header = json.loads(header_path.read_text())

    dtype = header.get("dtype")
    if dtype not in ("complex64", "float32"):
        raise UnknownDtypeError(f"unknown dtype {dtype!r}")
    dims = header.get("dims")
    if not (isinstance(dims, list) and len(dims) == 3 and min(dims) >= 1):
        raise DimMismatchError(f"bad dims in header: {dims!r}")
    nx, ny, nz = (int(d) for d in dims)
    sizes = header.get("voxel_size_mm", [1.0, 1.0, 1.0])
    grid = Grid(nx, ny, nz, *(float(s) for s in sizes))
    n = grid.n_voxels

    raw = raw_path.read_bytes()
    itemsize = 8 if dtype == "complex64" else 4
    expected = n * itemsize
    if header.get("validity_bitset"):
        expected += (n + 7) // 8
    if len(raw) < expected:
        raise TruncatedPayloadError(
            f"payload holds {len(raw)} bytes, header promises {expected}"
        )
    if len(raw) > expected:
        raise DimMismatchError(
            f"payload holds {len(raw)} bytes, header promises {expected}"
        )

    if dtype == "complex64":
        data = np.frombuffer(raw, dtype="<c8", count=n).reshape(
            (nz, ny, nx)
        ).transpose(2, 1, 0)
        return ComplexVolume(grid, data.astype(np.complex128))
    data = np.frombuffer(raw, dtype="<f4", count=n).reshape((nz, ny, nx)).transpose(
        2, 1, 0
    )
    valid = _unpack_validity(raw[n * 4 :], (nx, ny, nz))
    return RealVolume(grid, data.astype(np.float64), valid)


# ---------------------------------------------------------------------------
# slice rendering


def render_slice(
    v: RealVolume,
    axis: str,
    index: int,
    window: tuple[float, float],
    mask: Mask | None = None,
) -> np.ndarray:
    """Render one slice to 8-bit grayscale.

    The window maps lo -> 0 and hi -> 255 linearly with clamping. Voxels
    outside the mask, and invalid voxels, render as 0. Returned array is
    indexed [row, col]: axis "z" -> (y, x), "y" -> (z, x), "x" -> (z, y).
    """
    if axis not in _AXES:
        raise ValueError(f"axis must be one of x,y,z, got {axis!r}")
    lo, hi = float(window[0]), float(window[1])
    if not lo < hi:
        raise ValueError(f"degenerate window [{lo}, {hi}]")
    ax = _AXES[axis]
    if not 0 <= index < v.grid.shape[ax]:
        raise IndexError(f"slice index {index} out of range for axis {axis}")

    sl = [slice(None)] * 3
    sl[ax] = index
    plane = v.data[tuple(sl)]
    keep = v.valid[tuple(sl)]
    if mask is not None:
        if mask.grid != v.grid:
            raise DimMismatchError("mask lives on a different grid")
        keep = keep & mask.data[tuple(sl)]

    t = (plane - lo) / (hi - lo)
    pix = np.clip(np.floor(t * 255.0 + 0.5), 0.0, 255.0)
    pix = np.where(keep, pix, 0.0).astype(np.uint8)
    return pix.T  # remaining axes come out in x,y,z order; flip to row,col


def write_pgm(image: np.ndarray, path) -> None:
    """Write a 2D uint8 array as binary PGM (P5)."""
    img = np.asarray(image, dtype=np.uint8)
    if img.ndim != 2:
        raise ValueError("PGM writer expects a 2D image")
    h, w = img.shape
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(img.tobytes())
