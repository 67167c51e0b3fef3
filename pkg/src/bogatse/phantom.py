"""Deterministic ellipsoid phantoms with per-tissue T1/T2/PD ground truth.

The default phantom is a head-like nest of ellipsoids (CSF shell, GM shell,
WM core) plus a small posterior-inferior lobe placed where the default field
coverage hole sits. Geometry is evaluated analytically per voxel, so
generation is pure and order-independent apart from the documented
paint-over rule.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .volume import Grid, Mask, RealVolume


@dataclass(frozen=True)
class TissueClass:
    """Relaxation parameters for one tissue type.

    T1/T2 in ms, PD dimensionless (0 = no signal).
    """

    name: str
    t1_ms: float
    t2_ms: float
    pd: float

    def __post_init__(self):
        if self.t1_ms <= 0 or self.t2_ms <= 0:
            raise ValueError(f"tissue {self.name!r}: T1 and T2 must be > 0")
        if self.t2_ms > self.t1_ms:
            raise ValueError(f"tissue {self.name!r}: T2 must not exceed T1")
        if self.pd < 0:
            raise ValueError(f"tissue {self.name!r}: PD must be >= 0")


@dataclass(frozen=True)
class Ellipsoid:
    """Axis-aligned ellipsoid in voxel coordinates, bound to a tissue name."""

    center: tuple[float, float, float]
    semi_axes: tuple[float, float, float]
    tissue: str

    def __post_init__(self):
        if min(self.semi_axes) <= 0:
            raise ValueError("ellipsoid semi-axes must be > 0")


@dataclass(frozen=True)
class PhantomSpec:
    """Grid, tissue table, and a paint-ordered list of primitives.

    Primitives are evaluated in listed order; later ones overwrite earlier
    labels. The seed is carried into provenance records; current geometry
    is deterministic without it.
    """

    grid: Grid
    tissues: tuple[TissueClass, ...]
    primitives: tuple[Ellipsoid, ...]
    background: str
    seed: int = 0

    def __post_init__(self):
        if not self.primitives:
            raise ValueError("phantom spec lists no primitives")
        names = [t.name for t in self.tissues]
        if len(set(names)) != len(names):
            raise ValueError("duplicate tissue names in spec")
        known = set(names)
        if self.background not in known:
            raise ValueError(f"background tissue {self.background!r} undefined")
        for p in self.primitives:
            if p.tissue not in known:
                raise ValueError(f"primitive references unknown tissue {p.tissue!r}")


@dataclass(frozen=True, eq=False)
class Phantom:
    """Label volume plus the class table; labels index into ``classes``."""

    grid: Grid
    labels: np.ndarray
    classes: tuple[TissueClass, ...]

    def __post_init__(self):
        labels = np.ascontiguousarray(self.labels, dtype=np.int32)
        if tuple(labels.shape) != self.grid.shape:
            raise ValueError("label volume does not match grid")
        if labels.min() < 0 or labels.max() >= len(self.classes):
            raise ValueError("label outside class table")
        labels.flags.writeable = False
        object.__setattr__(self, "labels", labels)

    def class_id(self, name: str) -> int:
        for i, t in enumerate(self.classes):
            if t.name == name:
                return i
        raise KeyError(f"no tissue named {name!r}")

    def region_mask(self, name: str) -> Mask:
        return Mask(self.grid, self.labels == self.class_id(name))

    def _lookup(self, attr: str) -> np.ndarray:
        table = np.array([getattr(t, attr) for t in self.classes], dtype=np.float64)
        return table[self.labels]

    def t1_map(self) -> np.ndarray:
        return self._lookup("t1_ms")

    def t2_map(self) -> np.ndarray:
        return self._lookup("t2_ms")

    def pd_map(self) -> np.ndarray:
        return self._lookup("pd")

    def labels_volume(self) -> RealVolume:
        """Labels as a saveable real volume (class ids as floats)."""
        return RealVolume(self.grid, self.labels.astype(np.float64))


def voxel_coordinates(grid: Grid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Voxel-index coordinate arrays shaped like the grid."""
    return np.meshgrid(
        np.arange(grid.nx, dtype=np.float64),
        np.arange(grid.ny, dtype=np.float64),
        np.arange(grid.nz, dtype=np.float64),
        indexing="ij",
    )


def generate_phantom(spec: PhantomSpec) -> Phantom:
    """Paint the spec's primitives over the background, in order."""
    grid = spec.grid
    name_to_id = {t.name: i for i, t in enumerate(spec.tissues)}
    labels = np.full(grid.shape, name_to_id[spec.background], dtype=np.int32)
    x, y, z = voxel_coordinates(grid)
    hi = (grid.nx - 1, grid.ny - 1, grid.nz - 1)
    for p in spec.primitives:
        clipped = any(
            c - a < 0 or c + a > h
            for c, a, h in zip(p.center, p.semi_axes, hi)
        )
        if clipped:
            warnings.warn(
                f"ellipsoid of tissue {p.tissue!r} extends outside the grid; clipped",
                stacklevel=2,
            )
        cx, cy, cz = p.center
        ax, ay, az = p.semi_axes
        inside = (
            ((x - cx) / ax) ** 2 + ((y - cy) / ay) ** 2 + ((z - cz) / az) ** 2
        ) <= 1.0
        labels[inside] = name_to_id[p.tissue]
    return Phantom(grid, labels, spec.tissues)


DEFAULT_TISSUES = (
    TissueClass("background", 1000.0, 100.0, 0.0),
    TissueClass("wm", 1200.0, 47.0, 0.70),
    TissueClass("gm", 2000.0, 55.0, 0.80),
    TissueClass("csf", 4400.0, 800.0, 1.00),
    TissueClass("lobe", 1900.0, 52.0, 0.78),
)

# nest/lobe geometry as fractions of the grid extent; exact voxel values on
# the default 64^3 grid
_NEST_FRACTIONS = (
    ("csf", (26 / 64, 30 / 64, 26 / 64)),
    ("gm", (23 / 64, 27 / 64, 23 / 64)),
    ("wm", (18 / 64, 21 / 64, 17 / 64)),
)
_LOBE_CENTER_FRACTION = (32 / 64, 52 / 64, 14 / 64)
_LOBE_SEMI_FRACTION = (7 / 64, 7 / 64, 6 / 64)


def default_grid() -> Grid:
    return Grid(64, 64, 64, 3.0, 3.0, 3.0)


def lobe_center(grid: Grid) -> tuple[float, float, float]:
    """Voxel coordinates of the lobe (and field-hole) center."""
    return (
        _LOBE_CENTER_FRACTION[0] * grid.nx,
        _LOBE_CENTER_FRACTION[1] * grid.ny,
        _LOBE_CENTER_FRACTION[2] * grid.nz,
    )


def default_phantom_spec(grid: Grid | None = None, seed: int = 0) -> PhantomSpec:
    """Head-like nested-ellipsoid spec: CSF/GM shells, WM core, small lobe."""
    grid = grid or default_grid()
    c = ((grid.nx - 1) / 2.0, (grid.ny - 1) / 2.0, (grid.nz - 1) / 2.0)
    dims = (grid.nx, grid.ny, grid.nz)
    primitives = [
        Ellipsoid(c, tuple(f * n for f, n in zip(fr, dims)), name)
        for name, fr in _NEST_FRACTIONS
    ]
    primitives.append(
        Ellipsoid(
            lobe_center(grid),
            tuple(f * n for f, n in zip(_LOBE_SEMI_FRACTION, dims)),
            "lobe",
        )
    )
    return PhantomSpec(
        grid=grid,
        tissues=DEFAULT_TISSUES,
        primitives=tuple(primitives),
        background="background",
        seed=seed,
    )
