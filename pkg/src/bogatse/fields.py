"""Synthetic complex per-mode RF fields with complementary patterns.

Mode 1 is depressed along x and elevated along y; mode 2 carries the
mirrored amplitude pattern plus opposite phase roll, so the two low-signal
regions never overlap. Both modes share a coverage envelope that is about
one everywhere and dips smoothly to a small floor inside a spherical hole,
emulating missing coil coverage over the lobe region.

Transmit and receive weighting are not modeled separately: each h is the
combined effective field of its mode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .phantom import default_grid, lobe_center, voxel_coordinates
from .volume import ComplexVolume, Grid, RealVolume

DEFAULT_FIELD_SEED = 20240815
HOLE_CORE_FRACTION = 0.5  # inner fraction of the hole radius held at the floor


@dataclass(frozen=True)
class FieldSpec:
    """Parameters of the synthetic mode fields.

    depth: amplitude modulation depth, < 1 so fields never vanish outside
    the hole. phase_roll: radians of linear phase across the FOV per axis
    (mode 2 rolls the opposite way). perturbation: amplitude of a smooth
    seeded random field added to each mode's magnitude pattern. hole_floor
    bounds the envelope inside the hole relative to the mean amplitude.
    """

    grid: Grid
    depth: float = 0.35
    phase_roll: tuple[float, float, float] = (1.4, 1.05, 0.7)
    mode2_phase_offset: float = math.pi / 2
    perturbation: float = 0.02
    hole_center: tuple[float, float, float] = (32.0, 52.0, 14.0)
    hole_radius_mm: float = 21.0
    hole_floor: float = 0.02
    seed: int = DEFAULT_FIELD_SEED

    def __post_init__(self):
        if not 0.0 <= self.depth < 1.0:
            raise ValueError("modulation depth must lie in [0, 1)")
        if not 0.0 <= self.hole_floor <= 1.0:
            raise ValueError("hole floor must lie in [0, 1]")
        if self.hole_radius_mm <= 0:
            raise ValueError("hole radius must be > 0")
        if self.perturbation < 0:
            raise ValueError("perturbation must be >= 0")


@dataclass(frozen=True, eq=False)
class FieldSet:
    """Per-mode fields, their CP sum, and the shared coverage envelope."""

    h1: ComplexVolume
    h2: ComplexVolume
    cp: ComplexVolume
    envelope: RealVolume

    def __post_init__(self):
        g = self.h1.grid
        if self.h2.grid != g or self.cp.grid != g or self.envelope.grid != g:
            raise ValueError("field volumes live on different grids")
        if not np.array_equal(self.cp.data, self.h1.data + self.h2.data):
            raise ValueError("cp must equal h1 + h2 voxelwise")
        env = self.envelope.data
        if env.min() < 0.0 or env.max() > 1.0:
            raise ValueError("envelope must lie in [0, 1]")

    @property
    def grid(self) -> Grid:
        return self.h1.grid

    def mode_field(self, mode: str) -> ComplexVolume:
        try:
            return {"mode1": self.h1, "mode2": self.h2, "cp": self.cp}[mode]
        except KeyError:
            raise ValueError(f"unknown RF mode {mode!r}") from None


def _normalized_axes(grid: Grid):
    x, y, z = voxel_coordinates(grid)
    def unit(a, n):
        return a / (n - 1) if n > 1 else a
    return unit(x, grid.nx), unit(y, grid.ny), unit(z, grid.nz)


def random_smooth_field(grid: Grid, rng: np.random.Generator, kmax: int = 2) -> np.ndarray:
    """Smooth real random field, max |value| = 1, band-limited to kmax."""
    shape = grid.shape
    spec = np.zeros(shape, dtype=complex)
    w = 2 * kmax + 1
    wx, wy, wz = (min(w, n) for n in shape)  # tiny grids hold fewer modes
    coef = rng.normal(size=(wx, wy, wz)) + 1j * rng.normal(size=(wx, wy, wz))
    spec[:wx, :wy, :wz] = coef
    spec = np.roll(spec, -kmax, axis=(0, 1, 2))
    f = np.fft.ifftn(spec).real
    return f / np.abs(f).max()


def random_field_pair(grid: Grid, rng: np.random.Generator, kmax: int = 2):
    """Two random smooth complex fields, for combination oracles."""
    def one():
        return ComplexVolume(
            grid,
            random_smooth_field(grid, rng, kmax)
            + 1j * random_smooth_field(grid, rng, kmax),
        )
    return one(), one()


def generate_mode_fields(spec: FieldSpec) -> FieldSet:
    """Build the complementary mode fields under the spec.

    The hole envelope holds a flat dip across the inner half of the hole
    radius and ramps smoothly back to one at the rim. It is calibrated in
    two passes: a trial envelope dipping to zero gives a conservative lower
    bound on each mode's mean amplitude, from which the dip floor q is
    chosen so that the field magnitude over the whole core stays below
    hole_floor times the spatial mean by construction.
    """
    grid = spec.grid
    xh, yh, zh = _normalized_axes(grid)

    x, y, z = voxel_coordinates(grid)
    cx, cy, cz = spec.hole_center
    r_mm = np.sqrt(
        (grid.dx * (x - cx)) ** 2
        + (grid.dy * (y - cy)) ** 2
        + (grid.dz * (z - cz)) ** 2
    )
    inside = r_mm <= spec.hole_radius_mm
    if inside.all():
        raise ValueError("hole covers the entire grid")

    # complementary amplitude patterns: depressed along x, elevated along y
    m = 0.5 * (np.cos(2 * np.pi * xh) - np.cos(2 * np.pi * yh))
    amp1 = 1.0 + spec.depth * m
    amp2 = 1.0 - spec.depth * m
    if spec.perturbation > 0:
        rng = np.random.default_rng(spec.seed)
        amp1 = amp1 + spec.perturbation * random_smooth_field(grid, rng)
        amp2 = amp2 + spec.perturbation * random_smooth_field(grid, rng)

    # full suppression across the inner core, raised-cosine ramp to the rim
    r_core = HOLE_CORE_FRACTION * spec.hole_radius_mm
    ramp = (r_mm[inside] - r_core) / (spec.hole_radius_mm - r_core)
    dip = np.where(ramp <= 0.0, 1.0, 0.5 * (1.0 + np.cos(np.pi * np.clip(ramp, 0.0, 1.0))))
    env0 = np.ones(grid.shape)
    env0[inside] = 1.0 - dip
    mu_lb = min((amp1 * env0).mean(), (amp2 * env0).mean())
    ic = tuple(
        min(max(int(round(c)), 0), n - 1)
        for c, n in zip(spec.hole_center, grid.shape)
    )
    q = 0.999 * spec.hole_floor * mu_lb / max(amp1[ic], amp2[ic])
    env = np.ones(grid.shape)
    env[inside] = 1.0 - (1.0 - q) * dip

    phase = (
        spec.phase_roll[0] * xh + spec.phase_roll[1] * yh + spec.phase_roll[2] * zh
    )
    h1 = amp1 * env * np.exp(1j * phase)
    h2 = amp2 * env * np.exp(1j * (-phase + spec.mode2_phase_offset))

    h1 = ComplexVolume(grid, h1)
    h2 = ComplexVolume(grid, h2)
    return FieldSet(h1=h1, h2=h2, cp=h1 + h2, envelope=RealVolume(grid, env))


def default_field_spec(grid: Grid | None = None, seed: int = DEFAULT_FIELD_SEED) -> FieldSpec:
    """Default spec with the hole centered on the default phantom's lobe."""
    grid = grid or default_grid()
    return FieldSpec(grid=grid, hole_center=lobe_center(grid), seed=seed)


def hole_mask(spec: FieldSpec) -> np.ndarray:
    """Boolean array marking voxels inside the coverage hole."""
    x, y, z = voxel_coordinates(spec.grid)
    cx, cy, cz = spec.hole_center
    r_mm = np.sqrt(
        (spec.grid.dx * (x - cx)) ** 2
        + (spec.grid.dy * (y - cy)) ** 2
        + (spec.grid.dz * (z - cz)) ** 2
    )
    return r_mm <= spec.hole_radius_mm
