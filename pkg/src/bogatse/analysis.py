"""Quantitative analysis: SNR maps, profiles, masks, and region statistics.

The SNR estimator follows the two-stage box-filter scheme: a 5x5x5 box mean
removes structure, the residual feeds a 5x5x5 moving standard deviation,
and SNR is the raw value over that local sigma. Kernels shrink at the
volume border (available voxels only), and all standard deviations here are
population ones.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .errors import (
    AlreadyScaledError,
    DimMismatchError,
    EmptyRegionError,
    ZeroMeanProfileError,
)
from .volume import LineSpec, Mask, RealVolume

BOX_HALF = 2  # 5x5x5 kernel
DISPLAY_MASK_FRACTION = 2e-4  # threshold per slice, as a fraction of slice max


def _as_real(v) -> RealVolume:
    return v.volume if isinstance(v, SNRMap) else v


def _box_counts(shape: tuple[int, int, int], half: int) -> np.ndarray:
    """In-volume voxel count of the shrunk box kernel at each position."""
    axes = []
    for n in shape:
        i = np.arange(n)
        axes.append(np.minimum(i + half, n - 1) - np.maximum(i - half, 0) + 1)
    return (
        axes[0][:, None, None].astype(np.float64)
        * axes[1][None, :, None]
        * axes[2][None, None, :]
    )


def box_mean(values: np.ndarray, half: int = BOX_HALF) -> np.ndarray:
    """Box-filter mean with the kernel shrunk at the borders."""
    return kernels.box_sum_3d(np.asarray(values, dtype=np.float64), half) / _box_counts(
        values.shape, half
    )


@dataclass(frozen=True, eq=False)
class SNRMap:
    """Per-voxel SNR with provenance: source image and scaling state."""

    volume: RealVolume
    source: str = ""
    cp_scaled: bool = False


def snr_map(v: RealVolume, source: str = "") -> SNRMap:
    """Estimate per-voxel SNR of a magnitude image.

    Voxels where the local noise sigma is zero are flagged invalid rather
    than divided. Input voxels that are already invalid stay invalid.
    """
    shape = v.grid.shape
    if min(shape) < 2 * BOX_HALF + 1:
        raise ValueError(f"grid {shape} too small for a {2*BOX_HALF+1}^3 kernel")
    if (v.data[v.valid] < 0).any():
        raise ValueError("snr_map expects a magnitude (non-negative) image")
    smooth = box_mean(v.data)
    noise = v.data - smooth
    m1 = box_mean(noise)
    m2 = box_mean(noise * noise)
    var = np.maximum(m2 - m1 * m1, 0.0)
    sigma = np.sqrt(var)
    ok = v.valid & (sigma > 0)
    snr = np.where(ok, v.data / np.where(ok, sigma, 1.0), 0.0)
    return SNRMap(volume=RealVolume(v.grid, snr, ok), source=source)


def scale_cp_snr(m: SNRMap) -> SNRMap:
    """Scale a CP-derived SNR map by sqrt(2), exactly once.

    The CP image is the sum of two mode acquisitions, so its effective
    averaging doubles; refusing a second scaling keeps reports honest.
    """
    if m.cp_scaled:
        raise AlreadyScaledError(f"SNR map {m.source!r} already carries the sqrt(2) factor")
    return SNRMap(
        volume=m.volume.scaled(math.sqrt(2.0)),
        source=m.source,
        cp_scaled=True,
    )


@dataclass(frozen=True, eq=False)
class ProfileSeries:
    """Samples along one grid line, raw and mean-normalized.

    Invalid voxels on the line are dropped; ``indices`` keeps the surviving
    positions along the profile axis.
    """

    line: LineSpec
    indices: np.ndarray
    raw: np.ndarray
    normalized: np.ndarray


def normalized_profile(v: RealVolume, line: LineSpec, span: slice | None = None) -> ProfileSeries:
    """Extract a line profile and normalize it by its own mean."""
    line.check_bounds(v.grid)
    raw = line.extract(v.data)
    ok = line.extract(v.valid)
    idx = np.arange(raw.size)
    if span is not None:
        raw, ok, idx = raw[span], ok[span], idx[span]
    raw = raw[ok]
    idx = idx[ok]
    if raw.size == 0:
        raise ZeroMeanProfileError("profile holds no valid samples")
    mean = raw.mean()
    if mean == 0:
        raise ZeroMeanProfileError("profile mean is zero; cannot normalize")
    return ProfileSeries(line=line, indices=idx, raw=raw, normalized=raw / mean)


def display_mask(v: RealVolume, fraction: float = DISPLAY_MASK_FRACTION) -> Mask:
    """Per-transversal-slice threshold mask, for rendering only.

    Keeps voxels at or above fraction times the slice maximum; an all-zero
    slice comes back empty. Never feed this into statistics.
    """
    data = v.data
    keep = np.zeros(v.grid.shape, dtype=bool)
    for iz in range(v.grid.nz):
        plane = data[:, :, iz]
        top = plane.max()
        if top > 0:
            keep[:, :, iz] = plane >= fraction * top
    return Mask(v.grid, keep)


@dataclass(frozen=True)
class RegionStats:
    """Population mean/std over the valid voxels of a region."""

    label: str
    mean: float
    std: float
    count: int

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("stats need at least one voxel")
        if self.std < 0:
            raise ValueError("std must be >= 0")


def region_stats(m, region: Mask, label: str = "") -> RegionStats:
    """Mean and population std of a volume over a region's valid voxels."""
    v = _as_real(m)
    if region.grid != v.grid:
        raise DimMismatchError("region mask lives on a different grid")
    pick = region.data & v.valid
    vals = v.data[pick]
    if vals.size == 0:
        raise EmptyRegionError(f"region {label or '<unnamed>'} is empty after validity filtering")
    return RegionStats(
        label=label,
        mean=float(vals.mean()),
        std=float(vals.std()),
        count=int(vals.size),
    )


def coefficient_of_variation(m, region: Mask) -> float:
    """Population std over mean; the region mean must be positive."""
    stats = region_stats(m, region)
    if stats.mean <= 0:
        raise ValueError(f"region mean {stats.mean} is not positive")
    return stats.std / stats.mean


def format_mean_std(mean: float, std: float) -> str:
    """Render a stats row the way the report tables do, e.g. 36.43±28.9."""
    return f"{mean:.2f}±{std:.1f}"


def write_profiles_csv(path, profiles) -> None:
    """Write profiles as CSV rows (axis, index, raw, normalized)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["axis", "index", "raw", "normalized"])
        for p in profiles:
            for i, r, n in zip(p.indices, p.raw, p.normalized):
                w.writerow([p.line.axis, int(i), repr(float(r)), repr(float(n))])


def write_stats_csv(path, rows) -> None:
    """Write (image, RegionStats) pairs as CSV (image, region, mean, std, count)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["image", "region", "mean", "std", "count"])
        for image, st in rows:
            w.writerow([image, st.label, repr(st.mean), repr(st.std), st.count])
