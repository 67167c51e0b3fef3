"""Four-acquisition combination: virtual channels, the two combination
conventions, per-contrast reconstruction, and the convention audit.

Both conventions are always available. "verbatim" is the four-bracket
C/D form with a conjugate-symmetrized average; "ratio" is

    I = (S4* (S1+S2) - S3* (S1-S2)) / (2 (|S3|^2 + |S4|^2))

which under the forward model S1 = A1 h1, S2 = A1 h2, S3pre = A2 h1,
S4pre = A2 h2 reduces algebraically to A1/A2 at every voxel. The audit
evaluates both on random smooth field pairs and records which one actually
cancels the fields; that one is the shipped default. Nothing here ever
reads a CP-mode image.
"""

from __future__ import annotations

from dataclasses import dataclass
from types import MappingProxyType

import numpy as np

from . import kernels
from .errors import ConventionAuditError, DimMismatchError, EmptyRegionError
from .fields import random_field_pair
from .sequence import AcquisitionSet
from .volume import ComplexVolume, Grid, Mask, RealVolume

CONVENTIONS = ("verbatim", "ratio")
DEFAULT_CONVENTION = "ratio"
DEFAULT_FLOOR_REL = 1e-6

CONTRAST_KINDS = ("t1", "t2", "pd")
# first SP feeds S1/S2; second SP feeds the virtual channels.
# PD uses the per-mode average of SP1 and SP3 as its second SP.
_CONTRAST_RULES = {
    "t1": ("SP2", "SP1"),
    "t2": ("SP3", "SP2"),
    "pd": ("SP2", ("SP1", "SP3")),
}


@dataclass(frozen=True)
class VirtualChannelPair:
    """Observed per-channel references derived from the second-SP images."""

    s3: ComplexVolume
    s4: ComplexVolume

    def __post_init__(self):
        if self.s3.grid != self.s4.grid:
            raise DimMismatchError("virtual channels live on different grids")


def derive_virtual_channels(s3pre: ComplexVolume, s4pre: ComplexVolume) -> VirtualChannelPair:
    """S3 = 0.5(-S3pre + S4pre), S4 = 0.5(S3pre + S4pre)."""
    if s3pre.grid != s4pre.grid:
        raise DimMismatchError("pre-combination images live on different grids")
    return VirtualChannelPair(
        s3=ComplexVolume(s3pre.grid, 0.5 * (-s3pre.data + s4pre.data)),
        s4=ComplexVolume(s3pre.grid, 0.5 * (s3pre.data + s4pre.data)),
    )


def average_volumes(a: ComplexVolume, b: ComplexVolume) -> ComplexVolume:
    """Voxelwise mean of two volumes."""
    if a.grid != b.grid:
        raise DimMismatchError("volumes live on different grids")
    return ComplexVolume(a.grid, 0.5 * (a.data + b.data))


def _check_convention(convention: str):
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}, got {convention!r}")


@dataclass(frozen=True, eq=False)
class CombinedImage:
    """Combination output: complex image, validity, and provenance."""

    image: ComplexVolume
    valid: Mask
    convention: str
    floor: float

    def magnitude(self) -> RealVolume:
        """Magnitude with the combination validity carried along."""
        return RealVolume(self.image.grid, np.abs(self.image.data), self.valid.data)


def boga_combine(
    s1: ComplexVolume,
    s2: ComplexVolume,
    vc: VirtualChannelPair,
    convention: str = DEFAULT_CONVENTION,
    floor_rel: float = DEFAULT_FLOOR_REL,
) -> CombinedImage:
    """Combine S1, S2 and the virtual channels into one complex image.

    Voxels whose channel power |S3|^2+|S4|^2 falls below floor_rel times
    the volume median power are flagged invalid (and zeroed) instead of
    divided; this is what turns coverage holes into explicit artifacts
    rather than unbounded values. Zero-power voxels (signal-free regions)
    are always invalid, so a noiseless scene with empty background stays
    well-defined even though the volume median power is then zero.
    """
    _check_convention(convention)
    grid = s1.grid
    if s2.grid != grid or vc.s3.grid != grid:
        raise DimMismatchError("combination inputs live on different grids")
    power = np.abs(vc.s3.data) ** 2 + np.abs(vc.s4.data) ** 2
    floor = floor_rel * float(np.median(power))
    fn = kernels.ratio_combine if convention == "ratio" else kernels.verbatim_combine
    image, valid = fn(s1.data, s2.data, vc.s3.data, vc.s4.data, floor)
    return CombinedImage(
        image=ComplexVolume(grid, image),
        valid=Mask(grid, valid),
        convention=convention,
        floor=floor,
    )


@dataclass(frozen=True, eq=False)
class ContrastImage:
    """Reconstructed contrast, tagged with its provenance."""

    image: ComplexVolume
    valid: Mask
    kind: str
    convention: str
    tse_factor: int

    def magnitude(self) -> RealVolume:
        return RealVolume(self.image.grid, np.abs(self.image.data), self.valid.data)


def _select_inputs(acq: AcquisitionSet, kind: str):
    if kind not in CONTRAST_KINDS:
        raise ValueError(f"contrast kind must be one of {CONTRAST_KINDS}, got {kind!r}")
    first, second = _CONTRAST_RULES[kind]
    s1 = acq.get("mode1", first)
    s2 = acq.get("mode2", first)
    if isinstance(second, tuple):
        s3pre = average_volumes(acq.get("mode1", second[0]), acq.get("mode1", second[1]))
        s4pre = average_volumes(acq.get("mode2", second[0]), acq.get("mode2", second[1]))
    else:
        s3pre = acq.get("mode1", second)
        s4pre = acq.get("mode2", second)
    return s1, s2, derive_virtual_channels(s3pre, s4pre)


def reconstruct_contrast(
    acq: AcquisitionSet,
    kind: str,
    convention: str = DEFAULT_CONVENTION,
    floor_rel: float = DEFAULT_FLOOR_REL,
) -> ContrastImage:
    """Reconstruct one contrast from the mode-1/mode-2 images of a set.

    T1 pairs SP2 (first) with SP1 (second); T2 pairs SP3 with SP2; PD pairs
    SP2 with the per-mode average of SP1 and SP3. CP-mode images are never
    read here; they exist only for comparison.
    """
    s1, s2, vc = _select_inputs(acq, kind)
    combined = boga_combine(s1, s2, vc, convention, floor_rel)
    return ContrastImage(
        image=combined.image,
        valid=combined.valid,
        kind=kind,
        convention=convention,
        tse_factor=acq.tse_factor,
    )


def combination_inputs(acq: AcquisitionSet, kind: str):
    """The (S1, S2, S3, S4) volumes a contrast reconstruction consumes."""
    s1, s2, vc = _select_inputs(acq, kind)
    return s1, s2, vc.s3, vc.s4


@dataclass(frozen=True)
class AuditEntry:
    max_residual: float
    mean_residual: float
    mean_offset: complex


@dataclass(frozen=True, eq=False)
class ConventionAudit:
    """Residuals of both conventions against the exact-cancellation oracle."""

    entries: dict
    default_convention: str | None
    tolerance: float
    n_pairs: int
    grid_shape: tuple[int, int, int]
    weights: tuple[complex, complex]

    def __post_init__(self):
        object.__setattr__(self, "entries", MappingProxyType(dict(self.entries)))

    @property
    def passed(self) -> bool:
        return self.default_convention is not None

    def require_pass(self):
        if not self.passed:
            lines = ", ".join(
                f"{c}: {e.max_residual:.3e}" for c, e in self.entries.items()
            )
            raise ConventionAuditError(
                f"no combination convention reaches residual < {self.tolerance:g} "
                f"({lines})"
            )

    def to_text(self) -> str:
        a1, a2 = self.weights
        gx, gy, gz = self.grid_shape
        lines = [
            "combination convention audit",
            "============================",
            f"oracle: {self.n_pairs} random smooth field pairs on a "
            f"{gx}x{gy}x{gz} grid, uniform weights A1={a1:g}, A2={a2:g}",
            f"pass threshold: max |I - A1/A2| < {self.tolerance:g} over valid voxels",
            "",
            f"{'convention':<12}{'max_residual':>14}{'mean_residual':>15}"
            f"{'mean I/(A1/A2)':>26}",
        ]
        for conv in CONVENTIONS:
            e = self.entries[conv]
            off = e.mean_offset
            lines.append(
                f"{conv:<12}{e.max_residual:>14.3e}{e.mean_residual:>15.3e}"
                f"{off.real:>+17.6f}{off.imag:>+8.4f}j"
            )
        lines.append("")
        lines.append(f"default convention: {self.default_convention or 'NONE (audit failed)'}")
        return "\n".join(lines) + "\n"


def audit_conventions(
    grid: Grid | None = None,
    n_pairs: int = 10,
    seed: int = 20240815,
    a1: complex = 3.0 + 0.0j,
    a2: complex = 2.0 + 0.0j,
    tolerance: float = 1e-9,
    floor_rel: float = DEFAULT_FLOOR_REL,
) -> ConventionAudit:
    """Evaluate both conventions on the exact-cancellation oracle.

    Forward model per pair: S1 = a1 h1, S2 = a1 h2, S3pre = a2 h1,
    S4pre = a2 h2, with (h1, h2) random smooth complex fields. A perfect
    convention returns a1/a2 at every valid voxel. The default is whichever
    convention stays below the tolerance (smaller residual on a tie); the
    mean output-to-target ratio is recorded so a constant offset, if one
    ever appears, is visible in the report.
    """
    grid = grid or Grid(32, 32, 32)
    rng = np.random.default_rng(seed)
    target = a1 / a2
    worst = {c: 0.0 for c in CONVENTIONS}
    sums = {c: 0.0 for c in CONVENTIONS}
    offsets = {c: 0.0 + 0.0j for c in CONVENTIONS}
    counts = {c: 0 for c in CONVENTIONS}
    for _ in range(n_pairs):
        h1, h2 = random_field_pair(grid, rng)
        s1 = ComplexVolume(grid, a1 * h1.data)
        s2 = ComplexVolume(grid, a1 * h2.data)
        vc = derive_virtual_channels(
            ComplexVolume(grid, a2 * h1.data), ComplexVolume(grid, a2 * h2.data)
        )
        for conv in CONVENTIONS:
            out = boga_combine(s1, s2, vc, conv, floor_rel)
            ok = out.valid.data
            if not ok.any():
                raise EmptyRegionError("audit pair left no valid voxels")
            res = np.abs(out.image.data[ok] - target)
            worst[conv] = max(worst[conv], float(res.max()))
            sums[conv] += float(res.sum())
            offsets[conv] += complex((out.image.data[ok] / target).sum())
            counts[conv] += int(ok.sum())
    entries = {
        c: AuditEntry(
            max_residual=worst[c],
            mean_residual=sums[c] / counts[c],
            mean_offset=offsets[c] / counts[c],
        )
        for c in CONVENTIONS
    }
    passing = [c for c in CONVENTIONS if entries[c].max_residual < tolerance]
    default = None
    if passing:
        default = min(passing, key=lambda c: entries[c].max_residual)
    return ConventionAudit(
        entries=entries,
        default_convention=default,
        tolerance=tolerance,
        n_pairs=n_pairs,
        grid_shape=grid.shape,
        weights=(complex(a1), complex(a2)),
    )
