"""End-to-end experiment orchestration and report emission.

A run is: phantom -> fields -> nine simulations per preset -> per-contrast
combination (mode 1/2 images only; CP images are kept for comparison and
never feed the combination) -> analysis -> manifest. Every artifact path is
relative to the output directory and listed in manifest.json with a sha256,
and nothing in the bundle depends on wall-clock time, so identical config
plus seed reproduces the bundle bit for bit.

The experiment config is a single strict JSON document (schema_version 1):
every key of the schema must be present and no others; errors name the
offending dotted key path. ``default_config()`` emits a complete document.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .analysis import (
    display_mask,
    normalized_profile,
    region_stats,
    scale_cp_snr,
    snr_map,
    write_profiles_csv,
    write_stats_csv,
)
from .combine import (
    CONVENTIONS,
    CONTRAST_KINDS,
    audit_conventions,
    combination_inputs,
    reconstruct_contrast,
)
from .errors import ConfigError
from .fields import FieldSpec, FieldSet, default_field_spec, generate_mode_fields
from .phantom import (
    Ellipsoid,
    Phantom,
    PhantomSpec,
    TissueClass,
    default_phantom_spec,
    generate_phantom,
)
from .sequence import (
    MODES,
    ORDERINGS,
    FIDELITIES,
    SP_IDS,
    AcquisitionConfig,
    AcquisitionSet,
    EchoTrainConfig,
    PRESETS,
    simulate_acquisition_set,
)
from .volume import ComplexVolume, Grid, LineSpec, RealVolume, load_volume, render_slice, save_volume, write_pgm

SCHEMA_VERSION = 1
DEFAULT_SEED = 20240815


# ---------------------------------------------------------------------------
# config document


def default_config(grid: Grid | None = None) -> dict:
    """Complete default experiment document, fully explicit and diffable."""
    pspec = default_phantom_spec(grid)
    fspec = default_field_spec(pspec.grid)
    g = pspec.grid
    return {
        "schema_version": SCHEMA_VERSION,
        "seed": DEFAULT_SEED,
        "output_dir": "bogatse-out",
        "convention": "ratio",
        "fidelity": "model-exact",
        "noise_sigma": 0.005,
        "presets": ["tse50", "tse100"],
        "grid": {"nx": g.nx, "ny": g.ny, "nz": g.nz, "dx": g.dx, "dy": g.dy, "dz": g.dz},
        "phantom": {
            "background": pspec.background,
            "seed": pspec.seed,
            "tissues": [
                {"name": t.name, "t1_ms": t.t1_ms, "t2_ms": t.t2_ms, "pd": t.pd}
                for t in pspec.tissues
            ],
            "primitives": [
                {
                    "center": list(p.center),
                    "semi_axes": list(p.semi_axes),
                    "tissue": p.tissue,
                }
                for p in pspec.primitives
            ],
        },
        "fields": {
            "depth": fspec.depth,
            "phase_roll": list(fspec.phase_roll),
            "mode2_phase_offset": fspec.mode2_phase_offset,
            "perturbation": fspec.perturbation,
            "hole_center": list(fspec.hole_center),
            "hole_radius_mm": fspec.hole_radius_mm,
            "hole_floor": fspec.hole_floor,
            "seed": fspec.seed,
        },
        "echo_train": {
            "echo_spacing_ms": 8.0,
            "ordering": "auto",
            "n_ky": None,
            "decay_reference_ms": 0.0,
        },
        "sequence": {
            "flip_deg": 90.0,
            "refocus_deg": 60.0,
            "nominal_amplitude": None,
        },
        "analysis": {
            "display_mask_fraction": 2e-4,
            "denominator_floor_rel": 1e-6,
        },
    }


def _require(d: dict, key: str, path: str):
    if key not in d:
        full = f"{path}.{key}" if path else key
        raise ConfigError(f"missing config key: {full}")
    return d[key]


def _no_extras(d: dict, allowed, path: str):
    extras = sorted(set(d) - set(allowed))
    if extras:
        full = f"{path}.{extras[0]}" if path else extras[0]
        raise ConfigError(f"unknown config key: {full}")


def _number(d: dict, key: str, path: str) -> float:
    v = _require(d, key, path)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"config key {path}.{key} must be a number")
    return float(v)


def _integer(d: dict, key: str, path: str) -> int:
    v = _require(d, key, path)
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"config key {path}.{key} must be an integer")
    return v


def _string(d: dict, key: str, path: str, choices=None) -> str:
    v = _require(d, key, path)
    if not isinstance(v, str):
        raise ConfigError(f"config key {path}.{key} must be a string")
    if choices is not None and v not in choices:
        raise ConfigError(
            f"config key {path}.{key} must be one of {sorted(choices)}, got {v!r}"
        )
    return v


def _triple(d: dict, key: str, path: str) -> tuple[float, float, float]:
    v = _require(d, key, path)
    if not (isinstance(v, list) and len(v) == 3):
        raise ConfigError(f"config key {path}.{key} must be a list of 3 numbers")
    for item in v:
        if isinstance(item, bool) or not isinstance(item, (int, float)):
            raise ConfigError(f"config key {path}.{key} must be a list of 3 numbers")
    return (float(v[0]), float(v[1]), float(v[2]))


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """Validated, resolved form of the experiment document."""

    document: dict
    grid: Grid
    phantom_spec: PhantomSpec
    field_spec: FieldSpec
    preset_names: tuple[str, ...]
    fidelity: str
    noise_sigma: float
    seed: int
    convention: str
    output_dir: str
    echo_spacing_ms: float
    ordering: str
    n_ky: int | None
    decay_reference_ms: float
    flip_deg: float
    refocus_deg: float
    nominal_amplitude: float | None
    display_mask_fraction: float
    floor_rel: float

    def manifest_document(self) -> dict:
        """Config echo for the manifest; output location is environment,
        not experiment, so it is excluded."""
        doc = json.loads(json.dumps(self.document))
        doc.pop("output_dir", None)
        return doc


def config_from_dict(doc: dict) -> ExperimentConfig:
    """Validate a raw config document; errors name the dotted key path."""
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    top_keys = (
        "schema_version", "seed", "output_dir", "convention", "fidelity",
        "noise_sigma", "presets", "grid", "phantom", "fields", "echo_train",
        "sequence", "analysis",
    )
    _no_extras(doc, top_keys, "")
    version = _integer(doc, "schema_version", "")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version}, expected {SCHEMA_VERSION}")
    seed = _integer(doc, "seed", "")
    output_dir = _string(doc, "output_dir", "")
    convention = _string(doc, "convention", "", choices=CONVENTIONS)
    fidelity = _string(doc, "fidelity", "", choices=FIDELITIES)
    sigma = _number(doc, "noise_sigma", "")
    if sigma < 0:
        raise ConfigError("config key noise_sigma must be >= 0")

    presets = _require(doc, "presets", "")
    if not (isinstance(presets, list) and presets):
        raise ConfigError("config key presets must be a non-empty list")
    for p in presets:
        if not isinstance(p, str) or p not in PRESETS:
            raise ConfigError(
                f"config key presets must name presets from {sorted(PRESETS)}, got {p!r}"
            )
    if len(set(presets)) != len(presets):
        raise ConfigError("config key presets lists a preset twice")

    gd = _require(doc, "grid", "")
    _no_extras(gd, ("nx", "ny", "nz", "dx", "dy", "dz"), "grid")
    try:
        grid = Grid(
            _integer(gd, "nx", "grid"), _integer(gd, "ny", "grid"),
            _integer(gd, "nz", "grid"), _number(gd, "dx", "grid"),
            _number(gd, "dy", "grid"), _number(gd, "dz", "grid"),
        )
    except ValueError as e:
        raise ConfigError(f"grid: {e}") from None

    ph = _require(doc, "phantom", "")
    _no_extras(ph, ("background", "seed", "tissues", "primitives"), "phantom")
    tissues_raw = _require(ph, "tissues", "phantom")
    if not isinstance(tissues_raw, list):
        raise ConfigError("config key phantom.tissues must be a list")
    tissues = []
    for i, td in enumerate(tissues_raw):
        p = f"phantom.tissues[{i}]"
        _no_extras(td, ("name", "t1_ms", "t2_ms", "pd"), p)
        try:
            tissues.append(
                TissueClass(
                    _string(td, "name", p), _number(td, "t1_ms", p),
                    _number(td, "t2_ms", p), _number(td, "pd", p),
                )
            )
        except ValueError as e:
            raise ConfigError(f"{p}: {e}") from None
    prims_raw = _require(ph, "primitives", "phantom")
    if not isinstance(prims_raw, list):
        raise ConfigError("config key phantom.primitives must be a list")
    prims = []
    for i, pd_ in enumerate(prims_raw):
        p = f"phantom.primitives[{i}]"
        _no_extras(pd_, ("center", "semi_axes", "tissue"), p)
        try:
            prims.append(
                Ellipsoid(
                    _triple(pd_, "center", p), _triple(pd_, "semi_axes", p),
                    _string(pd_, "tissue", p),
                )
            )
        except ValueError as e:
            raise ConfigError(f"{p}: {e}") from None
    try:
        phantom_spec = PhantomSpec(
            grid=grid,
            tissues=tuple(tissues),
            primitives=tuple(prims),
            background=_string(ph, "background", "phantom"),
            seed=_integer(ph, "seed", "phantom"),
        )
    except ValueError as e:
        raise ConfigError(f"phantom: {e}") from None

    fd = _require(doc, "fields", "")
    field_keys = (
        "depth", "phase_roll", "mode2_phase_offset", "perturbation",
        "hole_center", "hole_radius_mm", "hole_floor", "seed",
    )
    _no_extras(fd, field_keys, "fields")
    try:
        field_spec = FieldSpec(
            grid=grid,
            depth=_number(fd, "depth", "fields"),
            phase_roll=_triple(fd, "phase_roll", "fields"),
            mode2_phase_offset=_number(fd, "mode2_phase_offset", "fields"),
            perturbation=_number(fd, "perturbation", "fields"),
            hole_center=_triple(fd, "hole_center", "fields"),
            hole_radius_mm=_number(fd, "hole_radius_mm", "fields"),
            hole_floor=_number(fd, "hole_floor", "fields"),
            seed=_integer(fd, "seed", "fields"),
        )
    except ValueError as e:
        raise ConfigError(f"fields: {e}") from None

    et = _require(doc, "echo_train", "")
    _no_extras(et, ("echo_spacing_ms", "ordering", "n_ky", "decay_reference_ms"), "echo_train")
    spacing = _number(et, "echo_spacing_ms", "echo_train")
    ordering = _string(et, "ordering", "echo_train", choices=ORDERINGS)
    n_ky_raw = _require(et, "n_ky", "echo_train")
    if n_ky_raw is not None and (isinstance(n_ky_raw, bool) or not isinstance(n_ky_raw, int)):
        raise ConfigError("config key echo_train.n_ky must be an integer or null")
    decay_ref = _number(et, "decay_reference_ms", "echo_train")
    if spacing <= 0:
        raise ConfigError("config key echo_train.echo_spacing_ms must be > 0")

    sq = _require(doc, "sequence", "")
    _no_extras(sq, ("flip_deg", "refocus_deg", "nominal_amplitude"), "sequence")
    flip = _number(sq, "flip_deg", "sequence")
    refocus = _number(sq, "refocus_deg", "sequence")
    nominal_raw = _require(sq, "nominal_amplitude", "sequence")
    if nominal_raw is not None and (
        isinstance(nominal_raw, bool) or not isinstance(nominal_raw, (int, float))
    ):
        raise ConfigError("config key sequence.nominal_amplitude must be a number or null")

    an = _require(doc, "analysis", "")
    _no_extras(an, ("display_mask_fraction", "denominator_floor_rel"), "analysis")
    mask_fraction = _number(an, "display_mask_fraction", "analysis")
    floor_rel = _number(an, "denominator_floor_rel", "analysis")
    if not 0 < mask_fraction < 1:
        raise ConfigError("config key analysis.display_mask_fraction must lie in (0, 1)")
    if floor_rel <= 0:
        raise ConfigError("config key analysis.denominator_floor_rel must be > 0")

    try:
        AcquisitionConfig(fidelity=fidelity, flip_deg=flip, refocus_deg=refocus, sigma=sigma)
    except ValueError as e:
        raise ConfigError(f"sequence: {e}") from None

    return ExperimentConfig(
        document=doc,
        grid=grid,
        phantom_spec=phantom_spec,
        field_spec=field_spec,
        preset_names=tuple(presets),
        fidelity=fidelity,
        noise_sigma=sigma,
        seed=seed,
        convention=convention,
        output_dir=output_dir,
        echo_spacing_ms=spacing,
        ordering=ordering,
        n_ky=n_ky_raw,
        decay_reference_ms=decay_ref,
        flip_deg=flip,
        refocus_deg=refocus,
        nominal_amplitude=None if nominal_raw is None else float(nominal_raw),
        display_mask_fraction=mask_fraction,
        floor_rel=floor_rel,
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file is not valid JSON: {e}") from None
    return config_from_dict(doc)


def _write_json(path: Path, obj) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path


# ---------------------------------------------------------------------------
# stages


def _volume_paths(base: Path) -> list[Path]:
    return [base.with_name(base.name + ".vol.json"), base.with_name(base.name + ".vol.raw")]


def stage_phantom(cfg: ExperimentConfig, out: Path):
    """Generate the phantom and write its label volume + tissue table."""
    ph = generate_phantom(cfg.phantom_spec)
    base = out / "phantom" / "labels"
    save_volume(ph.labels_volume(), base)
    table = {
        "background": cfg.phantom_spec.background,
        "classes": [
            {"id": i, "name": t.name, "t1_ms": t.t1_ms, "t2_ms": t.t2_ms, "pd": t.pd}
            for i, t in enumerate(ph.classes)
        ],
    }
    paths = _volume_paths(base) + [_write_json(out / "phantom" / "tissues.json", table)]
    return ph, paths


def stage_fields(cfg: ExperimentConfig, out: Path):
    """Generate the mode fields and write them for inspection."""
    fset = generate_mode_fields(cfg.field_spec)
    paths = []
    for name, vol in (
        ("mode1", fset.h1), ("mode2", fset.h2), ("cp", fset.cp), ("envelope", fset.envelope),
    ):
        base = out / "fields" / name
        save_volume(vol, base)
        paths += _volume_paths(base)
    return fset, paths


def stage_simulate(cfg: ExperimentConfig, out: Path, preset_name: str, ph: Phantom, fset: FieldSet):
    """Simulate the nine acquisitions of one preset and write them."""
    preset = PRESETS[preset_name]
    acq_cfg = AcquisitionConfig(
        fidelity=cfg.fidelity,
        flip_deg=cfg.flip_deg,
        refocus_deg=cfg.refocus_deg,
        sigma=cfg.noise_sigma,
        seed=cfg.seed,
        nominal_amplitude=cfg.nominal_amplitude,
    )
    et = EchoTrainConfig(
        tse_factor=preset.tse_factor,
        echo_spacing_ms=cfg.echo_spacing_ms,
        ordering=cfg.ordering,
        n_ky=cfg.n_ky,
    )
    acq = simulate_acquisition_set(ph, fset, preset, acq_cfg, et, cfg.decay_reference_ms)
    paths = []
    for (mode, sp_id), vol in sorted(acq.images.items()):
        base = out / preset_name / "acq" / f"{mode}_{sp_id.lower()}"
        save_volume(vol, base)
        paths += _volume_paths(base)
    meta = {
        "preset": preset_name,
        "tse_factor": preset.tse_factor,
        "fidelity": cfg.fidelity,
        "noise_sigma": cfg.noise_sigma,
        "seed": cfg.seed,
        "echo_spacing_ms": cfg.echo_spacing_ms,
        "ordering": cfg.ordering,
        "grid": [cfg.grid.nx, cfg.grid.ny, cfg.grid.nz],
    }
    paths.append(_write_json(out / preset_name / "acq" / "meta.json", meta))
    return acq, paths


def load_acquisition_set(acq_dir) -> tuple[AcquisitionSet, dict]:
    """Rebuild an AcquisitionSet from a simulate-stage directory."""
    acq_dir = Path(acq_dir)
    meta_path = acq_dir / "meta.json"
    if not meta_path.exists():
        raise ConfigError(f"no acquisition metadata at {meta_path}")
    meta = json.loads(meta_path.read_text())
    images = {}
    for mode in MODES:
        for sp_id in SP_IDS:
            base = acq_dir / f"{mode}_{sp_id.lower()}"
            if not base.with_name(base.name + ".vol.json").exists():
                raise ConfigError(f"missing acquisition volume: {base}.vol.json")
            vol = load_volume(base)
            if not isinstance(vol, ComplexVolume):
                raise ConfigError(f"acquisition volume {base} is not complex")
            images[(mode, sp_id)] = vol
    return AcquisitionSet(images=images, tse_factor=int(meta["tse_factor"])), meta


def stage_combine(cfg: ExperimentConfig, out: Path, preset_name: str, acq: AcquisitionSet):
    """Reconstruct T1/T2/PD and write outputs plus their S1-S4 inputs."""
    recons = {}
    paths = []
    for kind in CONTRAST_KINDS:
        recon = reconstruct_contrast(acq, kind, cfg.convention, cfg.floor_rel)
        recons[kind] = recon
        base = out / preset_name / "recon" / kind
        save_volume(recon.image, base)
        paths += _volume_paths(base)
        mag_base = out / preset_name / "recon" / f"{kind}_mag"
        save_volume(recon.magnitude(), mag_base)
        paths += _volume_paths(mag_base)
        for label, vol in zip(("s1", "s2", "s3", "s4"), combination_inputs(acq, kind)):
            in_base = out / preset_name / "recon" / f"{kind}_{label}"
            save_volume(vol, in_base)
            paths += _volume_paths(in_base)
    return recons, paths


def _center_lines(grid: Grid) -> list[LineSpec]:
    cx, cy, cz = grid.nx // 2, grid.ny // 2, grid.nz // 2
    return [LineSpec("x", (cy, cz)), LineSpec("y", (cx, cz)), LineSpec("z", (cx, cy))]


def _render_window(v: RealVolume) -> tuple[float, float]:
    vals = v.data[v.valid]
    hi = float(np.percentile(vals, 99.5)) if vals.size else 0.0
    return (0.0, hi if hi > 0 else 1.0)


def stage_analyze(
    cfg: ExperimentConfig,
    out: Path,
    preset_name: str,
    ph: Phantom,
    acq: AcquisitionSet,
    recons: dict,
):
    """Profiles, SNR maps and stats, and masked slice renders."""
    paths = []
    adir = out / preset_name / "analysis"
    rdir = out / preset_name / "render"

    images = {f"boga_{kind}": recons[kind].magnitude() for kind in CONTRAST_KINDS}
    for sp_id in SP_IDS:
        cp = acq.get("cp", sp_id)
        images[f"cp_{sp_id.lower()}"] = RealVolume(cp.grid, np.abs(cp.data))

    lines = _center_lines(cfg.grid)
    for name, vol in sorted(images.items()):
        profiles = [normalized_profile(vol, line) for line in lines]
        p = adir / f"profiles_{name}.csv"
        write_profiles_csv(p, profiles)
        paths.append(p)

    # local-sigma SNR is meaningless on noiseless data (sigma = 0 everywhere
    # would flag the whole map invalid), so the stage only runs with noise
    if cfg.noise_sigma > 0:
        region_names = [t.name for t in ph.classes if t.pd > 0]
        rows = []
        for name, vol in sorted(images.items()):
            m = snr_map(vol, source=name)
            if name.startswith("cp_"):
                m = scale_cp_snr(m)
            base = adir / f"snr_{name}"
            save_volume(m.volume, base)
            paths += _volume_paths(base)
            for rn in region_names:
                rows.append((name, region_stats(m, ph.region_mask(rn), label=rn)))
        p = adir / "snr_stats.csv"
        write_stats_csv(p, rows)
        paths.append(p)

    iz = cfg.grid.nz // 2
    for name in [f"boga_{k}" for k in CONTRAST_KINDS] + ["cp_sp2"]:
        vol = images[name]
        mask = display_mask(vol, cfg.display_mask_fraction)
        img = render_slice(vol, "z", iz, _render_window(vol), mask)
        p = rdir / f"{name}_z{iz}.pgm"
        write_pgm(img, p)
        paths.append(p)
    return paths


# ---------------------------------------------------------------------------
# orchestration


@dataclass(frozen=True, eq=False)
class ReportBundle:
    """A finished run: output root, manifest, and its checksum."""

    out_dir: Path
    manifest: dict
    manifest_path: Path

    @property
    def checksum(self) -> str:
        return hashlib.sha256(self.manifest_path.read_bytes()).hexdigest()


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def run_experiment(cfg: ExperimentConfig, out_dir=None, strict_audit: bool = False) -> ReportBundle:
    """Run the full experiment and write a checksummed bundle.

    The convention audit always runs and lands in the bundle; with
    strict_audit a failed audit aborts the run.
    """
    out = Path(out_dir) if out_dir is not None else Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    audit = audit_conventions(floor_rel=cfg.floor_rel)
    if strict_audit:
        audit.require_pass()
    audit_path = out / "audit.txt"
    audit_path.write_text(audit.to_text())
    artifacts = [audit_path]

    artifacts.append(_write_json(out / "config.json", cfg.manifest_document()))

    ph, paths = stage_phantom(cfg, out)
    artifacts += paths
    fset, paths = stage_fields(cfg, out)
    artifacts += paths

    for preset_name in cfg.preset_names:
        acq, paths = stage_simulate(cfg, out, preset_name, ph, fset)
        artifacts += paths
        recons, paths = stage_combine(cfg, out, preset_name, acq)
        artifacts += paths
        artifacts += stage_analyze(cfg, out, preset_name, ph, acq, recons)

    entries = []
    for p in sorted(artifacts, key=lambda p: p.relative_to(out).as_posix()):
        rel = p.relative_to(out).as_posix()
        entries.append({"path": rel, "bytes": p.stat().st_size, "sha256": _sha256(p)})
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "config": cfg.manifest_document(),
        "convention_audit": {
            "default": audit.default_convention,
            "tolerance": audit.tolerance,
            "entries": {
                conv: {
                    "max_residual": e.max_residual,
                    "mean_residual": e.mean_residual,
                    "mean_offset": [e.mean_offset.real, e.mean_offset.imag],
                }
                for conv, e in audit.entries.items()
            },
        },
        "protocol_metadata": {
            name: dict(PRESETS[name].metadata) for name in cfg.preset_names
        },
        "artifacts": entries,
    }
    manifest_path = _write_json(out / "manifest.json", manifest)
    return ReportBundle(out_dir=out, manifest=manifest, manifest_path=manifest_path)
