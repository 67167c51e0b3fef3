import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from bogatse.combine import audit_conventions
from bogatse.errors import ConfigError, ConventionAuditError
from bogatse.pipeline import (
    DEFAULT_SEED,
    SCHEMA_VERSION,
    config_from_dict,
    default_config,
    load_acquisition_set,
    load_config,
    run_experiment,
    stage_fields,
    stage_phantom,
    stage_simulate,
)
from bogatse.volume import Grid
import bogatse.pipeline as pipeline_mod


def test_default_config_resolves():
    cfg = config_from_dict(default_config())
    assert cfg.grid == Grid(64, 64, 64, 3.0, 3.0, 3.0)
    assert cfg.preset_names == ("tse50", "tse100")
    assert cfg.convention == "ratio"
    assert cfg.fidelity == "model-exact"
    assert cfg.seed == DEFAULT_SEED
    assert cfg.noise_sigma == 0.005
    assert cfg.floor_rel == 1e-6
    assert cfg.n_ky is None and cfg.nominal_amplitude is None
    assert cfg.document["schema_version"] == SCHEMA_VERSION


def test_default_config_honors_grid():
    g = Grid(16, 20, 24, 2.0, 2.0, 2.0)
    cfg = config_from_dict(default_config(g))
    assert cfg.grid == g
    assert cfg.phantom_spec.grid == g and cfg.field_spec.grid == g


def test_config_must_be_object():
    with pytest.raises(ConfigError, match="JSON object"):
        config_from_dict(["not", "a", "dict"])


def test_missing_nested_key_names_dotted_path(small_doc):
    del small_doc["fields"]["seed"]
    with pytest.raises(ConfigError, match="missing config key: fields.seed"):
        config_from_dict(small_doc)


def test_unknown_keys_rejected(small_doc):
    doc = json.loads(json.dumps(small_doc))
    doc["extra_knob"] = 1
    with pytest.raises(ConfigError, match="unknown config key: extra_knob"):
        config_from_dict(doc)
    doc = json.loads(json.dumps(small_doc))
    doc["fields"]["bogus"] = 1
    with pytest.raises(ConfigError, match="unknown config key: fields.bogus"):
        config_from_dict(doc)


def test_schema_version_checked(small_doc):
    small_doc["schema_version"] = 2
    with pytest.raises(ConfigError, match="unsupported schema_version 2"):
        config_from_dict(small_doc)


@pytest.mark.parametrize(
    "mutate, fragment",
    [
        (lambda d: d.__setitem__("seed", "abc"), "must be an integer"),
        (lambda d: d.__setitem__("noise_sigma", True), "must be a number"),
        (lambda d: d.__setitem__("noise_sigma", -0.1), "must be >= 0"),
        (lambda d: d.__setitem__("convention", "median"), "must be one of"),
        (lambda d: d.__setitem__("presets", []), "non-empty"),
        (lambda d: d.__setitem__("presets", ["tse999"]), "must name presets"),
        (lambda d: d.__setitem__("presets", ["tse50", "tse50"]), "twice"),
        (lambda d: d["grid"].__setitem__("nx", 0), "grid:"),
        (lambda d: d["fields"].__setitem__("phase_roll", [1.0, 2.0]), "list of 3 numbers"),
        (lambda d: d["echo_train"].__setitem__("echo_spacing_ms", 0.0), "must be > 0"),
        (lambda d: d["echo_train"].__setitem__("n_ky", 3.5), "integer or null"),
        (lambda d: d["sequence"].__setitem__("nominal_amplitude", "one"), "number or null"),
        (lambda d: d["analysis"].__setitem__("display_mask_fraction", 0.0), "lie in"),
        (lambda d: d["analysis"].__setitem__("denominator_floor_rel", 0.0), "must be > 0"),
        (lambda d: d["phantom"]["tissues"][1].__setitem__("t1_ms", -5.0), "phantom.tissues"),
        (lambda d: d["phantom"]["primitives"][0].__setitem__("tissue", "jelly"), "phantom"),
    ],
)
def test_invalid_values_name_offender(small_doc, mutate, fragment):
    mutate(small_doc)
    with pytest.raises(ConfigError, match=fragment):
        config_from_dict(small_doc)


def test_load_config_file(tmp_path, small_doc):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(small_doc))
    cfg = load_config(path)
    assert cfg.grid.nx == 24
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "nope.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_config(bad)


def test_acquisition_set_roundtrip(tmp_path, small_doc):
    cfg = config_from_dict(small_doc)
    out = tmp_path / "run"
    ph, _ = stage_phantom(cfg, out)
    fset, _ = stage_fields(cfg, out)
    acq, _ = stage_simulate(cfg, out, "tse50", ph, fset)
    loaded, meta = load_acquisition_set(out / "tse50" / "acq")
    assert meta["tse_factor"] == 50 and meta["preset"] == "tse50"
    assert loaded.tse_factor == 50
    assert set(loaded.images) == set(acq.images)
    for key, vol in acq.images.items():
        # containers store complex64, so compare at that precision
        want = vol.data.astype(np.complex64)
        np.testing.assert_array_equal(loaded.images[key].data.astype(np.complex64), want)


def test_load_acquisition_set_missing_pieces(tmp_path):
    with pytest.raises(ConfigError, match="no acquisition metadata"):
        load_acquisition_set(tmp_path)
    (tmp_path / "meta.json").write_text(json.dumps({"tse_factor": 50}))
    with pytest.raises(ConfigError, match="missing acquisition volume"):
        load_acquisition_set(tmp_path)


def _checksum_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def test_run_experiment_bundle(tmp_path, small_doc):
    cfg = config_from_dict(small_doc)
    bundle = run_experiment(cfg, tmp_path / "a")
    manifest = bundle.manifest

    assert "output_dir" not in manifest["config"]
    assert manifest["convention_audit"]["default"] == "ratio"
    assert set(manifest["protocol_metadata"]) == {"tse50", "tse100"}

    rels = [e["path"] for e in manifest["artifacts"]]
    assert rels == sorted(rels)
    assert len(rels) == len(set(rels))
    for e in manifest["artifacts"]:
        p = bundle.out_dir / e["path"]
        assert p.is_file(), e["path"]
        assert p.stat().st_size == e["bytes"]
        assert _checksum_file(p) == e["sha256"]

    # nothing on disk escapes the manifest
    on_disk = {
        p.relative_to(bundle.out_dir).as_posix()
        for p in bundle.out_dir.rglob("*")
        if p.is_file()
    }
    assert on_disk == set(rels) | {"manifest.json"}

    # noise is on by default, so SNR outputs must be present
    assert any(r.endswith("snr_stats.csv") for r in rels)
    assert any(r.endswith(".pgm") for r in rels)


def test_run_experiment_deterministic(tmp_path, small_doc):
    cfg = config_from_dict(small_doc)
    b1 = run_experiment(cfg, tmp_path / "a")
    b2 = run_experiment(cfg, tmp_path / "b")
    assert b1.checksum == b2.checksum
    assert b1.manifest_path.read_bytes() == b2.manifest_path.read_bytes()


def test_run_experiment_skips_snr_without_noise(tmp_path, small_doc):
    small_doc["noise_sigma"] = 0.0
    cfg = config_from_dict(small_doc)
    bundle = run_experiment(cfg, tmp_path / "quiet")
    rels = [e["path"] for e in bundle.manifest["artifacts"]]
    assert not any("snr" in r for r in rels)
    assert any(r.endswith("profiles_boga_t2.csv") for r in rels)


def test_strict_audit_aborts_on_failure(tmp_path, small_doc, monkeypatch):
    def failing_audit(**kwargs):
        return audit_conventions(grid=Grid(8, 8, 8), n_pairs=2, tolerance=1e-30)

    monkeypatch.setattr(pipeline_mod, "audit_conventions", failing_audit)
    cfg = config_from_dict(small_doc)
    with pytest.raises(ConventionAuditError):
        run_experiment(cfg, tmp_path / "strict", strict_audit=True)
    # non-strict run records the failure but still completes
    bundle = run_experiment(cfg, tmp_path / "lenient")
    assert bundle.manifest["convention_audit"]["default"] is None
