"""Command-line front end.

One subcommand per stage plus ``pipeline`` to run everything and ``audit``
to print the combination-convention report. Exit codes: 0 on success, 1 on
a configuration problem (message on stderr names the offending key), 2 when
the convention audit fails and the run required it to pass.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .combine import CONVENTIONS, audit_conventions, reconstruct_contrast
from .errors import BogatseError, ConfigError, ConventionAuditError
from .fields import generate_mode_fields
from .phantom import generate_phantom
from .pipeline import (
    ExperimentConfig,
    config_from_dict,
    default_config,
    load_acquisition_set,
    load_config,
    run_experiment,
    stage_analyze,
    stage_combine,
    stage_fields,
    stage_phantom,
    stage_simulate,
)
from .sequence import FIDELITIES, PRESETS
from .volume import Grid


def _load_doc(args) -> ExperimentConfig:
    if args.config:
        cfg = load_config(args.config)
        doc = dict(cfg.document)
    else:
        doc = default_config()
    if getattr(args, "seed", None) is not None:
        doc["seed"] = args.seed
    if getattr(args, "convention", None):
        doc["convention"] = args.convention
    if getattr(args, "fidelity", None):
        doc["fidelity"] = args.fidelity
    if getattr(args, "out", None):
        doc["output_dir"] = args.out
    if getattr(args, "preset", None):
        doc["presets"] = [args.preset]
    return config_from_dict(doc)


def _out_dir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_phantom(args) -> int:
    cfg = _load_doc(args)
    out = _out_dir(cfg)
    _, paths = stage_phantom(cfg, out)
    print(f"phantom: wrote {len(paths)} files under {out}")
    return 0


def _cmd_fields(args) -> int:
    cfg = _load_doc(args)
    out = _out_dir(cfg)
    _, paths = stage_fields(cfg, out)
    print(f"fields: wrote {len(paths)} files under {out}")
    return 0


def _cmd_simulate(args) -> int:
    cfg = _load_doc(args)
    out = _out_dir(cfg)
    ph = generate_phantom(cfg.phantom_spec)
    fset = generate_mode_fields(cfg.field_spec)
    for name in cfg.preset_names:
        _, paths = stage_simulate(cfg, out, name, ph, fset)
        print(f"simulate[{name}]: wrote {len(paths)} files under {out}")
    return 0


def _cmd_combine(args) -> int:
    cfg = _load_doc(args)
    out = _out_dir(cfg)
    for name in cfg.preset_names:
        acq_dir = out / name / "acq"
        try:
            acq, _ = load_acquisition_set(acq_dir)
        except ConfigError as e:
            raise ConfigError(f"{e} (run `bogatse simulate` first)") from None
        _, paths = stage_combine(cfg, out, name, acq)
        print(f"combine[{name}]: wrote {len(paths)} files under {out}")
    return 0


def _cmd_analyze(args) -> int:
    cfg = _load_doc(args)
    out = _out_dir(cfg)
    ph = generate_phantom(cfg.phantom_spec)
    for name in cfg.preset_names:
        acq_dir = out / name / "acq"
        try:
            acq, _ = load_acquisition_set(acq_dir)
        except ConfigError as e:
            raise ConfigError(f"{e} (run `bogatse simulate` first)") from None
        recons = {
            kind: reconstruct_contrast(acq, kind, cfg.convention, cfg.floor_rel)
            for kind in ("t1", "t2", "pd")
        }
        paths = stage_analyze(cfg, out, name, ph, acq, recons)
        print(f"analyze[{name}]: wrote {len(paths)} files under {out}")
    return 0


def _cmd_pipeline(args) -> int:
    if args.default_config:
        print(json.dumps(default_config(), indent=2, sort_keys=True))
        return 0
    cfg = _load_doc(args)
    bundle = run_experiment(cfg, strict_audit=args.strict)
    audit = bundle.manifest["convention_audit"]
    print(f"convention audit default: {audit['default'] or 'NONE (failed)'}")
    print(
        f"bundle written to {bundle.out_dir} "
        f"({len(bundle.manifest['artifacts'])} artifacts)"
    )
    print(f"manifest sha256: {bundle.checksum}")
    return 0


def _cmd_audit(args) -> int:
    audit = audit_conventions(
        grid=Grid(args.size, args.size, args.size),
        n_pairs=args.pairs,
        tolerance=args.tolerance,
    )
    print(audit.to_text(), end="")
    return 0 if audit.passed else 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bogatse",
        description=(
            "Simulate bilateral two-mode TSE acquisitions on a digital phantom "
            "and reconstruct field-corrected T1/T2/PD contrasts."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, preset=True):
        p.add_argument("--config", help="experiment config JSON (default: built-in defaults)")
        p.add_argument("--out", help="output directory (overrides config output_dir)")
        p.add_argument("--seed", type=int, help="override the top-level noise seed")
        p.add_argument(
            "--convention", choices=CONVENTIONS, help="override the combination convention"
        )
        p.add_argument(
            "--fidelity", choices=FIDELITIES, help="override the simulation fidelity"
        )
        if preset:
            p.add_argument(
                "--preset", choices=sorted(PRESETS),
                help="run a single preset instead of all configured ones",
            )

    p = sub.add_parser("phantom", help="generate the phantom and write its volumes")
    add_common(p, preset=False)
    p.set_defaults(func=_cmd_phantom)

    p = sub.add_parser("fields", help="generate the mode fields and write them")
    add_common(p, preset=False)
    p.set_defaults(func=_cmd_fields)

    p = sub.add_parser("simulate", help="simulate the nine acquisitions per preset")
    add_common(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser(
        "combine",
        help="reconstruct contrasts from acquisitions written by `simulate`",
    )
    add_common(p)
    p.set_defaults(func=_cmd_combine)

    p = sub.add_parser(
        "analyze",
        help="profiles, SNR stats, and renders from acquisitions written by `simulate`",
    )
    add_common(p)
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("pipeline", help="run every stage and write a checksummed bundle")
    add_common(p)
    p.add_argument(
        "--strict", action="store_true",
        help="fail (exit 2) when no combination convention passes the audit",
    )
    p.add_argument(
        "--default-config", action="store_true",
        help="print the complete default config JSON and exit",
    )
    p.set_defaults(func=_cmd_pipeline)

    p = sub.add_parser("audit", help="print the combination-convention audit report")
    p.add_argument("--pairs", type=int, default=10, help="number of random field pairs")
    p.add_argument("--size", type=int, default=32, help="cubic grid size for the audit")
    p.add_argument("--tolerance", type=float, default=1e-9, help="pass threshold")
    p.set_defaults(func=_cmd_audit)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except ConventionAuditError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except BogatseError as e:
        # schema-valid configs can still be geometrically inconsistent
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
