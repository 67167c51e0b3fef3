"""Bilateral two-mode TSE simulation and field-corrected reconstruction.

The package simulates turbo-spin-echo acquisitions of a digital phantom
under two complementary transmit/receive mode fields, combines the four
images per contrast into a field-free ratio, and ships the analysis used
to check that the combination actually removes the fields.
"""

from .analysis import (
    ProfileSeries,
    RegionStats,
    SNRMap,
    box_mean,
    coefficient_of_variation,
    display_mask,
    format_mean_std,
    normalized_profile,
    region_stats,
    scale_cp_snr,
    snr_map,
)
from .combine import (
    CONTRAST_KINDS,
    CONVENTIONS,
    CombinedImage,
    ContrastImage,
    ConventionAudit,
    VirtualChannelPair,
    audit_conventions,
    boga_combine,
    combination_inputs,
    derive_virtual_channels,
    reconstruct_contrast,
)
from .errors import (
    AlreadyScaledError,
    BogatseError,
    ConfigError,
    ConventionAuditError,
    DimMismatchError,
    EmptyRegionError,
    NonFiniteSampleError,
    TruncatedPayloadError,
    UnknownDtypeError,
    ZeroMeanProfileError,
)
from .fields import (
    FieldSet,
    FieldSpec,
    default_field_spec,
    generate_mode_fields,
    hole_mask,
    random_field_pair,
)
from .phantom import (
    DEFAULT_TISSUES,
    Ellipsoid,
    Phantom,
    PhantomSpec,
    TissueClass,
    default_grid,
    default_phantom_spec,
    generate_phantom,
    lobe_center,
)
from .pipeline import (
    ExperimentConfig,
    ReportBundle,
    config_from_dict,
    default_config,
    load_config,
    run_experiment,
)
from .sequence import (
    FIDELITIES,
    MODES,
    ORDERINGS,
    PRESETS,
    SP_IDS,
    AcquisitionConfig,
    AcquisitionSet,
    EchoTrainConfig,
    ProtocolPreset,
    ScanParams,
    add_noise,
    apply_echo_train_filter,
    contrast_weight,
    derive_seed,
    echo_assignment,
    protocol_preset,
    simulate_acquisition,
    simulate_acquisition_set,
)
from .volume import (
    ComplexVolume,
    Grid,
    LineSpec,
    Mask,
    RealVolume,
    load_volume,
    render_slice,
    save_volume,
    write_pgm,
)

__version__ = "0.1.0"

__all__ = [
    "AcquisitionConfig",
    "AcquisitionSet",
    "AlreadyScaledError",
    "BogatseError",
    "CombinedImage",
    "ComplexVolume",
    "ConfigError",
    "CONTRAST_KINDS",
    "ContrastImage",
    "CONVENTIONS",
    "ConventionAudit",
    "ConventionAuditError",
    "DEFAULT_TISSUES",
    "DimMismatchError",
    "EchoTrainConfig",
    "Ellipsoid",
    "EmptyRegionError",
    "ExperimentConfig",
    "FIDELITIES",
    "FieldSet",
    "FieldSpec",
    "Grid",
    "LineSpec",
    "Mask",
    "MODES",
    "NonFiniteSampleError",
    "ORDERINGS",
    "PRESETS",
    "Phantom",
    "PhantomSpec",
    "ProfileSeries",
    "ProtocolPreset",
    "RealVolume",
    "RegionStats",
    "ReportBundle",
    "SNRMap",
    "SP_IDS",
    "ScanParams",
    "TissueClass",
    "TruncatedPayloadError",
    "UnknownDtypeError",
    "VirtualChannelPair",
    "ZeroMeanProfileError",
    "add_noise",
    "apply_echo_train_filter",
    "audit_conventions",
    "boga_combine",
    "box_mean",
    "coefficient_of_variation",
    "combination_inputs",
    "config_from_dict",
    "contrast_weight",
    "default_config",
    "default_field_spec",
    "default_grid",
    "default_phantom_spec",
    "derive_seed",
    "derive_virtual_channels",
    "display_mask",
    "echo_assignment",
    "format_mean_std",
    "generate_mode_fields",
    "generate_phantom",
    "hole_mask",
    "load_config",
    "load_volume",
    "lobe_center",
    "normalized_profile",
    "protocol_preset",
    "random_field_pair",
    "reconstruct_contrast",
    "region_stats",
    "render_slice",
    "run_experiment",
    "save_volume",
    "scale_cp_snr",
    "simulate_acquisition",
    "simulate_acquisition_set",
    "snr_map",
    "write_pgm",
]
