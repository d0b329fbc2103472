"""Grey-box RC thermal model identification for houses."""

from ._greybox import (
    GreyboxError,
    __version__,
    aggregate_phvac,
    assemble,
    default_sm4_truth,
    discretize,
    disturbance_labels,
    estimate,
    hvac_power,
    mape,
    parameter_names,
    reactive_power,
    run_cli,
    simulate,
    to_aggregates,
)

__all__ = [
    "GreyboxError",
    "__version__",
    "aggregate_phvac",
    "assemble",
    "default_sm4_truth",
    "discretize",
    "disturbance_labels",
    "estimate",
    "hvac_power",
    "mape",
    "parameter_names",
    "reactive_power",
    "run_cli",
    "simulate",
    "to_aggregates",
]
