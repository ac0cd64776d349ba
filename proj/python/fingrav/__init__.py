"""Fine-grain GPU power profile reconstruction toolkit."""

from ._fingrav import (
    calibrate_read_delay,
    compute_ssp_executions,
    detect_warmup_count,
    fit_poly,
    golden_runs,
    loi_deficit,
    lookup_guidance,
    preset_config_json,
    preset_names,
    run_experiment_json,
)

__all__ = [
    "calibrate_read_delay",
    "compute_ssp_executions",
    "detect_warmup_count",
    "fit_poly",
    "golden_runs",
    "loi_deficit",
    "lookup_guidance",
    "preset_config_json",
    "preset_names",
    "run_experiment_json",
]

__version__ = "0.1.0"
