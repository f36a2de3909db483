"""Weighted square function and wave envelope experiments on the parabola."""

import json

from ._parasq import (
    ExperimentConfig,
    GridMeasure,
    GridSpec,
    ParasqError,
    Report,
    TorusField,
    estimate_memory_mb,
    experiment_names,
    fls_fit,
    kappa_max,
    lp_norm,
    make_weight,
    parseval_norm2,
    random_field,
    synthesize,
    verify_weighted_sq,
    zeta_lower,
    zeta_sufficient,
)
from ._parasq import run as _run


def run(experiment, **overrides):
    """Runs an experiment; keyword overrides use the configuration keys (R=[64, 256], weight="ball", ...)."""
    cfg = ExperimentConfig()
    cfg.experiment = experiment
    for key, value in overrides.items():
        if isinstance(value, (list, tuple)):
            value = ",".join(str(v) for v in value)
        elif isinstance(value, bool):
            value = "true" if value else "false"
        cfg.set(key, str(value))
    return _run(cfg)


def report_dict(report):
    """The report as parsed JSON."""
    return json.loads(report.to_json())


__all__ = [
    "ExperimentConfig", "GridMeasure", "GridSpec", "ParasqError", "Report", "TorusField",
    "estimate_memory_mb", "experiment_names", "fls_fit", "kappa_max", "lp_norm", "make_weight",
    "parseval_norm2", "random_field", "report_dict", "run", "synthesize", "verify_weighted_sq",
    "zeta_lower", "zeta_sufficient",
]
