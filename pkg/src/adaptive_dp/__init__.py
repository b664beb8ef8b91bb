"""Fully adaptive differential-privacy accounting: filters, odometers,
worst-case mechanism simulators and a Monte-Carlo coverage harness."""

from .core import (
    CompositionState,
    EpsDelta,
    FilterConfig,
    PrivacyError,
    PrivacySpend,
    SpendKind,
    append_spend,
    compose,
)
from .filters import (
    FilterDecision,
    advanced_composition,
    filter_admits,
    filter_threshold,
    remaining_v,
    stopping_time,
    y_star,
)
from .odometers import Family, OdometerSpec, OdometerValue, odometer_value, odometer_values
from .mechanisms import Constant, FrontLoaded, Mechanism, SignAdaptive
from .montecarlo import ExperimentConfig, run_experiment
from .report import CoverageReport

__all__ = [
    "CompositionState",
    "Constant",
    "CoverageReport",
    "EpsDelta",
    "ExperimentConfig",
    "Family",
    "FilterConfig",
    "FilterDecision",
    "FrontLoaded",
    "Mechanism",
    "OdometerSpec",
    "OdometerValue",
    "PrivacyError",
    "PrivacySpend",
    "SignAdaptive",
    "SpendKind",
    "advanced_composition",
    "append_spend",
    "compose",
    "filter_admits",
    "filter_threshold",
    "odometer_value",
    "odometer_values",
    "remaining_v",
    "run_experiment",
    "stopping_time",
    "y_star",
]
