"""Simulation and stationarity diagnostics for the p-order cloud model."""

__version__ = "0.1.0"

from .cloud import CloudParams, DropBatch, gen_drop_def1, gen_drop_def2, gen_drops, validate
from .errors import (
    CloudSREError,
    DegenerateSampleError,
    DivergenceError,
    DomainError,
    NonSummableError,
    NumericAnomalyError,
    QuadratureError,
)
from .noise import FixedNoise, NoiseStream, new_stream
from .special_fn import expected_log_abs_std_normal, log_moment_quadrature
from .sre import (
    AR1B,
    CloudB,
    CoeffProcess,
    ConstA,
    ConstB,
    GaussianA,
    GaussianB,
    ResampleB,
    dominating_sequence,
    iterate_abs,
    iterate_linear,
    partial_solution,
    series_solution,
)

__all__ = [
    "AR1B",
    "CloudB",
    "CloudParams",
    "CloudSREError",
    "CoeffProcess",
    "ConstA",
    "ConstB",
    "DegenerateSampleError",
    "DivergenceError",
    "DomainError",
    "DropBatch",
    "FixedNoise",
    "GaussianA",
    "GaussianB",
    "NoiseStream",
    "NonSummableError",
    "NumericAnomalyError",
    "QuadratureError",
    "ResampleB",
    "dominating_sequence",
    "expected_log_abs_std_normal",
    "gen_drop_def1",
    "gen_drop_def2",
    "gen_drops",
    "iterate_abs",
    "iterate_linear",
    "log_moment_quadrature",
    "new_stream",
    "partial_solution",
    "series_solution",
    "validate",
]
