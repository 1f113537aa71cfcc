"""Simulation and tail analysis of exponential functionals of two-state
regime-switching jump diffusions.

The package simulates paths of a two-state regime-switching additive
process, samples its exponential functionals, classifies their
convergence, computes the light-tail (Cramér) exponent from the leading
eigenvalue of the transform matrix, and checks the heavy-tail asymptotics
against sampled data.
"""

from .model import (
    Deterministic,
    ExpNegative,
    ExpPositive,
    Gaussian,
    JumpLaw,
    Laplace,
    LevyLaw,
    LogNormal,
    MapModel,
    MatrixExponent,
    ParetoPositive,
    TailClass,
    UNDEFINED,
    drift_K,
    is_degenerate,
    laplace_exponent,
    matrix_exponent,
    mgf,
    semigroup_entry,
)
from .modelfile import format_model, load_model, parse_model, save_model
from .sim import (
    DIVERGED,
    CyclePack,
    SimConfig,
    sample_A_inf,
    sample_AB_batch,
    sample_B_inf,
    sample_cycle,
    sample_path,
    sample_segment,
    sample_xi_T2,
)
from .stats import SampleSet

__version__ = "0.1.0"

__all__ = [
    "Deterministic",
    "ExpNegative",
    "ExpPositive",
    "Gaussian",
    "JumpLaw",
    "Laplace",
    "LevyLaw",
    "LogNormal",
    "MapModel",
    "MatrixExponent",
    "ParetoPositive",
    "TailClass",
    "UNDEFINED",
    "DIVERGED",
    "CyclePack",
    "SimConfig",
    "SampleSet",
    "drift_K",
    "is_degenerate",
    "laplace_exponent",
    "matrix_exponent",
    "mgf",
    "semigroup_entry",
    "format_model",
    "load_model",
    "parse_model",
    "save_model",
    "sample_A_inf",
    "sample_AB_batch",
    "sample_B_inf",
    "sample_cycle",
    "sample_path",
    "sample_segment",
    "sample_xi_T2",
    "__version__",
]
