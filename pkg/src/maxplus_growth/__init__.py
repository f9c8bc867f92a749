"""Max-plus linear algebra and growth-rate bounds for stochastic max-plus systems."""

from .algebra import (
    EPS,
    MaxPlusMatrix,
    conjugate,
    format_matrix,
    mat_oplus,
    mat_otimes,
    mat_pow,
    norm,
    oplus,
    otimes,
    parse_matrix,
    rowmax,
    sinv,
    spectral_radius,
    spow,
    trace,
)
from .models import MatrixModel, SeedSpec, paper_test_model, sample_chain, sample_matrix

__all__ = [
    "EPS",
    "MaxPlusMatrix",
    "MatrixModel",
    "SeedSpec",
    "conjugate",
    "format_matrix",
    "mat_oplus",
    "mat_otimes",
    "mat_pow",
    "norm",
    "oplus",
    "otimes",
    "paper_test_model",
    "parse_matrix",
    "rowmax",
    "sample_chain",
    "sample_matrix",
    "sinv",
    "spectral_radius",
    "spow",
    "trace",
]

__version__ = "0.1.0"
