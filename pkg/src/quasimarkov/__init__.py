"""Spectral classification, conditional noise kernels and skew-product simulation
for stationary Gaussian noise."""
from .errors import NumericFailure, QuasiMarkovError, ValidationError
from .spectral import (
    CovarianceSequence,
    NoiseClassification,
    SpectralModel,
    Trilean,
    classify,
    covariance_from_spectrum,
    interpolation_variance,
    off_white_test,
    quasi_markov_test,
    szego_variance,
)
from .streams import SeedStreams

__version__ = "0.1.0"

__all__ = [
    "CovarianceSequence",
    "NoiseClassification",
    "NumericFailure",
    "QuasiMarkovError",
    "SeedStreams",
    "SpectralModel",
    "Trilean",
    "ValidationError",
    "classify",
    "covariance_from_spectrum",
    "interpolation_variance",
    "off_white_test",
    "quasi_markov_test",
    "szego_variance",
]
