"""Estimators that exploit the known probability of every sampled outcome."""

from .sample_space import (
    DiscreteDistribution,
    Draw,
    EstimateReport,
    Event,
    InsufficientDataError,
    NoInformationError,
    ProbabilitySample,
    SampleError,
    event_split,
    observed_set,
)

__version__ = "0.1.0"
