"""Simulation and verification of quantum threshold search and its applications."""
from .errors import (
    Ambiguous,
    DimensionMismatch,
    InvalidInput,
    OverBudget,
    PreconditionError,
    QDAError,
    ResourceCapExceeded,
    UnsupportedBackend,
    ZeroProbabilityError,
)

from . import (
    classical_stats,
    harness,
    hypothesis_selection,
    noisy_threshold,
    quantum_core,
    shadow_tomography,
    threshold_decision,
    threshold_search,
)

__version__ = "0.1.0"
