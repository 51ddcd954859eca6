"""Renormalization laboratory for critical circle maps."""
__version__ = "0.1.0"

from .fitting import FitError, FitResult, linear_fit
from .maps import DomainError, Family, MapSpec
from .rotation import ContinuedFraction, GOLDEN, SILVER, tuned_map

__all__ = ["ContinuedFraction", "DomainError", "Family", "FitError", "FitResult", "GOLDEN",
           "MapSpec", "SILVER", "linear_fit", "tuned_map", "__version__"]
