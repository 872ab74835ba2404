"""
Nonstationary ETAS modelling

Fitting, change-point testing, penalized-likelihood anomaly factors,
ABIC model selection and thinning simulation for temporal ETAS models.
"""

__version__ = "0.1.0"
__description__ = "Stationary and nonstationary ETAS point-process modelling"

from nsetas.config.settings import get_settings
from nsetas.core.exceptions import NsetasError

__all__ = [
    "__version__",
    "get_settings",
    "NsetasError",
]
