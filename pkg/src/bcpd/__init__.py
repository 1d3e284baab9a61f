"""Border-collision / period-doubling analysis of piecewise-smooth continuous maps."""

__version__ = "0.1.0"

from .errors import (BcpdError, ConfigurationError, ContinuityError, DegeneracyError,
                     NumericalError, PreconditionsNotMet)
from .pws_map import PwsMap, fig2_map, load_map, pdmapex_map, resolve_map

__all__ = [
    "__version__",
    "BcpdError",
    "ConfigurationError",
    "ContinuityError",
    "DegeneracyError",
    "NumericalError",
    "PreconditionsNotMet",
    "PwsMap",
    "fig2_map",
    "load_map",
    "pdmapex_map",
    "resolve_map",
]
