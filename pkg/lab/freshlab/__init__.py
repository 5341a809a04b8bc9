"""freshlab - cache freshness laboratory.

Analytical model, discrete-event simulator, policies and sketches for
keeping a cache-aside cache fresh under a staleness bound T.
"""

__version__ = "0.1.0"

from .errors import ConfigError, LabError, ParameterError
from .costs import CostProfileError
from .freshmodel import ModelError
from .workload import TraceFormatError, WorkloadError
from .sketch import SketchError
from .policies import PolicyConfigError
from .policies.opt import OracleError
from .simcore import MetricsError, SimulationError
from .pool import SweepPoolError

__all__ = [
    "ConfigError",
    "CostProfileError",
    "LabError",
    "MetricsError",
    "ModelError",
    "OracleError",
    "ParameterError",
    "PolicyConfigError",
    "SimulationError",
    "SketchError",
    "SweepPoolError",
    "TraceFormatError",
    "WorkloadError",
    "__version__",
]
