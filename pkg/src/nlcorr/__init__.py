"""Two-time correlation experiments for spin-1/2 pairs with nonlinear, locally
extended Schrödinger dynamics."""

from .dynamics import DetectionSchedule, evolve_closed, evolve_open
from .errors import NlcorrError, NumericalError, UndefinedConditionalError, ValidationError
from .measure import JointSpec, ProbabilityTable
from .scenario import ExperimentConfig, TimeSeries

__version__ = "0.1.0"
