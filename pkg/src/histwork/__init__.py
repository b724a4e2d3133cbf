"""Work distributions for unitarily driven finite-dimensional quantum systems.

Four distributions are available for a discretized protocol and an initial
state: the histories quasi-probability, the distribution under continuous
measurement of the power operator, the two-point-measurement distribution
and the Margenau-Hill quasi-probability.
"""

from .config import RunSettings, build_run, load_config, parse_protocol_config
from .distributions import *  # noqa: F401,F403
from .distributions import __all__ as _dist_all
from .errors import (
    ConfigError,
    DegeneracyError,
    DomainError,
    HistworkError,
    NumericalError,
    RegressionError,
    ResourceError,
    ShapeError,
)
from .operators import *  # noqa: F401,F403
from .operators import __all__ as _ops_all
from .protocol import *  # noqa: F401,F403
from .protocol import __all__ as _proto_all
from .trajectories import (
    DEFAULT_CAP,
    EnumerationGuard,
    TrajectoryTable,
    amplitude,
    class_operator,
    endpoint_decomposition,
    enumerate_trajectories,
    linear_weight,
    measured_weight,
    merged_table,
    reverse_measured_weight,
    reverse_weight,
    trajectory_table,
    work_value,
)

__version__ = "0.1.0"

__all__ = [
    *_ops_all,
    *_proto_all,
    *_dist_all,
    "RunSettings",
    "build_run",
    "load_config",
    "parse_protocol_config",
    "ConfigError",
    "DegeneracyError",
    "DomainError",
    "HistworkError",
    "NumericalError",
    "RegressionError",
    "ResourceError",
    "ShapeError",
    "DEFAULT_CAP",
    "EnumerationGuard",
    "TrajectoryTable",
    "amplitude",
    "class_operator",
    "endpoint_decomposition",
    "enumerate_trajectories",
    "linear_weight",
    "measured_weight",
    "merged_table",
    "reverse_measured_weight",
    "reverse_weight",
    "trajectory_table",
    "work_value",
]
