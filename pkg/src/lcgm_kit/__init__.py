"""lcgm-kit: finite kernel algebra, Blackwell ordering, identifiability checks."""

__version__ = "0.1.0"

from .errors import (
    DegenerateColumn,
    DomainMismatch,
    EnumerationBoundExceeded,
    InvalidModel,
    InvalidSystem,
    InvalidTransition,
    InvariantViolation,
    LcgmError,
    NotInvertible,
    PreconditionFailed,
    RankDeficient,
)
from .kernel_algebra import (
    LCGM,
    FiniteDistribution,
    StochasticKernel,
    ae_equal,
    compose,
    dist_equal,
    feature_distribution,
    posterior,
    pushforward,
    support,
)
from .numeric import EXACT, NumericMode, float_mode

__all__ = [
    "LCGM",
    "FiniteDistribution",
    "StochasticKernel",
    "NumericMode",
    "EXACT",
    "float_mode",
    "pushforward",
    "compose",
    "posterior",
    "ae_equal",
    "support",
    "dist_equal",
    "feature_distribution",
    "LcgmError",
    "InvalidModel",
    "InvalidSystem",
    "InvalidTransition",
    "InvariantViolation",
    "DomainMismatch",
    "DegenerateColumn",
    "EnumerationBoundExceeded",
    "NotInvertible",
    "PreconditionFailed",
    "RankDeficient",
]
