"""Numerical laboratory for multivariate martingale central limit theorems.

Triangular-array condition statistics, the box-truncation operator, and the
stable AR(d) least-squares application, with seeded Monte Carlo checks.
"""

__version__ = "0.1.0"

from mdclt.errors import (
    AuditFailure,
    BucketTooSmall,
    ConfigError,
    GramSingular,
    MdcltError,
    NonConvergence,
    NotPd,
    NotPsd,
    SimulationOverflow,
    TooFewSamples,
    Unstable,
)

__all__ = [
    "__version__",
    "AuditFailure",
    "BucketTooSmall",
    "ConfigError",
    "GramSingular",
    "MdcltError",
    "NonConvergence",
    "NotPd",
    "NotPsd",
    "SimulationOverflow",
    "TooFewSamples",
    "Unstable",
]
