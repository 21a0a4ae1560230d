"""Exception hierarchy shared by all modules."""


class MdcltError(Exception):
    """Base class for every error raised by the package."""


class NonConvergence(MdcltError):
    """An iterative method did not certify its tolerance within budget."""


class NotPsd(MdcltError):
    """A matrix expected to be positive semidefinite has a negative eigenvalue."""


class NotPd(MdcltError):
    """Cholesky factorisation failed where positive definiteness is required."""


class Unstable(MdcltError):
    """The companion matrix has spectral radius >= 1."""

    def __init__(self, rho: float, message: str | None = None):
        self.rho = rho
        super().__init__(message or f"model is not stable: spectral radius {rho:.12g} >= 1")


class SimulationOverflow(MdcltError):
    """A simulated path left the representable range (|Y_k| > 1e300)."""

    def __init__(self, message: str, replication: int | None = None):
        self.replication = replication
        if replication is not None:
            message = f"replication {replication}: {message}"
        super().__init__(message)


class GramSingular(MdcltError):
    """The Gram matrix of the regressors is not positive definite."""


class AuditFailure(MdcltError):
    """A pointwise inequality from the audit was violated."""

    def __init__(self, check: str, k: int | None, detail: str = ""):
        self.check = check
        self.k = k
        where = f" at k={k}" if k is not None else ""
        super().__init__(f"audit check {check} violated{where}{': ' + detail if detail else ''}")


class TooFewSamples(MdcltError):
    """A statistical test received fewer observations than it needs."""


class BucketTooSmall(MdcltError):
    """A conditioning bucket in the mixing test has too few samples."""


class ConfigError(MdcltError):
    """Experiment configuration failed validation."""
