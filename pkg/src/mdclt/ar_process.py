"""Stable AR(d) models: simulation, least squares and the limit covariance.

The state vector is U_k = (Y_k, ..., Y_{k-d+1}) and follows
U_k = B U_{k-1} + W_k with W_k = (Z_k, 0, ..., 0) and B the companion matrix.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from mdclt import matrix_core as mc
from mdclt.errors import GramSingular, SimulationOverflow, Unstable
from mdclt.innovations import InnovationSpec, mean_abs, sample_many
from mdclt.rng import LaneStreams, RngStream

OVERFLOW_LIMIT = 1e300


@dataclass(frozen=True)
class ArParams:
    theta: tuple[float, ...]

    def __post_init__(self):
        theta = tuple(float(t) for t in np.atleast_1d(np.asarray(self.theta, dtype=float)))
        if not theta:
            raise ValueError("AR order must be at least 1")
        if len(theta) > mc.MAX_DIM:
            raise ValueError(f"AR order {len(theta)} exceeds {mc.MAX_DIM}")
        if not all(math.isfinite(t) for t in theta):
            raise ValueError("theta must be finite")
        object.__setattr__(self, "theta", theta)

    @property
    def d(self) -> int:
        return len(self.theta)

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.theta)


@dataclass
class ArPath:
    """One simulated trajectory.

    ``y`` holds Y_{-d+1}, ..., Y_n (length n + d), ``u`` the states U_0..U_n
    (shape (n+1, d)) and ``z`` the innovations Z_1..Z_n.
    """

    n: int
    y: np.ndarray
    u: np.ndarray = field(repr=False)
    z: np.ndarray = field(repr=False)

    @property
    def d(self) -> int:
        return self.u.shape[1]

    @property
    def u0(self) -> np.ndarray:
        return self.u[0]

    def regressors(self) -> np.ndarray:
        """U_0, ..., U_{n-1} as rows."""
        return self.u[:-1]

    def responses(self) -> np.ndarray:
        """Y_1, ..., Y_n."""
        return self.y[self.d :]

    def prefix(self, m: int) -> ArPath:
        if not 1 <= m <= self.n:
            raise ValueError(f"prefix length {m} outside 1..{self.n}")
        return ArPath(m, self.y[: m + self.d], self.u[: m + 1], self.z[:m])


def companion(p: ArParams) -> np.ndarray:
    d = p.d
    b = np.zeros((d, d))
    b[0, :] = p.theta
    if d > 1:
        b[1:, : d - 1] = np.eye(d - 1)
    return b


def check_stable(p: ArParams, tol: float = 1e-10) -> float:
    rho = mc.spectral_radius(companion(p), tol=tol)
    if rho >= 1.0:
        raise Unstable(rho)
    return rho


# --------------------------------------------------------------------------
# simulation


def states_from_y(y: np.ndarray, d: int) -> np.ndarray:
    """U_k = (Y_k, ..., Y_{k-d+1}) for every k, from Y_{-d+1..n} (last axis)."""
    n = y.shape[-1] - d
    idx = (np.arange(n + 1)[:, None] + (d - 1)) - np.arange(d)[None, :]
    return y[..., idx]


def simulate_batch(p: ArParams, u0: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Y_{-d+1..n} for a batch of starts ``u0`` (R, d) and innovations ``z`` (R, n)."""
    theta = p.vector
    d = p.d
    u0 = np.atleast_2d(np.asarray(u0, dtype=float))
    z = np.atleast_2d(np.asarray(z, dtype=float))
    # Y_{-d+1..0} in time order is U_0 reversed
    past = u0[:, ::-1]
    # direct-form-II-transposed state: zi[i] = sum_{m=i+1..d} theta_m Y_{i+1-m}
    zi = np.zeros((u0.shape[0], d))
    for i in range(d):
        for m in range(i + 1, d + 1):
            zi[:, i] += theta[m - 1] * u0[:, m - i - 1]
    a = np.concatenate(([1.0], -theta))
    with np.errstate(over="ignore", invalid="ignore"):
        ys, _ = lfilter([1.0], a, z, axis=-1, zi=zi[:, :d])
    y = np.concatenate([past, ys], axis=1)
    bad = ~np.all(np.isfinite(y) & (np.abs(y) <= OVERFLOW_LIMIT), axis=1)
    if np.any(bad):
        raise SimulationOverflow(
            "|Y_k| exceeded 1e300; the model is not stable", replication=int(np.argmax(bad))
        )
    return y


def path_from_innovations(p: ArParams, u0, z) -> ArPath:
    """Deterministic core of :func:`simulate`; also the zero-noise test hook."""
    u0 = np.asarray(u0, dtype=float).reshape(-1)
    z = np.asarray(z, dtype=float).reshape(-1)
    if u0.shape[0] != p.d:
        raise ValueError(f"u0 must have {p.d} entries")
    if not np.all(np.isfinite(u0)):
        raise ValueError("u0 must be finite")
    if z.shape[0] < 1:
        raise ValueError("need n >= 1")
    y = simulate_batch(p, u0[None, :], z[None, :])[0]
    return ArPath(z.shape[0], y, states_from_y(y, p.d), z.copy())


def simulate(p: ArParams, spec: InnovationSpec, u0, n: int, rng: RngStream) -> ArPath:
    if n < 1:
        raise ValueError("need n >= 1")
    z = sample_many(spec, rng, n)
    return path_from_innovations(p, u0, z)


# --------------------------------------------------------------------------
# stationary start


def _ma_columns(b: np.ndarray, last: int) -> np.ndarray:
    """Rows B^j e_1 for j = 0..last."""
    d = b.shape[0]
    cols = np.empty((last + 1, d))
    c = np.zeros(d)
    c[0] = 1.0
    for j in range(last + 1):
        cols[j] = c
        c = b @ c
    return cols


@dataclass(frozen=True)
class StationaryPlan:
    """Moving-average weights for a stationary start, certified to ``tol``."""

    columns: np.ndarray
    tail_bound: float

    @property
    def terms(self) -> int:
        return self.columns.shape[0] - 1

    def draw(self, spec: InnovationSpec, rng: RngStream | LaneStreams) -> np.ndarray:
        # draws are Z_0, Z_{-1}, ..., Z_{-J} in that order
        z = sample_many(spec, rng, self.columns.shape[0])
        # explicit accumulation keeps one summation order for a single stream
        # and for a batch of lanes, so replays are bit-identical
        out = np.zeros(z.shape[:-1] + (self.columns.shape[1],))
        for j in range(self.columns.shape[0]):
            out += z[..., j, None] * self.columns[j]
        return out


def stationary_plan(p: ArParams, spec: InnovationSpec, tol: float) -> StationaryPlan:
    check_stable(p)
    b = companion(p)
    tail = mc.PowerTail(b)
    weight = mean_abs(spec)
    last = tail.first_certified(tol, p=1, weight=weight)
    return StationaryPlan(_ma_columns(b, last), weight * tail.tail_after(last, p=1))


def stationary_initial(p: ArParams, spec: InnovationSpec, tol: float, rng: RngStream) -> np.ndarray:
    """sum_{j=0..J} B^j W_{-j}; J is the first index whose certified tail
    sum_{j>J} ||B^j||_F E|Z| is below ``tol``.  Consumes J + 1 draws."""
    return stationary_plan(p, spec, tol).draw(spec, rng)


# --------------------------------------------------------------------------
# estimation


def gram(path: ArPath) -> np.ndarray:
    x = path.regressors()
    return x.T @ x


def score(path: ArPath) -> np.ndarray:
    """sum_k U_{k-1} Z_k."""
    return path.regressors().T @ path.z


def least_squares(path: ArPath) -> tuple[np.ndarray, bool]:
    """Least-squares estimate; the zero vector when the Gram matrix is singular."""
    g = gram(path)
    lower = mc.cholesky_pd(g)
    if lower is None:
        return np.zeros(path.d), False
    rhs = path.regressors().T @ path.responses()
    return mc.cholesky_solve(lower, rhs), True


@dataclass(frozen=True)
class SigmaResult:
    sigma: np.ndarray
    terms_used: int
    tail_bound: float
    head: np.ndarray


def sigma_series(p: ArParams, tol: float = 1e-13) -> SigmaResult:
    """Sigma(theta) = sum_j B^j Itilde (B^j)^T with a certified tail below ``tol``."""
    check_stable(p)
    b = companion(p)
    tail = mc.PowerTail(b)
    last = tail.first_certified(tol, p=2)
    cols = _ma_columns(b, max(last, p.d - 1))
    sigma = cols[: last + 1].T @ cols[: last + 1]
    head = cols[: p.d].T @ cols[: p.d]
    if not mc.is_positive_definite(head):
        raise ArithmeticError("head of the Sigma series is not positive definite")
    return SigmaResult(0.5 * (sigma + sigma.T), last, tail.tail_after(last, p=2), head)


def clt_statistic(path: ArPath, p: ArParams) -> np.ndarray:
    theta_hat, ok = least_squares(path)
    if not ok:
        return np.zeros(path.d)
    return math.sqrt(path.n) * (theta_hat - p.vector)


def self_normalized_statistic(path: ArPath, p: ArParams) -> np.ndarray:
    theta_hat, ok = least_squares(path)
    if not ok:
        raise GramSingular("Gram matrix is singular; self-normalised statistic undefined")
    return mc.psd_sqrt(gram(path)) @ (theta_hat - p.vector)


# --------------------------------------------------------------------------
# coupling and ergodic averages


def coupled_paths(
    p: ArParams, spec: InnovationSpec, u0, n: int, tol: float, rng: RngStream
) -> tuple[ArPath, ArPath]:
    """Paths from ``u0`` and from a stationary start, driven by the same Z_1..Z_n.

    The stationary start is drawn first, then the shared innovations.
    """
    ubar0 = stationary_initial(p, spec, tol, rng)
    z = sample_many(spec, rng, n)
    return path_from_innovations(p, u0, z), path_from_innovations(p, ubar0, z)


def coupling_gaps(pair: tuple[ArPath, ArPath]) -> tuple[float, float]:
    a, b = pair
    if a.n != b.n or not np.array_equal(a.z, b.z):
        raise ValueError("coupled paths must share their innovations")
    n = a.n
    gram_gap = mc.frobenius_norm((gram(a) - gram(b)) / n)
    diff = (a.regressors() - b.regressors()).T @ a.z
    return gram_gap, float(np.linalg.norm(diff)) / math.sqrt(n)


def coupling_sum_bound(pair: tuple[ArPath, ArPath], p: ArParams) -> float:
    """n^{-1/2} (||U_0|| + ||Ubar_0||) sum_{j=1..n} ||B^{j-1}||_F |Z_j|."""
    a, b = pair
    bm = companion(p)
    norms = np.empty(a.n)
    power = np.eye(p.d)
    for j in range(a.n):
        norms[j] = mc.frobenius_norm(power)
        power = power @ bm
    weight = float(np.linalg.norm(a.u0)) + float(np.linalg.norm(b.u0))
    return weight * float(norms @ np.abs(a.z)) / math.sqrt(a.n)


def ergodic_average_outer(path: ArPath) -> np.ndarray:
    return gram(path) / path.n


def state_norm_bound(path: ArPath, consts: mc.StabilityConstants) -> np.ndarray:
    """kappa3 ||U_0|| + kappa1 max_{j<k} |Z_j| for k = 1..n (bound on ||U_{k-1}||)."""
    running = np.concatenate(([0.0], np.maximum.accumulate(np.abs(path.z[:-1])))) if path.n > 1 else np.zeros(1)
    return consts.kappa3 * float(np.linalg.norm(path.u0)) + consts.kappa1 * running
