"""Small dense linear algebra (d <= 16).

Matrices are plain ``numpy`` arrays.  ``as_mat`` and ``as_sym`` validate the
shape, finiteness and (for symmetric input) the symmetry tolerance; every
public routine returns fresh arrays and never mutates its input.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from mdclt.errors import NonConvergence, NotPd, NotPsd, Unstable

MAX_DIM = 16
PSD_CLAMP = 1e-10
PD_PIVOT_RTOL = 1e-12
_ROUND_SLACK = 16 * 2.0**-52


def as_mat(m) -> np.ndarray:
    a = np.array(m, dtype=np.float64, copy=True)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not 1 <= a.shape[0] <= MAX_DIM:
        raise ValueError(f"dimension {a.shape[0]} outside 1..{MAX_DIM}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def as_sym(s) -> np.ndarray:
    a = as_mat(s)
    scale = 1.0 + float(np.max(np.abs(a)))
    if float(np.max(np.abs(a - a.T))) > 1e-12 * scale:
        raise ValueError("matrix is not symmetric")
    return 0.5 * (a + a.T)


def frobenius_norm(m) -> float:
    a = np.asarray(m, dtype=np.float64)
    return math.sqrt(float(np.sum(a * a)))


# --------------------------------------------------------------------------
# spectral radius


def is_companion(m: np.ndarray) -> bool:
    d = m.shape[0]
    if d == 1:
        return True
    lower = m[1:, :]
    expected = np.zeros((d - 1, d))
    expected[:, : d - 1] = np.eye(d - 1)
    return bool(np.array_equal(lower, expected))


def _gelfand_bracket(m: np.ndarray, rounds: int = 60):
    """Yield (lower, upper) brackets for rho(m) from repeated squaring.

    Upper: ||m^(2^k)||_F^(1/2^k), nonincreasing in k.
    Lower: (|tr m^(2^k)| / d)^(1/2^k), since |sum of lambda^p| <= d rho^p.
    """
    d = m.shape[0]
    a = m.copy()
    log_norm = 0.0  # log ||m^(2^k)||_F, with a = m^(2^k) / ||m^(2^k)||_F
    best_lo, best_hi = 0.0, math.inf
    for k in range(rounds):
        nrm = frobenius_norm(a)
        if nrm == 0.0:
            yield 0.0, 0.0
            return
        a = a / nrm
        log_norm += math.log(nrm)
        p = 2.0 ** k
        best_hi = min(best_hi, math.exp(log_norm / p))
        tr = abs(float(np.trace(a)))
        if tr > 0.0:
            lo = math.exp((log_norm + math.log(tr) - math.log(d)) / p)
            best_lo = max(best_lo, min(lo, best_hi))
        yield best_lo, best_hi
        a = a @ a
        log_norm *= 2.0


def _durand_kerner(coeffs: np.ndarray, max_iter: int = 2000, tol: float = 1e-15):
    """Simultaneous-iteration roots of the monic polynomial with ``coeffs``.

    ``coeffs`` are [1, c1, ..., cd] (highest degree first).  Returns the root
    approximations and the Weierstrass corrections of the final iterate.
    """
    d = len(coeffs) - 1
    radius = 1.0 + float(np.max(np.abs(coeffs[1:])))
    z = radius * np.exp(1j * (2 * np.pi * np.arange(d) / d + 0.4))
    w = np.zeros(d, dtype=complex)
    for _ in range(max_iter):
        for i in range(d):
            denom = np.prod(z[i] - np.delete(z, i))
            w[i] = np.polyval(coeffs, z[i]) / denom if denom != 0 else 0.0
            z[i] = z[i] - w[i]
        if float(np.max(np.abs(w))) <= tol * (1.0 + float(np.max(np.abs(z)))):
            break
    # Weierstrass corrections at the returned iterate
    for i in range(d):
        denom = np.prod(z[i] - np.delete(z, i))
        w[i] = np.polyval(coeffs, z[i]) / denom if denom != 0 else np.inf
    return z, w


def _root_bracket(theta: np.ndarray):
    """Certified bracket for the largest root modulus of z^d - th1 z^(d-1) - ... - thd.

    The disks |z - z_i| <= d |W_i| cover all roots, and every connected
    component of their union holds as many roots as disks.
    """
    d = theta.shape[0]
    coeffs = np.concatenate(([1.0], -theta)).astype(complex)
    z, w = _durand_kerner(coeffs)
    r = d * np.abs(w)
    if not np.all(np.isfinite(r)):
        return 0.0, math.inf
    upper = float(np.max(np.abs(z) + r))
    lower = max(0.0, float(np.max(np.abs(z))) - 2.0 * float(np.sum(r)))
    return lower, upper


def spectral_radius(m, tol: float = 1e-10) -> float:
    """Spectral radius certified to within +-tol.

    Repeated squaring gives monotone upper bounds and trace lower bounds; for
    companion matrices the characteristic roots are also located by
    Durand-Kerner iteration with Weierstrass inclusion disks.  The tighter
    certified bracket wins and its midpoint is returned.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    a = as_mat(m)
    d = a.shape[0]
    if d == 1:
        return abs(float(a[0, 0]))
    brackets = []
    if is_companion(a):
        brackets.append(_root_bracket(a[0, :]))
    lo, hi = 0.0, math.inf
    for lo, hi in _gelfand_bracket(a):
        if hi - lo <= 2 * tol:
            break
    brackets.append((lo, hi))
    lo, hi = min(brackets, key=lambda b: b[1] - b[0])
    # exp/log and the root polishing round; widen so the bracket stays honest
    lo, hi = lo * (1.0 - _ROUND_SLACK), hi * (1.0 + _ROUND_SLACK)
    if hi - lo > 2 * tol:
        raise NonConvergence(f"spectral radius bracket [{lo:.3g}, {hi:.3g}] wider than 2*tol")
    return 0.5 * (lo + hi)


# --------------------------------------------------------------------------
# symmetric eigenproblem and friends


def sym_eigen(s, tol: float = 1e-12, max_sweeps: int = 100):
    """Cyclic Jacobi diagonalisation.

    Returns ``(eigenvalues, Q)`` with eigenvalues sorted descending and the
    columns of ``Q`` the matching orthonormal eigenvectors.
    """
    a = as_sym(s)
    d = a.shape[0]
    q = np.eye(d)
    scale = frobenius_norm(a)
    if d == 1 or scale == 0.0:
        return np.diag(a).copy(), q
    for _ in range(max_sweeps):
        off = frobenius_norm(a - np.diag(np.diag(a)))
        if off <= 0.25 * tol * scale:
            break
        for p in range(d - 1):
            for r in range(p + 1, d):
                apr = a[p, r]
                if abs(apr) <= 1e-300:
                    continue
                tau = (a[r, r] - a[p, p]) / (2.0 * apr)
                if abs(tau) > 1e150:
                    t = 0.5 / tau
                else:
                    t = math.copysign(1.0, tau) / (abs(tau) + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                sn = t * c
                col_p = a[:, p].copy()
                col_r = a[:, r].copy()
                a[:, p] = c * col_p - sn * col_r
                a[:, r] = sn * col_p + c * col_r
                row_p = a[p, :].copy()
                row_r = a[r, :].copy()
                a[p, :] = c * row_p - sn * row_r
                a[r, :] = sn * row_p + c * row_r
                a[p, r] = a[r, p] = 0.0
                qp = q[:, p].copy()
                qr = q[:, r].copy()
                q[:, p] = c * qp - sn * qr
                q[:, r] = sn * qp + c * qr
    else:
        raise NonConvergence(f"Jacobi did not converge in {max_sweeps} sweeps")
    vals = np.diag(a).copy()
    order = np.argsort(-vals, kind="stable")
    return vals[order], q[:, order]


def psd_sqrt(s) -> np.ndarray:
    vals, q = sym_eigen(s)
    if float(vals.min()) < -PSD_CLAMP:
        raise NotPsd(f"minimum eigenvalue {vals.min():.3g} below -{PSD_CLAMP}")
    root = np.sqrt(np.clip(vals, 0.0, None))
    r = (q * root) @ q.T
    return 0.5 * (r + r.T)


def cholesky_pd(s) -> np.ndarray | None:
    """Lower Cholesky factor, or ``None`` when ``s`` is not positive definite.

    Pivot j fails when it is not above 1e-12 times the diagonal entry s_jj,
    i.e. the test runs on the correlation-scaled matrix.  Rounding in a rank
    deficient matrix leaves pivots near machine epsilon times s_jj, while
    genuinely nonsingular but badly scaled Gram matrices keep pivots well
    above the cutoff.
    """
    a = as_sym(s)
    d = a.shape[0]
    lower = np.zeros_like(a)
    for j in range(d):
        piv = a[j, j] - float(lower[j, :j] @ lower[j, :j])
        if not (piv > 0.0 and piv > PD_PIVOT_RTOL * a[j, j]):
            return None
        ljj = math.sqrt(piv)
        lower[j, j] = ljj
        if j + 1 < d:
            lower[j + 1 :, j] = (a[j + 1 :, j] - lower[j + 1 :, :j] @ lower[j, :j]) / ljj
    return lower


def is_positive_definite(s) -> bool:
    return cholesky_pd(s) is not None


def cholesky_solve(lower: np.ndarray, b) -> np.ndarray:
    """Solve (L L^T) x = b by forward and back substitution."""
    b = np.array(b, dtype=np.float64)
    d = lower.shape[0]
    y = np.zeros_like(b)
    for i in range(d):
        y[i] = (b[i] - lower[i, :i] @ y[:i]) / lower[i, i]
    x = np.zeros_like(b)
    for i in reversed(range(d)):
        x[i] = (y[i] - lower[i + 1 :, i] @ x[i + 1 :]) / lower[i, i]
    return x


def inverse(s) -> np.ndarray:
    lower = cholesky_pd(s)
    if lower is None:
        raise NotPd("matrix is not positive definite")
    inv = cholesky_solve(lower, np.eye(lower.shape[0]))
    return 0.5 * (inv + inv.T)


def inverse_sqrt(s) -> np.ndarray:
    """(s^(1/2))^(-1) for positive definite s."""
    return inverse(psd_sqrt(s))


# --------------------------------------------------------------------------
# Lyapunov oracle and stability constants


def solve_lyapunov(b, c, tol: float = 1e-13, max_iter: int = 1_000_000) -> np.ndarray:
    """Fixed point of S = c + b S b^T by plain iteration from S = c.

    Stops once ||S_{k+1} - S_k||_F <= tol * (1 + ||S_k||_F) and returns S_k,
    whose residual is exactly that step.  The tolerance is relative because an
    absolute one sits below the rounding floor once ||S|| is in the hundreds.
    """
    bm = as_mat(b)
    cm = as_sym(c)
    if bm.shape != cm.shape:
        raise ValueError("b and c must have the same dimension")
    s = cm
    for _ in range(max_iter):
        nxt = cm + bm @ s @ bm.T
        step = frobenius_norm(nxt - s)
        if not math.isfinite(step) or step > 1e150:
            raise NonConvergence("Lyapunov iterates diverge; spectral radius of b >= 1")
        if step <= tol * (1.0 + frobenius_norm(s)):
            return 0.5 * (s + s.T)
        s = nxt
    raise NonConvergence(f"Lyapunov iteration did not reach tol={tol} in {max_iter} steps")


@dataclass(frozen=True)
class StabilityConstants:
    kappa1: float
    kappa2: float
    kappa3: float
    tail_bound: float
    terms: int


class PowerTail:
    """Powers B^j with a certified geometric bound on norm tails.

    Once some window length m has q = ||B^m||_F <= 1/2, submultiplicativity
    gives ||B^(J+i+km)||_F <= ||B^(J+i)||_F q^k, so

        sum_{j>J} ||B^j||_F^p <= sum_{i=1..m} ||B^(J+i)||_F^p / (1 - q^p).
    """

    def __init__(self, b, max_powers: int = 500_000):
        self.b = as_mat(b)
        self.max_powers = max_powers
        self.powers = [np.eye(self.b.shape[0])]
        self.norms = [frobenius_norm(self.powers[0])]
        self.window: int | None = None
        self.q: float | None = None

    def _extend(self, upto: int) -> None:
        while len(self.powers) <= upto:
            if len(self.powers) > self.max_powers:
                raise NonConvergence(
                    f"no contraction window within {self.max_powers} powers; spectral radius near 1"
                )
            nxt = self.powers[-1] @ self.b
            self.powers.append(nxt)
            nrm = frobenius_norm(nxt)
            self.norms.append(nrm)
            if self.window is None and nrm <= 0.5:
                self.window = len(self.powers) - 1
                self.q = nrm

    def power(self, j: int) -> np.ndarray:
        self._extend(j)
        return self.powers[j]

    def norm(self, j: int) -> float:
        self._extend(j)
        return self.norms[j]

    def tail_after(self, last: int, p: int = 1) -> float:
        """Certified bound on sum_{j > last} ||B^j||_F^p."""
        while self.window is None:
            self._extend(len(self.powers))
        m = self.window
        self._extend(last + m)
        head = sum(self.norms[last + i] ** p for i in range(1, m + 1))
        return head / (1.0 - self.q ** p)

    def first_certified(self, tol: float, p: int = 1, weight: float = 1.0) -> int:
        """Smallest J with weight * sum_{j>J} ||B^j||_F^p <= tol."""
        last = 0
        while weight * self.tail_after(last, p) > tol:
            last += 1
        return last


def stability_constants(b, tol: float = 1e-12) -> StabilityConstants:
    """kappa1, kappa2 (sums of ||B^j||_F and its square) and kappa3 (sup)."""
    bm = as_mat(b)
    rho = spectral_radius(bm, tol=1e-9)
    if rho >= 1.0:
        raise Unstable(rho)
    tail = PowerTail(bm)
    last = max(tail.first_certified(tol, p=1), tail.first_certified(tol, p=2))
    norms = [tail.norm(j) for j in range(last + 1)]
    # kappa3: powers beyond the certified window never exceed its maximum
    sup_window = max(tail.norm(last + i) for i in range(1, tail.window + 1))
    return StabilityConstants(
        kappa1=math.fsum(norms),
        kappa2=math.fsum(v * v for v in norms),
        kappa3=max(max(norms), sup_window),
        tail_bound=tail.tail_after(last, p=1),
        terms=last,
    )
