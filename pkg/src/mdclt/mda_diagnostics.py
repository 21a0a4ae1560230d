"""Condition statistics for rows of a martingale difference array.

A row is a sequence of vectors x_1..x_kn together with an oracle that returns
the exact conditional moments of each x_k given the past.  Every statistic in
this module is a pure function of the realised vectors and the oracle values,
so nothing here is estimated.

The shipped oracle covers rows of the form x_k = v_k Z_k with v_k known one
step ahead and Z_k i.i.d. from an :class:`~mdclt.innovations.InnovationSpec`.
AR least-squares rows (v_k = K_n U_{k-1}) are of that form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from mdclt.ar_process import ArParams, ArPath
from mdclt.errors import AuditFailure
from mdclt.innovations import InnovationSpec, abs1_tail, m1_box, m2_tail
from mdclt.rng import RngStream

# relative slack for comparing two exactly-equal-in-theory floating sums
_REL = 1e-12
_ABS = 1e-300


class RowOracle(Protocol):
    """Exact conditional moments of x_k given F_{n,k-1}, vectorised over k."""

    def abs_tail(self, eps: float, strict: bool = False) -> np.ndarray: ...

    def sq_tail(self, eps: float) -> np.ndarray: ...

    def second_moment(self) -> np.ndarray: ...

    def box_mean(self, a: float) -> np.ndarray: ...

    def component_sq_tail(self, eps: float) -> np.ndarray: ...

    def reversed(self) -> RowOracle: ...


def _scaled_tail(fn, spec, scale: np.ndarray, level: float, **kw) -> np.ndarray:
    """scale^p * fn(level / scale) with the convention 0 where scale == 0."""
    positive = scale > 0
    thresholds = np.full(scale.shape, np.inf)
    np.divide(level, scale, out=thresholds, where=positive)
    return np.where(positive, fn(spec, thresholds, **kw), 0.0)


@dataclass(frozen=True)
class ProductOracle:
    """Oracle for x_k = v_k Z_k: every moment factors through the law of Z."""

    v: np.ndarray
    spec: InnovationSpec

    @property
    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.v, axis=1)

    def abs_tail(self, eps: float, strict: bool = False) -> np.ndarray:
        s = self.norms
        return s * _scaled_tail(abs1_tail, self.spec, s, eps, strict=strict)

    def sq_tail(self, eps: float) -> np.ndarray:
        s = self.norms
        return s * s * _scaled_tail(m2_tail, self.spec, s, eps)

    def second_moment(self) -> np.ndarray:
        return self.spec.variance * np.einsum("ki,kj->kij", self.v, self.v)

    def box_mean(self, a: float) -> np.ndarray:
        return self.v * _scaled_tail(m1_box, self.spec, self.norms, a)[:, None]

    def component_sq_tail(self, eps: float) -> np.ndarray:
        s = np.abs(self.v)
        return s * s * _scaled_tail(m2_tail, self.spec, s, eps)

    def reversed(self) -> ProductOracle:
        return ProductOracle(self.v[::-1], self.spec)


@dataclass(frozen=True)
class ArrayRow:
    n: int
    x: np.ndarray = field(repr=False)
    oracle: RowOracle = field(repr=False)

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.x, dtype=float))
        if x.shape[0] < self.n:
            raise ValueError(f"row length {x.shape[0]} is shorter than n={self.n}")
        object.__setattr__(self, "x", x)

    @property
    def kn(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.x, axis=1)


def build_ar_row(path: ArPath, p: ArParams, spec: InnovationSpec, scaling=None) -> ArrayRow:
    """X_nk = scaling U_{k-1} Z_k for k = 1..n; the default scaling is n^{-1/2} I."""
    if p.d != path.d:
        raise ValueError("path and parameters disagree on the order d")
    u = path.regressors()
    if scaling is None:
        v = u / math.sqrt(path.n)
    else:
        k = np.asarray(scaling, dtype=float)
        if k.shape != (p.d, p.d):
            raise ValueError(f"scaling must be {p.d}x{p.d}")
        v = u @ k.T
    return ArrayRow(path.n, v * path.z[:, None], ProductOracle(v, spec))


def reverse_row(row: ArrayRow) -> ArrayRow:
    return ArrayRow(row.n, row.x[::-1], row.oracle.reversed())


# --------------------------------------------------------------------------
# statistics


def clb_stats(row: ArrayRow, eps: float) -> tuple[float, float]:
    if not eps > 0:
        raise ValueError("eps must be positive")
    return math.fsum(row.oracle.abs_tail(eps)), math.fsum(row.oracle.sq_tail(eps))


def raikov_and_norming(row: ArrayRow) -> tuple[np.ndarray, np.ndarray]:
    raikov = row.x.T @ row.x
    norming = row.oracle.second_moment().sum(axis=0)
    return raikov, 0.5 * (norming + norming.T)


@dataclass(frozen=True)
class TruncatedRow:
    a: float
    y: np.ndarray = field(repr=False)
    compensator: np.ndarray = field(repr=False)
    inside: np.ndarray = field(repr=False)


def truncate_row(row: ArrayRow, a: float) -> TruncatedRow:
    """y_k = x_k 1{||x_k|| <= a} minus its conditional mean."""
    if not a > 0:
        raise ValueError("truncation level must be positive")
    inside = row.norms() <= a
    comp = row.oracle.box_mean(a)
    return TruncatedRow(a, np.where(inside[:, None], row.x, 0.0) - comp, comp, inside)


def truncation_family_stats(row: ArrayRow, a: float) -> tuple[np.ndarray, float, np.ndarray]:
    """(residual, max ||y_k||, sum y_k y_k^T) for truncation level ``a``.

    The residual sum_k [x_k 1{||x_k|| > a} + compensator_k] equals
    sum_k x_k - sum_k y_k.
    """
    t = truncate_row(row, a)
    outside = np.where(t.inside[:, None], 0.0, row.x)
    residual = (outside + t.compensator).sum(axis=0)
    tma = float(np.linalg.norm(t.y, axis=1).max(initial=0.0))
    return residual, tma, t.y.T @ t.y


def max_stats(row: ArrayRow) -> tuple[float, float]:
    m = float(row.norms().max(initial=0.0))
    return m, m * m


def componentwise_clb(row: ArrayRow, eps: float) -> np.ndarray:
    if not eps > 0:
        raise ValueError("eps must be positive")
    return row.oracle.component_sq_tail(eps).sum(axis=0)


# --------------------------------------------------------------------------
# condition report


@dataclass(frozen=True)
class ConditionReport:
    n: int
    a: float
    eps: tuple[float, ...]
    clb1: tuple[float, ...]
    clb2: tuple[float, ...]
    per_component_clb2: tuple[tuple[float, ...], ...]
    raikov: np.ndarray = field(repr=False)
    norming: np.ndarray = field(repr=False)
    max_norm: float = 0.0
    max_norm_sq: float = 0.0
    ta_residual: np.ndarray = field(default=None, repr=False)
    tma: float = 0.0
    tra: np.ndarray = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.raikov.shape[0]


def condition_report(row: ArrayRow, eps_grid, a: float) -> ConditionReport:
    eps = tuple(float(e) for e in eps_grid)
    pairs = [clb_stats(row, e) for e in eps]
    raikov, norming = raikov_and_norming(row)
    max_norm, max_sq = max_stats(row)
    residual, tma, tra = truncation_family_stats(row, a)
    return ConditionReport(
        n=row.n,
        a=float(a),
        eps=eps,
        clb1=tuple(c1 for c1, _ in pairs),
        clb2=tuple(c2 for _, c2 in pairs),
        per_component_clb2=tuple(tuple(componentwise_clb(row, e).tolist()) for e in eps),
        raikov=raikov,
        norming=norming,
        max_norm=max_norm,
        max_norm_sq=max_sq,
        ta_residual=residual,
        tma=tma,
        tra=tra,
    )


def _matrix_columns(name: str, d: int) -> list[str]:
    return [f"{name}_{i + 1}_{j + 1}" for i in range(d) for j in range(d)]


def report_csv_header(d: int) -> list[str]:
    """Columns of the one-line-per-(n, eps, a) condition table."""
    return (
        ["n", "eps", "a", "clb1", "clb2"]
        + [f"component_clb2_{j + 1}" for j in range(d)]
        + ["max_norm", "max_norm_sq"]
        + [f"ta_residual_{j + 1}" for j in range(d)]
        + ["tma"]
        + _matrix_columns("raikov", d)
        + _matrix_columns("norming", d)
        + _matrix_columns("tra", d)
    )


def report_csv_rows(report: ConditionReport) -> list[list]:
    shared_tail = (
        [report.max_norm, report.max_norm_sq]
        + report.ta_residual.tolist()
        + [report.tma]
        + report.raikov.ravel().tolist()
        + report.norming.ravel().tolist()
        + report.tra.ravel().tolist()
    )
    rows = []
    for i, e in enumerate(report.eps):
        rows.append(
            [report.n, e, report.a, report.clb1[i], report.clb2[i]]
            + list(report.per_component_clb2[i])
            + shared_tail
        )
    return rows


# --------------------------------------------------------------------------
# inequality audit


@dataclass(frozen=True)
class AuditCheck:
    name: str
    passed: bool
    k: int | None = None
    detail: str = ""


@dataclass(frozen=True)
class AuditReport:
    checks: tuple[AuditCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[AuditCheck]:
        return [c for c in self.checks if not c.passed]


def _le(lhs, rhs) -> np.ndarray:
    """lhs <= rhs up to relative rounding slack."""
    lhs = np.asarray(lhs, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    return lhs <= rhs + _REL * (np.abs(lhs) + np.abs(rhs)) + _ABS


def _first_bad(ok: np.ndarray) -> int | None:
    bad = np.flatnonzero(~np.asarray(ok))
    return int(bad[0]) + 1 if bad.size else None


def inequality_audit(
    row: ArrayRow, eps: float, a: float, rng: RngStream | None = None, strict: bool = True
) -> AuditReport:
    """Evaluate the pointwise inequalities behind the limit theorems.

    Checks, in order:

    i.    a positive realised Lindeberg sum forces max ||x_k|| >= eps
    ii.   conditional L1 tails are bounded by the L2 tails over eps, per k
    iii.  each component Lindeberg sum is at most the vector one, and the
          vector one is at most 2d times the component sums at eps/sqrt(d)
    iv.   |<u, x_k>| <= ||u|| ||x_k|| for a random direction u
    v.    ||y_k|| <= 2a for the truncated row
    vi.   ||sum_k compensator_k|| <= sum_k E(||x_k|| 1{||x_k|| > a} | past)

    ``k`` in a failed check is the 1-based index of the first offending term.
    With ``strict`` the first failure raises :class:`AuditFailure`.
    """
    checks: list[AuditCheck] = []
    norms = row.norms()
    d = row.dim

    realised = math.fsum(np.where(norms >= eps, norms * norms, 0.0))
    ok = realised <= 0.0 or norms.max(initial=0.0) >= eps
    checks.append(AuditCheck("i", bool(ok), None if ok else int(np.argmax(norms)) + 1))

    abs_k = row.oracle.abs_tail(eps)
    sq_k = row.oracle.sq_tail(eps)
    per_k = _le(eps * abs_k, sq_k)
    ok = bool(per_k.all()) and bool(_le(eps * math.fsum(abs_k), math.fsum(sq_k)))
    checks.append(AuditCheck("ii", ok, _first_bad(per_k)))

    clb2 = math.fsum(sq_k)
    comp = componentwise_clb(row, eps)
    comp_small = componentwise_clb(row, eps / math.sqrt(d))
    ok = bool(_le(comp, clb2).all()) and bool(_le(clb2, 2 * d * math.fsum(comp_small)))
    checks.append(AuditCheck("iii", ok, None, "" if ok else f"clb2={clb2!r} components={comp.tolist()}"))

    rng = rng if rng is not None else RngStream(0x5EED)
    u = rng.uniform(d) * 2.0 - 1.0
    per_k = _le(np.abs(row.x @ u), np.linalg.norm(u) * norms)
    checks.append(AuditCheck("iv", bool(per_k.all()), _first_bad(per_k)))

    t = truncate_row(row, a)
    per_k = _le(np.linalg.norm(t.y, axis=1), 2.0 * a)
    checks.append(AuditCheck("v", bool(per_k.all()), _first_bad(per_k)))

    lhs = float(np.linalg.norm(t.compensator.sum(axis=0)))
    rhs = math.fsum(row.oracle.abs_tail(a, strict=True))
    ok = bool(_le(lhs, rhs))
    checks.append(AuditCheck("vi", ok, None, "" if ok else f"{lhs!r} > {rhs!r}"))

    report = AuditReport(tuple(checks))
    if strict and not report.passed:
        bad = report.failures()[0]
        raise AuditFailure(bad.name, bad.k, bad.detail)
    return report
