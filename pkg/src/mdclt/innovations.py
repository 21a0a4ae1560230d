"""Mean-zero innovation laws with exact samplers and truncated moments.

Every law consumes exactly one 64-bit word per draw, so a stream position maps
one-to-one onto an innovation index.  The truncated moments accept scalars or
numpy arrays of thresholds and return the same shape.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import ndtr, ndtri

from mdclt.rng import LaneStreams, RngStream, words_to_uniform

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
# beyond 40 standard deviations every normal tail term underflows to zero
_NORMAL_CUTOFF = 40.0


class Kind(str, Enum):
    NORMAL = "normal"
    RADEMACHER = "rademacher"
    UNIFORM = "uniform"
    THREE_POINT = "three_point"
    ASYM_TWO_POINT = "asym_two_point"


@dataclass(frozen=True)
class InnovationSpec:
    """One of five mean-zero laws.

    ``scale`` is sigma for Normal, the atom c for Rademacher and ThreePoint,
    and the half-width b for Uniform.  ThreePoint puts mass ``p0`` at zero.
    AsymTwoPoint puts mass b/(a+b) at ``a`` and a/(a+b) at ``-b``.
    """

    kind: Kind
    scale: float = 1.0
    p0: float = 0.0
    a: float = 1.0
    b: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.kind is Kind.ASYM_TWO_POINT:
            if not (self.a > 0 and self.b > 0 and math.isfinite(self.a) and math.isfinite(self.b)):
                raise ValueError("AsymTwoPoint needs finite a > 0 and b > 0")
        elif not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValueError("scale must be finite and positive")
        if self.kind is Kind.THREE_POINT and not 0.0 <= self.p0 < 1.0:
            raise ValueError("ThreePoint atom p0 must lie in [0, 1)")

    # constructors mirroring the kind names
    @classmethod
    def normal(cls, sigma: float = 1.0) -> InnovationSpec:
        return cls(Kind.NORMAL, scale=sigma)

    @classmethod
    def rademacher(cls, c: float = 1.0) -> InnovationSpec:
        return cls(Kind.RADEMACHER, scale=c)

    @classmethod
    def uniform(cls, half_width: float = 1.0) -> InnovationSpec:
        return cls(Kind.UNIFORM, scale=half_width)

    @classmethod
    def three_point(cls, c: float = 1.0, p0: float = 0.5) -> InnovationSpec:
        return cls(Kind.THREE_POINT, scale=c, p0=p0)

    @classmethod
    def asym_two_point(cls, a: float, b: float) -> InnovationSpec:
        return cls(Kind.ASYM_TWO_POINT, a=a, b=b)

    @property
    def variance(self) -> float:
        k, c = self.kind, self.scale
        if k is Kind.NORMAL or k is Kind.RADEMACHER:
            return c * c
        if k is Kind.UNIFORM:
            return c * c / 3.0
        if k is Kind.THREE_POINT:
            return c * c * (1.0 - self.p0)
        return self.a * self.b

    @property
    def sigma(self) -> float:
        return math.sqrt(self.variance)

    @property
    def is_continuous(self) -> bool:
        return self.kind in (Kind.NORMAL, Kind.UNIFORM)

    @property
    def is_symmetric(self) -> bool:
        return self.kind is not Kind.ASYM_TWO_POINT

    def atoms(self) -> list[tuple[float, float]]:
        """(value, probability) pairs for the discrete kinds."""
        k, c = self.kind, self.scale
        if k is Kind.RADEMACHER:
            return [(-c, 0.5), (c, 0.5)]
        if k is Kind.THREE_POINT:
            half = 0.5 * (1.0 - self.p0)
            return [(-c, half), (0.0, self.p0), (c, half)]
        if k is Kind.ASYM_TWO_POINT:
            s = self.a + self.b
            return [(-self.b, self.a / s), (self.a, self.b / s)]
        raise ValueError(f"{k.value} is continuous")

    def to_dict(self) -> dict:
        if self.kind is Kind.ASYM_TWO_POINT:
            return {"kind": self.kind.value, "a": self.a, "b": self.b}
        if self.kind is Kind.THREE_POINT:
            return {"kind": self.kind.value, "scale": self.scale, "p0": self.p0}
        return {"kind": self.kind.value, "scale": self.scale}

    @classmethod
    def from_dict(cls, data: dict) -> InnovationSpec:
        return cls(**data)


# --------------------------------------------------------------------------
# sampling


def from_words(spec: InnovationSpec, words: np.ndarray) -> np.ndarray:
    """Deterministic transform of raw 64-bit words into draws (one word each)."""
    u = words_to_uniform(words)
    k, c = spec.kind, spec.scale
    if k is Kind.NORMAL:
        return c * ndtri(u)
    if k is Kind.UNIFORM:
        return c * (2.0 * u - 1.0)
    if k is Kind.RADEMACHER:
        return np.where(u < 0.5, -c, c)
    if k is Kind.THREE_POINT:
        neg = 0.5 * (1.0 - spec.p0)
        return np.where(u < spec.p0, 0.0, np.where(u < spec.p0 + neg, -c, c))
    p_a = spec.b / (spec.a + spec.b)
    return np.where(u < p_a, spec.a, -spec.b)


def sample(spec: InnovationSpec, rng: RngStream) -> float:
    return float(from_words(spec, np.array([rng.next_u64()], dtype=np.uint64))[0])


def sample_many(spec: InnovationSpec, rng: RngStream | LaneStreams, m: int) -> np.ndarray:
    """``m`` draws; shape ``(m,)`` for a stream, ``(lanes, m)`` for lanes."""
    return from_words(spec, rng.u64(m))


# --------------------------------------------------------------------------
# truncated moments


def _as_threshold(c):
    arr = np.asarray(c, dtype=np.float64)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise ValueError("thresholds must be >= 0")
    return arr


def _finish(value, like):
    return float(value) if np.ndim(like) == 0 else value


def _discrete_sum(spec, c, weight, keep):
    out = np.zeros(np.shape(c))
    for value, prob in spec.atoms():
        out = out + np.where(keep(abs(value), c), weight(value) * prob, 0.0)
    return out


def m2_tail(spec: InnovationSpec, c, strict: bool = False):
    """E(Z^2 1{|Z| >= c}); with ``strict`` the event is |Z| > c."""
    arr = _as_threshold(c)
    k, s = spec.kind, spec.scale
    if k is Kind.NORMAL:
        t = np.minimum(arr / s, _NORMAL_CUTOFF)
        phi = _INV_SQRT_2PI * np.exp(-0.5 * t * t)
        val = s * s * 2.0 * (t * phi + ndtr(-t))
    elif k is Kind.UNIFORM:
        cc = np.minimum(arr, s)
        val = (s ** 3 - cc ** 3) / (3.0 * s)
    else:
        keep = (lambda v, t: v > t) if strict else (lambda v, t: v >= t)
        val = _discrete_sum(spec, arr, lambda v: v * v, keep)
    return _finish(val, c)


def abs1_tail(spec: InnovationSpec, c, strict: bool = False):
    """E(|Z| 1{|Z| >= c}); with ``strict`` the event is |Z| > c."""
    arr = _as_threshold(c)
    k, s = spec.kind, spec.scale
    if k is Kind.NORMAL:
        t = np.minimum(arr / s, _NORMAL_CUTOFF)
        val = s * 2.0 * _INV_SQRT_2PI * np.exp(-0.5 * t * t)
    elif k is Kind.UNIFORM:
        cc = np.minimum(arr, s)
        val = (s * s - cc * cc) / (2.0 * s)
    else:
        keep = (lambda v, t: v > t) if strict else (lambda v, t: v >= t)
        val = _discrete_sum(spec, arr, abs, keep)
    return _finish(val, c)


def m1_box(spec: InnovationSpec, c):
    """E(Z 1{|Z| <= c}); identically zero for the symmetric kinds.

    Evaluated as -E(Z 1{|Z| > c}) so that it is exactly zero once every atom
    lies in the box, instead of a rounding residue of the two atom terms.
    """
    arr = _as_threshold(c)
    if spec.is_symmetric:
        val = np.zeros(np.shape(arr))
    else:
        val = 0.0 - _discrete_sum(spec, arr, lambda v: v, lambda v, t: v > t)
    return _finish(val, c)


def mean_abs(spec: InnovationSpec) -> float:
    return abs1_tail(spec, 0.0)
