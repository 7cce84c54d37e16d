"""Tustin discretisation and executable difference equations."""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numpy.polynomial import polynomial as P

from .lti import Polynomial, TransferFunction


@dataclass(frozen=True)
class DiscreteTransferFunction:
    """Ratio of polynomials in ``z**-1``; index k holds the ``z**-k`` coefficient."""

    num_z: tuple[float, ...]
    den_z: tuple[float, ...]
    t_z: float

    def __post_init__(self):
        object.__setattr__(self, "num_z", tuple(float(x) for x in self.num_z))
        object.__setattr__(self, "den_z", tuple(float(x) for x in self.den_z))
        if not self.den_z or self.den_z[0] == 0.0:
            raise ValueError("den_z[0] must be nonzero")
        if self.t_z <= 0:
            raise ValueError("t_z must be positive")

    def __call__(self, z):
        w = 1.0 / np.asarray(z)
        return P.polyval(w, self.num_z) / P.polyval(w, self.den_z)

    def dc_gain(self) -> float:
        return sum(self.num_z) / sum(self.den_z)


def _bilinear_expand(coeffs: Sequence[float], n: int, c: float) -> np.ndarray:
    """sum_k coeffs[k] * (c*(1-w))**k * (1+w)**(n-k), as ascending coefficients in w."""
    out = np.zeros(n + 1)
    one_minus = np.array([1.0, -1.0])
    one_plus = np.array([1.0, 1.0])
    for k, a in enumerate(coeffs):
        if a == 0.0:
            continue
        term = P.polymul(P.polypow(one_minus, k), P.polypow(one_plus, n - k)) * (a * c**k)
        out[: len(term)] += term
    return out


def tustin(tf_s: TransferFunction, t_z: float) -> DiscreteTransferFunction:
    """Bilinear map ``s -> (2/t_z)(1 - z^-1)/(1 + z^-1)`` without pre-warping.

    The result is normalised so that ``den_z[0] == 1``.
    """
    if t_z <= 0:
        raise ValueError("t_z must be positive")
    if not tf_s.is_proper:
        raise ValueError("improper transfer function cannot be discretised causally")
    n = tf_s.denominator.degree
    c = 2.0 / t_z
    num = _bilinear_expand(tf_s.numerator.coeffs, n, c)
    den = _bilinear_expand(tf_s.denominator.coeffs, n, c)
    if den[0] == 0.0:
        raise ValueError("denominator vanishes at s = 2/t_z; no causal normalisation")
    return DiscreteTransferFunction(tuple(num / den[0]), tuple(den / den[0]), t_z)


def inverse_tustin(dtf: DiscreteTransferFunction) -> TransferFunction:
    """Map back with ``z = (1 + s*T/2) / (1 - s*T/2)`` and clear denominators."""
    n = max(len(dtf.num_z), len(dtf.den_z)) - 1
    h = 0.5 * dtf.t_z
    one_minus = np.array([1.0, -h])  # 1 - sT/2, i.e. z**-1 numerator
    one_plus = np.array([1.0, h])

    def expand(coeffs):
        out = np.zeros(n + 1)
        for k, a in enumerate(coeffs):
            term = P.polymul(P.polypow(one_minus, k), P.polypow(one_plus, n - k)) * a
            out[: len(term)] += term
        return out

    return TransferFunction(Polynomial(expand(dtf.num_z)), Polynomial(expand(dtf.den_z)))


@dataclass
class RecurrenceFilter:
    """``y[k] = sum_i a[i-1]*y[k-i] + sum_i b[i]*u[k-i]``.

    ``a`` holds a_1..a_m, ``b`` holds b_0..b_n. Histories keep the most recent
    sample first.
    """

    a: tuple[float, ...]
    b: tuple[float, ...]
    t_z: Optional[float] = None
    u_hist: deque = field(default=None, repr=False)
    y_hist: deque = field(default=None, repr=False)

    def __post_init__(self):
        self.a = tuple(float(x) for x in self.a)
        self.b = tuple(float(x) for x in self.b)
        if not self.b:
            raise ValueError("need at least b_0")
        if self.u_hist is None:
            self.u_hist = deque([0.0] * (len(self.b) - 1), maxlen=max(len(self.b) - 1, 0))
        if self.y_hist is None:
            self.y_hist = deque([0.0] * len(self.a), maxlen=len(self.a))

    def reset(self) -> None:
        self.preload(0.0, 0.0)

    def preload(self, y: float, u: float = 0.0) -> None:
        """Fill the output history with ``y`` and the input history with ``u``."""
        self.y_hist.extend([float(y)] * len(self.a))
        self.u_hist.extend([float(u)] * (len(self.b) - 1))

    def step(self, u_k: float, limits: Optional[tuple[float, float]] = None) -> float:
        """Advance one sample. With ``limits`` the output is clipped before it is
        stored, so the stored history never winds up past the limits."""
        if not math.isfinite(u_k):
            raise ValueError(f"non-finite filter input {u_k!r}")
        y = self.b[0] * u_k
        for bi, ui in zip(self.b[1:], self.u_hist):
            y += bi * ui
        for ai, yi in zip(self.a, self.y_hist):
            y += ai * yi
        if limits is not None:
            y = min(max(y, limits[0]), limits[1])
        if self.u_hist.maxlen:
            self.u_hist.appendleft(float(u_k))
        if self.y_hist.maxlen:
            self.y_hist.appendleft(y)
        return y

    def run(self, u: Sequence[float]) -> np.ndarray:
        return np.array([self.step(x) for x in u])

    def to_json(self) -> str:
        return json.dumps({"t_z": self.t_z, "a": list(self.a), "b": list(self.b)}, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RecurrenceFilter":
        d = json.loads(text)
        return cls(a=d["a"], b=d["b"], t_z=d.get("t_z"))


def to_recurrence(dtf: DiscreteTransferFunction) -> RecurrenceFilter:
    d0 = dtf.den_z[0]
    a = tuple(-d / d0 for d in dtf.den_z[1:])
    b = tuple(n / d0 for n in dtf.num_z)
    return RecurrenceFilter(a=a, b=b, t_z=dtf.t_z)


def step_filter(filt: RecurrenceFilter, u_k: float) -> float:
    return filt.step(u_k)
