"""Rational transfer functions, the sampled pacing plant and Bode measurements.

Polynomials are stored in ascending powers of ``s``. Nothing here ever cancels
poles against zeros; products and feedback loops just multiply coefficient
sequences.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from numpy.polynomial import polynomial as P

TWO_PI = 2.0 * math.pi

#: Sweep density used by :func:`stability_report` unless overridden.
POINTS_PER_DECADE = 600
SWEEP_START_HZ = 1e-7
#: Default highest traffic-spectrum frequency (Hz) used for the cutoff gain.
F_TRAFFIC_MAX_HZ = 9.3e-5
HALF_POWER_DB = 10.0 * math.log10(2.0)


class SingularSampleError(ValueError):
    """A frequency sample landed on (or numerically at) a pole."""


class LoopConfigurationError(ValueError):
    """The requested feedback interconnection is degenerate."""


def _trim(coeffs: Iterable[float]) -> tuple[float, ...]:
    c = [float(x) for x in coeffs]
    while len(c) > 1 and c[-1] == 0.0:
        c.pop()
    return tuple(c) if c else (0.0,)


@dataclass(frozen=True)
class Polynomial:
    """Real polynomial in ``s``; ``coeffs[k]`` multiplies ``s**k``."""

    coeffs: tuple[float, ...]

    def __init__(self, coeffs: Iterable[float]):
        object.__setattr__(self, "coeffs", _trim(coeffs))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return self.coeffs == (0.0,)

    def __call__(self, s):
        return P.polyval(s, self.coeffs)

    def __mul__(self, other: "Polynomial | float") -> "Polynomial":
        if isinstance(other, Polynomial):
            return poly_mul(self, other)
        return Polynomial(np.asarray(self.coeffs) * float(other))

    __rmul__ = __mul__

    def __add__(self, other: "Polynomial") -> "Polynomial":
        return Polynomial(P.polyadd(self.coeffs, other.coeffs))

    def __neg__(self) -> "Polynomial":
        return Polynomial([-c for c in self.coeffs])

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + (-other)


def poly_mul(a: Polynomial, b: Polynomial) -> Polynomial:
    return Polynomial(P.polymul(a.coeffs, b.coeffs))


@dataclass(frozen=True)
class TransferFunction:
    numerator: Polynomial
    denominator: Polynomial

    def __post_init__(self):
        if self.denominator.is_zero():
            raise ValueError("transfer function denominator is the zero polynomial")

    @classmethod
    def from_coeffs(cls, num: Sequence[float], den: Sequence[float]) -> "TransferFunction":
        return cls(Polynomial(num), Polynomial(den))

    @classmethod
    def constant(cls, k: float) -> "TransferFunction":
        return cls(Polynomial([k]), Polynomial([1.0]))

    @property
    def is_proper(self) -> bool:
        return self.numerator.degree <= self.denominator.degree

    def __call__(self, s):
        return self.numerator(s) / self.denominator(s)

    def dc_gain(self) -> float:
        """Value at ``s = 0``; ``inf`` when the denominator has a free integrator."""
        d0 = self.denominator.coeffs[0]
        n0 = self.numerator.coeffs[0]
        if d0 == 0.0:
            return math.inf if n0 != 0.0 else math.nan
        return n0 / d0

    def scaled(self, c: float) -> "TransferFunction":
        return TransferFunction(self.numerator * c, self.denominator)

    def __mul__(self, other: "TransferFunction") -> "TransferFunction":
        return tf_series(self, other)


def tf_series(a: TransferFunction, b: TransferFunction) -> TransferFunction:
    return TransferFunction(a.numerator * b.numerator, a.denominator * b.denominator)


def tf_feedback(forward: TransferFunction, feedback_path: TransferFunction) -> TransferFunction:
    """Negative-feedback loop ``forward / (1 + forward * feedback_path)``."""
    num = forward.numerator * feedback_path.denominator
    den = forward.denominator * feedback_path.denominator + forward.numerator * feedback_path.numerator
    if den.is_zero():
        raise LoopConfigurationError("1 + forward*feedback is identically zero")
    return TransferFunction(num, den)


def lpf_tf(t_f: float) -> TransferFunction:
    """First-order low-pass ``1 / (1 + s*t_f)``."""
    return TransferFunction.from_coeffs([1.0], [1.0, t_f])


def zoh_tf(t_ps: float, taylor_order: int = 10) -> TransferFunction:
    """Polynomial stand-in for the hold ``(1 - exp(-s*t_ps)) / s``.

    ``exp(-s*t_ps)`` is replaced by its Taylor series up to ``s**taylor_order``;
    the constant terms cancel so the division by ``s`` is exact and the result
    is a polynomial of degree ``taylor_order - 1`` with value ``t_ps`` at DC.
    """
    if taylor_order < 2:
        raise ValueError("taylor_order must be >= 2")
    if t_ps <= 0:
        raise ValueError("t_ps must be positive")
    coeffs = [t_ps * (-t_ps) ** k / math.factorial(k + 1) for k in range(taylor_order)]
    return TransferFunction(Polynomial(coeffs), Polynomial([1.0]))


@dataclass(frozen=True)
class PlantParams:
    """Linearised spend process around one operating point.

    w_n is in $/(lambda*minute); t_ps and t_f in seconds.
    """

    w_n: float
    t_ps: float
    t_f: float
    taylor_order: int = 10

    def __post_init__(self):
        if not (self.w_n > 0 and self.t_ps > 0 and self.t_f > 0):
            raise ValueError(f"plant parameters must be positive: {self}")
        if self.taylor_order < 2:
            raise ValueError("taylor_order must be >= 2")

    @property
    def nyquist_hz(self) -> float:
        return 1.0 / (2.0 * self.t_ps)


def plant_forward(p: PlantParams) -> TransferFunction:
    """Hold followed by the static plant gain (the forward path without sensing)."""
    return zoh_tf(p.t_ps, p.taylor_order).scaled(p.w_n)


def plant_open_loop(p: PlantParams) -> TransferFunction:
    """Hold, plant gain and the sensing low-pass in series. DC gain is ``w_n * t_ps``."""
    return tf_series(plant_forward(p), lpf_tf(p.t_f))


# -- frequency response ------------------------------------------------------


@dataclass(frozen=True)
class FrequencyResponseSample:
    freq_hz: float
    magnitude_db: float
    phase_deg: float
    complex_value: complex


def log_sweep(f_lo: float, f_hi: float, points_per_decade: int = POINTS_PER_DECADE) -> np.ndarray:
    """Log-spaced grid from ``f_lo`` to ``f_hi`` inclusive."""
    if not (0 < f_lo < f_hi):
        raise ValueError("need 0 < f_lo < f_hi")
    n = max(2, int(math.ceil(points_per_decade * math.log10(f_hi / f_lo))) + 1)
    return np.logspace(math.log10(f_lo), math.log10(f_hi), n)


def evaluate(tf: TransferFunction, freqs_hz) -> np.ndarray:
    """Complex response at ``s = j*2*pi*f``; raises on samples sitting on a pole."""
    f = np.asarray(freqs_hz, dtype=float)
    s = 1j * TWO_PI * f
    num = tf.numerator(s)
    den = tf.denominator(s)
    # Size of the individual denominator terms, to judge cancellation against rounding.
    scale = P.polyval(np.abs(s), np.abs(tf.denominator.coeffs))
    bad = np.abs(den) <= 64 * np.finfo(float).eps * scale
    if np.any(bad):
        where = f[bad] if f.ndim else f
        raise SingularSampleError(f"transfer function is singular at {where} Hz")
    return num / den


def bode_arrays(tf: TransferFunction, freqs_hz) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (complex values, magnitude dB, unwrapped phase deg) for a sweep."""
    f = np.asarray(freqs_hz, dtype=float)
    if f.ndim != 1 or len(f) == 0:
        raise ValueError("freqs_hz must be a non-empty 1-D sequence")
    if np.any(f <= 0) or np.any(np.diff(f) <= 0):
        raise ValueError("freqs_hz must be positive and strictly increasing")
    h = evaluate(tf, f)
    with np.errstate(divide="ignore"):
        mag_db = 20.0 * np.log10(np.abs(h))
    phase = np.degrees(np.unwrap(np.angle(h)))
    return h, mag_db, phase


def freq_response(tf: TransferFunction, freqs_hz: Sequence[float]) -> list[FrequencyResponseSample]:
    h, mag_db, phase = bode_arrays(tf, freqs_hz)
    return [
        FrequencyResponseSample(float(f), float(m), float(p), complex(v))
        for f, m, p, v in zip(np.asarray(freqs_hz, dtype=float), mag_db, phase, h)
    ]


# -- stability measurements --------------------------------------------------


@dataclass(frozen=True)
class Crossover:
    kind: str  # "gain", "phase" or "bandwidth"
    freq_hz: float
    value: float  # PM (deg) for gain crossovers, GM (dB) for phase crossovers
    aliased: bool


@dataclass(frozen=True)
class StabilityReport:
    """Bode margins and closed-loop figures for one loop configuration.

    ``gm_db`` is ``inf`` when the phase never reaches -180 deg inside the band,
    ``pm_deg`` is ``None`` when the loop gain never crosses unity there.
    """

    gm_db: float
    pm_deg: Optional[float]
    cog_db: float
    clbw_hz: Optional[float]
    gain_crossover_hz: Optional[float]
    phase_crossover_hz: Optional[float]
    nyquist_hz: float
    crossovers: tuple[Crossover, ...] = field(default=(), compare=False)

    @property
    def has_gm(self) -> bool:
        return self.phase_crossover_hz is not None

    @property
    def has_pm(self) -> bool:
        return self.pm_deg is not None

    @property
    def stable(self) -> bool:
        return bool(self.gm_db > 0 and self.pm_deg is not None and self.pm_deg > 0)

    def as_dict(self) -> dict:
        return {
            "gm_db": self.gm_db if self.has_gm else None,
            "pm_deg": self.pm_deg,
            "cog_db": self.cog_db,
            "clbw_hz": self.clbw_hz,
            "gain_crossover_hz": self.gain_crossover_hz,
            "phase_crossover_hz": self.phase_crossover_hz,
            "nyquist_hz": self.nyquist_hz,
        }


def _bisect_log(g: Callable[[float], float], lo: float, hi: float, rtol: float = 1e-6) -> float:
    """Root of ``g`` on [lo, hi] (sign change assumed), bisecting in log-frequency."""
    glo = g(lo)
    while hi / lo - 1.0 > rtol:
        mid = math.sqrt(lo * hi)
        gm = g(mid)
        if gm == 0.0:
            return mid
        if (gm < 0) == (glo < 0):
            lo, glo = mid, gm
        else:
            hi = mid
    return math.sqrt(lo * hi)


def _sign_changes(x: np.ndarray) -> np.ndarray:
    sx = np.sign(x)
    return np.nonzero(sx[:-1] * sx[1:] < 0)[0]


def _log_mag(tf: TransferFunction, f: float) -> float:
    return math.log(abs(complex(tf(1j * TWO_PI * f))))


def _phase_near(tf: TransferFunction, f: float, f_ref: float, phase_ref_deg: float) -> float:
    """Unwrapped phase at ``f`` continued from a nearby reference sample."""
    h = complex(tf(1j * TWO_PI * f))
    h_ref = complex(tf(1j * TWO_PI * f_ref))
    return phase_ref_deg + math.degrees(np.angle(h / h_ref))


def gain_crossovers(tf, freqs, mag_db, phase, rtol=1e-6) -> list[tuple[float, float]]:
    """All (f, PM) pairs where the loop gain crosses 0 dB on the sweep."""
    out = []
    for i in _sign_changes(mag_db):
        fc = _bisect_log(lambda f: _log_mag(tf, f), freqs[i], freqs[i + 1], rtol)
        out.append((fc, 180.0 + _phase_near(tf, fc, freqs[i], phase[i])))
    return out


def phase_crossovers(tf, freqs, mag_db, phase, rtol=1e-6) -> list[tuple[float, float]]:
    """All (f, GM) pairs where the unwrapped phase crosses -180 deg on the sweep."""
    out = []
    for i in _sign_changes(phase + 180.0):
        f0, p0 = freqs[i], phase[i]
        fc = _bisect_log(lambda f: _phase_near(tf, f, f0, p0) + 180.0, freqs[i], freqs[i + 1], rtol)
        out.append((fc, -20.0 * math.log10(abs(complex(tf(1j * TWO_PI * fc))))))
    return out


def closed_loop_bandwidth(closed_loop: TransferFunction, freqs, rtol: float = 1e-6) -> Optional[float]:
    """Lowest frequency where the closed-loop gain is 3 dB (half power) below its DC value."""
    dc = closed_loop.dc_gain()
    if not math.isfinite(dc) or dc == 0.0:
        dc = abs(complex(closed_loop(1j * TWO_PI * freqs[0])))
    ref_db = 20.0 * math.log10(abs(dc)) - HALF_POWER_DB
    _, mag_db, _ = bode_arrays(closed_loop, freqs)
    idx = _sign_changes(mag_db - ref_db)
    if len(idx) == 0:
        return None
    i = idx[0]
    return _bisect_log(
        lambda f: 20.0 * _log_mag(closed_loop, f) / math.log(10.0) - ref_db, freqs[i], freqs[i + 1], rtol
    )


def stability_report(
    open_loop: TransferFunction,
    closed_loop: TransferFunction,
    t_ps: float,
    f_traffic_max: float = F_TRAFFIC_MAX_HZ,
    *,
    f_min: float = SWEEP_START_HZ,
    points_per_decade: int = POINTS_PER_DECADE,
    band_hz: Optional[float] = None,
    sweep_hi_hz: Optional[float] = None,
    rtol: float = 1e-6,
) -> StabilityReport:
    """Gain/phase margins of ``open_loop`` plus cutoff gain and bandwidth of ``closed_loop``.

    Margins are searched from ``f_min`` up to ``band_hz`` (the Nyquist frequency
    of the pacing interval by default); the sweep continues to ``sweep_hi_hz``
    (twice Nyquist by default) so that crossovers in the aliased region are still
    listed in ``crossovers`` and the closed-loop bandwidth can be located there.
    The lowest in-band crossover of each kind sets the reported margin.
    """
    if f_traffic_max <= 0:
        raise ValueError("f_traffic_max must be positive")
    nyq = 1.0 / (2.0 * t_ps)
    band = nyq if band_hz is None else band_hz
    hi = max(sweep_hi_hz if sweep_hi_hz is not None else 2.0 * nyq, band)
    freqs = log_sweep(f_min, hi, points_per_decade)
    _, mag_db, phase = bode_arrays(open_loop, freqs)

    gx = gain_crossovers(open_loop, freqs, mag_db, phase, rtol)
    px = phase_crossovers(open_loop, freqs, mag_db, phase, rtol)
    crossings = [Crossover("gain", f, v, f > band) for f, v in gx]
    crossings += [Crossover("phase", f, v, f > band) for f, v in px]

    in_g = [(f, v) for f, v in gx if f <= band]
    in_p = [(f, v) for f, v in px if f <= band]
    gain_f, pm = in_g[0] if in_g else (None, None)
    phase_f, gm = in_p[0] if in_p else (None, math.inf)

    clbw = closed_loop_bandwidth(closed_loop, freqs, rtol)
    if clbw is not None:
        crossings.append(Crossover("bandwidth", clbw, -HALF_POWER_DB, clbw > band))
    cog = 20.0 * math.log10(abs(complex(closed_loop(1j * TWO_PI * f_traffic_max))))

    return StabilityReport(
        gm_db=gm,
        pm_deg=pm,
        cog_db=cog,
        clbw_hz=clbw,
        gain_crossover_hz=gain_f,
        phase_crossover_hz=phase_f,
        nyquist_hz=nyq,
        crossovers=tuple(sorted(crossings, key=lambda c: c.freq_hz)),
    )
