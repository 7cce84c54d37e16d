"""Closed-loop budget pacing simulator, traffic spectrum and pacing-error metrics.

One cohort is a single-owner state machine stepping on the auction interval
``t_as``: the plant spends continuously, the sensing low-pass samples the spend
velocity every ``t_as`` and the controller revises lambda every ``t_ps``
(lambda is held in between).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .compensators import LAMBDA_FLOOR, CompensatorSpec, PidSpec, PiRuntimeState, pi_step
from .discretization import to_recurrence, tustin
from .filters import FilterState, LpfConfig, lpf_step

DAY_S = 86400.0
TRACE_COLUMNS = ("time_s", "desired_v", "true_v", "observed_v", "lambda", "integrator", "cum_spend")

# (daily budget $, initial lambda) of the seven reference ad sets.
REFERENCE_COHORTS = (
    (387.5, 0.05),
    (250.0, 0.2),
    (800.0, 0.015),
    (500.0, 0.02),
    (111.0, 0.07),
    (275.0, 0.017),
    (248.0, 0.5),
)


# -- traffic -----------------------------------------------------------------


@dataclass(frozen=True)
class TrafficCurve:
    """Piecewise-constant request intensity; slot ``i`` covers
    ``[times[i], times[i] + resolution)`` and intensities sum to one."""

    times: np.ndarray
    intensities: np.ndarray
    resolution: float
    _suffix: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        x = np.asarray(self.intensities, dtype=float)
        if t.shape != x.shape or t.ndim != 1 or len(t) == 0:
            raise ValueError("times and intensities must be equal-length 1-D sequences")
        if np.any(x < 0) or not np.all(np.isfinite(x)) or x.sum() <= 0:
            raise ValueError("intensities must be finite, non-negative and not all zero")
        x = x / x.sum()
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "intensities", x)
        object.__setattr__(self, "_suffix", np.concatenate([np.cumsum(x[::-1])[::-1], [0.0]]))

    @classmethod
    def from_values(cls, values: Sequence[float], resolution: float, t0: float = 0.0) -> "TrafficCurve":
        return cls(t0 + resolution * np.arange(len(values)), np.asarray(values, dtype=float), resolution)

    @classmethod
    def uniform(cls, horizon_s: float = DAY_S, resolution: float = 60.0) -> "TrafficCurve":
        return cls.from_values(np.ones(int(round(horizon_s / resolution))), resolution)

    @classmethod
    def read_csv(cls, path: str | Path) -> "TrafficCurve":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if len(rows) < 2:
            raise ValueError("traffic CSV needs at least two rows")
        t = np.array([float(r["time_s"]) for r in rows])
        steps = np.diff(t)
        res = float(steps[0])
        if not np.allclose(steps, res, rtol=1e-9, atol=0):
            raise ValueError("traffic curve is not uniformly sampled; regularize it first")
        return cls(t, np.array([float(r["intensity"]) for r in rows]), res)

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time_s", "intensity"])
            for t, x in zip(self.times, self.intensities):
                w.writerow([repr(float(t)), repr(float(x))])

    @property
    def end(self) -> float:
        return float(self.times[0] + self.resolution * len(self.times))

    def slot(self, t: float) -> int:
        return int(math.floor((t - self.times[0]) / self.resolution))

    def at(self, t: float) -> float:
        i = self.slot(t)
        if i < 0 or i >= len(self.intensities):
            return 0.0
        return float(self.intensities[i])

    def remaining(self, t: float) -> float:
        """Traffic share still ahead of ``t``, counting the unexpired part of the current slot."""
        i = self.slot(t)
        if i < 0:
            return 1.0
        if i >= len(self.intensities):
            return 0.0
        frac = (self.times[i] + self.resolution - t) / self.resolution
        return float(frac * self.intensities[i] + self._suffix[i + 1])


def synthetic_diurnal(
    resolution: float = 60.0,
    day_s: float = DAY_S,
    ceiling_hz: float = 9.3e-5,
    floor_frac: float = 0.25,
) -> TrafficCurve:
    """Daily fundamental plus harmonics up to ``ceiling_hz`` with 1/k amplitudes.

    The curve is shifted so its minimum sits ``floor_frac`` of the peak-to-peak
    range above zero.
    """
    f0 = 1.0 / day_s
    n_harm = max(1, int(round(ceiling_hz / f0)))
    t = resolution * np.arange(int(round(day_s / resolution)))
    x = np.zeros_like(t)
    for k in range(1, n_harm + 1):
        x += np.cos(2 * np.pi * k * f0 * t - 0.6 * k - 2.0) / k
    x = x - x.min() + floor_frac * (x.max() - x.min())
    return TrafficCurve(t, x, resolution)


@dataclass(frozen=True)
class Spectrum:
    freqs_hz: np.ndarray
    magnitude: np.ndarray
    max_significant_hz: Optional[float]
    significant_hz: np.ndarray


def traffic_fft(traffic: TrafficCurve, threshold: float = 0.01) -> Spectrum:
    """One-sided magnitude spectrum of the mean-removed intensity sequence.

    Bins whose magnitude exceeds ``threshold`` times the peak count as
    significant; DC is never significant because the mean is removed.
    """
    x = np.asarray(traffic.intensities)
    if len(x) < 16:
        raise ValueError("need at least 16 samples")
    if not np.allclose(np.diff(traffic.times), traffic.resolution, rtol=1e-9, atol=0):
        raise ValueError("traffic curve is not uniformly sampled; regularize it first")
    mag = np.abs(np.fft.rfft(x - x.mean()))
    freqs = np.fft.rfftfreq(len(x), d=traffic.resolution)
    mag[0] = 0.0
    peak = mag.max()
    # Flat curve: whatever survives mean removal is rounding noise.
    if peak <= 1e-9 * np.abs(x).sum():
        return Spectrum(freqs, mag, None, np.array([]))
    sig = freqs[mag > threshold * peak]
    return Spectrum(freqs, mag, float(sig.max()), sig)


# -- plant and planning ------------------------------------------------------


def desired_velocity(
    remaining_budget: float, current_traffic: float, remaining_traffic: float, resolution_s: float = 60.0
) -> float:
    """Remaining budget apportioned by the current slot's traffic share, in $/minute."""
    if remaining_traffic <= 0 or remaining_budget <= 0:
        return 0.0
    per_slot = remaining_budget * current_traffic / remaining_traffic
    return per_slot / (resolution_s / 60.0)


def plant_step(
    w_n_t: float,
    lam: float,
    dt_min: float,
    rng: np.random.Generator,
    noise_frac: float = 0.05,
    remaining_budget: float = math.inf,
    noise_mode: str = "std",
) -> float:
    """Dollars spent over ``dt_min`` minutes at multiplier ``lam``.

    ``noise_mode="std"`` draws noise with standard deviation ``noise_frac*nominal``;
    ``"variance"`` uses variance ``noise_frac*nominal`` instead.
    """
    if dt_min <= 0:
        raise ValueError("dt must be positive")
    nominal = w_n_t * lam * dt_min
    z = rng.standard_normal()
    if noise_mode == "std":
        sigma = noise_frac * nominal
    elif noise_mode == "variance":
        sigma = math.sqrt(noise_frac * nominal)
    else:
        raise ValueError(f"unknown noise_mode {noise_mode!r}")
    return min(max(0.0, nominal + sigma * z), max(remaining_budget, 0.0))


# -- controllers -------------------------------------------------------------


@dataclass(frozen=True)
class BaselineSpec:
    """Fixed-step relay: lambda moves by ``step`` towards the error sign each cycle.

    A stand-in for a legacy step-based pacer, not a reconstruction of one.
    """

    step: float = 0.01


@dataclass
class BaselineState:
    lam: float
    step: float = 0.01


def baseline_step_controller(state: BaselineState, error: float) -> float:
    sign = (error > 0) - (error < 0)
    state.lam = min(max(state.lam + state.step * sign, LAMBDA_FLOOR), 1.0)
    return state.lam


ControllerSpec = Union[CompensatorSpec, BaselineSpec]


@dataclass(frozen=True)
class CohortConfig:
    daily_budget: float
    initial_lambda: float
    w_n_max: float = 13.52
    w_n_min: float = 1.707
    t_ps: float = 10.0
    t_as: float = 0.87
    t_f: float = 10.0 / (2.0 * math.pi)
    noise_frac: float = 0.05
    compensator: ControllerSpec = PidSpec(5e-4, 5e-5)
    seed: int = 0
    horizon_s: float = DAY_S
    noise_mode: str = "std"
    # Error multiplier seen by the compensator; None means t_ps, the DC gain the
    # hold contributes in the frequency-domain loop model.
    hold_gain_s: Optional[float] = None

    def __post_init__(self):
        if self.daily_budget <= 0:
            raise ValueError("daily_budget must be positive")
        if not 0 < self.initial_lambda <= 1:
            raise ValueError("initial_lambda must lie in (0, 1]")
        if not self.w_n_max >= self.w_n_min > 0:
            raise ValueError("need w_n_max >= w_n_min > 0")
        if min(self.t_ps, self.t_as, self.t_f, self.horizon_s) <= 0:
            raise ValueError("time constants must be positive")

    @property
    def loop_gain(self) -> float:
        return self.t_ps if self.hold_gain_s is None else self.hold_gain_s


def plant_gain_at(cfg: CohortConfig, traffic: TrafficCurve, t: float) -> float:
    """W_n(t) interpolated between the extremes by the normalised traffic level."""
    lo, hi = float(traffic.intensities.min()), float(traffic.intensities.max())
    if hi == lo:
        return cfg.w_n_max
    return cfg.w_n_min + (cfg.w_n_max - cfg.w_n_min) * (traffic.at(t) - lo) / (hi - lo)


class _Controller:
    def __init__(self, cfg: CohortConfig):
        spec = cfg.compensator
        self.dt = cfg.t_ps
        self.pi = self.baseline = self.rec = None
        if isinstance(spec, BaselineSpec):
            self.baseline = BaselineState(cfg.initial_lambda, spec.step)
        elif isinstance(spec, PidSpec) and spec.k_d == 0.0:
            self.pi = PiRuntimeState(spec.k_p, spec.k_i)
            self.pi.preload(cfg.initial_lambda)
        else:
            self.rec = to_recurrence(tustin(spec.tf(), cfg.t_ps))
            self.rec.preload(cfg.initial_lambda)
        self.gain = cfg.loop_gain

    @property
    def integrator(self) -> float:
        if self.pi is not None:
            return self.pi.integrator
        if self.rec is not None and self.rec.y_hist:
            return self.rec.y_hist[0]
        return math.nan

    def __call__(self, error: float) -> float:
        if self.baseline is not None:
            return baseline_step_controller(self.baseline, error)
        if self.pi is not None:
            return pi_step(self.pi, self.gain * error, self.dt)
        return self.rec.step(self.gain * error, limits=(LAMBDA_FLOOR, 1.0))


@dataclass
class SimTrace:
    """Per pacing cycle: the cycle start time, the plan and lambda set at that
    instant, the mean true velocity over the cycle and the spend at its end."""

    time_s: np.ndarray
    desired_v: np.ndarray
    true_v: np.ndarray
    observed_v: np.ndarray
    lam: np.ndarray
    integrator: np.ndarray
    cum_spend: np.ndarray
    daily_budget: float
    exhausted_at_s: Optional[float] = None

    @property
    def remaining_budget(self) -> np.ndarray:
        return self.daily_budget - self.cum_spend

    def __len__(self) -> int:
        return len(self.time_s)

    def columns(self) -> dict[str, np.ndarray]:
        return dict(zip(TRACE_COLUMNS, (self.time_s, self.desired_v, self.true_v, self.observed_v,
                                        self.lam, self.integrator, self.cum_spend)))

    def identical(self, other: "SimTrace") -> bool:
        a, b = self.columns(), other.columns()
        return all(np.array_equal(a[k], b[k], equal_nan=True) for k in TRACE_COLUMNS) and (
            self.exhausted_at_s == other.exhausted_at_s
        )

    def write_csv(self, path: str | Path) -> None:
        cols = self.columns()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(TRACE_COLUMNS)
            for row in zip(*cols.values()):
                w.writerow([repr(float(x)) for x in row])

    @classmethod
    def read_csv(cls, path: str | Path, daily_budget: float) -> "SimTrace":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        col = {k: np.array([float(r[k]) for r in rows]) for k in TRACE_COLUMNS}
        return cls(col["time_s"], col["desired_v"], col["true_v"], col["observed_v"],
                   col["lambda"], col["integrator"], col["cum_spend"], daily_budget)


def run_closed_loop(cfg: CohortConfig, traffic: TrafficCurve) -> SimTrace:
    """Simulate one cohort over ``cfg.horizon_s``; bit-reproducible for a given seed."""
    n_cycles = int(round(cfg.horizon_s / cfg.t_ps))
    if traffic.end < traffic.times[0] + cfg.horizon_s - 1e-9:
        raise ValueError("traffic curve does not cover the simulated horizon")
    rng = np.random.default_rng(cfg.seed)
    lpf = LpfConfig(cfg.t_f, cfg.t_as)
    lpf_state: Optional[FilterState] = None
    ctrl = _Controller(cfg)
    t_start = float(traffic.times[0])
    budget = cfg.daily_budget

    rec = {k: np.empty(n_cycles) for k in TRACE_COLUMNS}
    lam = min(max(cfg.initial_lambda, LAMBDA_FLOOR), 1.0)
    cum = 0.0
    observed = math.nan
    tick = 1
    tick_spend = 0.0
    exhausted_at = None

    for k in range(n_cycles):
        t0 = t_start + k * cfg.t_ps
        t1 = t0 + cfg.t_ps
        remaining = budget - cum
        desired = desired_velocity(remaining, traffic.at(t0), traffic.remaining(t0), traffic.resolution)
        if exhausted_at is None and remaining <= 1e-9:
            exhausted_at = t0
        if exhausted_at is not None:
            lam = LAMBDA_FLOOR
        elif k > 0:
            obs = desired if math.isnan(observed) else observed
            lam = ctrl(desired - obs)

        cycle_spend = 0.0
        t = t0
        while t < t1:
            t_tick = t_start + tick * cfg.t_as
            seg_end = min(t_tick, t1)
            dt = seg_end - t
            if dt > 0:
                s = plant_step(plant_gain_at(cfg, traffic, t), lam, dt / 60.0, rng,
                               cfg.noise_frac, budget - cum, cfg.noise_mode)
                cum += s
                cycle_spend += s
                tick_spend += s
            if seg_end == t_tick:
                v = tick_spend / (cfg.t_as / 60.0)
                if lpf_state is None:
                    lpf_state = FilterState.preloaded(v)
                observed = lpf_step(lpf, lpf_state, v)
                tick_spend = 0.0
                tick += 1
            t = seg_end

        rec["time_s"][k] = t0
        rec["desired_v"][k] = desired
        rec["true_v"][k] = cycle_spend / (cfg.t_ps / 60.0)
        rec["observed_v"][k] = observed
        rec["lambda"][k] = lam
        rec["integrator"][k] = ctrl.integrator
        rec["cum_spend"][k] = cum

    return SimTrace(rec["time_s"], rec["desired_v"], rec["true_v"], rec["observed_v"], rec["lambda"],
                    rec["integrator"], rec["cum_spend"], budget, exhausted_at)


def cohort_configs(base: CohortConfig, cohorts: Sequence[tuple[float, float]] = REFERENCE_COHORTS) -> list[CohortConfig]:
    """One config per (budget, initial lambda); cohort ``i`` is seeded ``base.seed + i``."""
    from dataclasses import replace

    return [replace(base, daily_budget=b, initial_lambda=l0, seed=base.seed + i) for i, (b, l0) in enumerate(cohorts)]


def run_cohorts(cfgs: Sequence[CohortConfig], traffic: TrafficCurve) -> list[SimTrace]:
    return [run_closed_loop(c, traffic) for c in cfgs]


# -- metrics -----------------------------------------------------------------


@dataclass(frozen=True)
class PacingErrorReport:
    pe: float
    swpe: float
    per_cohort_errors: tuple[float, ...]
    weights: tuple[float, ...]
    excluded: tuple[int, ...] = ()

    def as_dict(self) -> dict:
        return {
            "pe": self.pe,
            "swpe": self.swpe,
            "cohorts": [
                {"error": e, "weight": w, "excluded_measurements": x}
                for e, w, x in zip(self.per_cohort_errors, self.weights, self.excluded)
            ],
        }


def pacing_error(
    series: Sequence[tuple[Sequence[float], Sequence[float]]],
    spend: Optional[Sequence[float]] = None,
) -> PacingErrorReport:
    """Mean relative deviation of actual from desired velocity, plain and spend-weighted.

    ``series`` holds one ``(desired, actual)`` pair of sequences per cohort.
    ``spend`` gives each cohort's daily spend (normalised into weights; equal
    weights when omitted). The weighted figure keeps the 1/N prefactor, so with
    equal weights it equals PE / N. Measurements with zero desired velocity are
    skipped and counted in ``excluded``.
    """
    if not series:
        raise ValueError("no cohorts")
    errors, excluded = [], []
    for d, a in series:
        d = np.asarray(d, dtype=float)
        a = np.asarray(a, dtype=float)
        keep = d > 0
        if not keep.any():
            raise ValueError("a cohort has no positive desired velocity")
        errors.append(float(np.mean(np.abs(d[keep] - a[keep]) / d[keep])))
        excluded.append(int((~keep).sum()))
    n = len(errors)
    w = np.ones(n) if spend is None else np.asarray(spend, dtype=float)
    if np.any(w < 0) or w.sum() <= 0:
        raise ValueError("spend weights must be non-negative with a positive sum")
    w = w / w.sum()
    pe = float(np.mean(errors))
    swpe = float(np.dot(w, errors) / n)
    return PacingErrorReport(pe, swpe, tuple(errors), tuple(float(x) for x in w), tuple(excluded))


def trace_pacing_error(traces: Sequence[SimTrace]) -> PacingErrorReport:
    return pacing_error([(t.desired_v, t.true_v) for t in traces], [t.cum_spend[-1] for t in traces])


# -- auction micro-model -----------------------------------------------------


def auction_spend_velocity(
    lam: float,
    *,
    n: int = 200_000,
    impressions_per_min: float = 500.0,
    max_bid: float = 2.0,
    seed: int = 0,
) -> float:
    """Expected $/minute won by one advertiser at multiplier ``lam`` in a
    synthetic second-price market (lognormal clearing prices, beta click rates)."""
    rng = np.random.default_rng(seed)
    p_click = rng.beta(2.0, 60.0, n)
    competitor = rng.lognormal(np.log(0.02), 0.8, n)
    paced = lam * max_bid * p_click
    won = paced > competitor
    return float(impressions_per_min * np.mean(np.where(won, competitor, 0.0)))


def estimate_plant_gain(lam: float, d_lambda: float = 1e-2, **kw) -> float:
    """Finite-difference slope of spend velocity in lambda (common random numbers)."""
    return (auction_spend_velocity(lam + d_lambda, **kw) - auction_spend_velocity(lam, **kw)) / d_lambda
