"""Spend-velocity sensing: first-order low-pass, exponential smoother, resampling."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .lti import TransferFunction


@dataclass(frozen=True)
class LpfConfig:
    t_f: float
    t_sample: float

    def __post_init__(self):
        if self.t_f <= 0 or self.t_sample <= 0:
            raise ValueError("t_f and t_sample must be positive")

    @property
    def a(self) -> float:
        return (self.t_sample - 2 * self.t_f) / (self.t_sample + 2 * self.t_f)

    @property
    def b(self) -> float:
        return self.t_sample / (self.t_sample + 2 * self.t_f)


@dataclass(frozen=True)
class SmootherConfig:
    beta: float
    t_sample: float

    def __post_init__(self):
        if not 0 < self.beta <= 1:
            raise ValueError("beta must lie in (0, 1]")
        if self.t_sample <= 0:
            raise ValueError("t_sample must be positive")


@dataclass
class FilterState:
    u_prev: float = 0.0
    y_prev: float = 0.0

    @classmethod
    def preloaded(cls, value: float) -> "FilterState":
        """Steady state at ``value``, for attaching to a live stream."""
        return cls(value, value)


def _check(u_k: float) -> None:
    if not math.isfinite(u_k):
        raise ValueError(f"non-finite filter input {u_k!r}")


def lpf_step(cfg: LpfConfig, state: FilterState, u_k: float) -> float:
    _check(u_k)
    y = cfg.b * u_k + cfg.b * state.u_prev - cfg.a * state.y_prev
    state.u_prev, state.y_prev = u_k, y
    return y


def smoother_step(cfg: SmootherConfig, state: FilterState, u_k: float) -> float:
    _check(u_k)
    y = cfg.beta * u_k + (1.0 - cfg.beta) * state.y_prev
    state.u_prev, state.y_prev = u_k, y
    return y


def smoother_to_laplace(cfg: SmootherConfig) -> TransferFunction:
    """Continuous equivalent of the smoother under the inverse bilinear map."""
    b, t = cfg.beta, cfg.t_sample
    return TransferFunction.from_coeffs([b, 0.5 * b * t], [b, (1.0 - 0.5 * b) * t])


# -- irregular samples --------------------------------------------------------


@dataclass(frozen=True)
class SampleStream:
    timestamps: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "timestamps", tuple(float(t) for t in self.timestamps))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if len(self.timestamps) != len(self.values):
            raise ValueError("timestamps and values differ in length")
        if any(b <= a for a, b in zip(self.timestamps, self.timestamps[1:])):
            raise ValueError("timestamps must be strictly increasing")
        if any(not math.isfinite(v) or v < 0 for v in self.values):
            raise ValueError("values must be finite and non-negative")

    @classmethod
    def read_csv(cls, path: str | Path) -> "SampleStream":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        return cls([float(r["timestamp_s"]) for r in rows], [float(r["spend_velocity"]) for r in rows])


def lower_median(x: Sequence[float]) -> float:
    s = sorted(x)
    return s[(len(s) - 1) // 2]


def regularize(stream: SampleStream) -> tuple[float, np.ndarray]:
    """Resample onto a uniform grid spaced by the (lower) median interval.

    Returns ``(t_sample, values)``; the grid starts at the first timestamp.
    """
    t = np.asarray(stream.timestamps)
    if len(t) < 2:
        raise ValueError("need at least two samples")
    gaps = np.diff(t)
    span = t[-1] - t[0]
    if np.allclose(gaps, span / len(gaps), rtol=1e-9, atol=0.0):
        # Already uniform up to rounding: keep the samples as they are.
        return span / len(gaps), np.asarray(stream.values, dtype=float)
    dt = lower_median(gaps.tolist())
    n = int(math.floor(span / dt + 1e-9)) + 1
    grid = t[0] + dt * np.arange(n)
    return dt, np.interp(grid, t, np.asarray(stream.values))
