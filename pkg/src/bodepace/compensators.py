"""PID and zero-pole compensators, the anti-windup PI runtime and Bode grid search."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from typing import Optional, Sequence, Union

from .lti import (
    F_TRAFFIC_MAX_HZ,
    PlantParams,
    Polynomial,
    StabilityReport,
    TransferFunction,
    lpf_tf,
    plant_forward,
    stability_report,
    tf_feedback,
    tf_series,
)

LAMBDA_FLOOR = 1e-6


@dataclass(frozen=True)
class PidSpec:
    """Gains of ``k_p + k_i/s + k_d*s`` (k_i per second, k_d in seconds)."""

    k_p: float
    k_i: float = 0.0
    k_d: float = 0.0

    def __post_init__(self):
        if min(self.k_p, self.k_i, self.k_d) < 0:
            raise ValueError("PID gains must be non-negative")
        if self.k_p == self.k_i == self.k_d == 0:
            raise ValueError("at least one PID gain must be nonzero")

    def tf(self) -> TransferFunction:
        return pid_tf(self)

    @property
    def label(self) -> str:
        return f"kp={self.k_p:g} ki={self.k_i:g}" + (f" kd={self.k_d:g}" if self.k_d else "")


@dataclass(frozen=True)
class ZeroPoleSpec:
    """``k_c * prod(s/z_i + 1) / prod(s/p_i + 1)`` with corners in rad/s."""

    k_c: float
    zeros: tuple[float, ...] = ()
    poles: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "zeros", tuple(float(z) for z in self.zeros))
        object.__setattr__(self, "poles", tuple(float(p) for p in self.poles))
        if self.k_c <= 0:
            raise ValueError("k_c must be positive")
        if any(z <= 0 for z in self.zeros + self.poles):
            raise ValueError("zero and pole corners must be positive (left half-plane)")

    def tf(self) -> TransferFunction:
        return zero_pole_tf(self)

    @property
    def label(self) -> str:
        z = ",".join(f"{x:g}" for x in self.zeros) or "-"
        p = ",".join(f"{x:g}" for x in self.poles) or "-"
        return f"zeros={z} poles={p}"


CompensatorSpec = Union[PidSpec, ZeroPoleSpec]


def pid_tf(spec: PidSpec) -> TransferFunction:
    if spec.k_i == 0.0:
        # No integrator: keep it polynomial instead of carrying s/s.
        return TransferFunction(Polynomial([spec.k_p, spec.k_d]), Polynomial([1.0]))
    return TransferFunction(Polynomial([spec.k_i, spec.k_p, spec.k_d]), Polynomial([0.0, 1.0]))


def zero_pole_tf(spec: ZeroPoleSpec) -> TransferFunction:
    num = Polynomial([spec.k_c])
    for z in spec.zeros:
        num = num * Polynomial([1.0, 1.0 / z])
    den = Polynomial([1.0])
    for p in spec.poles:
        den = den * Polynomial([1.0, 1.0 / p])
    return TransferFunction(num, den)


# -- runtime PI with conditional integration ---------------------------------


@dataclass
class PiRuntimeState:
    k_p: float
    k_i: float
    integrator: float = 0.0
    last_lambda: float = LAMBDA_FLOOR
    integrator_bounds: tuple[float, float] = (0.0, 0.5)
    lambda_bounds: tuple[float, float] = (LAMBDA_FLOOR, 1.0)

    def preload(self, lam: float) -> None:
        lo, hi = self.integrator_bounds
        self.integrator = min(max(lam, lo), hi)
        self.last_lambda = min(max(lam, self.lambda_bounds[0]), self.lambda_bounds[1])


def pi_step(state: PiRuntimeState, error: float, dt: float) -> float:
    """One PI update; returns the new pacing multiplier.

    The integrator only accumulates while ``k_p*error + integrator`` lies strictly
    inside (0, 1), and is then held inside its bounds.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if not math.isfinite(error):
        raise ValueError(f"non-finite error {error!r}")
    lumped = state.k_p * error + state.integrator
    if 0.0 < lumped < 1.0:
        lo, hi = state.integrator_bounds
        state.integrator = min(max(state.integrator + state.k_i * error * dt, lo), hi)
    lam_lo, lam_hi = state.lambda_bounds
    lam = min(max(state.k_p * error + state.integrator, lam_lo), lam_hi)
    state.last_lambda = lam
    return lam


# -- loop assembly and grid search -------------------------------------------


def loop_transfer_functions(
    comp: TransferFunction, plant: PlantParams
) -> tuple[TransferFunction, TransferFunction]:
    """(open loop Gc*ZOH*G*H, closed loop Gc*ZOH*G / (1 + Gc*ZOH*G*H))."""
    forward = tf_series(comp, plant_forward(plant))
    sensing = lpf_tf(plant.t_f)
    return tf_series(forward, sensing), tf_feedback(forward, sensing)


def loop_report(comp: TransferFunction, plant: PlantParams, f_traffic_max: float = F_TRAFFIC_MAX_HZ, **kw) -> StabilityReport:
    ol, cl = loop_transfer_functions(comp, plant)
    return stability_report(ol, cl, plant.t_ps, f_traffic_max, **kw)


@dataclass(frozen=True)
class GridSearchResult:
    compensator: CompensatorSpec
    report_max_wn: StabilityReport
    report_min_wn: StabilityReport
    feasible: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "feasible", self.report_max_wn.stable)

    @property
    def k_p(self) -> Optional[float]:
        return getattr(self.compensator, "k_p", None)

    @property
    def k_i(self) -> Optional[float]:
        return getattr(self.compensator, "k_i", None)


def evaluate_compensator(
    spec: CompensatorSpec,
    plant_max: PlantParams,
    plant_min: PlantParams,
    f_traffic_max: float = F_TRAFFIC_MAX_HZ,
) -> GridSearchResult:
    tf = spec.tf()
    return GridSearchResult(
        spec,
        loop_report(tf, plant_max, f_traffic_max),
        loop_report(tf, plant_min, f_traffic_max),
    )


def grid_search(
    k_p_set: Sequence[float],
    k_i_set: Sequence[float],
    plant_max: PlantParams,
    plant_min: PlantParams,
    f_traffic_max: float = F_TRAFFIC_MAX_HZ,
) -> list[GridSearchResult]:
    """Every (k_p, k_i) pair in input order; infeasible cells are kept."""
    if not k_p_set or not k_i_set:
        raise ValueError("k_p_set and k_i_set must be non-empty")
    if not plant_max.w_n > plant_min.w_n:
        raise ValueError("plant_max.w_n must exceed plant_min.w_n")
    return [
        evaluate_compensator(PidSpec(kp, ki), plant_max, plant_min, f_traffic_max)
        for kp, ki in product(k_p_set, k_i_set)
    ]


def best_cell(results: Sequence[GridSearchResult]) -> Optional[GridSearchResult]:
    """Feasible cell with the largest PM at minimum W_n, then the largest GM at maximum W_n."""
    feasible = [r for r in results if r.feasible and r.report_min_wn.pm_deg is not None]
    if not feasible:
        return None
    return max(feasible, key=lambda r: (r.report_min_wn.pm_deg, r.report_max_wn.gm_db))
