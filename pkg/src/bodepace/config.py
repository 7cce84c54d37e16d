"""INI-style run configuration. Units are part of every key name."""
from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .compensators import CompensatorSpec, PidSpec, ZeroPoleSpec
from .lti import F_TRAFFIC_MAX_HZ, POINTS_PER_DECADE, SWEEP_START_HZ, PlantParams
from .sim import REFERENCE_COHORTS, BaselineSpec, CohortConfig


class ConfigError(ValueError):
    pass


def _floats(text: str) -> tuple[float, ...]:
    text = text.strip()
    return tuple(float(x) for x in text.split(",")) if text else ()


def _fmt(xs) -> str:
    return ", ".join(repr(float(x)) for x in xs)


def _opt_float(text: str) -> Optional[float]:
    text = text.strip()
    return float(text) if text else None


def _opt(x) -> str:
    return "" if x is None else repr(x)


def _pairs(text: str) -> tuple[tuple[tuple[float, ...], tuple[float, ...]], ...]:
    """Lines of ``a, b / c, d`` into ((a, b), (c, d)) tuples."""
    out = []
    for line in text.strip().splitlines():
        line = line.strip()
        if not line:
            continue
        left, sep, right = line.partition("/")
        if not sep:
            raise ConfigError(f"expected 'x / y' but got {line!r}")
        out.append((_floats(left), _floats(right)))
    return tuple(out)


def _fmt_pairs(pairs) -> str:
    return "".join(f"\n{_fmt(a)} / {_fmt(b)}" for a, b in pairs)


@dataclass(frozen=True)
class RunConfig:
    w_n_max: float = 13.52
    w_n_min: float = 1.707
    t_ps_s: float = 10.0
    t_f_s: float = 10.0 / (2.0 * math.pi)
    taylor_order: int = 10

    compensator: Optional[CompensatorSpec | BaselineSpec] = PidSpec(5e-4, 5e-5)

    loop: str = "compensated"  # compensated | plant | compensator
    plant_case: str = "max"
    closed_loop: bool = True
    require_margins: bool = False

    f_min_hz: float = SWEEP_START_HZ
    f_max_hz: Optional[float] = None
    points_per_decade: int = POINTS_PER_DECADE
    points: Optional[int] = None
    f_traffic_max_hz: float = F_TRAFFIC_MAX_HZ

    k_p_set: tuple[float, ...] = (5e-2, 5e-3, 5e-4)
    k_i_set: tuple[float, ...] = (5e-3, 5e-4, 5e-5)
    zero_pole_k_c: float = 1.0
    zero_pole_cells: tuple = (((1e-1,), (1e-4, 1e-3)), ((1e-1,), (1e-4,)), ((1e-1,), (1e-3,)))

    horizon_s: float = 86400.0
    t_as_s: float = 0.87
    noise_frac: float = 0.05
    noise_mode: str = "std"
    seed: int = 42
    traffic_csv: Optional[str] = None
    compare_baseline: bool = False
    baseline_step: float = 0.01
    hold_gain_s: Optional[float] = None
    cohorts: tuple = ((387.5, 0.05),)

    t_z_s: Optional[float] = None

    def __post_init__(self):
        if self.loop not in ("compensated", "plant", "compensator"):
            raise ConfigError(f"[analysis] loop: unknown value {self.loop!r}")
        if self.plant_case not in ("max", "min"):
            raise ConfigError(f"[analysis] plant_case: expected max or min, got {self.plant_case!r}")
        if self.noise_mode not in ("std", "variance"):
            raise ConfigError(f"[sim] noise_mode: expected std or variance, got {self.noise_mode!r}")
        if not self.w_n_max >= self.w_n_min:
            raise ConfigError("[plant] w_n_max_dollar_per_lambda_min must be >= w_n_min_dollar_per_lambda_min")
        try:
            self.plant(True)
            self.plant(False)
        except ValueError as exc:
            raise ConfigError(f"[plant] {exc}") from None
        if self.traffic_csv and not Path(self.traffic_csv).is_file():
            raise ConfigError(f"[sim] traffic_csv: no such file {self.traffic_csv!r}")

    def plant(self, maximum: bool | None = None) -> PlantParams:
        if maximum is None:
            maximum = self.plant_case == "max"
        return PlantParams(self.w_n_max if maximum else self.w_n_min, self.t_ps_s, self.t_f_s, self.taylor_order)

    def cohort_configs(self, seed: Optional[int] = None) -> list[CohortConfig]:
        base = self.seed if seed is None else seed
        comp = self.compensator if self.compensator is not None else PidSpec(5e-4, 5e-5)
        return [
            CohortConfig(
                daily_budget=b, initial_lambda=l0, w_n_max=self.w_n_max, w_n_min=self.w_n_min,
                t_ps=self.t_ps_s, t_as=self.t_as_s, t_f=self.t_f_s, noise_frac=self.noise_frac,
                compensator=comp, seed=base + i, horizon_s=self.horizon_s,
                noise_mode=self.noise_mode, hold_gain_s=self.hold_gain_s,
            )
            for i, (b, l0) in enumerate(self.cohorts)
        ]

    # -- serialisation -------------------------------------------------------

    def to_parser(self) -> configparser.ConfigParser:
        cp = configparser.ConfigParser(interpolation=None)
        cp["plant"] = {
            "w_n_max_dollar_per_lambda_min": repr(self.w_n_max),
            "w_n_min_dollar_per_lambda_min": repr(self.w_n_min),
            "t_ps_s": repr(self.t_ps_s),
            "t_f_s": repr(self.t_f_s),
            "taylor_order": str(self.taylor_order),
        }
        comp = self.compensator
        sec = {"kind": "none", "k_p": "", "k_i_per_s": "", "k_d_s": "", "k_c": "",
               "zeros_rad_per_s": "", "poles_rad_per_s": "", "baseline_step": ""}
        if isinstance(comp, PidSpec):
            sec.update(kind="pid", k_p=repr(comp.k_p), k_i_per_s=repr(comp.k_i), k_d_s=repr(comp.k_d))
        elif isinstance(comp, ZeroPoleSpec):
            sec.update(kind="zero_pole", k_c=repr(comp.k_c), zeros_rad_per_s=_fmt(comp.zeros),
                       poles_rad_per_s=_fmt(comp.poles))
        elif isinstance(comp, BaselineSpec):
            sec.update(kind="baseline", baseline_step=repr(comp.step))
        cp["compensator"] = sec
        cp["analysis"] = {
            "loop": self.loop,
            "plant_case": self.plant_case,
            "closed_loop": str(self.closed_loop).lower(),
            "require_margins": str(self.require_margins).lower(),
        }
        cp["sweep"] = {
            "f_min_hz": repr(self.f_min_hz),
            "f_max_hz": _opt(self.f_max_hz),
            "points_per_decade": str(self.points_per_decade),
            "points": _opt(self.points),
            "f_traffic_max_hz": repr(self.f_traffic_max_hz),
        }
        cp["grid"] = {
            "k_p_set": _fmt(self.k_p_set),
            "k_i_set_per_s": _fmt(self.k_i_set),
            "zero_pole_k_c": repr(self.zero_pole_k_c),
            "zero_pole_cells_rad_per_s": _fmt_pairs(self.zero_pole_cells),
        }
        cp["sim"] = {
            "horizon_s": repr(self.horizon_s),
            "t_as_s": repr(self.t_as_s),
            "noise_frac": repr(self.noise_frac),
            "noise_mode": self.noise_mode,
            "seed": str(self.seed),
            "traffic_csv": self.traffic_csv or "",
            "compare_baseline": str(self.compare_baseline).lower(),
            "baseline_step": repr(self.baseline_step),
            "hold_gain_s": _opt(self.hold_gain_s),
            "cohorts_dollar_lambda": _fmt_pairs(((b,), (l0,)) for b, l0 in self.cohorts),
        }
        cp["discretize"] = {"t_z_s": _opt(self.t_z_s)}
        return cp

    def dumps(self) -> str:
        buf = io.StringIO()
        self.to_parser().write(buf)
        return buf.getvalue()

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "RunConfig":
        cp = configparser.ConfigParser(interpolation=None)
        try:
            cp.read_string(text)
            return cls._from_parser(cp)
        except ConfigError:
            raise
        except (configparser.Error, ValueError, KeyError) as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def read(cls, path: str | Path) -> "RunConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.loads(text)

    @classmethod
    def _from_parser(cls, cp: configparser.ConfigParser) -> "RunConfig":
        d = cls()
        kw: dict = {}

        def get(section, key, conv, attr):
            if cp.has_option(section, key):
                raw = cp.get(section, key)
                try:
                    kw[attr] = conv(raw)
                except ValueError as exc:
                    raise ConfigError(f"[{section}] {key}: {exc}") from None

        def boolean(s):
            s = s.strip().lower()
            if s in ("1", "true", "yes", "on"):
                return True
            if s in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {s!r}")

        opt_int = lambda s: int(s) if s.strip() else None  # noqa: E731

        get("plant", "w_n_max_dollar_per_lambda_min", float, "w_n_max")
        get("plant", "w_n_min_dollar_per_lambda_min", float, "w_n_min")
        get("plant", "t_ps_s", float, "t_ps_s")
        get("plant", "t_f_s", float, "t_f_s")
        get("plant", "taylor_order", int, "taylor_order")

        if cp.has_section("compensator"):
            s = cp["compensator"]
            kind = s.get("kind", "pid").strip().lower()
            try:
                if kind in ("pid", "pi"):
                    kw["compensator"] = PidSpec(float(s.get("k_p") or 0), float(s.get("k_i_per_s") or 0),
                                                float(s.get("k_d_s") or 0))
                elif kind == "gain":
                    kw["compensator"] = PidSpec(float(s.get("k_p") or s.get("k_c")))
                elif kind == "zero_pole":
                    kw["compensator"] = ZeroPoleSpec(float(s.get("k_c") or 1.0), _floats(s.get("zeros_rad_per_s", "")),
                                                     _floats(s.get("poles_rad_per_s", "")))
                elif kind == "baseline":
                    kw["compensator"] = BaselineSpec(float(s.get("baseline_step") or 0.01))
                elif kind == "none":
                    kw["compensator"] = None
                else:
                    raise ValueError(f"unknown kind {kind!r}")
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"[compensator] {exc}") from None

        get("analysis", "loop", str.strip, "loop")
        get("analysis", "plant_case", str.strip, "plant_case")
        get("analysis", "closed_loop", boolean, "closed_loop")
        get("analysis", "require_margins", boolean, "require_margins")

        get("sweep", "f_min_hz", float, "f_min_hz")
        get("sweep", "f_max_hz", _opt_float, "f_max_hz")
        get("sweep", "points_per_decade", int, "points_per_decade")
        get("sweep", "points", opt_int, "points")
        get("sweep", "f_traffic_max_hz", float, "f_traffic_max_hz")

        get("grid", "k_p_set", _floats, "k_p_set")
        get("grid", "k_i_set_per_s", _floats, "k_i_set")
        get("grid", "zero_pole_k_c", float, "zero_pole_k_c")
        get("grid", "zero_pole_cells_rad_per_s", _pairs, "zero_pole_cells")

        get("sim", "horizon_s", float, "horizon_s")
        get("sim", "t_as_s", float, "t_as_s")
        get("sim", "noise_frac", float, "noise_frac")
        get("sim", "noise_mode", str.strip, "noise_mode")
        get("sim", "seed", int, "seed")
        get("sim", "traffic_csv", lambda s: s.strip() or None, "traffic_csv")
        get("sim", "compare_baseline", boolean, "compare_baseline")
        get("sim", "baseline_step", float, "baseline_step")
        get("sim", "hold_gain_s", _opt_float, "hold_gain_s")
        if cp.has_option("sim", "cohorts_dollar_lambda"):
            try:
                pairs = _pairs(cp.get("sim", "cohorts_dollar_lambda"))
            except ValueError:
                pairs = (((), ()),)
            if any(len(a) != 1 or len(b) != 1 for a, b in pairs):
                raise ConfigError("[sim] cohorts_dollar_lambda: each line must be 'budget / initial_lambda'")
            kw["cohorts"] = tuple((a[0], b[0]) for a, b in pairs)

        get("discretize", "t_z_s", _opt_float, "t_z_s")

        merged = {**{f: getattr(d, f) for f in d.__dataclass_fields__}, **kw}
        return cls(**merged)


def reference_cohort_config(**overrides) -> RunConfig:
    """Default run config with all seven reference cohorts."""
    return RunConfig(cohorts=REFERENCE_COHORTS, **overrides)
