"""Command-line entry point: ``bodepace <verb> [--config F] [--out P] [--seed N] [--format csv|json]``.

Exit codes: 0 success, 2 config or usage error, 3 numerical failure, 4 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .compensators import PidSpec, ZeroPoleSpec, evaluate_compensator, grid_search, loop_transfer_functions
from .config import ConfigError, RunConfig
from .discretization import to_recurrence, tustin
from .lti import (
    LoopConfigurationError,
    SingularSampleError,
    TransferFunction,
    bode_arrays,
    log_sweep,
    lpf_tf,
    plant_forward,
    plant_open_loop,
    stability_report,
    tf_feedback,
)
from .sim import (
    DAY_S,
    BaselineSpec,
    TrafficCurve,
    run_cohorts,
    synthetic_diurnal,
    trace_pacing_error,
    traffic_fft,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


class NumericalFailure(RuntimeError):
    pass


# -- output helpers ----------------------------------------------------------


def atomic_write(path: str | Path, text: str) -> None:
    """Write via a temp file in the target directory, then rename over ``path``."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def render(rows: list[dict], fmt: str) -> str:
    if fmt == "json":
        return json.dumps(rows, indent=2, sort_keys=True, default=float) + "\n"
    buf = io.StringIO()
    if rows:
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(rows[0].keys())
        for r in rows:
            w.writerow([_cell(v) for v in r.values()])
    return buf.getvalue()


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        atomic_write(out, text)
    else:
        sys.stdout.write(text)


# -- loop assembly -----------------------------------------------------------


def build_loop(cfg: RunConfig) -> tuple[TransferFunction, TransferFunction]:
    plant = cfg.plant()
    if cfg.loop == "plant":
        return plant_open_loop(plant), tf_feedback(plant_forward(plant), lpf_tf(plant.t_f))
    if cfg.compensator is None or isinstance(cfg.compensator, BaselineSpec):
        raise ConfigError("[compensator] kind: a linear compensator is required for this loop")
    comp = cfg.compensator.tf()
    if cfg.loop == "compensator":
        return comp, tf_feedback(comp, TransferFunction.constant(1.0))
    return loop_transfer_functions(comp, plant)


def _sweep(cfg: RunConfig) -> np.ndarray:
    hi = cfg.f_max_hz if cfg.f_max_hz is not None else cfg.plant().nyquist_hz
    if not 0 < cfg.f_min_hz < hi:
        raise ConfigError("[sweep] need 0 < f_min_hz < f_max_hz")
    if cfg.points is not None:
        if cfg.points < 2:
            raise ConfigError("[sweep] points must be at least 2")
        return np.logspace(math.log10(cfg.f_min_hz), math.log10(hi), cfg.points)
    return log_sweep(cfg.f_min_hz, hi, cfg.points_per_decade)


def bode_rows(tf: TransferFunction, freqs: np.ndarray, nyquist_hz: float) -> list[dict]:
    _, mag, phase = bode_arrays(tf, freqs)
    return [
        {"freq_hz": float(f), "mag_db": float(m), "phase_deg": float(p), "aliased": int(f > nyquist_hz)}
        for f, m, p in zip(freqs, mag, phase)
    ]


# -- verbs -------------------------------------------------------------------


def cmd_bode(cfg: RunConfig, args) -> int:
    ol, cl = build_loop(cfg)
    freqs = _sweep(cfg)
    nyq = cfg.plant().nyquist_hz
    _emit(render(bode_rows(ol, freqs, nyq), args.format), args.out)
    if cfg.closed_loop and args.out:
        out = Path(args.out)
        atomic_write(out.with_name(out.stem + ".closed" + out.suffix), render(bode_rows(cl, freqs, nyq), args.format))
    return EXIT_OK


def cmd_margins(cfg: RunConfig, args) -> int:
    ol, cl = build_loop(cfg)
    rep = stability_report(ol, cl, cfg.t_ps_s, cfg.f_traffic_max_hz, f_min=cfg.f_min_hz,
                           points_per_decade=cfg.points_per_decade)
    d = rep.as_dict()
    text = render([d], "csv") if args.format == "csv" else json.dumps(d, indent=2, sort_keys=True) + "\n"
    _emit(text, args.out)
    if cfg.require_margins and not (rep.has_gm and rep.has_pm):
        missing = [k for k, ok in (("gain margin", rep.has_gm), ("phase margin", rep.has_pm)) if not ok]
        raise NumericalFailure(f"no crossover below Nyquist for: {', '.join(missing)}")
    return EXIT_OK


def _report_cells(rep, suffix: str) -> dict:
    return {
        f"gm_{suffix}": rep.gm_db,
        f"pm_{suffix}": rep.pm_deg,
        f"cog_{suffix}": rep.cog_db,
        f"clbw_{suffix}": rep.clbw_hz,
    }


def gridsearch_rows(cfg: RunConfig) -> list[dict]:
    if not cfg.k_p_set or not cfg.k_i_set:
        raise ConfigError("[grid] k_p_set and k_i_set_per_s must be non-empty")
    pmax, pmin = cfg.plant(True), cfg.plant(False)
    results = []
    # Integral gain outermost, matching the usual table layout.
    for ki in cfg.k_i_set:
        results += grid_search(cfg.k_p_set, [ki], pmax, pmin, cfg.f_traffic_max_hz)
    for zeros, poles in cfg.zero_pole_cells:
        results.append(evaluate_compensator(ZeroPoleSpec(cfg.zero_pole_k_c, zeros, poles), pmax, pmin,
                                            cfg.f_traffic_max_hz))
    rows = []
    for r in results:
        c = r.compensator
        is_pid = isinstance(c, PidSpec)
        row = {
            "label": c.label,
            "kp": c.k_p if is_pid else None,
            "ki": c.k_i if is_pid else None,
            "zeros": None if is_pid else " ".join(repr(z) for z in c.zeros),
            "poles": None if is_pid else " ".join(repr(p) for p in c.poles),
        }
        row.update(_report_cells(r.report_max_wn, "max"))
        row.update(_report_cells(r.report_min_wn, "min"))
        row["feasible"] = int(r.feasible)
        rows.append(row)
    return rows


def cmd_gridsearch(cfg: RunConfig, args) -> int:
    _emit(render(gridsearch_rows(cfg), args.format), args.out)
    return EXIT_OK


def _traffic(cfg: RunConfig) -> TrafficCurve:
    if cfg.traffic_csv:
        return TrafficCurve.read_csv(cfg.traffic_csv)
    if cfg.horizon_s > DAY_S:
        raise ConfigError("[sim] horizon_s beyond one day needs traffic_csv")
    return synthetic_diurnal(ceiling_hz=cfg.f_traffic_max_hz)


def cmd_simulate(cfg: RunConfig, args) -> int:
    out_dir = Path(args.out or "sim_out")
    traffic = _traffic(cfg)
    cohorts = cfg.cohort_configs(args.seed)
    runs = {"compensated": cohorts}
    if cfg.compare_baseline:
        runs["baseline"] = [replace(c, compensator=BaselineSpec(cfg.baseline_step)) for c in cohorts]
    out_dir.mkdir(parents=True, exist_ok=True)
    report: dict = {"seed": cohorts[0].seed if cohorts else cfg.seed}
    for name, cfgs in runs.items():
        traces = run_cohorts(cfgs, traffic)
        for i, tr in enumerate(traces):
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            cols = tr.columns()
            w.writerow(cols.keys())
            for row in zip(*cols.values()):
                w.writerow([repr(float(x)) for x in row])
            atomic_write(out_dir / f"trace_{name}_{i}.csv", buf.getvalue())
        pe = trace_pacing_error(traces)
        report[name] = {
            **pe.as_dict(),
            "runs": [
                {"daily_budget": c.daily_budget, "initial_lambda": c.initial_lambda, "seed": c.seed,
                 "cum_spend": float(t.cum_spend[-1]), "exhausted_at_s": t.exhausted_at_s}
                for c, t in zip(cfgs, traces)
            ],
        }
    if "baseline" in report:
        report["pe_ratio_compensated_to_baseline"] = report["compensated"]["pe"] / report["baseline"]["pe"]
    atomic_write(out_dir / "report.json", json.dumps(report, indent=2, sort_keys=True) + "\n")
    print(json.dumps({k: report[k]["pe"] for k in runs}, sort_keys=True))
    return EXIT_OK


def cmd_fft(cfg: RunConfig, args) -> int:
    path = args.traffic_csv or cfg.traffic_csv
    traffic = TrafficCurve.read_csv(path) if path else synthetic_diurnal(ceiling_hz=cfg.f_traffic_max_hz)
    spec = traffic_fft(traffic)
    sig = set(spec.significant_hz.tolist())
    rows = [{"freq_hz": float(f), "magnitude": float(m), "significant": int(float(f) in sig)}
            for f, m in zip(spec.freqs_hz, spec.magnitude)]
    if args.out:
        atomic_write(args.out, render(rows, args.format))
    print(repr(spec.max_significant_hz) if spec.max_significant_hz is not None else "none")
    return EXIT_OK


def cmd_discretize(cfg: RunConfig, args) -> int:
    if cfg.compensator is None or isinstance(cfg.compensator, BaselineSpec):
        raise ConfigError("[compensator] kind: a linear compensator is required to discretize")
    t_z = cfg.t_z_s if cfg.t_z_s is not None else cfg.t_ps_s
    try:
        dtf = tustin(cfg.compensator.tf(), t_z)
    except ValueError as exc:
        raise ConfigError(f"[compensator] {exc}") from None
    rec = to_recurrence(dtf)
    d = {"t_z": t_z, "num_z": list(dtf.num_z), "den_z": list(dtf.den_z), "a": list(rec.a), "b": list(rec.b)}
    _emit(json.dumps(d, indent=2, sort_keys=True) + "\n", args.out)
    return EXIT_OK


VERBS = {
    "bode": (cmd_bode, "open/closed-loop Bode data"),
    "margins": (cmd_margins, "gain and phase margins, cutoff gain, bandwidth"),
    "gridsearch": (cmd_gridsearch, "margins over a PI gain grid plus zero-pole cells"),
    "simulate": (cmd_simulate, "closed-loop pacing simulation and pacing-error report"),
    "fft": (cmd_fft, "traffic spectrum and highest significant frequency"),
    "discretize": (cmd_discretize, "Tustin coefficients for the configured compensator"),
}


def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    # Subcommand copies must not clobber flags given before the verb.
    kw = {"default": argparse.SUPPRESS} if suppress else {}
    g = argparse.ArgumentParser(add_help=False)
    g.add_argument("--config", help="INI run configuration (defaults built in)", **kw)
    g.add_argument("--out", help="output file, or directory for simulate", **kw)
    g.add_argument("--seed", type=int, help="override [sim] seed", **kw)
    g.add_argument("--format", choices=("csv", "json"), **(kw or {"default": "csv"}))
    return g


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bodepace", description=__doc__.splitlines()[0], parents=[_global_flags(False)])
    sub = p.add_subparsers(dest="verb", required=True)
    flags = _global_flags(True)
    for name, (_, help_) in VERBS.items():
        sp = sub.add_parser(name, help=help_, parents=[flags])
        if name == "fft":
            sp.add_argument("traffic_csv", nargs="?", default=None, help="CSV with time_s,intensity")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.read(args.config) if args.config else RunConfig()
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        return VERBS[args.verb][0](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, SingularSampleError, LoopConfigurationError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
