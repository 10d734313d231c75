"""Command-line front end: ``simulate <subcommand> --config run.toml --out DIR``.

Exit codes: 0 success, 2 configuration errors, 3 domain errors, 4 resolution
or cap errors.  Failures print one JSON object on stderr.  All floats are
written with 17 significant digits so that CSV files round-trip exactly.
"""

from __future__ import annotations

import argparse
import itertools
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .config import ConfigError
from .dynamics import (
    DEFAULT_OMEGA_T_CAP,
    PotentialSegment,
    ci_gain,
    free_peak_coherence_reduced,
    free_peak_time_reduced,
    momentum_mapping_segments,
    reduced_coherence_curve,
)
from .errors import OverflowGuardError, ResolutionError, SimulationError
from .feasibility import budget, falsification_window
from .interferometry import CatState, EvolutionKind, GridSpec, synthesize, write_pattern
from .protocol import DEFAULT_MARGIN, coherence_timeline, run_protocol

OUT_DIR_ENV = "COHERENT_INFLATION_OUT"
DEFAULT_SWEEP_CAP = 1_000_000

SUBCOMMANDS = ("coherence", "ci-gain", "fringes", "protocol", "budget", "falsify", "sweep")
SWEEP_TARGETS = ("budget", "falsify", "protocol")


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.16e}"
    return str(value)


def write_csv(path: Path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def write_record(path: Path, record: dict):
    """Flat ``key = value`` text, one entry per line."""
    with open(path, "w") as fh:
        for key, val in record.items():
            fh.write(f"{key} = {fmt(val)}\n")


def _margin(args, default=DEFAULT_MARGIN):
    return default if args.margin is None else args.margin


def _cap(args):
    return DEFAULT_OMEGA_T_CAP if args.cap_omega_t is None else args.cap_omega_t


# -- subcommands ------------------------------------------------------------------------


def cmd_coherence(cfg, args, out: Path):
    sec = cfgmod.section(cfg, "coherence")
    if "lambda_tilde" in sec:
        lts = sec["lambda_tilde"]
        if not isinstance(lts, list) or not lts:
            raise ConfigError("coherence.lambda_tilde must be a non-empty list")
        n = int(cfgmod.number(sec, "n_samples", 2001))
        t_max = cfgmod.number(sec, "t_max_reduced", 10.0 * free_peak_time_reduced(min(lts)))
        t = np.linspace(0.0, t_max, n)
        g_x = cfgmod.number(sec, "g_x", 1.0)
        g_p = cfgmod.number(sec, "g_p", 1.0)
        header = ["t_reduced"]
        cols = [t]
        peaks = []
        for lt in lts:
            header.append(f"xi_reduced_lambda_{lt:.3e}")
            cols.append(reduced_coherence_curve(lt, t))
            if g_x != 1.0 or g_p != 1.0:
                header.append(f"xi_reduced_ci_lambda_{lt:.3e}")
                cols.append(reduced_coherence_curve(lt, t, g_x, g_p))
            peaks.append((lt, free_peak_time_reduced(lt), free_peak_coherence_reduced(lt),
                          free_peak_time_reduced(lt, g_p)))
        write_csv(out / "coherence.csv", header, zip(*cols))
        write_csv(out / "coherence_peaks.csv",
                  ["lambda_tilde", "t_peak_reduced", "xi_peak_reduced", "t_peak_ci_reduced"], peaks)
        return
    plan = cfgmod.plan_from(cfg, args.margin, args.cap_omega_t)
    reduced = bool(sec.get("reduced", False))
    tl = coherence_timeline(plan, int(cfgmod.number(sec, "n_samples", 2001)), reduced)
    header = ["t_reduced", "xi_reduced"] if reduced else ["t_s", "coherence_length_m"]
    write_csv(out / "coherence.csv", header, zip(tl.t, tl.coherence_length))


def cmd_ci_gain(cfg, args, out: Path):
    w0 = cfgmod.angular(cfgmod.section(cfg, "trap"), where="trap")
    sec = cfgmod.section(cfg, "inflator")
    wi = cfgmod.angular(sec, where="inflator")
    n = int(cfgmod.number(sec, "n_samples", 101))
    t_max = cfgmod.number(sec, "t_max_s", cfgmod.number(sec, "time_s", 10.0 / wi))
    rows = []
    for t in np.linspace(0.0, t_max, n):
        g = ci_gain(w0, wi, float(t), _cap(args))
        rows.append((float(t), wi * float(t), g.g, g.g_x, g.g_p))
    write_csv(out / "ci_gain.csv", ["t_s", "omega_t", "g", "g_x", "g_p"], rows)


def cmd_fringes(cfg, args, out: Path):
    sec = cfgmod.section(cfg, "fringes")
    slit = cfgmod.section(cfg, "slit")
    mass = cfgmod.sphere_from(cfg).mass if "sphere" in cfg else cfgmod.number(sec, "mass_kg", where="fringes")
    d = cfgmod.number(slit, "separation_nm", where="slit") * 1e-9
    width = slit.get("width_nm")
    cat = CatState(d, d / 10.0 if width is None else float(width) * 1e-9, mass)
    lam = cfgmod.number(sec, "lambda_Hz_per_m2", 0.0)
    t = cfgmod.number(sec, "time_s", where="fringes")
    kind = sec.get("evolution", "free")
    if kind == "free":
        segs = [PotentialSegment.free(t, lam)]
        ek = EvolutionKind.FREE_EXPANSION
    elif kind == "ci":
        wi = cfgmod.angular(cfgmod.section(cfg, "inflator"), where="inflator")
        segs = momentum_mapping_segments(wi, t, lam, cap_omega_t=_cap(args))
        ek = EvolutionKind.CI_EXPANSION
    else:
        raise ConfigError("fringes.evolution must be 'free' or 'ci'")
    grid = GridSpec(int(cfgmod.number(sec, "grid_points", 4096)))
    pattern = synthesize(cat, segs, grid, ek, cap_omega_t=_cap(args))
    write_pattern(pattern, out / "pattern.csv", out / "pattern_meta.json")


def cmd_protocol(cfg, args, out: Path):
    plan = cfgmod.plan_from(cfg, args.margin, args.cap_omega_t)
    trace = run_protocol(plan)
    rows = [
        (r.step, r.label, r.stage, r.t_start, r.t_end, r.coherence_length, r.purity,
         r.gamma_eff, r.lambda_eff, r.sw_exposure)
        for r in trace.records
    ]
    write_csv(out / "trace.csv",
              ["step", "label", "stage", "t_start_s", "t_end_s", "coherence_length_m", "purity",
               "gamma_eff_Hz", "lambda_eff_Hz_per_m2", "sw_exposure"], rows)
    write_record(out / "summary.txt", trace.summary)
    if trace.pattern is not None:
        write_pattern(trace.pattern, out / "pattern.csv", out / "pattern_meta.json")


def _budget_record(cfg, args) -> dict:
    sphere = cfgmod.sphere_from(cfg)
    env = cfgmod.environment_from(cfg)
    w0 = cfgmod.angular(cfgmod.section(cfg, "trap"), where="trap")
    inflator = cfgmod.section(cfg, "inflator")
    wi = cfgmod.angular(inflator, where="inflator")
    slit = cfgmod.section(cfg, "slit", required=False)
    d = slit["separation_nm"] * 1e-9 if "separation_nm" in slit else None
    t_i = inflator.get("time_s")
    return budget(sphere, w0, env, wi, d, t_i, _cap(args)).to_record()


def _falsify_record(cfg, args) -> dict:
    sphere = cfgmod.sphere_from(cfg)
    env = cfgmod.environment_from(cfg)
    w0 = cfgmod.angular(cfgmod.section(cfg, "trap"), where="trap")
    inflator = cfgmod.section(cfg, "inflator", required=False)
    proto = cfgmod.section(cfg, "protocol", required=False)
    wi = cfgmod.angular(inflator, where="inflator") if "frequency_Hz" in inflator else None
    margin = _margin(args, cfgmod.number(proto, "margin", DEFAULT_MARGIN))
    window = falsification_window(
        sphere, w0, env, margin,
        free_time=proto.get("free_time_s"),
        omega_i=wi,
        inflation_time=float(inflator.get("time_s", 0.0)),
    )
    return window.to_record()


def _protocol_record(cfg, args) -> dict:
    return run_protocol(cfgmod.plan_from(cfg, args.margin, args.cap_omega_t)).summary


RECORDERS = {"budget": _budget_record, "falsify": _falsify_record, "protocol": _protocol_record}


def cmd_budget(cfg, args, out: Path):
    rec = _budget_record(cfg, args)
    write_record(out / "budget.txt", rec)
    write_csv(out / "budget.csv", list(rec), [list(rec.values())])


def cmd_falsify(cfg, args, out: Path):
    rec = _falsify_record(cfg, args)
    write_record(out / "falsify.txt", rec)
    write_csv(out / "falsify.csv", list(rec), [list(rec.values())])


def axis_values(axis: dict) -> list:
    for key in ("key", "start", "stop", "count"):
        if key not in axis:
            raise ConfigError(f"sweep axis needs {key!r}")
    count = axis["count"]
    if isinstance(count, bool) or not isinstance(count, int) or count < 1:
        raise ConfigError(f"sweep axis {axis['key']!r}: count must be an integer >= 1")
    start, stop = float(axis["start"]), float(axis["stop"])
    scale = axis.get("scale", "linear")
    if count == 1:
        return [start]
    if scale == "log":
        if start <= 0 or stop <= 0:
            raise ConfigError("log sweep axes need positive bounds")
        return [float(v) for v in np.geomspace(start, stop, count)]
    if scale == "linear":
        return [float(v) for v in np.linspace(start, stop, count)]
    raise ConfigError("sweep axis scale must be 'linear' or 'log'")


class _Opts:
    """Picklable stand-in for the parsed overrides."""

    def __init__(self, margin, cap_omega_t):
        self.margin = margin
        self.cap_omega_t = cap_omega_t


def _sweep_point(job):
    index, target, cfg, margin, cap = job
    return index, RECORDERS[target](cfg, _Opts(margin, cap))


def sweep(cfg: dict, margin=None, cap_omega_t=None, workers: int = 1):
    """Evaluate the sweep grid; rows come back in lexicographic index order."""
    sec = cfgmod.section(cfg, "sweep")
    target = sec.get("target", "budget")
    if target not in SWEEP_TARGETS:
        raise ConfigError(f"sweep.target must be one of {SWEEP_TARGETS}")
    axes = sec.get("axis")
    if not isinstance(axes, list) or not axes:
        raise ConfigError("sweep needs at least one [[sweep.axis]]")
    keys = [ax.get("key", "") for ax in axes]
    values = [axis_values(ax) for ax in axes]
    for key in keys:
        cfgmod.get_key(cfg, key)
    cap = int(sec.get("max_points", DEFAULT_SWEEP_CAP))
    total = math.prod(len(v) for v in values)
    if total > cap:
        raise ResolutionError(f"sweep has {total} points, above the cap of {cap}")
    base = {k: v for k, v in cfg.items() if k != "sweep"}
    jobs = []
    for index in itertools.product(*(range(len(v)) for v in values)):
        point = base
        for key, vals, i in zip(keys, values, index):
            point = cfgmod.with_key(point, key, vals[i])
        jobs.append((index, target, point, margin, cap_omega_t))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_point, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        results = [_sweep_point(job) for job in jobs]
    results.sort(key=lambda r: r[0])
    rows = []
    for index, rec in results:
        coords = [vals[i] for vals, i in zip(values, index)]
        rows.append((list(index), coords, rec))
    return keys, rows


def cmd_sweep(cfg, args, out: Path):
    keys, rows = sweep(cfg, args.margin, args.cap_omega_t, args.workers)
    rec_keys = list(rows[0][2])
    header = [f"index_{k}" for k in keys] + keys + rec_keys
    write_csv(out / "sweep.csv", header,
              (idx + coords + [rec.get(k, math.nan) for k in rec_keys] for idx, coords, rec in rows))


COMMANDS = {
    "coherence": cmd_coherence,
    "ci-gain": cmd_ci_gain,
    "fringes": cmd_fringes,
    "protocol": cmd_protocol,
    "budget": cmd_budget,
    "falsify": cmd_falsify,
    "sweep": cmd_sweep,
}


# -- entry point -------------------------------------------------------------------------


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, ConfigError):
        return 2
    if isinstance(exc, (ResolutionError, OverflowGuardError)):
        return 4
    return 3


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="simulate", description=__doc__.splitlines()[0])
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", required=True, help="TOML run configuration")
    p.add_argument("--out", default=".", help=f"output directory (overridden by ${OUT_DIR_ENV})")
    p.add_argument("--margin", type=float, default=None, help="factor that operationalises '<<'")
    p.add_argument("--cap-omega-t", type=float, default=None, help="largest allowed wI*t")
    p.add_argument("--workers", type=int, default=1, help="parallel sweep workers")
    return p


def _fail(code: int, kind: str, message: str) -> int:
    sys.stderr.write(json.dumps({"error": kind, "exit_code": code, "message": message}) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code in (0, None):
            return 0
        return _fail(2, "UsageError", "invalid command line")
    if args.workers < 1:
        return _fail(2, "ConfigError", "--workers must be >= 1")
    out = Path(os.environ.get(OUT_DIR_ENV) or args.out)
    try:
        cfg = cfgmod.load(args.config)
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.subcommand](cfg, args, out)
    except (SimulationError, ValueError, KeyError, TypeError) as exc:
        if isinstance(exc, SimulationError):
            code = exit_code(exc)
        else:
            code = 2 if isinstance(exc, (KeyError, TypeError)) else 3
        return _fail(code, type(exc).__name__, str(exc).replace("\n", " "))
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
