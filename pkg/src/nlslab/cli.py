"""Batch front end: ``nls-lab run <config>``.

Exit codes: 0 success, 1 configuration error, 2 hypothesis gate refused,
3 numerical failure. Every run leaves ``manifest.txt`` in the output directory.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.fft as sfft
from pydantic import ValidationError

from . import __version__
from .classify import classify_initial_data, dichotomy_experiment, quadratic_phase, table_header
from .config import RunConfig, load_config, with_override
from .dynamics import evolve, write_trajectory
from .errors import (
    CorruptFieldError, DivergenceError, EmptyConstraintSlice, GridError, HypothesisViolation,
    MassCollapseError, NotDilationReachable, UndecidableModelError,
)
from .functionals import diagnostics
from .grid import ComplexField, field_from_function, resample
from .groundstate import solve_stationary, verify_stationary_identities
from .snapshot import read_snapshot, write_snapshot
from .thresholds import estimate_d_I, estimate_d_II, estimate_d_M, estimate_d_N, estimate_d_prime_I

EXIT_OK, EXIT_CONFIG, EXIT_HYPOTHESIS, EXIT_NUMERIC = 0, 1, 2, 3
_NUMERIC = (CorruptFieldError, DivergenceError, MassCollapseError, NotDilationReachable, EmptyConstraintSlice)
_CONFIG = (ValidationError, json.JSONDecodeError, OSError, ValueError, GridError, UndecidableModelError)
_ESTIMATORS = {"d_I": estimate_d_I, "d_prime_I": estimate_d_prime_I, "d_N": estimate_d_N,
               "d_M": estimate_d_M, "d_II": estimate_d_II}

ROW_COLUMNS = {
    "simulate": ("outcome", "t_end", "mass_drift", "energy_drift", "gradient_growth"),
    "groundstate": ("residual_norm", "iterations", "I_omega", "s_omega_value", "q_value", "pohozaev_residual"),
    "classify": ("I_omega", "S_omega", "Q", "set_label", "prediction", "observed", "t_end"),
}

log = logging.getLogger("nlslab")


class RunFailure(Exception):
    def __init__(self, code: int, message: str, reasons=()):
        super().__init__(message)
        self.code = code
        self.reasons = list(reasons)


@dataclass
class Result:
    files: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    row: dict = field(default_factory=dict)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return "" if v is None else str(v)


def _atomic_write(path: Path, text: str) -> Path:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)
    return path


# inputs

def _base_field(cfg: RunConfig, model, grid) -> ComplexField:
    ini = cfg.initial
    if ini.kind == "gaussian":
        w2 = ini.width**2
        return field_from_function(grid, lambda *x: np.exp(-0.5 * sum(c * c for c in x) / w2))
    if ini.kind == "ground_state":
        try:
            st = solve_stationary(model, cfg.omega, grid=grid, seed=cfg.seed)
        except (DivergenceError, MassCollapseError) as exc:
            raise RunFailure(EXIT_NUMERIC, f"ground state for the initial field failed: {exc}") from exc
        return st.field
    u = read_snapshot(ini.path)
    if u.grid == grid:
        return u
    if u.grid.dims == grid.dims and u.grid.extent == grid.extent:
        return resample(u, grid)
    raise ValueError(f"snapshot grid {u.grid} does not match the configured grid {grid}")


def _with_phase(cfg: RunConfig, u: ComplexField, amplitude: float) -> ComplexField:
    ini = cfg.initial
    if ini.sigma and (ini.phase_above is None or amplitude > ini.phase_above):
        return quadratic_phase(u, ini.sigma)
    return u


def initial_field(cfg: RunConfig, model, grid) -> ComplexField:
    u = _base_field(cfg, model, grid) * cfg.initial.amplitude
    return _with_phase(cfg, u, cfg.initial.amplitude)


def _thresholds(cfg: RunConfig, model, grid, out: Path | None, res: Result, strict: bool = True) -> dict:
    """Estimate or take the configured levels. With ``strict`` off a refused gate drops the level."""
    t = cfg.threshold
    levels = {}
    text = ""
    opts = cfg.search_options()
    for name in t.levels:
        if name in t.values:
            levels[name] = float(t.values[name])
            text += f"{name}.value = {levels[name]!r}\n{name}.source = supplied\n"
            continue
        log.info("estimating %s", name)
        try:
            rep = _ESTIMATORS[name](model, grid, cfg.omega, opts, t.enforce_hypotheses)
        except HypothesisViolation as exc:
            if strict:
                raise
            text += f"{name}.skipped = {_one_line(exc)}\n"
            res.summary[f"{name}_skipped"] = "hypotheses fail"
            continue
        levels[name] = rep
        text += "".join(f"{name}.{ln}\n" for ln in rep.to_text().splitlines())
        res.summary[name] = rep.value
        res.summary[f"{name}_converged"] = rep.converged
        res.row[name] = rep.value
        res.row[f"{name}_converged"] = rep.converged
        if out is not None and rep.minimizer is not None:
            res.files.append(write_snapshot(out / f"{cfg.run_id}_{name}.nlsf", rep.minimizer))
    if out is not None and text:
        res.files.append(_atomic_write(out / f"{cfg.run_id}_thresholds.txt", text))
    return levels


# commands; ``out`` is None inside sweeps, where only the summary row is kept

def cmd_simulate(cfg, model, grid, out, res):
    eg = cfg.evolve_grid()
    u0 = resample(initial_field(cfg, model, grid), eg)
    tlog = evolve(u0, model, cfg.omega, cfg.evolve_options())
    if tlog.outcome == "corrupt":
        raise RunFailure(EXIT_NUMERIC, f"field became non-finite at t = {tlog.t_end!r}")
    r0 = tlog.records[0]
    mass = max(abs(r.mass_sq - r0.mass_sq) for r in tlog.records) / r0.mass_sq
    e_scale = abs(r0.energy) if r0.energy != 0 else 1.0
    energy = max(abs(r.energy - r0.energy) for r in tlog.records) / e_scale
    res.row.update(outcome=tlog.outcome, t_end=tlog.t_end, mass_drift=mass, energy_drift=energy,
                   gradient_growth=tlog.blowup_evidence.gradient_growth)
    res.summary.update(res.row, accepted_steps=tlog.accepted_steps, rejected_steps=tlog.rejected_steps)
    if tlog.blowup_evidence.j_curvature is not None:
        res.summary["j_curvature"] = tlog.blowup_evidence.j_curvature
    if out is not None:
        tlog.snapshots = {0.0: u0, tlog.t_end: tlog.final}
        res.files += write_trajectory(tlog, out, cfg.run_id)
    if tlog.outcome == "step_underflow":
        raise RunFailure(EXIT_NUMERIC, f"time step underflow at t = {tlog.t_end!r}")


def cmd_groundstate(cfg, model, grid, out, res):
    init = None
    if cfg.initial.kind != "gaussian" or cfg.initial.amplitude != 1.0 or cfg.initial.width != 1.0:
        init = initial_field(cfg, model, grid)
    st = solve_stationary(model, cfg.omega, init=init, grid=grid, seed=cfg.seed)
    ident = verify_stationary_identities(st, model)
    I = diagnostics(st.field, model, cfg.omega).I_omega
    res.row.update(residual_norm=st.residual_norm, iterations=st.iterations, I_omega=I,
                   s_omega_value=st.s_omega_value, q_value=st.q_value, pohozaev_residual=st.pohozaev_residual)
    res.summary.update(res.row, identities_ok=ident.ok)
    if out is not None:
        res.files.append(write_snapshot(out / f"{cfg.run_id}_groundstate.nlsf", st.field))
        text = st.sidecar_text() + f"I_omega = {I!r}\n" + "".join(f"identity.{ln}\n" for ln in ident.to_text().splitlines())
        res.files.append(_atomic_write(out / f"{cfg.run_id}_groundstate.txt", text))


def cmd_threshold(cfg, model, grid, out, res):
    _thresholds(cfg, model, grid, out, res)


def cmd_classify(cfg, model, grid, out, res):
    levels = _thresholds(cfg, model, grid, out, res, strict=False)
    u0 = initial_field(cfg, model, grid)
    rep = classify_initial_data(model, u0, cfg.omega, levels)
    if cfg.classify.evolve:
        tlog = evolve(resample(u0, cfg.evolve_grid()), model, cfg.omega, cfg.evolve_options())
        rep.observed = {"completed": "global", "blowup_detected": "blowup"}.get(tlog.outcome, tlog.outcome)
        rep.t_end = tlog.t_end
    v = rep.values
    res.row.update(I_omega=v["I_omega"], S_omega=v["S_omega"], Q=v["Q"], set_label=rep.set_label,
                   prediction=rep.prediction, observed=rep.observed, t_end=rep.t_end)
    res.summary.update(res.row, route=rep.route)
    if out is not None:
        csv = table_header() + "\n" + rep.csv_row(cfg.initial.amplitude) + "\n"
        res.files.append(_atomic_write(out / f"{cfg.run_id}_classify.csv", csv))
        res.files.append(_atomic_write(out / f"{cfg.run_id}_classify.txt", rep.to_text()))


def cmd_dichotomy(cfg, model, grid, out, res, threads=1):
    levels = _thresholds(cfg, model, grid, out, res, strict=False)
    base = _base_field(cfg, model, grid)
    ini = cfg.initial
    above = -math.inf if ini.phase_above is None else ini.phase_above
    table = dichotomy_experiment(model, cfg.omega, base, cfg.dichotomy.cs, levels, cfg.evolve_options(),
                                 sigma=ini.sigma, phase_above=above, evolve_grid=cfg.evolve_grid(),
                                 workers=max(1, min(cfg.dichotomy.workers, threads)))
    flips = sum(r.invariance.violations for r in table.rows if r.invariance and r.invariance.asserted)
    res.summary.update(rows=len(table.rows), disagreements=len(table.disagreements), sign_flips=flips)
    if out is not None:
        res.files.append(_atomic_write(out / f"{cfg.run_id}_classify.csv", table.csv_text()))


_COMMANDS = {"simulate": cmd_simulate, "groundstate": cmd_groundstate, "threshold": cmd_threshold,
             "classify": cmd_classify}


def _prepare(cfg: RunConfig):
    try:
        model = cfg.build_model()
        grid = cfg.build_grid()
        cfg.evolve_grid()
        cfg.evolve_options()
    except _CONFIG as exc:
        raise RunFailure(EXIT_CONFIG, f"invalid configuration: {exc}") from exc
    return model, grid


def execute(cfg: RunConfig, out: Path | None, threads: int = 1) -> Result:
    """Run one non-sweep command. Raises RunFailure with the exit code on error."""
    res = Result()
    model, grid = _prepare(cfg)
    try:
        if cfg.command == "dichotomy":
            cmd_dichotomy(cfg, model, grid, out, res, threads)
        else:
            _COMMANDS[cfg.command](cfg, model, grid, out, res)
    except RunFailure:
        raise
    except HypothesisViolation as exc:
        raise RunFailure(EXIT_HYPOTHESIS, str(exc), exc.reasons) from exc
    except _NUMERIC as exc:
        raise RunFailure(EXIT_NUMERIC, f"{type(exc).__name__}: {exc}") from exc
    except _CONFIG as exc:
        raise RunFailure(EXIT_CONFIG, f"{type(exc).__name__}: {exc}") from exc
    return res


def _sweep_columns(cfg: RunConfig) -> tuple:
    sw = cfg.sweep
    if sw.command == "threshold":
        return tuple(c for lvl in cfg.threshold.levels for c in (lvl, f"{lvl}_converged"))
    return ROW_COLUMNS[sw.command]


def cmd_sweep(cfg: RunConfig, out: Path, threads: int) -> Result:
    sw = cfg.sweep
    cols = _sweep_columns(cfg)
    base = with_override(cfg, "command", sw.command)

    def one(value):
        try:
            sub = with_override(base, sw.parameter, value)
            return EXIT_OK, execute(sub, None).row
        except RunFailure as exc:
            return exc.code, {}
        except (ValidationError, ValueError):
            return EXIT_CONFIG, {}

    if threads > 1 and len(sw.values) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, sw.values))
    else:
        rows = [one(v) for v in sw.values]
    lines = [",".join((sw.parameter, "exit_code") + cols)]
    for value, (code, row) in zip(sw.values, rows):
        lines.append(",".join([_fmt(value), str(code)] + [_fmt(row.get(c)) for c in cols]))
    res = Result()
    res.files.append(_atomic_write(out / f"{cfg.run_id}_sweep.csv", "\n".join(lines) + "\n"))
    res.summary.update(points=len(sw.values), failures=sum(1 for c, _ in rows if c))
    return res


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def write_manifest(out: Path, info: dict) -> Path:
    lines = []
    for k, v in info.items():
        if isinstance(v, list):
            lines += [f"{k} = {_fmt(x)}" for x in v]
        elif isinstance(v, dict):
            lines += [f"{k}.{kk} = {_fmt(vv)}" for kk, vv in v.items()]
        else:
            lines.append(f"{k} = {_fmt(v)}")
    out.mkdir(parents=True, exist_ok=True)
    return _atomic_write(out / "manifest.txt", "\n".join(lines) + "\n")


def run(config_path, out: str | None = None, seed: int | None = None, threads: int | None = None,
        quiet: bool = False) -> int:
    """Execute a run file and return the exit code."""
    started = _now()
    info = {"artifact_version": __version__, "config_path": str(config_path), "started": started}
    threads = threads or int(os.environ.get("NLS_LAB_THREADS", "1") or 1)
    try:
        cfg = load_config(config_path)
        if seed is not None:
            cfg = with_override(cfg, "seed", seed)
    except (ValidationError, json.JSONDecodeError, OSError, ValueError) as exc:
        out_dir = Path(out) if out else Path(_guess_output_dir(config_path))
        info.update(exit_code=EXIT_CONFIG, finished=_now(), error=f"invalid configuration: {_one_line(exc)}")
        write_manifest(out_dir, info)
        _report(quiet, info["error"])
        return EXIT_CONFIG
    out_dir = Path(out) if out else Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    info.update(config_hash=cfg.digest(), command=cfg.command, run_id=cfg.run_id, seed=cfg.seed, threads=threads)
    code = EXIT_OK
    res = Result()
    try:
        with sfft.set_workers(threads if cfg.command != "sweep" else 1):
            if cfg.command == "sweep":
                res = cmd_sweep(cfg, out_dir, threads)
            else:
                res = execute(cfg, out_dir, threads)
    except RunFailure as exc:
        code = exc.code
        info["error"] = _one_line(exc)
        if exc.reasons:
            info["reason"] = [_one_line(r) for r in exc.reasons]
        _report(quiet, info["error"], exc.reasons)
    info.update(exit_code=code, finished=_now(), output=[p.name for p in res.files], summary=res.summary)
    write_manifest(out_dir, info)
    if not quiet and code == EXIT_OK:
        print(f"{cfg.command}: ok, {len(res.files)} file(s) in {out_dir}", file=sys.stderr)
    return code


def _guess_output_dir(path) -> str:
    try:
        raw = json.loads(Path(path).read_text())
        if isinstance(raw, dict) and isinstance(raw.get("output_dir"), str):
            return raw["output_dir"]
    except (OSError, ValueError):
        pass
    return "nls-lab-out"


def _one_line(x) -> str:
    return " ".join(str(x).split())


def _report(quiet, msg, reasons=()):
    # errors are printed even with --quiet
    print(f"error: {msg}", file=sys.stderr)
    for r in reasons:
        print(f"  reason: {r}", file=sys.stderr)


def main(argv=None) -> int:
    p = argparse.ArgumentParser(prog="nls-lab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="action", required=True)
    r = sub.add_parser("run", help="execute a JSON run file")
    r.add_argument("config")
    r.add_argument("--out", help="output directory (overrides output_dir)")
    r.add_argument("--seed", type=int, help="seed for randomized restarts (overrides seed)")
    r.add_argument("--threads", type=int, help="FFT and sweep worker threads (default NLS_LAB_THREADS or 1)")
    r.add_argument("--quiet", action="store_true", help="only print errors")
    a = p.parse_args(argv)
    if a.threads is not None and a.threads < 1:
        p.error("--threads must be positive")
    if a.seed is not None and not 0 <= a.seed < 2**64:
        p.error("--seed must fit in an unsigned 64-bit integer")
    logging.basicConfig(level=logging.WARNING if a.quiet else logging.INFO, format="%(message)s")
    return run(a.config, a.out, a.seed, a.threads, a.quiet)


if __name__ == "__main__":
    sys.exit(main())
