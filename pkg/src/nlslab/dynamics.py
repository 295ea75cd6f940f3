"""Strang-split pseudo-spectral time stepping with step-doubling adaptivity.

Sign convention: i u_t = -Lap u + V u - f(|u|^2) u - (W*|u|^2) u.
The diagonal part (nonlinearity and potential) is integrated exactly as a
phase rotation, the Laplacian exactly in Fourier space.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.fft as sfft

from .errors import CorruptFieldError
from .functionals import csv_header, diagnostics
from .grid import ComplexField
from .model import ModelSpec
from .snapshot import write_snapshot

OUTCOMES = ("completed", "blowup_detected", "step_underflow", "corrupt")


@dataclass(frozen=True)
class EvolveOptions:
    dt_init: float = 1e-3
    dt_min: float = 1e-12
    t_final: float = 1.0
    record_every: float = 1e-2
    blowup_gradient_factor: float = 1e3
    blowup_sigma_cap: float = 1e8
    adapt: bool = False
    adapt_tolerance: float = 1e-8

    def __post_init__(self):
        if not 0 < self.dt_min <= self.dt_init:
            raise ValueError("need 0 < dt_min <= dt_init")
        if not self.t_final > 0:
            raise ValueError("t_final must be positive")
        if not self.record_every > 0:
            raise ValueError("record_every must be positive")
        if not (self.blowup_gradient_factor > 1 and self.blowup_sigma_cap > 1):
            raise ValueError("blowup factors must exceed 1")
        if not self.adapt_tolerance > 0:
            raise ValueError("adapt_tolerance must be positive")


@dataclass
class BlowupEvidence:
    gradient_growth: float
    dt_at_stop: float
    j_curvature: float | None


@dataclass
class TrajectoryLog:
    records: list
    outcome: str
    t_end: float
    blowup_evidence: BlowupEvidence
    final: ComplexField
    snapshots: dict = field(default_factory=dict)
    accepted_steps: int = 0
    rejected_steps: int = 0

    def csv_text(self) -> str:
        return csv_header() + "\n" + "".join(r.csv_row() + "\n" for r in self.records)


class _Stepper:
    """Owns the cached propagators for one (model, grid) pair."""

    _CACHE = 32

    def __init__(self, model: ModelSpec, grid):
        self.grid = grid
        self.bm = model.on(grid)
        self.local = model.local
        self.k2 = grid.k2
        self._lin = {}

    def phase_rate(self, rho):
        """f(rho) + W*rho - V."""
        out = self.local.f(rho) if not self.local.is_zero else np.zeros(self.grid.shape)
        if self.bm.has_hartree:
            out = out + self.bm.convolve(rho)
        if self.bm.has_potential:
            out = out - self.bm.V
        return out

    def linear(self, dt):
        m = self._lin.get(dt)
        if m is None:
            if len(self._lin) >= self._CACHE:
                self._lin.clear()
            m = np.exp(-1j * dt * self.k2)
            self._lin[dt] = m
        return m

    @staticmethod
    def rotation(c, rate):
        """exp(i c rate), built from cos and sin (cheaper than a complex exp)."""
        y = c * rate
        out = np.empty(y.shape, dtype=complex)
        np.cos(y, out=out.real)
        np.sin(y, out=out.imag)
        return out

    def _kick_drift(self, u, c, rate, dt):
        v = u * self.rotation(c, rate)
        return sfft.ifftn(sfft.fftn(v) * self.linear(dt))

    def step(self, u, dt, rate0):
        v = self._kick_drift(u, 0.5 * dt, rate0, dt)
        rate1 = self.phase_rate(v.real**2 + v.imag**2)
        return v * self.rotation(0.5 * dt, rate1), rate1

    def doubled(self, u, dt, rate0):
        """Return (two half steps, rate at the end, relative difference to one full step)."""
        a, _ = self.step(u, dt, rate0)
        v = self._kick_drift(u, 0.25 * dt, rate0, 0.5 * dt)
        mid = self.phase_rate(v.real**2 + v.imag**2)
        v = self._kick_drift(v, 0.5 * dt, mid, 0.5 * dt)
        rate1 = self.phase_rate(v.real**2 + v.imag**2)
        b = v * self.rotation(0.25 * dt, rate1)
        d = a - b
        err = math.sqrt(np.vdot(d, d).real / max(np.vdot(b, b).real, 1e-300))
        return b, rate1, err

    def kinetic(self, u):
        uh = sfft.fftn(u)
        g = self.grid
        return float(np.sum(self.k2 * (uh.real**2 + uh.imag**2)) * g.cell_volume / g.size)


def step_strang(u: ComplexField, model: ModelSpec, dt: float) -> ComplexField:
    """One nonlinear-linear-nonlinear Strang step of size dt."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    st = _Stepper(model, u.grid)
    v = u.values
    out, _ = st.step(v, dt, st.phase_rate(v.real**2 + v.imag**2))
    if not np.all(np.isfinite(out)):
        raise CorruptFieldError("step produced non-finite values")
    return ComplexField(u.grid, out)


def detect_blowup(kinetic, kinetic0, sigma_sq, opts: EvolveOptions) -> bool:
    """Gradient growth or sigma-norm cap reached."""
    return kinetic >= opts.blowup_gradient_factor**2 * kinetic0 or sigma_sq >= opts.blowup_sigma_cap


def _monotone(samples) -> bool:
    s = list(samples)
    return len(s) >= 2 and all(b > a for a, b in zip(s, s[1:]))


def j_curvature_fit(records, kinetic0, max_growth=1e2):
    """Second derivative of a quadratic fit to J(t) over the well-resolved records."""
    pts = [(r.t, r.J) for r in records if kinetic0 <= 0 or r.kinetic <= max_growth**2 * kinetic0]
    if len(pts) < 3:
        return None
    t, J = np.array(pts).T
    return float(2.0 * np.polyfit(t, J, 2)[0])


def evolve(u0: ComplexField, model: ModelSpec, omega: float, opts: EvolveOptions,
           keep_snapshots: bool = False) -> TrajectoryLog:
    u0.check_finite()
    g = u0.grid
    st = _Stepper(model, g)
    u = u0.values.copy()
    rate = st.phase_rate(u.real**2 + u.imag**2)
    rec0 = diagnostics(u0, model, omega, 0.0)
    records = [rec0]
    snaps = {0.0: u0} if keep_snapshots else {}
    kin0 = rec0.kinetic
    mass0 = rec0.mass_sq
    bm = st.bm
    recent = deque([kin0], maxlen=10)

    t = 0.0
    dt = opts.dt_init
    n_rec = 1
    next_rec = opts.record_every
    outcome = None
    accepted = rejected = 0
    kin = kin0
    T = opts.t_final
    snap_tol = 1e-9

    def record(time):
        f = ComplexField(g, u)
        records.append(diagnostics(f, model, omega, time))
        if keep_snapshots:
            snaps[time] = f

    while outcome is None:
        target = min(next_rec, T)
        gap = target - t
        hits = gap <= dt * (1 + snap_tol)
        h = gap if hits else dt
        if abs(h - dt) <= snap_tol * dt:
            h = dt
        if opts.adapt:
            new, new_rate, err = st.doubled(u, h, rate)
            if not math.isfinite(err):
                outcome = "corrupt"
                break
            if err > opts.adapt_tolerance:
                rejected += 1
                dt = 0.5 * h
                if dt < opts.dt_min:
                    outcome = "blowup_detected" if _monotone(recent) else "step_underflow"
                continue
            if err < 0.1 * opts.adapt_tolerance:
                dt = min(2.0 * dt, opts.dt_init)
        else:
            new, new_rate = st.step(u, h, rate)
        u, rate = new, new_rate
        accepted += 1
        t = target if hits else t + h
        kin = st.kinetic(u)
        if not math.isfinite(kin):
            outcome = "corrupt"
            break
        recent.append(kin)
        sigma = mass0 + kin + (g.integrate(bm.V * (u.real**2 + u.imag**2)) if bm.has_potential else 0.0)
        if hits and target == next_rec:
            record(target)
            n_rec += 1
            next_rec = n_rec * opts.record_every
        if t >= T - 1e-12:
            outcome = "completed"
        elif detect_blowup(kin, kin0, sigma, opts):
            outcome = "blowup_detected"

    if outcome == "corrupt":
        final = ComplexField(g, np.where(np.isfinite(u), u, 0))
    else:
        final = ComplexField(g, u)
        if records[-1].t < t:
            record(t)
    growth = math.sqrt(kin / kin0) if kin0 > 0 and math.isfinite(kin) else float("nan")
    evidence = BlowupEvidence(growth, dt, j_curvature_fit(records, kin0))
    return TrajectoryLog(records, outcome, t, evidence, final, snaps, accepted, rejected)


def time_tag(t: float) -> str:
    return format(t, ".6f")


def write_trajectory(log: TrajectoryLog, out_dir, run_id: str) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{run_id}_traj.csv"
    path.write_text(log.csv_text())
    files = [path]
    for t, f in sorted(log.snapshots.items()):
        files.append(write_snapshot(out / f"{run_id}_t{time_tag(t)}.nlsf", f))
    return files


def load_trajectory_csv(path) -> list[dict]:
    lines = Path(path).read_text().splitlines()
    cols = lines[0].split(",")
    return [dict(zip(cols, map(float, ln.split(",")))) for ln in lines[1:] if ln]


__all__ = [
    "EvolveOptions", "TrajectoryLog", "BlowupEvidence", "step_strang", "evolve",
    "detect_blowup", "j_curvature_fit", "write_trajectory", "load_trajectory_csv", "OUTCOMES",
]
