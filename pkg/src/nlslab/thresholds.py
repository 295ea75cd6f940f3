"""Upper-bound estimates of the threshold levels by constrained minimization.

Each level is an infimum of I_omega = omega ||u||^2 + E over a constraint set.
The search runs over a finite family of real fields (ground state, Gaussian
lattice, smooth perturbations of the best candidate). Every candidate is
pushed onto the constraint by a one-parameter scaling, then refined by
preconditioned descent along the constraint tangent. Reported values are
minima over this family, hence upper bounds of the true infima.

Levels:
    d_I        Q = 0
    d_prime_I  Q1 = 0
    d_N        S_omega = 0
    d_M        Q = 0 and S_omega < 0
    d_II       min(d_N, d_M)
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft
from scipy import optimize

from .errors import (EmptyConstraintSlice, HypothesisViolation, MassCollapseError, DivergenceError,
                     NotDilationReachable)
from .grid import ComplexField, Grid, dilate
from .groundstate import StationaryOperator, cross_manifold_seeds, solve_stationary
from .hypotheses import check_hypotheses
from .model import ModelSpec

LEVELS = ("d_I", "d_prime_I", "d_N", "d_M", "d_II")
_ROUTE = {"d_I": "threshold_Q", "d_prime_I": "threshold_Q1", "d_N": "threshold_cross",
          "d_M": "threshold_cross", "d_II": "threshold_cross"}


@dataclass(frozen=True)
class SearchOptions:
    widths: tuple = (0.5, 1.0, 2.0)
    amplitudes: tuple = (0.5, 1.0, 2.0)
    n_perturb: int = 5
    perturb_size: float = 0.2
    refine_steps: int = 200
    seed: int = 0
    use_ground_state: bool = True
    spread_limit: float = 0.10


@dataclass
class ThresholdReport:
    which: str
    value: float
    minimizer: ComplexField | None
    constraint_residual: float
    omega: float
    trace: dict
    lower_evidence: list
    converged: bool
    parts: dict = field(default_factory=dict)

    def to_text(self) -> str:
        lines = [
            f"which = {self.which}",
            f"value = {self.value!r}",
            f"omega = {self.omega!r}",
            f"constraint_residual = {self.constraint_residual!r}",
            f"converged = {str(self.converged).lower()}",
            f"positive = {str(self.value > 0).lower()}",
            "estimate_kind = upper bound (minimum over a finite search family)",
            "restart_values = " + " ".join(repr(v) for v in self.lower_evidence),
        ]
        lines += [f"trace.{k} = {v}" for k, v in self.trace.items()]
        text = "\n".join(lines) + "\n"
        for name, sub in self.parts.items():
            text += "".join(f"{name}.{ln}\n" for ln in sub.to_text().splitlines())
        return text


class _Evaluator:
    """Functionals and their L^2 gradients on real fields."""

    def __init__(self, model: ModelSpec, grid: Grid, omega: float):
        self.model, self.grid, self.omega = model, grid, omega
        self.N = grid.dims
        self.bm = model.on(grid)
        self.loc = model.local
        self.rk2 = grid.rk2
        self.precond = 1.0 / (2.0 * max(omega, 1e-3) + self.rk2)
        self._op = StationaryOperator(model, grid, max(omega, 1e-3)) if self.bm.has_potential else None

    def _r(self, a):
        return sfft.rfftn(a)

    def _ir(self, a):
        return sfft.irfftn(a, s=self.grid.shape)

    def lap(self, w):
        return self._ir(-self.rk2 * self._r(w))

    def smooth(self, g):
        """(2 omega + V - Lap)^{-1} g, the metric used for descent."""
        if self._op is not None:
            return self._op.solve_P(g, tol=1e-12)
        return self._ir(self.precond * self._r(g))

    def ints(self, w):
        g = self.grid
        rho = w * w
        d = {"rho": rho, "w": w}
        wh = self._r(w)
        weight = np.full(wh.shape, 2.0)
        weight[..., 0] = 1.0
        if g.points % 2 == 0:
            weight[..., -1] = 1.0
        d["M"] = g.integrate(rho)
        d["K"] = float(np.sum(weight * self.rk2 * (wh.real**2 + wh.imag**2)) * g.cell_volume / g.size)
        if self.bm.has_potential:
            d["pot"] = g.integrate(self.bm.V * rho)
            d["xv"] = g.integrate(self.bm.xdV * rho)
        else:
            d["pot"] = d["xv"] = 0.0
        if self.loc.is_zero:
            d["F"] = d["sf"] = 0.0
        else:
            d["F"] = g.integrate(self.loc.F(rho))
            d["sf"] = g.integrate(self.loc.sf(rho))
        if self.bm.has_hartree:
            d["conv"] = self.bm.convolve(rho)
            d["xconv"] = self.bm.convolve_radial(rho)
            d["h4"] = g.integrate(d["conv"] * rho)
            d["xw"] = g.integrate(d["xconv"] * rho)
        else:
            d["h4"] = d["xw"] = 0.0
        return d

    # values
    def I(self, d):
        return self.omega * d["M"] + 0.5 * (d["K"] + d["pot"]) - 0.5 * d["F"] - 0.25 * d["h4"]

    def S(self, d):
        return 2.0 * self.omega * d["M"] + d["K"] + d["pot"] - d["sf"] - d["h4"]

    def Q(self, d):
        return 2.0 * d["K"] - d["xv"] + self.N * (d["F"] - d["sf"]) + 0.5 * d["xw"]

    def Q1(self, d):
        return 2.0 * d["K"] + self.N * (d["F"] - d["sf"])

    def scale(self, which, d):
        """Magnitude used to make constraint residuals relative."""
        if which == "S":
            return 2.0 * self.omega * d["M"] + d["K"] + d["pot"]
        return 2.0 * d["K"]

    def constraint(self, which, d):
        return {"Q": self.Q, "Q1": self.Q1, "S": self.S}[which](d)

    # gradients
    def grad_I(self, d):
        w, rho = d["w"], d["rho"]
        g = 2.0 * self.omega * w - self.lap(w)
        if self.bm.has_potential:
            g = g + self.bm.V * w
        if not self.loc.is_zero:
            g = g - self.loc.f(rho) * w
        if self.bm.has_hartree:
            g = g - d["conv"] * w
        return g

    def grad_constraint(self, which, d):
        w, rho = d["w"], d["rho"]
        loc = self.loc
        if which == "S":
            g = 4.0 * self.omega * w - 2.0 * self.lap(w)
            if self.bm.has_potential:
                g = g + 2.0 * self.bm.V * w
            if not loc.is_zero:
                g = g - 2.0 * (loc.f(rho) + loc.sdf(rho)) * w
            if self.bm.has_hartree:
                g = g - 4.0 * d["conv"] * w
            return g
        g = -4.0 * self.lap(w)
        if not loc.is_zero:
            g = g - 2.0 * self.N * loc.sdf(rho) * w
        if which == "Q":
            if self.bm.has_potential:
                g = g - 2.0 * self.bm.xdV * w
            if self.bm.has_hartree:
                g = g + 2.0 * d["xconv"] * w
        return g


# -- one-parameter projections -------------------------------------------------

def _resolvable_window(w: np.ndarray, grid: Grid):
    """Dilation factors that keep the field resolved and inside the box."""
    amp = np.abs(w)
    peak = amp.max()
    r = np.sqrt(grid.r2)
    mask = amp > 1e-8 * peak
    r_max = max(float(r[mask].max()), grid.spacing)
    lam_min = r_max / (0.5 * grid.extent)
    spec = np.abs(sfft.fftn(w))
    k = np.sqrt(grid.k2)
    kmask = spec > 1e-8 * spec.max()
    k_max = max(float(k[kmask].max()), 2 * np.pi / grid.extent)
    lam_max = (np.pi / grid.spacing) / k_max
    # the identity neighbourhood is always admissible
    return min(max(lam_min, 1e-3), 1.0 - 1e-6), max(min(lam_max, 1e3), 1.0 + 1e-6)


def _homogeneous(model: ModelSpec, which: str) -> bool:
    pot_ok = model.potential.kind in ("zero", "harmonic") or which == "Q1"
    ker_ok = model.kernel.kind in ("zero", "inverse_power") or which == "Q1"
    return pot_ok and ker_ok and model.local.kind in ("zero", "power", "two_power")


def dilate_l2(w: np.ndarray, grid: Grid, lam: float) -> np.ndarray:
    """lam^{N/2} w(lam x)."""
    if lam == 1.0:
        return w.copy()
    return np.real(dilate(ComplexField(grid, w), lam).values) * lam ** (grid.dims / 2)


def _scalar_constraint(ev: _Evaluator, w, which):
    """Constraint value as an explicit function of lam under L^2 dilation."""
    g = ev.grid
    d = ev.ints(w)
    N = ev.N
    rho = d["rho"]
    terms = []
    loc = ev.model.local
    if not loc.is_zero:
        for c, e in loc.terms:
            integral = g.integrate(rho ** (e + 1))
            terms.append((N * e, N * c * (1.0 / (e + 1) - 1.0) * integral))
    K, xv, xw = d["K"], d["xv"], d["xw"]
    Kexp = float(ev.model.kernel.K) if ev.model.kernel.kind == "inverse_power" else 0.0

    def q(lam):
        val = 2.0 * lam**2 * K + sum(cf * lam**ex for ex, cf in terms)
        if which == "Q":
            val += -xv / lam**2 + 0.5 * xw * lam**Kexp
        return val
    return q


def _roots(fun, lo, hi, n=160):
    lams = np.geomspace(lo, hi, n)
    vals = [fun(l) for l in lams]
    out = []
    for a, b, fa, fb in zip(lams, lams[1:], vals, vals[1:]):
        if fa == 0:
            out.append(a)
        elif fa * fb < 0:
            out.append(optimize.brentq(fun, a, b, xtol=1e-14, rtol=1e-14))
    return out


def project_dilation(ev: _Evaluator, w: np.ndarray, which: str = "Q", require_S_negative=False):
    """Return the L^2 dilation of w with constraint ``which`` = 0 (lowest I among roots)."""
    g = ev.grid
    lo, hi = _resolvable_window(w, g)
    if lo >= hi:
        raise NotDilationReachable("field is not resolvable under dilation")
    d0 = ev.ints(w)
    if abs(ev.constraint(which, d0)) <= 1e-8 * ev.scale(which, d0) and (
            not require_S_negative or ev.S(d0) < -1e-10 * ev.scale("S", d0)):
        # already on the constraint
        return w, 1.0
    if _homogeneous(ev.model, which):
        q = _scalar_constraint(ev, w, which)
        roots = _roots(q, 1e-3, 1e3)
    else:
        def q(lam):
            return ev.constraint(which, ev.ints(dilate_l2(w, g, lam)))
        roots = _roots(q, lo, hi, n=48)
    best = None
    for lam in roots:
        if not lo <= lam <= hi:
            continue
        v = _polish(ev, w, lam, which)
        d = ev.ints(v)
        if require_S_negative and not ev.S(d) < -1e-10 * ev.scale("S", d):
            continue
        val = ev.I(d)
        if best is None or val < best[0]:
            best = (val, v, lam)
    if best is None:
        raise NotDilationReachable(f"no resolvable sign change of {which} along the dilation orbit")
    return best[1], best[2]


def _polish(ev, w, lam, which):
    g = ev.grid
    v = dilate_l2(w, g, lam)
    d = ev.ints(v)
    c = ev.constraint(which, d)
    if abs(c) <= 1e-12 * ev.scale(which, d):
        return v

    def q(l):
        return ev.constraint(which, ev.ints(dilate_l2(w, g, l)))
    a, b = lam * (1 - 1e-3), lam * (1 + 1e-3)
    qa, qb = q(a), q(b)
    if qa * qb < 0:
        lam = optimize.brentq(q, a, b, xtol=1e-15, rtol=1e-15)
        v = dilate_l2(w, g, lam)
    return v


def project_amplitude(ev: _Evaluator, w: np.ndarray):
    """rho w with S_omega(rho w) = 0, rho > 0 found by bisection."""
    g = ev.grid
    d = ev.ints(w)
    A = 2.0 * ev.omega * d["M"] + d["K"] + d["pot"]
    rho0 = d["rho"]
    loc, bm = ev.loc, ev.bm
    h4 = d["h4"]

    def s_over(r):
        # S(r w) / r^2
        val = A - r * r * h4
        if not loc.is_zero:
            val -= g.integrate(loc.f(r * r * rho0) * rho0)
        return val
    if s_over(1e-8) <= 0:
        raise EmptyConstraintSlice("S_omega not positive at small amplitude")
    hi = 1.0
    while s_over(hi) > 0:
        hi *= 2.0
        if hi > 1e8:
            raise EmptyConstraintSlice("Nehari slice empty in family (no amplitude root)")
    lo = hi / 2.0 if hi > 1.0 else 0.0
    while s_over(lo) <= 0 and lo > 1e-8:
        hi, lo = lo, lo / 2.0
    r = optimize.brentq(s_over, max(lo, 1e-8), hi, xtol=1e-15, rtol=1e-15)
    return r * w, r


# -- search -------------------------------------------------------------------

class _Problem:
    def __init__(self, ev, which):
        self.ev = ev
        self.kind = {"d_I": "Q", "d_prime_I": "Q1", "d_N": "S", "d_M": "Q"}[which]
        self.strict_S = which == "d_M"

    def project(self, w):
        if self.kind == "S":
            return project_amplitude(self.ev, w)[0]
        return project_dilation(self.ev, w, self.kind, self.strict_S)[0]

    def feasible(self, d):
        if not self.strict_S:
            return True
        ev = self.ev
        return ev.S(d) < -1e-10 * ev.scale("S", d)

    def residual(self, d):
        ev = self.ev
        return abs(ev.constraint(self.kind, d)) / max(ev.scale(self.kind, d), 1e-300)


def _refine(prob: _Problem, w, steps):
    ev = prob.ev
    g = ev.grid
    d = ev.ints(w)
    val = ev.I(d)
    alpha = 0.5
    taken = 0
    for _ in range(steps):
        gI = ev.grad_I(d)
        c = ev.grad_constraint(prob.kind, d)
        tg, tc = ev.smooth(gI), ev.smooth(c)
        ctc = g.integrate(c * tc)
        direction = tg - (g.integrate(gI * tc) / ctc) * tc if ctc > 0 else tg
        slope = g.integrate(gI * direction)
        if not slope > 1e-15 * max(abs(val), 1.0):
            break
        improved = False
        a = min(alpha * 2.0, 4.0)
        for _ in range(30):
            try:
                trial = prob.project(w - a * direction)
            except (NotDilationReachable, EmptyConstraintSlice):
                a *= 0.5
                continue
            dt = ev.ints(trial)
            tv = ev.I(dt)
            if prob.feasible(dt) and tv < val:
                w, d, val, alpha = trial, dt, tv, a
                improved = True
                break
            a *= 0.5
        if not improved:
            break
        taken += 1
    return w, val, taken


def _gaussians(grid, widths, amps):
    out = []
    for wd in widths:
        for a in amps:
            out.append((f"gauss(w={wd},a={a})", a * np.exp(-grid.r2 / (2.0 * wd * wd))))
    return out


def _smooth_noise(grid, rng):
    z = rng.standard_normal(grid.shape)
    z = sfft.irfftn(sfft.rfftn(z) * np.exp(-grid.rk2), s=grid.shape)
    return z / math.sqrt(max(grid.integrate(z * z), 1e-300))


def _gate(model, which, enforce):
    if not enforce:
        return
    rep = check_hypotheses(model)
    route = _ROUTE[which]
    if not rep.holds(route):
        raise HypothesisViolation(f"{which}: hypotheses of route {route} fail", rep.reasons(route))


def _estimate(model: ModelSpec, grid: Grid, omega: float, which: str, opts: SearchOptions,
              enforce_hypotheses: bool, extra=()) -> ThresholdReport:
    if not omega > 0:
        raise ValueError("omega must be positive")
    _gate(model, which, enforce_hypotheses)
    ev = _Evaluator(model, grid, omega)
    prob = _Problem(ev, which)
    rng = np.random.default_rng(opts.seed)
    raw = []
    notes = {}
    if opts.use_ground_state:
        try:
            st = solve_stationary(model, omega, grid=grid)
            w0 = np.real(st.field.values)
            raw.append(("ground_state", w0))
            if which == "d_M":
                for k, lam, v in cross_manifold_seeds(st, model, omega):
                    raw.append((f"cross_seed(k={k:.3g},lam={lam:.4g})", np.real(v.values)))
        except (MassCollapseError, DivergenceError) as exc:
            notes["ground_state"] = type(exc).__name__
    raw += _gaussians(grid, opts.widths, opts.amplitudes)

    projected = []
    unreachable = 0

    def admit(name, w):
        nonlocal unreachable
        try:
            v = prob.project(w)
        except (NotDilationReachable, EmptyConstraintSlice):
            unreachable += 1
            return
        d = ev.ints(v)
        if prob.feasible(d):
            projected.append((name, v, ev.I(d)))
        else:
            unreachable += 1

    for name, w in raw:
        admit(name, w)
    if projected and opts.n_perturb:
        best = min(projected, key=lambda t: t[2])[1]
        scale = math.sqrt(grid.integrate(best * best))
        for i in range(opts.n_perturb):
            admit(f"perturb_{i}", best + opts.perturb_size * scale * _smooth_noise(grid, rng))
    # caller-supplied fields join after the perturbation step, so they can only lower the result
    for i, u in enumerate(extra):
        admit(f"extra_{i}", np.real(u.values if isinstance(u, ComplexField) else np.asarray(u)))
    if not projected:
        kind = EmptyConstraintSlice if prob.kind == "S" or which == "d_M" else NotDilationReachable
        raise kind(f"{which}: no candidate of the search family reaches the constraint")

    refined = []
    steps_taken = []
    for name, v, val in projected:
        w, rv, taken = _refine(prob, v, opts.refine_steps)
        refined.append((name, w, rv))
        steps_taken.append(taken)
    values = [rv for _, _, rv in refined]
    i_best = int(np.argmin(values))
    name, w_best, value = refined[i_best]
    d = ev.ints(w_best)
    lo = min(values)
    spread = (max(values) - lo) / abs(lo) if lo != 0 else math.inf
    converged = spread <= opts.spread_limit and value > 0
    trace = {
        "candidates": len(raw) + opts.n_perturb + len(extra),
        "reachable": len(projected),
        "excluded": unreachable,
        "restarts": len(refined),
        "best_start": name,
        "refine_steps_max": max(steps_taken),
        "spread": repr(spread),
    }
    trace.update(notes)
    return ThresholdReport(which, float(value), ComplexField(grid, w_best), prob.residual(d), omega, trace,
                           values, converged)


def estimate_d_I(model, grid, omega, opts=SearchOptions(), enforce_hypotheses=True, extra_candidates=()):
    return _estimate(model, grid, omega, "d_I", opts, enforce_hypotheses, extra_candidates)


def estimate_d_prime_I(model, grid, omega, opts=SearchOptions(), enforce_hypotheses=True, extra_candidates=()):
    return _estimate(model, grid, omega, "d_prime_I", opts, enforce_hypotheses, extra_candidates)


def estimate_d_N(model, grid, omega, opts=SearchOptions(), enforce_hypotheses=True, extra_candidates=()):
    return _estimate(model, grid, omega, "d_N", opts, enforce_hypotheses, extra_candidates)


def estimate_d_M(model, grid, omega, opts=SearchOptions(), enforce_hypotheses=True, extra_candidates=()):
    return _estimate(model, grid, omega, "d_M", opts, enforce_hypotheses, extra_candidates)


def estimate_d_II(model, grid, omega, opts=SearchOptions(), enforce_hypotheses=True, extra_candidates=()):
    rn = estimate_d_N(model, grid, omega, opts, enforce_hypotheses, extra_candidates)
    rm = estimate_d_M(model, grid, omega, opts, enforce_hypotheses, extra_candidates)
    best = rn if rn.value <= rm.value else rm
    return ThresholdReport("d_II", min(rn.value, rm.value), best.minimizer, best.constraint_residual, omega,
                           {"from": best.which}, [rn.value, rm.value], rn.converged and rm.converged,
                           {"d_N": rn, "d_M": rm})


def project_to_Q_zero(u: ComplexField, model: ModelSpec, omega: float = 1.0) -> tuple[ComplexField, float]:
    """L^2 dilation of a real field onto Q = 0; returns the field and lam."""
    ev = _Evaluator(model, u.grid, omega)
    w = np.real(u.values)
    d = ev.ints(w)
    if abs(ev.Q(d)) <= 1e-12 * ev.scale("Q", d):
        return ComplexField(u.grid, w.copy()), 1.0
    v, lam = project_dilation(ev, w, "Q")
    return ComplexField(u.grid, v), lam


def project_to_nehari(u: ComplexField, model: ModelSpec, omega: float) -> tuple[ComplexField, float]:
    ev = _Evaluator(model, u.grid, omega)
    v, r = project_amplitude(ev, np.real(u.values))
    return ComplexField(u.grid, v), r
