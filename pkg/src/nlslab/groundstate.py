"""Real stationary states of 2 w w + V w - Lap w = f(w^2) w + (W*w^2) w.

The fixed-point map w -> P^{-1} N(w), with P = 2 omega + V - Lap, is unstable
along the amplitude direction for superlinear N. The Petviashvili factor
m^gamma with m = <w, P w>/<w, N(w)> removes that instability; the damped
update then converges for ground states.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft
from scipy import optimize
from scipy.sparse.linalg import LinearOperator, cg

from .errors import DivergenceError, MassCollapseError
from .functionals import diagnostics, parts, pohozaev_sides
from .grid import ComplexField, Grid, dilate, field_from_function
from .model import ModelSpec


@dataclass
class StationaryState:
    field: ComplexField
    omega: float
    residual_norm: float
    s_omega_value: float
    q_value: float
    pohozaev_residual: float
    iterations: int

    def sidecar_text(self) -> str:
        keys = ("omega", "residual_norm", "s_omega_value", "q_value", "pohozaev_residual", "iterations")
        return "".join(f"{k} = {getattr(self, k)!r}\n" for k in keys)


@dataclass
class IdentityReport:
    ok: bool
    tolerance: float
    s_omega: float
    q: float
    pohozaev_residual: float
    message: str

    def to_text(self) -> str:
        return (f"ok = {str(self.ok).lower()}\ntolerance = {self.tolerance!r}\n"
                f"s_omega = {self.s_omega!r}\nq = {self.q!r}\n"
                f"pohozaev_residual = {self.pohozaev_residual!r}\nmessage = {self.message}\n")


class StationaryOperator:
    """P = 2 omega + V - Lap and the nonlinearity N on real fields."""

    def __init__(self, model: ModelSpec, grid: Grid, omega: float):
        if not omega > 0:
            raise ValueError("omega must be positive")
        self.model, self.grid, self.omega = model, grid, omega
        self.bm = model.on(grid)
        self.rk2 = grid.rk2
        self.symbol = 2.0 * omega + self.rk2

    def _r(self, a):
        return sfft.rfftn(a)

    def _ir(self, a):
        return sfft.irfftn(a, s=self.grid.shape)

    def laplacian(self, w):
        return self._ir(-self.rk2 * self._r(w))

    def apply_P(self, w):
        out = self._ir(self.symbol * self._r(w))
        if self.bm.has_potential:
            out = out + self.bm.V * w
        return out

    def solve_P(self, r, tol=1e-13):
        """P^{-1} r; spectral when V = 0, otherwise preconditioned CG."""
        free = self._ir(self._r(r) / self.symbol)
        if not self.bm.has_potential:
            return free
        n = self.grid.size
        shape = self.grid.shape
        A = LinearOperator((n, n), matvec=lambda x: self.apply_P(x.reshape(shape)).ravel(), dtype=float)
        Minv = LinearOperator((n, n), matvec=lambda x: self._ir(self._r(x.reshape(shape)) / self.symbol).ravel(),
                              dtype=float)
        x, _ = cg(A, r.ravel(), x0=free.ravel(), M=Minv, rtol=tol, atol=0.0, maxiter=500)
        return x.reshape(shape)

    def nonlinearity(self, w):
        rho = w * w
        out = self.model.local.f(rho) * w if not self.model.local.is_zero else np.zeros_like(w)
        conv = None
        if self.bm.has_hartree:
            conv = self.bm.convolve(rho)
            out = out + conv * w
        return out, conv

    def nonlinearity_derivative_on_w(self, w, conv):
        """d/de N((1+e) w) at e = 0."""
        rho = w * w
        loc = self.model.local
        out = np.zeros_like(w)
        if not loc.is_zero:
            out = (loc.f(rho) + 2.0 * loc.sdf(rho)) * w
        if conv is not None:
            out = out + 3.0 * conv * w
        return out

    def inner(self, a, b):
        return self.grid.integrate(a * b)

    def residual(self, w):
        N, _ = self.nonlinearity(w)
        r = self.apply_P(w) - N
        return math.sqrt(self.inner(r, r))


def default_initial(grid: Grid) -> ComplexField:
    """Unit-mass Gaussian of width 1."""
    c = math.pi ** (-grid.dims / 4)
    return field_from_function(grid, lambda *x: c * np.exp(-0.5 * sum(xi**2 for xi in x)))


def _iterate(op: StationaryOperator, w, tol, max_iter, tau):
    history = []
    g = op.grid
    for it in range(1, max_iter + 1):
        N, conv = op.nonlinearity(w)
        Pw = op.apply_P(w)
        r = Pw - N
        res = math.sqrt(op.inner(r, r))
        history.append(res)
        if not math.isfinite(res):
            raise DivergenceError(f"non-finite residual at iteration {it}")
        if res <= tol:
            return w, res, it
        if len(history) > 100 and res > 10.0 * history[-101]:
            raise DivergenceError(f"residual grew from {history[-101]:.3g} to {res:.3g} over 100 iterations")
        wN = op.inner(w, N)
        if wN <= 0 or g.integrate(w * w) < 1e-8:
            raise MassCollapseError(f"iterate lost its nonlinear coupling at iteration {it}")
        m = op.inner(w, Pw) / wN
        q_eff = op.inner(w, op.nonlinearity_derivative_on_w(w, conv)) / wN
        gamma = q_eff / (q_eff - 1.0) if q_eff > 1.0 + 1e-9 else 1.0
        w = (1.0 - tau) * w + tau * m**gamma * op.solve_P(N)
        if g.integrate(w * w) < 1e-8:
            raise MassCollapseError(f"mass collapsed at iteration {it}")
    raise DivergenceError(f"no convergence in {max_iter} iterations (residual {history[-1]:.3g})")


def solve_stationary(model: ModelSpec, omega: float, init: ComplexField | None = None, tol: float = 1e-10,
                     max_iter: int = 10_000, tau: float = 0.5, seed: int = 0,
                     grid: Grid | None = None) -> StationaryState:
    """Solve the stationary equation from ``init`` (default: unit-mass Gaussian on ``grid``)."""
    if init is None:
        if grid is None:
            raise ValueError("pass an initial field or a grid")
        init = default_initial(grid)
    g = init.grid
    op = StationaryOperator(model, g, omega)
    w0 = np.real(init.values).copy()
    if g.integrate(w0 * w0) < 1e-8:
        raise ValueError("initial field must be nonzero")
    rng = np.random.default_rng(seed)
    last = None
    for attempt in range(4):
        start = w0
        if attempt:
            bump = rng.standard_normal(g.shape)
            bump = sfft.irfftn(sfft.rfftn(bump) * np.exp(-g.rk2), s=g.shape)
            start = w0 * (1.0 + 0.5 * attempt) + bump * math.sqrt(g.integrate(w0 * w0) / max(g.integrate(bump**2), 1e-300))
        try:
            w, res, it = _iterate(op, start, tol, max_iter, tau)
            break
        except MassCollapseError as exc:
            last = exc
    else:
        raise MassCollapseError(f"mass collapse after 4 attempts: {last}")
    field = ComplexField(g, w)
    d = diagnostics(field, model, omega)
    lhs, rhs = pohozaev_sides(field, model, omega)
    return StationaryState(field, omega, res, d.S_omega, d.Q, lhs - rhs, it)


def verify_stationary_identities(state: StationaryState, model: ModelSpec) -> IdentityReport:
    f = state.field
    if f.norm_sq() < 1e-8:
        raise ValueError("zero field is not a stationary state")
    d = diagnostics(f, model, state.omega)
    eps = max(1e-6, 10.0 * state.residual_norm * math.sqrt(d.sigma_norm_sq))
    lhs, rhs = pohozaev_sides(f, model, state.omega)
    poh = lhs - rhs
    bad = [name for name, v in (("S_omega", d.S_omega), ("Q", d.Q), ("pohozaev", poh)) if abs(v) > eps]
    msg = "ok" if not bad else "identity violated (" + ", ".join(bad) + "): grid too small or too coarse"
    return IdentityReport(not bad, eps, d.S_omega, d.Q, poh, msg)


@dataclass(frozen=True)
class ProbePoint:
    param: tuple
    S_omega: float
    Q: float
    I_omega: float


def _probe_field(w: ComplexField, k: float, lam: float) -> ComplexField:
    v = w if lam == 1.0 else dilate(w, lam)
    return v * k


def scaling_probe(state: StationaryState, model: ModelSpec, omega: float, mode: str, params) -> list[ProbePoint]:
    """Evaluate (S_omega, Q, I_omega) along rho w or k w(lam x)."""
    out = []
    for p in params:
        if mode == "amplitude":
            k, lam = float(p), 1.0
            key = (k,)
        elif mode == "dilation":
            k, lam = map(float, p)
            key = (k, lam)
        else:
            raise ValueError(f"unknown probe mode {mode!r}")
        if not (0 < k <= 4 and 0 < lam <= 4):
            raise ValueError("probe parameters must lie in (0, 4]")
        pr = parts(_probe_field(state.field, k, lam), model)
        out.append(ProbePoint(key, pr.S(omega), pr.Q(state.field.grid.dims), pr.I(omega)))
    return out


def cross_manifold_seeds(state: StationaryState, model: ModelSpec, omega: float,
                         ks=None, lam_range=(0.5, 1.5)) -> list[tuple[float, float, ComplexField]]:
    """Fields k w(lam x) with Q = 0 and S_omega < 0 found in the (k, lam) box."""
    ks = np.linspace(1.0, 1.5, 11)[1:] if ks is None else ks
    N = state.field.grid.dims
    found = []
    for k in ks:
        def q_of(lam, k=k):
            return parts(_probe_field(state.field, k, lam), model).Q(N)
        lams = np.linspace(*lam_range, 21)
        qs = [q_of(l) for l in lams]
        for a, b, qa, qb in zip(lams, lams[1:], qs, qs[1:]):
            if qa == 0 or qa * qb < 0:
                lam = a if qa == 0 else optimize.brentq(q_of, a, b, xtol=1e-13)
                v = _probe_field(state.field, k, lam)
                pr = parts(v, model)
                if pr.S(omega) < 0:
                    found.append((float(k), float(lam), v))
                break
    return found
