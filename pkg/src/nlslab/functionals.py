"""Scalar functionals of a field: mass, energy, virial functionals, actions."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .errors import CorruptFieldError
from .grid import ComplexField, moment_weighted_norms, spectral_gradient_norm_sq
from .model import ModelSpec

CSV_COLUMNS = (
    "t", "mass_sq", "kinetic", "potential_term", "F_integral", "hartree_G", "energy",
    "sigma_norm_sq", "Q", "Q1", "S_omega", "I_omega", "J", "J_prime",
)


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    mass_sq: float
    kinetic: float
    potential_term: float
    F_integral: float
    hartree_G: float
    energy: float
    sigma_norm_sq: float
    Q: float
    Q1: float
    S_omega: float
    I_omega: float
    J: float
    J_prime: float
    omega: float

    def csv_row(self) -> str:
        return ",".join(repr(float(getattr(self, c))) for c in CSV_COLUMNS)

    def as_dict(self) -> dict:
        return asdict(self)

    def recomposition_errors(self) -> dict:
        """Relative defects of the identities tying the stored fields together."""
        def rel(a, b):
            return abs(a - b) / max(1.0, abs(a), abs(b))
        e = 0.5 * (self.kinetic + self.potential_term) - 0.5 * self.F_integral - self.hartree_G
        return {
            "energy": rel(self.energy, e),
            "sigma_norm_sq": rel(self.sigma_norm_sq, self.mass_sq + self.kinetic + self.potential_term),
            "I_omega": rel(self.I_omega, self.omega * self.mass_sq + self.energy),
        }


def csv_header() -> str:
    return ",".join(CSV_COLUMNS)


@dataclass(frozen=True)
class Parts:
    """Raw integrals from which every functional is assembled."""

    mass_sq: float
    kinetic: float
    potential_term: float
    xdV_term: float
    F_integral: float
    sf_integral: float
    hartree_4G: float
    xdW_term: float

    def energy(self):
        return 0.5 * (self.kinetic + self.potential_term) - 0.5 * self.F_integral - 0.25 * self.hartree_4G

    def Q(self, N):
        return (2.0 * self.kinetic - self.xdV_term + N * (self.F_integral - self.sf_integral)
                + 0.5 * self.xdW_term)

    def Q1(self, N):
        return 2.0 * self.kinetic + N * (self.F_integral - self.sf_integral)

    def S(self, omega):
        return (2.0 * omega * self.mass_sq + self.kinetic + self.potential_term
                - self.sf_integral - self.hartree_4G)

    def I(self, omega):
        return omega * self.mass_sq + self.energy()


def parts(u: ComplexField, model: ModelSpec) -> Parts:
    u.check_finite()
    g = u.grid
    bm = model.on(g)
    rho = u.density
    loc = model.local
    if bm.has_hartree:
        h4 = g.integrate(bm.convolve(rho) * rho)
        xw = g.integrate(bm.convolve_radial(rho) * rho)
    else:
        h4 = xw = 0.0
    if bm.has_potential:
        pt, xv = g.integrate(bm.V * rho), g.integrate(bm.xdV * rho)
    else:
        pt = xv = 0.0
    if loc.is_zero:
        Fi = sfi = 0.0
    else:
        Fi, sfi = g.integrate(loc.F(rho)), g.integrate(loc.sf(rho))
    return Parts(g.integrate(rho), spectral_gradient_norm_sq(u), pt, xv, Fi, sfi, h4, xw)


def diagnostics(u: ComplexField, model: ModelSpec, omega: float = 0.0, t: float = 0.0) -> DiagnosticsRecord:
    p = parts(u, model)
    N = u.grid.dims
    J, Jp = moment_weighted_norms(u)
    rec = DiagnosticsRecord(
        t=float(t),
        mass_sq=p.mass_sq,
        kinetic=p.kinetic,
        potential_term=p.potential_term,
        F_integral=p.F_integral,
        hartree_G=0.25 * p.hartree_4G,
        energy=p.energy(),
        sigma_norm_sq=p.mass_sq + p.kinetic + p.potential_term,
        Q=p.Q(N),
        Q1=p.Q1(N),
        S_omega=p.S(omega),
        I_omega=p.I(omega),
        J=J,
        J_prime=Jp,
        omega=float(omega),
    )
    if not all(math.isfinite(getattr(rec, f.name)) for f in fields(rec)):
        raise CorruptFieldError("non-finite functional value")
    return rec


def virial_rhs(u: ComplexField, model: ModelSpec) -> float:
    """J'' = 4 Q(u)."""
    return 4.0 * diagnostics(u, model).Q


def uncertainty_check(u: ComplexField) -> float:
    """Ratio ||u||^2 / ((2/N) ||grad u|| ||x u||); never exceeds 1 in the continuum."""
    g = u.grid
    mass = u.norm_sq()
    if mass == 0.0:
        raise ValueError("uncertainty ratio undefined for the zero field")
    grad = math.sqrt(spectral_gradient_norm_sq(u))
    xu = math.sqrt(g.integrate(g.r2 * u.density))
    return mass / ((2.0 / g.dims) * grad * xu)


def pohozaev_sides(w: ComplexField, model: ModelSpec, omega: float) -> tuple[float, float]:
    """Both sides of the dilation identity obeyed by stationary states.

    N w ||w||^2 + (N-2)/2 K + N/2 int V w^2 + 1/2 int (x.grad V) w^2
        = N/2 int F + N/2 int (W*rho) rho + 1/4 int ((x.grad W)*rho) rho
    """
    p = parts(w, model)
    N = w.grid.dims
    lhs = (N * omega * p.mass_sq + 0.5 * (N - 2) * p.kinetic + 0.5 * N * p.potential_term
           + 0.5 * p.xdV_term)
    rhs = 0.5 * N * p.F_integral + 0.5 * N * p.hartree_4G + 0.25 * p.xdW_term
    return lhs, rhs


def nonlinear_potential(u_values: np.ndarray, model: ModelSpec, grid) -> np.ndarray:
    """f(|u|^2) + W*|u|^2 as a real field."""
    bm = model.on(grid)
    rho = u_values.real**2 + u_values.imag**2
    out = model.local.f(rho) if not model.local.is_zero else np.zeros(grid.shape)
    if bm.has_hartree:
        out = out + bm.convolve(rho)
    return out
