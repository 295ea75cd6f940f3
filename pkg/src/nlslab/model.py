"""Catalog of potentials V, local nonlinearities f and Hartree kernels W.

Every catalog member carries closed forms for the quantities the functionals
need: the antiderivative F(s) = int_0^s f, the derivative f'_s, and the radial
derivatives x.grad V and x.grad W. Exponents are stored as ``Fraction`` so the
admissibility comparisons made by :mod:`nlslab.hypotheses` are exact.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import lru_cache

import numpy as np
import scipy.fft as sfft
from scipy import integrate, special

from .errors import GridError, UndecidableModelError
from .grid import Grid

POTENTIAL_KINDS = ("zero", "harmonic", "saturating")
LOCAL_KINDS = ("zero", "power", "two_power", "log_power")
KERNEL_KINDS = ("zero", "inverse_power", "gaussian", "saturating", "truncated_power")


def as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(x)


@dataclass(frozen=True)
class PotentialSpec:
    kind: str = "zero"
    a: float = 1.0

    def __post_init__(self):
        if self.kind not in POTENTIAL_KINDS:
            raise UndecidableModelError(f"unknown potential kind {self.kind!r}")
        if self.a < 0:
            raise ValueError("potential coefficient must be nonnegative (V >= 0)")

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero" or self.a == 0

    def values(self, r2):
        """Return ``(V, x.grad V)`` at squared radius ``r2``."""
        r2 = np.asarray(r2, dtype=float)
        if self.kind == "zero":
            z = np.zeros_like(r2)
            return z, z
        if self.kind == "harmonic":
            return self.a * r2, 2.0 * self.a * r2
        return self.a * r2 / (1.0 + r2), 2.0 * self.a * r2 / (1.0 + r2) ** 2


@dataclass(frozen=True)
class LocalNonlinearitySpec:
    """f(s) with s = |u|^2.

    ``power``: c0 s^e0; ``two_power``: c0 s^e0 + c1 s^e1 with e0 < e1;
    ``log_power``: c0 s^e0 log(1+s).
    """

    kind: str = "zero"
    coefs: tuple = ()
    exps: tuple = ()

    def __post_init__(self):
        if self.kind not in LOCAL_KINDS:
            raise UndecidableModelError(f"unknown nonlinearity kind {self.kind!r}")
        nterms = {"zero": 0, "power": 1, "two_power": 2, "log_power": 1}[self.kind]
        if len(self.coefs) != nterms or len(self.exps) != nterms:
            raise ValueError(f"{self.kind} takes {nterms} coefficient/exponent pairs")
        exps = tuple(as_fraction(e) for e in self.exps)
        if any(e <= 0 for e in exps):
            raise ValueError("exponents must be positive")
        if self.kind == "two_power" and not exps[0] < exps[1]:
            raise ValueError("two_power requires p1 < p2")
        object.__setattr__(self, "exps", exps)
        object.__setattr__(self, "coefs", tuple(float(c) for c in self.coefs))

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def power(cls, b, p):
        return cls("power", (b,), (p,))

    @classmethod
    def two_power(cls, mu, p1, nu, p2):
        return cls("two_power", (mu, nu), (p1, p2))

    @classmethod
    def log_power(cls, b, p):
        return cls("log_power", (b,), (p,))

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero" or all(c == 0 for c in self.coefs)

    @property
    def terms(self):
        return [(c, float(e)) for c, e in zip(self.coefs, self.exps)]

    def f(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(s)
        if self.kind == "log_power":
            (b, p), = self.terms
            return b * s**p * np.log1p(s)
        return sum(c * s**e for c, e in self.terms)

    def F(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(s)
        if self.kind == "log_power":
            (b, p), = self.terms
            tail = s ** (p + 2) / ((p + 1) * (p + 2)) * special.hyp2f1(1.0, p + 2, p + 3, -s)
            return b * (s ** (p + 1) * np.log1p(s) / (p + 1) - tail)
        return sum(c * s ** (e + 1) / (e + 1) for c, e in self.terms)

    def df(self, s):
        """Partial derivative f'_s."""
        s = np.asarray(s, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(s)
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.kind == "log_power":
                (b, p), = self.terms
                return b * (p * s ** (p - 1) * np.log1p(s) + s**p / (1.0 + s))
            return sum(c * e * s ** (e - 1) for c, e in self.terms)

    def sf(self, s):
        return np.asarray(s, dtype=float) * self.f(s)

    def sdf(self, s):
        """s f'_s(s), finite at s = 0 even when f'_s is not."""
        s = np.asarray(s, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(s)
        if self.kind == "log_power":
            (b, p), = self.terms
            return b * (p * s**p * np.log1p(s) + s ** (p + 1) / (1.0 + s))
        return sum(c * e * s**e for c, e in self.terms)


@dataclass(frozen=True)
class KernelSpec:
    """Even Hartree kernel W, or its radial derivative x.grad W when ``radial``.

    ``inverse_power``: a |x|^-K.  ``gaussian``: a exp(-pi |x|^2).
    ``saturating``: a |x|^2 / (1 + |x|^2).
    ``truncated_power``: a |x|^-inner for |x| <= 1, a |x|^-K for |x| >= 2, joined
    by a bridge whose log-slope runs monotonically-plus-bump between the two.
    """

    kind: str = "zero"
    a: float = 1.0
    K: Fraction | None = None
    inner: Fraction | None = None
    radial: bool = False

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise UndecidableModelError(f"unknown kernel kind {self.kind!r}")
        for name in ("K", "inner"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, as_fraction(v))
        if self.kind in ("inverse_power", "truncated_power") and (self.K is None or self.K <= 0):
            raise ValueError(f"{self.kind} kernel needs a positive exponent K")
        if self.kind == "truncated_power":
            if self.inner is None or not 0 < self.inner < self.K:
                raise ValueError("truncated_power needs 0 < inner < K")
        object.__setattr__(self, "a", float(self.a))

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero" or self.a == 0

    def radial_derivative(self) -> "KernelSpec":
        if self.radial:
            raise ValueError("kernel is already a radial derivative")
        return replace(self, radial=True)

    # real-space closed forms -------------------------------------------------
    def bridge_slope(self, r):
        """Log-slope r W'/W of the truncated kernel (valid for any r > 0)."""
        nl, K = float(self.inner), float(self.K)
        tau = np.clip(np.log2(np.maximum(r, 1e-300)), 0.0, 1.0)
        smooth = tau**3 * (10 - 15 * tau + 6 * tau**2)
        bump = 30 * tau**2 * (1 - tau) ** 2
        return -nl - (K - nl) * smooth - 0.5 * (K - nl) * bump

    def _bridge_log(self, r):
        """log W / a on 1 <= r <= 2 by integrating the slope in log2(r)."""
        nl, K = float(self.inner), float(self.K)
        tau = np.clip(np.log2(r), 0.0, 1.0)
        # antiderivatives of smoothstep and bump in tau
        S = tau**4 * (2.5 - 3 * tau + tau**2)
        B = tau**3 * (10 - 15 * tau + 6 * tau**2)
        return np.log(2.0) * (-nl * tau - (K - nl) * S - 0.5 * (K - nl) * B)

    def evaluate(self, r):
        """W (or x.grad W) at radius r > 0."""
        r = np.asarray(r, dtype=float)
        a = self.a
        if self.kind == "zero":
            return np.zeros_like(r)
        if self.kind == "gaussian":
            g = a * np.exp(-np.pi * r**2)
            return -2 * np.pi * r**2 * g if self.radial else g
        if self.kind == "saturating":
            if self.radial:
                return 2 * a * r**2 / (1 + r**2) ** 2
            return a * r**2 / (1 + r**2)
        if self.kind == "inverse_power":
            K = float(self.K)
            w = a * r**-K
            return -K * w if self.radial else w
        nl, K = float(self.inner), float(self.K)
        with np.errstate(divide="ignore"):
            w = np.where(r <= 1, r**-nl, np.where(r >= 2, r**-K, np.exp(self._bridge_log(r))))
        w = a * w
        return w * self.bridge_slope(r) if self.radial else w

    def min_c3(self) -> float:
        """Smallest c3 with c3 W + x.grad W >= 0 for a positive kernel."""
        if self.kind == "inverse_power":
            return float(self.K)
        if self.kind == "truncated_power":
            r = 2 ** np.linspace(0, 1, 4001)
            return float(-np.min(self.bridge_slope(r)))
        return 0.0

    # spectral multipliers ----------------------------------------------------
    def multiplier(self, grid: Grid) -> np.ndarray:
        """Fourier multiplier on the full FFT-ordered spectrum."""
        k2 = grid.k2
        N = grid.dims
        if self.kind == "zero":
            return np.zeros(grid.shape)
        if self.kind == "gaussian":
            g = self.a * np.exp(-k2 / (4 * np.pi))
            return (k2 / (2 * np.pi) - N) * g if self.radial else g
        if self.kind == "inverse_power":
            K = float(self.K)
            if not 0 < K < N:
                raise GridError(f"inverse-power kernel needs 0 < K < N, got K={K}, N={N}")
            const = 2.0 ** (N - K) * np.pi ** (N / 2) * special.gamma((N - K) / 2) / special.gamma(K / 2)
            with np.errstate(divide="ignore"):
                m = self.a * const * k2 ** ((K - N) / 2)
            m.flat[0] = self.a * _box_integral_inverse_power(grid, K)
            return -K * m if self.radial else m
        return _sampled_multiplier(self, grid)


def _cell_integral_inverse_power(N: int, K: float) -> float:
    """int over [-1/2, 1/2]^N of |y|^-K, by summing the 2N face pyramids."""
    pref = 2 * N / (2 * (N - K))
    if N == 1:
        return pref * 0.25 ** (-K / 2)
    if N == 2:
        val, _ = integrate.quad(lambda v: (0.25 + v * v) ** (-K / 2), -0.5, 0.5, epsabs=1e-14, epsrel=1e-13)
        return pref * val
    val, _ = integrate.dblquad(
        lambda w, v: (0.25 + v * v + w * w) ** (-K / 2), -0.5, 0.5, -0.5, 0.5, epsabs=1e-14, epsrel=1e-12
    )
    return pref * val


def _regularized_samples(kernel: KernelSpec, grid: Grid) -> np.ndarray:
    """Kernel sampled at minimal-image nodes, origin cell replaced by its cell average."""
    r = np.sqrt(sum(c**2 for c in grid.fft_coords)) * np.ones(grid.shape)
    origin = (0,) * grid.dims
    r[origin] = 1.0
    w = kernel.evaluate(r)
    h, N = grid.spacing, grid.dims
    if kernel.kind in ("inverse_power", "truncated_power"):
        s = float(kernel.K if kernel.kind == "inverse_power" else kernel.inner)
        avg = kernel.a * _cell_integral_inverse_power(N, s) * h ** (-s)
        w[origin] = -s * avg if kernel.radial else avg
    else:
        w[origin] = kernel.evaluate(np.array(0.0))
    return w


def _box_integral_inverse_power(grid: Grid, K: float) -> float:
    w = _regularized_samples(KernelSpec("inverse_power", 1.0, as_fraction(K)), grid)
    return float(np.sum(w) * grid.cell_volume)


def _sampled_multiplier(kernel: KernelSpec, grid: Grid) -> np.ndarray:
    w = _regularized_samples(kernel, grid)
    return np.real(sfft.fftn(w)) * grid.cell_volume


@dataclass(frozen=True)
class ModelSpec:
    """The triple (V, f, W) in ``dims`` dimensions plus optional hypothesis constants."""

    dims: int
    potential: PotentialSpec = field(default_factory=PotentialSpec)
    local: LocalNonlinearitySpec = field(default_factory=LocalNonlinearitySpec)
    kernel: KernelSpec = field(default_factory=KernelSpec)
    l: Fraction | None = None
    c1: float | None = None
    c2: float | None = None
    c3: float | None = None
    c: float | None = None

    def __post_init__(self):
        if self.dims not in (1, 2, 3):
            raise ValueError("dims must be 1, 2 or 3")
        if self.l is not None:
            object.__setattr__(self, "l", as_fraction(self.l))
        k = self.kernel
        if k.kind == "inverse_power" and not (0 < k.K < min(4, self.dims)):
            raise ValueError(f"inverse-power kernel needs 0 < K < min(4, N); K={k.K}, N={self.dims}")
        if k.kind == "truncated_power" and not k.inner < self.dims:
            raise ValueError("truncated_power inner exponent must be below N for local integrability")

    def on(self, grid: Grid) -> "BoundModel":
        if grid.dims != self.dims:
            raise GridError(f"model is {self.dims}-dimensional, grid is {grid.dims}-dimensional")
        return _bind(self, grid)


class BoundModel:
    """A model evaluated on a particular grid; arrays are computed once."""

    def __init__(self, model: ModelSpec, grid: Grid):
        self.model = model
        self.grid = grid
        self.local = model.local
        V, xdV = model.potential.values(grid.r2)
        self.has_potential = not model.potential.is_zero
        self.V = V
        self.xdV = xdV
        self.has_hartree = not model.kernel.is_zero
        if self.has_hartree:
            half = [slice(None)] * (grid.dims - 1) + [slice(0, grid.points // 2 + 1)]
            self._w = model.kernel.multiplier(grid)[tuple(half)]
            self._xw = model.kernel.radial_derivative().multiplier(grid)[tuple(half)]

    def _convolve(self, mult, rho):
        g = self.grid
        return sfft.irfftn(mult * sfft.rfftn(rho), s=g.shape)

    def convolve(self, rho: np.ndarray) -> np.ndarray:
        """W * rho."""
        if not self.has_hartree:
            return np.zeros(self.grid.shape)
        return self._convolve(self._w, rho)

    def convolve_radial(self, rho: np.ndarray) -> np.ndarray:
        """(x.grad W) * rho."""
        if not self.has_hartree:
            return np.zeros(self.grid.shape)
        return self._convolve(self._xw, rho)


@lru_cache(maxsize=32)
def _bind(model: ModelSpec, grid: Grid) -> BoundModel:
    return BoundModel(model, grid)


def eval_potential(model: ModelSpec, grid: Grid):
    """Return ``(V, x.grad V)`` sampled on the grid."""
    bm = model.on(grid)
    return bm.V, bm.xdV


def hartree_convolve(model: ModelSpec, grid: Grid, rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho)
    if np.iscomplexobj(rho) or np.min(rho) < -1e-12:
        raise ValueError("density must be real and nonnegative")
    return model.on(grid).convolve(np.asarray(rho, dtype=float))


def kernel_radial_derivative(model: ModelSpec) -> KernelSpec:
    return model.kernel.radial_derivative()
