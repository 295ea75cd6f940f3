"""Uniform periodic tensor grids, spectral transforms and quadrature.

The continuum problem lives on R^N; here it is truncated to the periodic box
[-L/2, L/2)^N sampled at M points per axis. Integrals become h^N-weighted sums
and spectral coefficients are scaled so that they approximate the continuum
Fourier transform ``u_hat(k) = int u(x) exp(-i k.x) dx``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft as sfft
from scipy.signal import czt

from .errors import CorruptFieldError, GridError


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """Periodic grid with ``points`` nodes per axis on a box of side ``extent``.

    Node coordinates are ``x_m = (m - M/2) h`` so the origin is a grid node.
    Wavenumbers are stored in FFT ordering.
    """

    dims: int
    extent: float
    points: int

    def __post_init__(self):
        if self.dims not in (1, 2, 3):
            raise GridError(f"dims must be 1, 2 or 3, got {self.dims}")
        if not (np.isfinite(self.extent) and self.extent > 0):
            raise GridError(f"extent must be positive, got {self.extent}")
        if self.points < 8 or not _is_power_of_two(int(self.points)):
            raise GridError(f"points must be a power of two >= 8, got {self.points}")
        object.__setattr__(self, "extent", float(self.extent))
        object.__setattr__(self, "points", int(self.points))

    @property
    def spacing(self) -> float:
        return self.extent / self.points

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points,) * self.dims

    @property
    def size(self) -> int:
        return self.points**self.dims

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dims

    @cached_property
    def axis(self) -> np.ndarray:
        """1D node coordinates, shared by every axis."""
        return (np.arange(self.points) - self.points // 2) * self.spacing

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """1D wavenumbers in FFT ordering, Nyquist mode included (negative)."""
        return 2.0 * np.pi * sfft.fftfreq(self.points, d=self.spacing)

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        """Broadcastable coordinate arrays, one per axis."""
        return tuple(self._along(self.axis, j) for j in range(self.dims))

    @cached_property
    def kcoords(self) -> tuple[np.ndarray, ...]:
        return tuple(self._along(self.wavenumbers, j) for j in range(self.dims))

    @cached_property
    def r2(self) -> np.ndarray:
        """|x|^2 on the full grid."""
        out = np.zeros(self.shape)
        for c in self.coords:
            out = out + c**2
        return out

    @cached_property
    def k2(self) -> np.ndarray:
        out = np.zeros(self.shape)
        for c in self.kcoords:
            out = out + c**2
        return out

    @cached_property
    def rk2(self) -> np.ndarray:
        """|k|^2 on the half spectrum used by real transforms."""
        last = 2.0 * np.pi * sfft.rfftfreq(self.points, d=self.spacing)
        axes = [self.wavenumbers] * (self.dims - 1) + [last]
        out = 0.0
        for j, a in enumerate(axes):
            out = out + self._along(a, j) ** 2
        return np.asarray(out)

    @cached_property
    def fft_coords(self) -> tuple[np.ndarray, ...]:
        """Minimal-image coordinates in FFT ordering (origin at index 0)."""
        a = sfft.ifftshift(self.axis)
        return tuple(self._along(a, j) for j in range(self.dims))

    def _along(self, a: np.ndarray, j: int) -> np.ndarray:
        shape = [1] * self.dims
        shape[j] = a.size
        return a.reshape(shape)

    def integrate(self, values: np.ndarray) -> float:
        return float(np.sum(values) * self.cell_volume)

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape, dtype=complex)


def make_grid(dims: int, extent: float, points: int) -> Grid:
    return Grid(dims, extent, points)


@dataclass(frozen=True, eq=False)
class ComplexField:
    """Complex amplitude sampled on every cell of ``grid``."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.size != self.grid.size:
            raise GridError(f"field has {v.size} values, grid has {self.grid.size} cells")
        object.__setattr__(self, "values", v.reshape(self.grid.shape))

    def check_finite(self) -> "ComplexField":
        if not np.all(np.isfinite(self.values)):
            raise CorruptFieldError("field contains NaN or Inf")
        return self

    def with_values(self, values) -> "ComplexField":
        return ComplexField(self.grid, values)

    def __mul__(self, c) -> "ComplexField":
        return ComplexField(self.grid, self.values * c)

    __rmul__ = __mul__

    @property
    def density(self) -> np.ndarray:
        return self.values.real**2 + self.values.imag**2

    def norm_sq(self) -> float:
        return self.grid.integrate(self.density)


def field_from_function(grid: Grid, func) -> ComplexField:
    """Sample ``func(*coords)`` on the grid."""
    return ComplexField(grid, np.broadcast_to(func(*grid.coords), grid.shape))


def to_spectral(u: ComplexField) -> np.ndarray:
    return sfft.fftn(u.values) * u.grid.cell_volume


def from_spectral(grid: Grid, coeffs: np.ndarray) -> ComplexField:
    if coeffs.shape != grid.shape:
        raise GridError(f"spectrum shape {coeffs.shape} does not match grid {grid.shape}")
    return ComplexField(grid, sfft.ifftn(coeffs) / grid.cell_volume)


def spectral_norm_sq(grid: Grid, coeffs: np.ndarray) -> float:
    """Parseval partner of ``ComplexField.norm_sq``."""
    return float(np.sum(np.abs(coeffs) ** 2) / grid.extent**grid.dims)


def spectral_gradient_norm_sq(u: ComplexField) -> float:
    g = u.grid
    uh = sfft.fftn(u.values)
    return float(np.sum(g.k2 * (uh.real**2 + uh.imag**2)) * g.cell_volume / g.size)


def spectral_laplacian(u: ComplexField) -> ComplexField:
    g = u.grid
    return ComplexField(g, sfft.ifftn(-g.k2 * sfft.fftn(u.values)))


def spectral_gradient(u: ComplexField) -> list[np.ndarray]:
    uh = sfft.fftn(u.values)
    return [sfft.ifftn(1j * k * uh) for k in u.grid.kcoords]


def moment_weighted_norms(u: ComplexField) -> tuple[float, float]:
    """Return ``(J, J')`` with ``J = int |x|^2 |u|^2`` and ``J' = 4 Im int (x.grad u) conj(u)``."""
    g = u.grid
    J = g.integrate(g.r2 * u.density)
    xgrad = sum(x * d for x, d in zip(g.coords, spectral_gradient(u)))
    Jp = 4.0 * g.integrate(np.imag(xgrad * np.conj(u.values)))
    return J, Jp


def dilate(u: ComplexField, lam: float) -> ComplexField:
    """Return ``x -> u(lam x)`` by trigonometric interpolation.

    Points with ``|lam x_j| >= L/2`` on any axis fall outside the box and are
    set to zero rather than wrapped periodically.
    """
    g = u.grid
    M = g.points
    if lam == 1.0:
        return ComplexField(g, u.values.copy())
    out = u.values
    n = np.arange(M + 1)
    # mode index n <-> signed wavenumber index n - M/2, Nyquist split in half
    twist = np.exp(-1j * np.pi * (n - M // 2) * lam)
    post = np.exp(-1j * np.pi * lam * np.arange(M))
    w = np.exp(2j * np.pi * lam / M)
    inside = np.abs(lam * g.axis) < g.extent / 2
    for ax in range(g.dims):
        c = sfft.fftshift(sfft.fft(out, axis=ax), axes=ax) / M
        first = np.take(c, [0], axis=ax)
        c = np.concatenate([0.5 * first, np.take(c, range(1, M), axis=ax), 0.5 * first], axis=ax)
        # original sample 0 sits at x = -L/2, so shift phases by pi per mode
        shape = [1] * g.dims
        shape[ax] = M + 1
        c = c * (twist * np.exp(1j * np.pi * (n - M // 2))).reshape(shape)
        vals = czt(c, m=M, w=w, a=1.0, axis=ax)
        shape[ax] = M
        vals = vals * post.reshape(shape)
        out = vals * inside.reshape(shape)
    return ComplexField(g, out)


def resample(u: ComplexField, target: Grid) -> ComplexField:
    """Trigonometric interpolation of ``u`` onto a grid with the same box and dimension."""
    g = u.grid
    if target.dims != g.dims or target.extent != g.extent:
        raise GridError("resampling needs the same dimension and box side")
    if target.points == g.points:
        return ComplexField(target, u.values.copy())
    out = sfft.ifftshift(u.values)
    M, P = g.points, target.points
    for ax in range(g.dims):
        c = sfft.fft(out, axis=ax)
        lo = min(M, P) // 2
        pos = np.take(c, range(lo), axis=ax)
        neg = np.take(c, range(c.shape[ax] - lo + 1, c.shape[ax]), axis=ax)
        nyq = np.take(c, [c.shape[ax] - lo if M <= P else lo], axis=ax)
        if M > P:
            # fold the two modes that alias onto the new Nyquist index
            nyq = nyq + np.take(c, [M - lo], axis=ax)
        else:
            nyq = 0.5 * nyq
        shape = list(c.shape)
        shape[ax] = P
        d = np.zeros(shape, dtype=complex)
        idx = [slice(None)] * g.dims

        def put(sl, v):
            idx[ax] = sl
            d[tuple(idx)] = v
        put(slice(0, lo), pos)
        put(slice(P - lo + 1, P), neg)
        if M < P:
            put(slice(lo, lo + 1), nyq)
            put(slice(P - lo, P - lo + 1), nyq)
        else:
            put(slice(P - lo, P - lo + 1), nyq)
        out = sfft.ifft(d, axis=ax) * (P / M)
    return ComplexField(target, sfft.fftshift(out))
