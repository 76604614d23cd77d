"""Grids, quadrature, the unitary Fourier transform and interpolation.

Discrete L2 inner products use the plain Riemann sum ``dx * sum(conj(a) * b)``.
For fields that vanish at the box edges this equals the trapezoid rule, and it
makes the discrete Fourier transform below exactly unitary.  ``quadrature`` is
the general-purpose composite Simpson rule.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline


class GridError(ValueError):
    """Grid construction or alignment failure."""


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform symmetric grid ``x_j = -x_max + j dx``, ``j = 0..n-1``."""

    x_max: float = 40.0
    n: int = 2048

    def __post_init__(self):
        if self.n < 16 or self.n & (self.n - 1):
            raise GridError(f"n must be a power of two >= 16, got {self.n}")
        if not self.x_max > 0:
            raise GridError("x_max must be positive")

    @property
    def x_min(self):
        return -self.x_max

    @property
    def dx(self):
        return 2.0 * self.x_max / (self.n - 1)

    @property
    def x(self):
        return np.linspace(-self.x_max, self.x_max, self.n)

    def refined(self, factor=2):
        return SpatialGrid(self.x_max, self.n * factor)

    def enlarged(self, factor=2):
        return SpatialGrid(self.x_max * factor, self.n * factor)


@dataclass(frozen=True)
class MomentumGrid:
    """Momenta dual to a spatial grid, symmetric about 0.

    ``mask`` marks the retained points; the unpaired most negative FFT frequency
    and the punctured neighbourhood ``|k| < k_min`` are masked, never removed.
    """

    k_all: np.ndarray = field(repr=False)
    k_min: float = 0.0

    @classmethod
    def dual(cls, grid, k_min=0.0):
        n = grid.n
        dk = 2.0 * np.pi / (n * grid.dx)
        return cls(k_all=dk * np.arange(-n // 2, n // 2), k_min=float(k_min))

    @classmethod
    def uniform(cls, k_max, dk, k_min=0.0):
        m = int(np.floor(k_max / dk + 1e-9))
        return cls(k_all=dk * np.arange(-m, m + 1), k_min=float(k_min))

    @property
    def dk(self):
        return float(self.k_all[1] - self.k_all[0])

    @property
    def mask(self):
        kmax = np.max(np.abs(self.k_all))
        keep = np.abs(self.k_all) >= self.k_min if self.k_min > 0 else np.ones(self.k_all.size, bool)
        if np.isclose(-self.k_all[0], kmax) and not np.isclose(self.k_all[-1], kmax):
            keep = keep.copy()
            keep[0] = False
        return keep

    @property
    def k(self):
        return self.k_all[self.mask]


def _check_aligned(f, grid):
    f = np.asarray(f)
    if f.shape[-1] != grid.n:
        raise GridError(f"field of length {f.shape[-1]} does not match grid of {grid.n} points")
    return f


def quadrature(f, grid, axis=-1):
    """Composite Simpson approximation of ``int f dx`` over the grid."""
    f = np.asarray(f)
    if f.shape[axis] != grid.n:
        raise GridError(f"field of length {f.shape[axis]} does not match grid of {grid.n} points")
    w = simpson_weights(grid.n, grid.dx)
    return np.tensordot(f, w, axes=([axis], [0]))


def simpson_weights(n, h):
    """Simpson weights on ``n`` equispaced points (3/8 rule closes an odd interval count)."""
    w = np.zeros(n)
    nint = n - 1
    if nint % 2 == 0:
        w[0:-1:2] += 1.0
        w[1::2] += 4.0
        w[2::2] += 1.0
        return w * h / 3.0
    if nint < 3:
        w[:] = 0.5 * h
        w[1:-1] = h
        return w
    # Simpson on the first nint-3 intervals, 3/8 rule on the last three
    m = nint - 3
    w[0:m:2] += 1.0
    w[1:m:2] += 4.0
    w[2:m + 1:2] += 1.0
    w[:m + 1] *= h / 3.0
    w[m:] += np.array([1.0, 3.0, 3.0, 1.0]) * 3.0 * h / 8.0
    return w


def inner(a, b, grid):
    """Discrete ``(a, b) = int conj(a) b dx``."""
    return grid.dx * np.vdot(a, b)


def l2_norm(f, grid):
    return float(np.sqrt(grid.dx * np.sum(np.abs(f) ** 2)))


def lp_norm(f, grid, p):
    if np.isinf(p):
        return float(np.max(np.abs(f)))
    return float((grid.dx * np.sum(np.abs(f) ** p)) ** (1.0 / p))


def _check_symmetric(grid):
    if not np.isclose(grid.x_min, -grid.x_max):
        raise GridError("transform requires a symmetric grid")


def fourier_forward(phi, grid):
    """``phi_hat(k) = (2 pi)^(-1/2) int exp(-ikx) phi(x) dx`` on ``MomentumGrid.dual(grid).k_all``."""
    _check_symmetric(grid)
    phi = _check_aligned(phi, grid)
    kg = MomentumGrid.dual(grid)
    spec = np.fft.fftshift(np.fft.fft(phi, axis=-1), axes=-1)
    return grid.dx / np.sqrt(2.0 * np.pi) * np.exp(-1j * kg.k_all * grid.x_min) * spec


def fourier_inverse(phi_hat, grid):
    """Inverse of :func:`fourier_forward`."""
    _check_symmetric(grid)
    phi_hat = _check_aligned(phi_hat, grid)
    kg = MomentumGrid.dual(grid)
    spec = phi_hat * np.exp(1j * kg.k_all * grid.x_min) * np.sqrt(2.0 * np.pi) / grid.dx
    return np.fft.ifft(np.fft.ifftshift(spec, axes=-1), axis=-1)


def interpolate(field_values, grid, x):
    """Cubic spline through the samples, evaluated at ``x``."""
    x = np.asarray(x, dtype=float)
    xs = grid.x
    if np.any(x < xs[0] - 1e-12) or np.any(x > xs[-1] + 1e-12):
        raise GridError("interpolation point outside the grid extent")
    f = np.asarray(field_values)
    # not-a-knot cubic reproduces polynomials up to degree three
    if np.iscomplexobj(f):
        return CubicSpline(xs, f.real)(x) + 1j * CubicSpline(xs, f.imag)(x)
    return CubicSpline(xs, f)(x)
