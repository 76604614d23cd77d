"""Bound states, continuum eigenfunctions and the generalized Fourier maps.

The continuum eigenfunctions are

    Psi_+(x, k) = T(|k|) exp(ikx) m_j(x, |k|) / sqrt(2 pi),   j = 1 for k >= 0, j = 2 for k < 0,

sampled densely on the momentum grid dual to the spatial grid.  With the
Riemann sums ``dx * sum`` over x and ``dk * sum`` over k the forward map
``F_+`` and the adjoint map ``F_+^*`` are exact matrix adjoints of each other.
Bound states ``-beta^2`` are the zeros of ``1/T(i beta)``, which is real.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import jost
from .numerics import MomentumGrid, SpatialGrid, inner
from .potential import build_potential

BISECTION_TOL = 1e-13


class BoundStateError(ArithmeticError):
    """Bisection failed to shrink a bracketed root."""


@dataclass(frozen=True)
class BoundState:
    beta: float
    psi: np.ndarray = field(repr=False)
    norm_residual: float = 0.0
    eigen_residual: float = 0.0

    @property
    def energy(self):
        return -self.beta ** 2


@dataclass(frozen=True)
class SpectralData:
    """Everything needed to apply ``F_+``, ``F_+^*`` and ``P_c`` on one grid."""

    potential: object
    grid: SpatialGrid
    kgrid: MomentumGrid
    bound_states: tuple
    psi_plus: np.ndarray = field(repr=False)   # shape (n_x, n_k)
    coefficients: object = field(default=None, repr=False)
    classification: object = None
    orthonormalized: bool = False
    raw_parseval_defect: float = None

    @property
    def k(self):
        return self.kgrid.k

    @property
    def dk(self):
        return self.kgrid.dk

    @property
    def has_bound_states(self):
        return len(self.bound_states) > 0


# -- bound states -------------------------------------------------------------

def inverse_transmission_imag(V, beta):
    """``1/T(i beta) = 1 + int V m1(., i beta) / (2 beta)`` (real for real V)."""
    jd = jost.jost_data(V, [1j * beta], x=np.zeros(0))
    return float((1.0 + jd.int_vm1[0] / (2.0 * beta)).real)


def _bisect(f, a, b, fa, fb, tol=BISECTION_TOL, max_iter=200):
    for _ in range(max_iter):
        c = 0.5 * (a + b)
        if b - a < tol * max(1.0, abs(c)):
            return c
        fc = f(c)
        if fc == 0.0:
            return c
        if np.sign(fc) == np.sign(fa):
            a, fa = c, fc
        else:
            b, fb = c, fc
    raise BoundStateError(f"bisection stagnated on [{a}, {b}]")


def _second_derivative(f, grid):
    kg = MomentumGrid.dual(grid)
    k = np.fft.ifftshift(kg.k_all)
    return np.fft.ifft(-(k ** 2) * np.fft.fft(f)).real


def bound_state_function(V, beta):
    """Normalized eigenfunction for ``-beta^2`` on the potential's grid.

    ``f1`` is used on the right half and ``f2`` on the left, so neither is
    evaluated where it grows.  At a bound state the two are proportional; the
    factor is fitted by least squares on ``|x| <= 1``, which works for odd
    states where both vanish at the origin.
    """
    x = V.grid.x
    jd = jost.jost_data(V, [1j * beta], x=x)
    f1 = (np.exp(-beta * x) * jd.m1[0]).real
    f2 = (np.exp(beta * x) * jd.m2[0]).real
    near = np.abs(x) <= 1.0
    scale = np.dot(f1[near], f2[near]) / np.dot(f2[near], f2[near])
    psi = np.where(x >= 0, f1, scale * f2)
    psi /= np.sqrt(V.grid.dx * np.sum(psi ** 2))
    if psi[np.argmax(np.abs(psi))] < 0:
        psi = -psi
    return psi


def find_bound_states(V, n_scan=400, beta_min=1e-3):
    """All ``beta`` in ``(0, sqrt|min V| + 1]`` with ``1/T(i beta) = 0``, largest first."""
    if V.values is None:
        V = build_potential(V)
    if V.min_value >= 0 and V.family != "samples":
        return []
    beta_max = np.sqrt(abs(V.min_value)) + 1.0
    betas = np.geomspace(beta_min, beta_max, n_scan)
    jd = jost.jost_data(V, 1j * betas, x=np.zeros(0))
    vals = (1.0 + jd.int_vm1 / (2.0 * betas)).real
    f = lambda b: inverse_transmission_imag(V, b)  # noqa: E731
    roots = []
    for i in range(n_scan - 1):
        if vals[i] == 0.0:
            roots.append(betas[i])
        elif np.sign(vals[i]) != np.sign(vals[i + 1]):
            roots.append(_bisect(f, betas[i], betas[i + 1], vals[i], vals[i + 1]))
    out = []
    for beta in sorted(roots, reverse=True):
        psi = bound_state_function(V, beta)
        norm_res = abs(np.sqrt(V.grid.dx * np.sum(psi ** 2)) - 1.0)
        resid = -_second_derivative(psi, V.grid) + V.values * psi + beta ** 2 * psi
        out.append(BoundState(beta=float(beta), psi=psi, norm_residual=float(norm_res),
                              eigen_residual=float(np.sqrt(V.grid.dx * np.sum(resid ** 2)))))
    return out


# -- continuum ----------------------------------------------------------------

def continuum_eigenfunctions(V, kgrid, classification=None):
    """``Psi_+`` on ``(V.grid.x, kgrid.k)`` and the coefficients used to build it."""
    x = V.grid.x
    k = kgrid.k
    kabs = np.unique(np.abs(k))
    pos = kabs[kabs > 0]
    jd = jost.jost_data(V, pos, x=x)
    T, R1, R2, _ = jost.coefficients_from_jost(jd)
    psi = np.empty((x.size, k.size), dtype=complex)
    idx = np.searchsorted(pos, np.abs(k))
    c = 1.0 / np.sqrt(2.0 * np.pi)
    for col, kk in enumerate(k):
        if kk == 0.0:
            continue
        j = idx[col]
        m = jd.m1[j] if kk > 0 else jd.m2[j]
        psi[:, col] = c * T[j] * np.exp(1j * kk * x) * m
    zero = np.nonzero(k == 0.0)[0]
    if zero.size:
        cls = classification or jost.classify(V)
        t0 = jost.transmission_at_zero(cls)
        if t0 == 0.0:
            psi[:, zero[0]] = 0.0
        else:
            m0 = jost.jost_data(V, [0.0], x=x).m1[0]
            psi[:, zero[0]] = c * t0 * m0
    coeffs = jost.ScatteringCoefficients(k=pos, T=T, R1=R1, R2=R2, T_j2=T)
    return psi, coeffs


def _polar_factor(U):
    """Nearest matrix with orthonormal columns (the isometric factor of the polar decomposition)."""
    try:
        W, _, Vh = np.linalg.svd(U, full_matrices=False)
    except np.linalg.LinAlgError:
        # the divide-and-conquer driver occasionally fails to converge
        W, _, Vh = scipy.linalg.svd(U, full_matrices=False, lapack_driver="gesvd")
    return W @ Vh


def build_spectral_data(V, grid=None, orthonormalize=False, k_min=0.0):
    """Bound states plus dense ``Psi_+`` for ``V`` on ``grid``.

    The raw samples satisfy the discrete Parseval identity only approximately;
    the defect grows for fields that reach the box edges.  With
    ``orthonormalize`` the continuum columns are projected off the bound states
    and replaced by their polar factor, which makes the discrete linear
    propagator exactly unitary (used for long time evolution).  A zero column
    (``T(0) = 0``) is left untouched.  The largest entry of ``A^* A - I`` for
    the raw samples is kept in ``raw_parseval_defect``.
    """
    if V.values is None or (grid is not None and V.grid != grid):
        V = build_potential(V, grid)
    grid = V.grid
    kgrid = MomentumGrid.dual(grid, k_min=k_min)
    cls = jost.classify(V)
    bs = tuple(find_bound_states(V))
    psi, coeffs = continuum_eigenfunctions(V, kgrid, classification=cls)
    w = np.sqrt(grid.dx * kgrid.dk)
    U = w * psi
    B = np.stack([np.sqrt(grid.dx) * b.psi for b in bs], axis=1) if bs else np.zeros((grid.n, 0))
    raw = _gram_defect(U, B)
    if orthonormalize:
        if B.shape[1]:
            U = U - B @ (B.conj().T @ U)
        nz = np.any(U != 0, axis=0)
        U[:, nz] = _polar_factor(U[:, nz])
        psi = U / w
    return SpectralData(potential=V, grid=grid, kgrid=kgrid, bound_states=bs, psi_plus=psi,
                        coefficients=coeffs, classification=cls,
                        orthonormalized=orthonormalize, raw_parseval_defect=raw)


def _gram_defect(U, B):
    A = np.concatenate([U[:, np.any(U != 0, axis=0)], B.astype(complex)], axis=1)
    G = A.conj().T @ A
    return float(np.max(np.abs(G - np.eye(G.shape[0]))))


# -- maps ---------------------------------------------------------------------

def forward_map(phi, sd):
    """``F_+ phi(k) = int conj(Psi_+(x, k)) phi(x) dx``."""
    return sd.grid.dx * (sd.psi_plus.conj().T @ phi)


def adjoint_map(g, sd):
    """``F_+^* g(x) = int Psi_+(x, k) g(k) dk``."""
    return sd.dk * (sd.psi_plus @ g)


def forward_map_minus(phi, sd):
    """``F_- phi`` through ``Psi_-(x, k) = conj Psi_+(x, -k)`` on the symmetric k-grid."""
    return np.conj(forward_map(np.conj(phi), sd))[::-1]


def adjoint_map_minus(g, sd):
    return np.conj(adjoint_map(np.conj(np.asarray(g)[::-1]), sd))


def bound_projections(phi, sd):
    return np.array([inner(b.psi, phi, sd.grid) for b in sd.bound_states], dtype=complex)


def project_continuous(phi, sd):
    """``P_c phi = phi - sum_j <psi_j, phi> psi_j``."""
    out = np.array(phi, dtype=complex)
    for b in sd.bound_states:
        out -= inner(b.psi, phi, sd.grid) * b.psi
    return out


def parseval_defect(phi, sd):
    """``| ||F_+ phi||^2 + sum |<phi, psi_j>|^2 - ||phi||^2 |``."""
    ghat = forward_map(phi, sd)
    lhs = sd.dk * np.sum(np.abs(ghat) ** 2) + np.sum(np.abs(bound_projections(phi, sd)) ** 2)
    return float(abs(lhs - sd.grid.dx * np.sum(np.abs(phi) ** 2)))


def spectral_symmetric_kgrid_check(sd):
    k = sd.k
    return bool(np.allclose(k, -k[::-1]))
