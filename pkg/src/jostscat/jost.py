"""Jost solutions, transmission/reflection coefficients and the generic/exceptional split.

``m1(x, k) = exp(-ikx) f1(x, k)`` solves

    m1(x, k) = 1 + int_x^inf D_k(y - x) V(y) m1(y, k) dy,   D_k(x) = (exp(2ikx) - 1) / (2ik)

and ``m2`` is the mirror image: ``m2(x, k; V) = m1(-x, k; V(-.))``.  Both are
computed by the inward march of :mod:`jostscat._volterra` on a node set that
covers the support of ``V``; outside the support the solution is continued in
closed form.  The step size shrinks like ``1/|k|`` so that the oscillation of
``exp(2iky)`` stays resolved.
"""
from dataclasses import dataclass, field

import numpy as np

from . import _volterra
from .numerics import MomentumGrid, SpatialGrid
from .potential import build_potential, weighted_norm

H_MAX = 0.005
PHASE_STEP = 0.02
TAU_CLASS = 1e-6


class JostError(ArithmeticError):
    """Numerical failure in the Jost/coefficient pipeline."""


class DegenerateTransmissionError(JostError):
    pass


def dk_kernel(k, x):
    """``D_k(x) = int_0^x exp(2iky) dy``; the series branch takes over when ``|2kx| < 1e-6``."""
    k = np.asarray(k, dtype=complex)
    x = np.asarray(x, dtype=float)
    if np.any(k.imag < 0):
        raise ValueError("D_k is defined for Im k >= 0 only")
    z = 2j * k * x
    small = np.abs(z) < 1e-6
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        full = np.expm1(z) / np.where(k == 0, 1.0, 2j * k)
    ser = x * (1.0 + z / 2.0 + z * z / 6.0)
    return np.where(small, ser, full)


def dk_kernel_dk(k, x):
    """``d/dk D_k(x) = int_0^x 2iy exp(2iky) dy``."""
    k = np.asarray(k, dtype=complex)
    x = np.asarray(x, dtype=float)
    z = 2j * k * x
    small = np.abs(z) < 1e-3
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        full = (x * np.exp(z) - dk_kernel(k, x)) / np.where(k == 0, 1.0, k)
    # series: x * 2ix * sum_n (n+1) z^n / (n+2)!
    ser = 1j * x * x * (1.0 + 2.0 * z / 3.0 + z * z / 4.0 + z ** 3 / 15.0)
    return np.where(small, ser, full)


def step_for(k, h_max=H_MAX, phase_step=PHASE_STEP):
    """Volterra node spacing for momentum ``k`` (a power-of-two fraction of ``h_max``)."""
    ak = abs(complex(k))
    if ak * h_max <= phase_step:
        return h_max
    j = int(np.ceil(np.log2(ak * h_max / phase_step)))
    return h_max / 2 ** j


def _reflected_pieces(V):
    out = []
    for lo, hi, f in reversed(V.pieces()):
        out.append((-hi, -lo, (lambda g: (lambda x: g(-np.asarray(x))))(f)))
    return out


class _Sweeper:
    """Caches one node set per (direction, step) for a potential and output points."""

    def __init__(self, V, x, h_max=H_MAX, phase_step=PHASE_STEP):
        self.V = V
        self.x = np.asarray(x, dtype=float)
        self.h_max = h_max
        self.phase_step = phase_step
        self._meshes = {}
        self._pieces = {1: V.pieces(), 2: _reflected_pieces(V)}

    def mesh(self, direction, h):
        key = (direction, h)
        if key not in self._meshes:
            pieces = self._pieces[direction]
            xs = self.x if direction == 1 else -self.x
            lo, hi = pieces[0][0], pieces[-1][1]
            req = xs[(xs > lo) & (xs < hi)]
            self._meshes[key] = _volterra.build_mesh(pieces, h, required=req)
        return self._meshes[key]

    def solve(self, direction, ks):
        """m, dm/dx on ``self.x`` and the integrals (int V m, int exp(+-2iky) V m)."""
        ks = np.atleast_1d(np.asarray(ks, dtype=complex))
        nk, nx = ks.size, self.x.size
        m = np.ones((nk, nx), dtype=complex)
        dm = np.zeros((nk, nx), dtype=complex)
        int_vm = np.zeros(nk, dtype=complex)
        int_evm = np.zeros(nk, dtype=complex)
        pieces = self._pieces[direction]
        if not pieces:
            return m, dm, int_vm, int_evm
        xs = self.x if direction == 1 else -self.x
        lo, hi = pieces[0][0], pieces[-1][1]
        inside = (xs > lo) & (xs < hi)
        left = xs <= lo
        steps = np.array([step_for(k, self.h_max, self.phase_step) for k in ks])
        for h in np.unique(steps):
            sel = np.nonzero(steps == h)[0]
            mesh = self.mesh(direction, h)
            mo, dmo, lft = _volterra.march(ks[sel], mesh)
            idx = np.nonzero(inside)[0]
            m[np.ix_(sel, idx)] = mo
            dm[np.ix_(sel, idx)] = dmo
            P0, Q0, G0 = lft[:, 0], lft[:, 1], lft[:, 2]
            if np.any(left):
                delta = lo - xs[left]
                kk = ks[sel][:, None]
                m[np.ix_(sel, np.nonzero(left)[0])] = 1.0 + P0[:, None] + dk_kernel(kk, delta[None, :]) * Q0[:, None]
                dm[np.ix_(sel, np.nonzero(left)[0])] = -np.exp(2j * kk * delta[None, :]) * Q0[:, None]
            int_vm[sel] = G0
            int_evm[sel] = np.exp(2j * ks[sel] * lo) * Q0
        if direction == 2:
            dm = -dm
        return m, dm, int_vm, int_evm


@dataclass(frozen=True)
class JostData:
    """``m1``, ``m2`` (and their x-derivatives) on ``x`` for the momenta ``k``."""

    x: np.ndarray
    k: np.ndarray
    m1: np.ndarray = field(repr=False)
    m2: np.ndarray = field(repr=False)
    dm1: np.ndarray = field(repr=False)
    dm2: np.ndarray = field(repr=False)
    int_vm1: np.ndarray = field(repr=False)
    int_vm2: np.ndarray = field(repr=False)
    int_e_vm1: np.ndarray = field(repr=False)
    int_e_vm2: np.ndarray = field(repr=False)
    iterations_used: np.ndarray = field(repr=False)
    residual: np.ndarray = field(repr=False)

    def f1(self):
        return np.exp(1j * self.k[:, None] * self.x[None, :]) * self.m1

    def f2(self):
        return np.exp(-1j * self.k[:, None] * self.x[None, :]) * self.m2


def jost_data(V, ks, x=None, check=False, h_max=H_MAX, phase_step=PHASE_STEP):
    """Jost data for every k in ``ks`` at the points ``x`` (default: the potential's grid)."""
    if V.values is None:
        V = build_potential(V)
    x = V.grid.x if x is None else np.asarray(x, dtype=float)
    ks = np.atleast_1d(np.asarray(ks, dtype=complex))
    if np.any(ks.imag < 0):
        raise ValueError("Jost solutions need Im k >= 0")
    sw = _Sweeper(V, x, h_max=h_max, phase_step=phase_step)
    m1, dm1, ivm1, iem1 = sw.solve(1, ks)
    m2, dm2, ivm2, iem2 = sw.solve(2, ks)
    iters = np.ones(ks.size, dtype=int)
    res = np.full(ks.size, np.nan)
    if check and V.pieces():
        for i, k in enumerate(ks):
            mesh = sw.mesh(1, step_for(k, h_max, phase_step))
            m, *_ = _volterra.picard(k, mesh)
            res[i] = _volterra.residual(k, mesh, m)
    return JostData(x=x, k=ks, m1=m1, m2=m2, dm1=dm1, dm2=dm2, int_vm1=ivm1, int_vm2=ivm2,
                    int_e_vm1=iem1, int_e_vm2=iem2, iterations_used=iters, residual=res)


@dataclass(frozen=True)
class JostColumn:
    x: np.ndarray
    k: complex
    m: np.ndarray
    dm: np.ndarray
    iterations_used: int
    residual: float


def solve_m(direction, V, k, grid=None, scheme="gauss-seidel", tol=1e-12, max_iter=200,
            h_max=H_MAX):
    """One Jost column by iterating the discrete Volterra map to a fixed point.

    Raises :class:`jostscat._volterra.VolterraIterationError` after ``max_iter``.
    """
    if direction not in (1, 2):
        raise ValueError("direction must be 1 or 2")
    k = complex(k)
    if k.imag < 0:
        raise ValueError("Jost solutions need Im k >= 0")
    if V.values is None or (grid is not None and V.grid != grid):
        V = build_potential(V, grid)
    x = V.grid.x
    if not V.pieces():
        return JostColumn(x, k, np.ones(x.size, complex), np.zeros(x.size, complex), 1, 0.0)
    sw = _Sweeper(V, x, h_max=h_max)
    h = step_for(k, h_max)
    mesh = sw.mesh(direction, h)
    m_nodes, q, (P0, Q0, G0), iters, diff = _volterra.picard(k, mesh, tol=tol, max_iter=max_iter,
                                                             scheme=scheme)
    res = _volterra.residual(k, mesh, m_nodes)
    # place onto the grid: the closed-form continuation is shared with jost_data
    m, dm, _, _ = sw.solve(direction, [k])
    xs = x if direction == 1 else -x
    lo, hi = mesh.y[0], mesh.y[-1]
    inside = np.nonzero((xs > lo) & (xs < hi))[0]
    sel = mesh.out_idx >= 0
    m[0, inside[sel]] = m_nodes[mesh.out_idx[sel]]
    sgn = 1.0 if direction == 1 else -1.0
    dm[0, inside[sel]] = -sgn * q[mesh.out_idx[sel]]
    return JostColumn(x, k, m[0], dm[0], iters, res)


def solve_m_derivative(direction, V, k, grid=None, k_min=1e-3, h_max=H_MAX):
    """``d m_j / dk`` on the grid, from the differentiated Volterra equation.

    The inward march is differentiated step by step, so the result is the exact
    k-derivative of the discrete solution computed by :func:`solve_m`.
    """
    k = complex(k)
    if abs(k) <= k_min or k.imag != 0:
        raise ValueError(f"derivative needs real |k| > k_min = {k_min}")
    if V.values is None or (grid is not None and V.grid != grid):
        V = build_potential(V, grid)
    x = V.grid.x
    if not V.pieces():
        return np.zeros(x.size, complex)
    sw = _Sweeper(V, x, h_max=h_max)
    mesh = sw.mesh(direction, step_for(k, h_max))
    mdot_nodes, aux = _differentiated_sweep(k, mesh)
    xs = x if direction == 1 else -x
    lo, hi = mesh.y[0], mesh.y[-1]
    out = np.zeros(x.size, complex)
    inside = np.nonzero((xs > lo) & (xs < hi))[0]
    sel = mesh.out_idx >= 0
    out[inside[sel]] = mdot_nodes[mesh.out_idx[sel]]
    left = np.nonzero(xs <= lo)[0]
    if left.size:
        P0d, Q0, Q0d = aux
        delta = lo - xs[left]
        out[left] = P0d + dk_kernel_dk(k, delta) * Q0 + dk_kernel(k, delta) * Q0d
    return out


def _differentiated_sweep(k, mesh):
    """Forward-mode derivative of the Gauss-Seidel sweep with respect to k."""
    y, cnt, w, vs = mesh.y, mesh.cnt, mesh.w, mesh.vs
    M = y.size - 1
    m = np.empty(M + 1, complex)
    md = np.empty(M + 1, complex)
    m[M], md[M] = 1.0, 0.0
    P = Pd = Q = Qd = 0.0j
    for j in range(M - 1, -1, -1):
        c = cnt[j]
        ID = IDd = IE = IEd = 0.0j
        for s in range(1, c):
            d = y[j + s] - y[j]
            ker = complex(dk_kernel(k, d))
            kerd = complex(dk_kernel_dk(k, d))
            e = np.exp(2j * k * d)
            ed = 2j * d * e
            g = vs[j, s] * m[j + s]
            gd = vs[j, s] * md[j + s]
            ID += w[j, s] * ker * g
            IDd += w[j, s] * (kerd * g + ker * gd)
            IE += w[j, s] * e * g
            IEd += w[j, s] * (ed * g + e * gd)
        d1 = y[j + 1] - y[j]
        D1 = complex(dk_kernel(k, d1))
        D1d = complex(dk_kernel_dk(k, d1))
        z1 = np.exp(2j * k * d1)
        P, Pd = ID + P + D1 * Q, IDd + Pd + D1d * Q + D1 * Qd
        m[j], md[j] = 1.0 + P, Pd
        g0, g0d = vs[j, 0] * m[j], vs[j, 0] * md[j]
        Q, Qd = w[j, 0] * g0 + IE + z1 * Q, w[j, 0] * g0d + IEd + 2j * d1 * z1 * Q + z1 * Qd
    return md, (Pd, Q, Qd)


# -- scattering coefficients --------------------------------------------------

@dataclass(frozen=True)
class ScatteringCoefficients:
    k: np.ndarray
    T: np.ndarray
    R1: np.ndarray
    R2: np.ndarray
    T_j2: np.ndarray = field(repr=False)
    classification: str = None
    a: float = None
    alpha_estimate: complex = None
    wronskian: float = None
    flags: tuple = ()

    @property
    def unitarity_defect(self):
        return np.maximum(np.abs(np.abs(self.T) ** 2 + np.abs(self.R1) ** 2 - 1.0),
                          np.abs(np.abs(self.T) ** 2 + np.abs(self.R2) ** 2 - 1.0))


def coefficients_from_jost(jd):
    """T, R1, R2 from the integral formulas; also returns 1/T from the j = 2 form."""
    k = jd.k
    two_ik = 2j * k
    inv_t1 = 1.0 - jd.int_vm1 / two_ik
    inv_t2 = 1.0 - jd.int_vm2 / two_ik
    if np.any(np.abs(inv_t1) < 1e-12):
        raise DegenerateTransmissionError("1/T vanishes on the real axis")
    T = 1.0 / inv_t1
    R2 = T * jd.int_e_vm1 / two_ik
    R1 = T * jd.int_e_vm2 / two_ik
    return T, R1, R2, 1.0 / inv_t2


def scattering_coefficients(V, kgrid, classify_potential=True):
    """Coefficients on a punctured momentum grid (``MomentumGrid`` or array of k != 0)."""
    if V.values is None:
        V = build_potential(V)
    ks = kgrid.k if isinstance(kgrid, MomentumGrid) else np.asarray(kgrid, dtype=float)
    if np.any(ks == 0):
        raise ValueError("the momentum grid must be punctured at k = 0")
    jd = jost_data(V, ks, x=np.zeros(0))
    T, R1, R2, T2 = coefficients_from_jost(jd)
    flags = ()
    if np.max(np.abs(T - T2)) > 1e-6:
        flags = ("j=1 and j=2 transmission formulas disagree: under-resolved",)
    kw = {}
    if classify_potential:
        c = classify(V)
        kw = dict(classification=c.classification, a=c.a, wronskian=c.wronskian)
        if c.classification == "generic":
            Tp = coefficients_from_jost(jost_data(V, [0.05], x=np.zeros(0)))[0][0]
            # T(-k) = conj T(k)
            kw["alpha_estimate"] = (Tp - np.conj(Tp)) / 0.1
    return ScatteringCoefficients(k=np.asarray(ks, dtype=float), T=T, R1=R1, R2=R2, T_j2=T2,
                                  flags=flags + V.flags, **kw)


@dataclass(frozen=True)
class Classification:
    classification: str
    wronskian: float
    wronskian_at_zero: float
    a: float = None
    witness: np.ndarray = field(default=None, repr=False)
    threshold: float = None


def classify(V):
    """Generic iff the zero-energy Jost solutions have non-vanishing Wronskian."""
    if V.values is None:
        V = build_potential(V)
    x = V.grid.x
    pts = np.concatenate(([0.0], x))
    jd = jost_data(V, [0.0], x=pts)
    f1, f2 = jd.m1[0].real, jd.m2[0].real
    df1, df2 = jd.dm1[0].real, jd.dm2[0].real
    w0 = df1[0] * f2[0] - f1[0] * df2[0]
    # the same Wronskian from the integral form of 1/T: [f1, f2] = 2ik - int V m1
    w_int = -jd.int_vm1[0].real
    thr = TAU_CLASS * (1.0 + weighted_norm(V, 1.0))
    if abs(w0) < thr:
        a = float(f1[1])
        return Classification("exceptional", w_int, w0, a=a, witness=f1[1:], threshold=thr)
    return Classification("generic", w_int, w0, threshold=thr)


def transmission_at_zero(cls):
    if cls.classification == "generic":
        return 0.0
    a = cls.a
    return 2.0 * a / (1.0 + a * a)


def verify_relations(jd, coeffs):
    """Residuals of the two Jost-basis relations and of unitarity."""
    if not np.allclose(np.asarray(jd.k).real, coeffs.k):
        raise ValueError("JostData and coefficients must share the k-set")
    k = coeffs.k[:, None]
    x = jd.x[None, :]
    T, R1, R2 = coeffs.T[:, None], coeffs.R1[:, None], coeffs.R2[:, None]
    # m_j(x, -k) = conj m_j(x, k) for real k
    rel1 = T * jd.m2 - (R1 * np.exp(2j * k * x) * jd.m1 + np.conj(jd.m1))
    rel2 = T * jd.m1 - (R2 * np.exp(-2j * k * x) * jd.m2 + np.conj(jd.m2))
    uni = coeffs.unitarity_defect
    return {
        "relation_m2": float(np.max(np.abs(rel1))) if rel1.size else 0.0,
        "relation_m1": float(np.max(np.abs(rel2))) if rel2.size else 0.0,
        "unitarity": float(np.max(uni)) if uni.size else 0.0,
    }


def default_kgrid(grid=None, k_min=0.05):
    return MomentumGrid.dual(grid or SpatialGrid(), k_min=k_min)
