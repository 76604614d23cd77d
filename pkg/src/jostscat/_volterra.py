"""Inward march for the Jost Volterra equation.

Solves ``m(x) = 1 + int_x^inf D_k(y - x) V(y) m(y) dy`` on a node set covering the
support of ``V``.  The tail integral is carried by two exact recursions.  With
``g = V m``, ``P(x) = int_x^inf D_k(y - x) g`` and
``Q(x) = int_x^inf exp(2ik(y - x)) g`` one has, for a step ``d = y_{j+1} - y_j``,

    P_j = I_D + P_{j+1} + D_k(d) Q_{j+1}
    Q_j = I_E + exp(2ikd) Q_{j+1}

where ``I_D``/``I_E`` are the integrals over ``[y_j, y_{j+1}]`` only.  Those are
evaluated by integrating a cubic through the stencil ``y_j .. y_{j+3}``.  Since
``D_k(0) = 0`` the node ``y_j`` never feeds ``P_j``, so a Gauss-Seidel sweep is
explicit and lands on the discrete fixed point in one pass.  ``|exp(2ikd)| <= 1``
for ``Im k >= 0``, so both recursions are stable.

Two kernels implement the sweep: a numba one that loops over ``k`` and a numpy
one that vectorises over ``k`` and loops over nodes in Python.
"""
from dataclasses import dataclass

import numpy as np

from ._accel import njit, prange, use_numba

_SERIES_CUT = 1e-3


@dataclass(frozen=True)
class VolterraMesh:
    """Quadrature nodes for one sweep direction.

    ``cnt[j]`` nodes starting at ``j`` form the stencil of interval ``j``; ``w`` holds
    the matching integration weights and ``vs`` the potential seen from that
    interval (one-sided at piece boundaries).
    """

    y: np.ndarray
    cnt: np.ndarray
    w: np.ndarray
    vs: np.ndarray
    out_idx: np.ndarray

    @property
    def n_nodes(self):
        return self.y.size


def _stencil_weights(stencils):
    """Integrals over ``[s[0], s[1]]`` of the Lagrange basis on each row ``s`` of ``stencils``."""
    stencils = np.atleast_2d(stencils)
    gx, gw = np.polynomial.legendre.leggauss(4)
    a, b = stencils[:, :1], stencils[:, 1:2]
    t = 0.5 * (b - a) * gx[None, :] + 0.5 * (a + b)
    c = stencils.shape[1]
    out = np.empty(stencils.shape)
    for s in range(c):
        basis = np.ones_like(t)
        for r in range(c):
            if r != s:
                basis *= (t - stencils[:, r:r + 1]) / (stencils[:, s:s + 1] - stencils[:, r:r + 1])
        out[:, s] = 0.5 * (b[:, 0] - a[:, 0]) * (basis @ gw)
    return out


def build_mesh(pieces, h, required=(), merge_tol=1e-7):
    """Node set for pieces ``[(lo, hi, vfunc), ...]`` ordered left to right.

    Every point in ``required`` that falls inside the support becomes a node; the
    gaps between anchors are split uniformly with spacing at most ``h``.
    """
    required = np.asarray(required, dtype=float)
    ys, cnts, ws, vss = [], [], [], []
    offset = 0
    for p, (lo, hi, vfunc) in enumerate(pieces):
        inside = required[(required > lo) & (required < hi)]
        anchors = np.unique(np.concatenate(([lo, hi], inside)))
        keep = np.concatenate(([True], np.diff(anchors) > merge_tol * h))
        keep[-1] = True
        anchors = anchors[keep]
        if anchors.size > 2 and anchors[-1] - anchors[-2] <= merge_tol * h:
            anchors = np.delete(anchors, -2)
        parts = [anchors[:1]]
        for a, b in zip(anchors[:-1], anchors[1:]):
            m = max(1, int(np.ceil((b - a) / h - 1e-9)))
            parts.append(np.linspace(a, b, m + 1)[1:])
        nodes = np.concatenate(parts)
        if nodes.size < 4:
            nodes = np.linspace(lo, hi, 4)
        # the last intervals of a piece lack a full stencil; grade them so
        # their lower-order rules see tiny steps
        tail = hi - (hi - nodes[-2]) * 0.5 ** np.arange(1, 9)
        tail = tail[np.min(np.abs(tail[:, None] - nodes[None, :]), axis=1) > merge_tol * h]
        nodes = np.unique(np.concatenate((nodes, tail)))
        vals = np.asarray(vfunc(nodes), dtype=float)
        nint = nodes.size - 1
        cnt = np.minimum(4, nodes.size - np.arange(nint)).astype(np.int64)
        w = np.zeros((nint, 4))
        vs = np.zeros((nint, 4))
        for c in (2, 3, 4):
            js = np.nonzero(cnt == c)[0]
            if js.size:
                idx = js[:, None] + np.arange(c)[None, :]
                w[js, :c] = _stencil_weights(nodes[idx])
                vs[js, :c] = vals[idx]
        if p > 0:
            nodes = nodes[1:]
        ys.append(nodes)
        cnts.append(cnt)
        ws.append(w)
        vss.append(vs)
        offset += nodes.size
    y = np.concatenate(ys)
    cnt = np.concatenate(cnts)
    w = np.concatenate(ws)
    vs = np.concatenate(vss)
    j = np.clip(np.searchsorted(y, required), 1, y.size - 1)
    near = np.where(np.abs(y[j] - required) <= np.abs(y[j - 1] - required), j, j - 1)
    out_idx = np.where(np.abs(y[near] - required) <= merge_tol * h * 1.0001, near, -1).astype(np.int64)
    return VolterraMesh(y=y, cnt=cnt, w=w, vs=vs, out_idx=out_idx)


@njit(cache=True)
def _dk_scalar(k, d, z):
    # z = exp(2ikd) supplied by the caller
    x = 2j * k * d
    if abs(x) < _SERIES_CUT:
        return d * (1.0 + x / 2.0 + x * x / 6.0 + x * x * x / 24.0 + x * x * x * x / 120.0)
    return (z - 1.0) / (2j * k)


@njit(cache=True)
def _sweep_one(k, y, cnt, w, vs, m, m_prev, jacobi):
    """One inward sweep for a single k.  Returns (P0, Q0, G0, Q at nodes)."""
    M = y.size - 1
    q = np.zeros(M + 1, dtype=np.complex128)
    # per-interval phase factors exp(2ik d) and D_k(d); uniform runs reuse them
    zs = np.empty(M, dtype=np.complex128)
    ds = np.empty(M, dtype=np.complex128)
    last_d = -1.0
    zl = 1.0 + 0.0j
    dl = 0.0j
    for j in range(M):
        d = y[j + 1] - y[j]
        if d != last_d:
            zl = np.exp(2j * k * d)
            dl = _dk_scalar(k, d, zl)
            last_d = d
        zs[j] = zl
        ds[j] = dl
    m[M] = 1.0
    P = 0.0j
    Q = 0.0j
    G = 0.0j
    src = m_prev if jacobi else m
    for j in range(M - 1, -1, -1):
        c = cnt[j]
        z1 = zs[j]
        D1 = ds[j]
        # kernel factors at stencil nodes s >= 1
        e_s = z1
        d_s = D1
        g = vs[j, 1] * src[j + 1]
        ID = w[j, 1] * d_s * g
        IE = w[j, 1] * e_s * g
        IG = w[j, 1] * g
        for s in range(2, c):
            d_s = d_s + e_s * ds[j + s - 1]
            e_s = e_s * zs[j + s - 1]
            g = vs[j, s] * src[j + s]
            ID += w[j, s] * d_s * g
            IE += w[j, s] * e_s * g
            IG += w[j, s] * g
        P = ID + P + D1 * Q
        m[j] = 1.0 + P
        g0 = vs[j, 0] * (m_prev[j] if jacobi else m[j])
        Q = w[j, 0] * g0 + IE + z1 * Q
        G = w[j, 0] * g0 + IG + G
        q[j] = Q
    return P, Q, G, q


@njit(parallel=True, cache=True)
def _march_many_numba(ks, y, cnt, w, vs, out_idx):
    nk = ks.size
    nout = out_idx.size
    m_out = np.ones((nk, nout), dtype=np.complex128)
    dm_out = np.zeros((nk, nout), dtype=np.complex128)
    left = np.zeros((nk, 3), dtype=np.complex128)
    for ik in prange(nk):
        m = np.empty(y.size, dtype=np.complex128)
        P0, Q0, G0, q = _sweep_one(ks[ik], y, cnt, w, vs, m, m, False)
        for i in range(nout):
            j = out_idx[i]
            if j >= 0:
                m_out[ik, i] = m[j]
                dm_out[ik, i] = -q[j]
        left[ik, 0] = P0
        left[ik, 1] = Q0
        left[ik, 2] = G0
    return m_out, dm_out, left


def _march_many_numpy(ks, y, cnt, w, vs, out_idx):
    """Vectorised over k; the node loop runs in Python."""
    ks = np.asarray(ks, dtype=complex)
    nk = ks.size
    M = y.size - 1
    m = np.empty((M + 1, nk), dtype=complex)
    q = np.zeros((M + 1, nk), dtype=complex)
    m[M] = 1.0
    P = np.zeros(nk, dtype=complex)
    Q = np.zeros(nk, dtype=complex)
    G = np.zeros(nk, dtype=complex)
    tk = 2j * ks
    small_k = np.abs(ks) == 0

    def dk(d, z):
        x = tk * d
        ser = d * (1.0 + x / 2.0 + x * x / 6.0 + x ** 3 / 24.0 + x ** 4 / 120.0)
        with np.errstate(invalid="ignore", divide="ignore"):
            full = (z - 1.0) / np.where(small_k, 1.0, tk)
        return np.where(np.abs(x) < _SERIES_CUT, ser, full)

    dy = np.diff(y)
    for j in range(M - 1, -1, -1):
        c = cnt[j]
        z1 = np.exp(tk * dy[j])
        D1 = dk(dy[j], z1)
        e_s, d_s = z1, D1
        g = vs[j, 1] * m[j + 1]
        ID = w[j, 1] * d_s * g
        IE = w[j, 1] * e_s * g
        IG = w[j, 1] * g
        for s in range(2, c):
            zz = np.exp(tk * dy[j + s - 1])
            d_s = d_s + e_s * dk(dy[j + s - 1], zz)
            e_s = e_s * zz
            g = vs[j, s] * m[j + s]
            ID = ID + w[j, s] * d_s * g
            IE = IE + w[j, s] * e_s * g
            IG = IG + w[j, s] * g
        P = ID + P + D1 * Q
        m[j] = 1.0 + P
        g0 = vs[j, 0] * m[j]
        Q = w[j, 0] * g0 + IE + z1 * Q
        G = w[j, 0] * g0 + IG + G
        q[j] = Q
    nout = out_idx.size
    m_out = np.ones((nk, nout), dtype=complex)
    dm_out = np.zeros((nk, nout), dtype=complex)
    valid = out_idx >= 0
    m_out[:, valid] = m[out_idx[valid]].T
    dm_out[:, valid] = -q[out_idx[valid]].T
    left = np.stack([P, Q, G], axis=1)
    return m_out, dm_out, left


def march(ks, mesh):
    """Gauss-Seidel sweep for every k.

    Returns ``(m_out, dm_out, left)``: ``m`` and ``dm/dx`` at the mesh's output
    nodes (shape ``(nk, nout)``; entries for output points outside the support
    are left at 1 and 0) and the left-end triple ``(P0, Q0, G0)`` per k.
    """
    ks = np.ascontiguousarray(np.atleast_1d(ks), dtype=np.complex128)
    args = (mesh.y, mesh.cnt, mesh.w, mesh.vs, mesh.out_idx)
    if mesh.y.size < 2:
        nout = mesh.out_idx.size
        return (np.ones((ks.size, nout), complex), np.zeros((ks.size, nout), complex),
                np.zeros((ks.size, 3), complex))
    if use_numba():
        return _march_many_numba(ks, *args)
    return _march_many_numpy(ks, *args)


def picard(k, mesh, tol=1e-12, max_iter=200, scheme="gauss-seidel"):
    """Iterate the discrete Volterra map for one k until successive iterates agree.

    ``scheme="jacobi"`` is the plain successive-approximation sequence
    ``m_{n+1} = 1 + int D V m_n``.  ``"gauss-seidel"`` reuses freshly swept values
    and settles after one pass; a second pass confirms the fixed point.

    Returns ``(m, q, (P0, Q0, G0), iterations, last_difference)``.
    """
    y, cnt, w, vs = mesh.y, mesh.cnt, mesh.w, mesh.vs
    k = complex(k)
    m_prev = np.ones(y.size, dtype=np.complex128)
    jacobi = scheme == "jacobi"
    diff = np.inf
    for it in range(1, max_iter + 1):
        m = np.empty(y.size, dtype=np.complex128)
        P0, Q0, G0, q = _sweep_one(k, y, cnt, w, vs, m, m_prev, jacobi)
        diff = float(np.max(np.abs(m - m_prev)))
        m_prev = m
        if diff < tol * max(1.0, float(np.max(np.abs(m)))):
            return m, q, (P0, Q0, G0), it, diff
    raise VolterraIterationError(
        f"Volterra iteration did not settle after {max_iter} sweeps", residual=diff)


def residual(k, mesh, m):
    """Sup-norm defect of one Jacobi sweep applied to ``m``."""
    out = np.empty(mesh.y.size, dtype=np.complex128)
    _sweep_one(complex(k), mesh.y, mesh.cnt, mesh.w, mesh.vs, out, m, True)
    return float(np.max(np.abs(out - m)))


class VolterraIterationError(RuntimeError):
    """Raised when the successive approximations fail to settle."""

    def __init__(self, msg, residual):
        super().__init__(msg)
        self.residual = residual
