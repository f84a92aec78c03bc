"""Assembly of the linear conforming DG system.

Two forms are available.

"energy" builds the quadratic form

    B(u, u) = int int (u(y) - u(x))^2 gamma(x, y) dy dx

over the whole extended domain (unit square plus collar), where gamma is the
rescaled kernel restricted to B_delta(x) for "exactcaps" and to the
chord-clipped polygon of B_delta(x) for "nocaps". Writing u(x) = sum u_i
phi_i(x) on the outer triangle T and u(y) on the inner triangle T', each pair
(T, T') contributes

    u_T' S2 u_T'  -  2 u_T . lambda(x) S1 . u_T'  +  (u_T . lambda(x))^2 S0

per outer point x, with S0, S1, S2 the zeroth, first and second moments of
the kernel against the barycentric coordinates of T'. The result is
symmetric, positive semidefinite and annihilates constants.

"testpoint" follows the variational form tested at outer points x in the
square only, 2 int_Omega w(x) int_{N(x)} (u(x) - u(y)) gamma dy dx, with N(x)
the neighborhood of x, and keeps the symmetric part of the unknown block.
For the ball both forms coincide. For the polygon they do not: the
symmetric part carries the zeroth-order term 2|N(x)| where the energy form
has |N(x)| + |{y : x in N(y)}|, and on irregular meshes this difference
dominates the error as delta shrinks. It is the default for "nocaps".

The matrix of the problem is the block on the unknowns (interior and boundary
nodes); the coupling to the collar nodes moves the volume-constraint data to
the right-hand side.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
from numba import njit

from .geometry import (GL_W, GL_X, MAX_CAPS, MAX_POLY, SCRATCH, TRI_BARY, TRI_NPTS,
                       TRI_W, NeighborhoodPolicy, _point_in_triangle, _region_fill,
                       as_policy)
from .mesh import COLLAR, INTERIOR, Grid1D, Mesh2D, _query, classify_nodes


@dataclass
class ProblemSpec:
    """Manufactured nonlocal problem.

    Fields take coordinates as separate arguments: f(x1, x2, delta),
    g(x1, x2, delta), u_ref(x1, x2) in 2D and f(x, delta), g(x, delta),
    u_ref(x) in 1D. They must work on numpy arrays and be compilable by numba
    (plain arithmetic and numpy ufuncs), since the energy norm evaluates u_ref
    inside compiled loops.
    """
    name: str
    dimension: int
    f: Callable
    g: Callable
    u_ref: Callable
    mu: Optional[int] = None
    _compiled: Optional[Callable] = field(default=None, repr=False)

    @property
    def compiled_u_ref(self):
        if self._compiled is None:
            self._compiled = njit(self.u_ref)
        return self._compiled


@dataclass
class SystemMatrix:
    """Stiffness matrix on the unknowns plus the coupling to the collar.

    dof_nodes lists mesh node ids of the unknowns in matrix order (NI then
    NB); collar_nodes the node ids of the collar data.
    """
    matrix: sp.csr_matrix
    coupling: sp.csr_matrix
    dof_nodes: np.ndarray
    collar_nodes: np.ndarray
    policy: NeighborhoodPolicy
    outer_degree: int
    inner_degree: int
    delta: float
    h: float

    @property
    def shape(self):
        return self.matrix.shape

    def expand(self, u, collar_values):
        """Nodal vector over all mesh nodes from unknowns and collar data."""
        n = len(self.dof_nodes) + len(self.collar_nodes)
        full = np.empty(n)
        full[self.dof_nodes] = u
        full[self.collar_nodes] = collar_values
        return full


@dataclass
class LoadVector:
    f_part: np.ndarray
    collar_part: np.ndarray
    collar_values: np.ndarray

    @property
    def values(self):
        return self.f_part + self.collar_part

    def __len__(self):
        return len(self.f_part)


# ---------------------------------------------------------------------------
# compiled helpers

@njit(cache=True)
def _shape(code, rho):
    if code == 0:
        return 1.0
    if code == 1:
        return 1.0 - rho
    if code == 2:
        return np.exp(-rho * rho)
    return 1.0 / rho


@njit(cache=True)
def _barycentric_coeffs(V, T):
    """lambda_i(x, y) = C[t, i, 0] + C[t, i, 1] x + C[t, i, 2] y."""
    nt = T.shape[0]
    C = np.empty((nt, 3, 3))
    area = np.empty(nt)
    for t in range(nt):
        x0 = V[T[t, 0], 0]
        y0 = V[T[t, 0], 1]
        x1 = V[T[t, 1], 0]
        y1 = V[T[t, 1], 1]
        x2 = V[T[t, 2], 0]
        y2 = V[T[t, 2], 1]
        det = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
        area[t] = 0.5 * abs(det)
        C[t, 0, 0] = (x1 * y2 - x2 * y1) / det
        C[t, 0, 1] = (y1 - y2) / det
        C[t, 0, 2] = (x2 - x1) / det
        C[t, 1, 0] = (x2 * y0 - x0 * y2) / det
        C[t, 1, 1] = (y2 - y0) / det
        C[t, 1, 2] = (x0 - x2) / det
        C[t, 2, 0] = (x0 * y1 - x1 * y0) / det
        C[t, 2, 1] = (y0 - y1) / det
        C[t, 2, 2] = (x1 - x0) / det
    return C, area


@njit(cache=True)
def _fully_inside(xx, xy, tri, r2):
    for k in range(3):
        if (tri[k, 0] - xx) ** 2 + (tri[k, 1] - xy) ** 2 > r2:
            return False
    return True


@njit(cache=True)
def _inner_points(xx, xy, t, tri, delta, with_caps, code, degree,
                  pts, wts, poly, chord, caps):
    """Quadrature of B_delta(x) (or its polygon) intersected with triangle tri,
    with weights multiplied by the kernel shape. Returns the point count."""
    star = code != 0 and _point_in_triangle(xx, xy, tri, 1e-12)
    n, status = _region_fill(xx, xy, delta, tri, with_caps, star, degree,
                             pts, wts, poly, chord, caps)
    if code != 0:
        for k in range(n):
            rho = np.sqrt((pts[k, 0] - xx) ** 2 + (pts[k, 1] - xy) ** 2) / delta
            wts[k] *= _shape(code, rho) if rho > 0.0 else 0.0
    return n


@njit(cache=True)
def _moments(xx, xy, t, V, T, C, area, delta, with_caps, code, degree,
             tri, pts, wts, poly, chord, caps, S1, S2):
    """Moments of the kernel shape against barycentric coordinates of t.

    Returns S0 and fills S1[j] and S2[j, k]; the kernel constant is applied
    by the caller.
    """
    for k in range(3):
        tri[k, 0] = V[T[t, k], 0]
        tri[k, 1] = V[T[t, k], 1]
    if code == 0 and _fully_inside(xx, xy, tri, delta * delta * (1.0 + 2e-12)):
        a = area[t]
        for j in range(3):
            S1[j] = a / 3.0
            for k in range(3):
                S2[j, k] = a / 12.0 if j != k else a / 6.0
        return a
    n = _inner_points(xx, xy, t, tri, delta, with_caps, code, degree,
                      pts, wts, poly, chord, caps)
    s0 = 0.0
    for j in range(3):
        S1[j] = 0.0
        for k in range(3):
            S2[j, k] = 0.0
    for q in range(n):
        w = wts[q]
        l0 = C[t, 0, 0] + C[t, 0, 1] * pts[q, 0] + C[t, 0, 2] * pts[q, 1]
        l1 = C[t, 1, 0] + C[t, 1, 1] * pts[q, 0] + C[t, 1, 2] * pts[q, 1]
        l2 = 1.0 - l0 - l1
        s0 += w
        S1[0] += w * l0
        S1[1] += w * l1
        S1[2] += w * l2
        S2[0, 0] += w * l0 * l0
        S2[0, 1] += w * l0 * l1
        S2[0, 2] += w * l0 * l2
        S2[1, 1] += w * l1 * l1
        S2[1, 2] += w * l1 * l2
        S2[2, 2] += w * l2 * l2
    S2[1, 0] = S2[0, 1]
    S2[2, 0] = S2[0, 2]
    S2[2, 1] = S2[1, 2]
    return s0


@njit(cache=True)
def _locate(indptr, indices, i, j):
    lo = indptr[i]
    hi = indptr[i + 1]
    while lo < hi:
        mid = (lo + hi) // 2
        if indices[mid] < j:
            lo = mid + 1
        else:
            hi = mid
    return lo


@njit(cache=True)
def _pattern(T, ext, ndof, node_tri_ptr, node_tri, origin, size, nx, ny, start,
             items, centroid, radius, rmax, delta):
    """CSR pattern over extended node ids, omitting collar-collar pairs."""
    nv = len(node_tri_ptr) - 1
    nt = T.shape[0]
    cand = np.empty(nt, dtype=np.int64)
    mark = np.full(nv, -1, dtype=np.int64)
    counts = np.zeros(nv + 1, dtype=np.int64)
    cols = np.empty(0, dtype=np.int64)
    for sweep in range(2):
        for i in range(nv):
            row = ext[i]
            pos = counts[row] if sweep == 1 else 0
            c = 0
            for a in range(node_tri_ptr[i], node_tri_ptr[i + 1]):
                t = node_tri[a]
                m = _query(origin, size, nx, ny, start, items, centroid, radius, rmax,
                           centroid[t, 0], centroid[t, 1], delta + radius[t], cand)
                for b in range(m):
                    s = cand[b]
                    for k in range(3):
                        v = T[s, k]
                        col = ext[v]
                        if row >= ndof and col >= ndof:
                            continue
                        if mark[v] != i:
                            mark[v] = i
                            if sweep == 1:
                                cols[pos] = col
                                pos += 1
                            c += 1
            if sweep == 0:
                counts[row + 1] = c
        if sweep == 0:
            for r in range(nv):
                counts[r + 1] += counts[r]
            cols = np.empty(counts[nv], dtype=np.int64)
    for r in range(nv):
        cols[counts[r]:counts[r + 1]] = np.sort(cols[counts[r]:counts[r + 1]])
    return counts, cols


@njit(cache=True)
def _assemble(V, T, region, ext, ndof, C, area, origin, size, nx, ny, start, items,
              centroid, radius, rmax, delta, with_caps, code, cst,
              obary, ow, inner_degree, indptr, indices, data, form=0):
    nt = T.shape[0]
    nq = len(ow)
    cand = np.empty(nt, dtype=np.int64)
    pts = np.empty((SCRATCH, 2))
    wts = np.empty(SCRATCH)
    poly = np.empty((MAX_POLY, 2))
    chord = np.empty(MAX_POLY, dtype=np.bool_)
    caps = np.empty((MAX_CAPS, 4))
    tri = np.empty((3, 2))
    S1 = np.empty(3)
    S2 = np.empty((3, 3))
    xq = np.empty((nq, 2))
    TT = np.empty((3, 3))
    X = np.empty((3, 3))
    P = np.empty((3, 3))
    for t in range(nt):
        for q in range(nq):
            xq[q, 0] = obary[q, 0] * V[T[t, 0], 0] + obary[q, 1] * V[T[t, 1], 0] + obary[q, 2] * V[T[t, 2], 0]
            xq[q, 1] = obary[q, 0] * V[T[t, 0], 1] + obary[q, 1] * V[T[t, 1], 1] + obary[q, 2] * V[T[t, 2], 1]
        wt = area[t] * cst
        TT[:, :] = 0.0
        m = _query(origin, size, nx, ny, start, items, centroid, radius, rmax,
                   centroid[t, 0], centroid[t, 1], delta + radius[t], cand)
        for b in range(m):
            s = cand[b]
            both_collar = region[t] == COLLAR and region[s] == COLLAR
            if both_collar or (form == 1 and region[t] == COLLAR):
                continue
            X[:, :] = 0.0
            P[:, :] = 0.0
            hit = False
            for q in range(nq):
                s0 = _moments(xq[q, 0], xq[q, 1], s, V, T, C, area, delta, with_caps,
                              code, inner_degree, tri, pts, wts, poly, chord, caps, S1, S2)
                if s0 == 0.0:
                    continue
                hit = True
                w = wt * ow[q]
                for i in range(3):
                    li = obary[q, i] * w
                    for j in range(3):
                        TT[i, j] += li * obary[q, j] * s0
                        X[i, j] += li * S1[j]
                        P[i, j] += w * S2[i, j]
            if not hit:
                continue
            for i in range(3):
                ri = ext[T[t, i]]
                for j in range(3):
                    cj = ext[T[s, j]]
                    if ri < ndof and cj < ndof:
                        data[_locate(indptr, indices, ri, cj)] -= X[i, j]
                        data[_locate(indptr, indices, cj, ri)] -= X[i, j]
                    elif form == 1:
                        # collar column of a test row: unsymmetrized coupling
                        data[_locate(indptr, indices, ri, cj)] -= 2.0 * X[i, j]
                    elif ri < ndof or cj < ndof:
                        data[_locate(indptr, indices, ri, cj)] -= X[i, j]
                        data[_locate(indptr, indices, cj, ri)] -= X[i, j]
            if form == 1:
                continue
            for i in range(3):
                ri = ext[T[s, i]]
                for j in range(3):
                    cj = ext[T[s, j]]
                    if ri < ndof or cj < ndof:
                        data[_locate(indptr, indices, ri, cj)] += P[i, j]
        scale = 2.0 if form == 1 else 1.0
        for i in range(3):
            ri = ext[T[t, i]]
            for j in range(3):
                cj = ext[T[t, j]]
                if ri < ndof or cj < ndof:
                    data[_locate(indptr, indices, ri, cj)] += scale * TT[i, j]


# ---------------------------------------------------------------------------
# Python interface

def _mesh_arrays(mesh):
    idx = mesh.index
    return (idx.origin, idx.size, idx.shape[0], idx.shape[1], idx.start, idx.items,
            idx.centroid, idx.radius, idx.rmax)


def _extended_numbering(mesh, sets):
    ext = np.empty(mesh.num_vertices, dtype=np.int64)
    dofs = sets.dofs
    ext[dofs] = np.arange(len(dofs))
    ext[sets.NC] = len(dofs) + np.arange(len(sets.NC))
    return ext


def kernel_constant(kernel):
    """Factor delta^-(d+2) times the profile scale."""
    return kernel.scale * kernel.delta ** -(kernel.d + 2)


def effective_inner_degree(kernel, inner_degree):
    # for the constant kernel the moments are polynomials of degree two
    return min(inner_degree, 2) if kernel.code == 0 else inner_degree


def outer_points(mesh, degree, which=None):
    """Outer quadrature points, weights and barycentrics for selected triangles."""
    bary = TRI_BARY[degree, : TRI_NPTS[degree]]
    w = TRI_W[degree, : TRI_NPTS[degree]]
    tris = mesh.triangles if which is None else mesh.triangles[which]
    corners = mesh.vertices[tris]
    pts = np.einsum("qk,tkd->tqd", bary, corners)
    e1 = corners[:, 1] - corners[:, 0]
    e2 = corners[:, 2] - corners[:, 0]
    area = 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    return pts, area[:, None] * w[None, :], bary


FORMS = {"energy": 0, "testpoint": 1}


def default_form(policy):
    return "energy" if as_policy(policy).with_caps else "testpoint"


def stiffness_matrix(mesh, kernel, policy, outer_degree=5, inner_degree=5, sets=None,
                     form=None):
    """Full stiffness matrix over extended node ids, minus the collar block.

    form="energy" assembles the double integral over the whole extended
    domain; form="testpoint" the symmetric part of the outer-point form (the
    default for the polygon policy, see the module notes). Only the unknown
    rows of the collar coupling are meaningful in the second case.
    Returns (K, ext, sets) where ext maps mesh node ids to the matrix ordering
    (unknowns first, then collar nodes).
    """
    policy = as_policy(policy)
    code = FORMS[form or default_form(policy)]
    if sets is None:
        sets = classify_nodes(mesh)
    for deg in (outer_degree, inner_degree):
        if not 1 <= deg <= 7:
            raise ValueError(f"quadrature degree {deg} unsupported (1..7)")
    if max(mesh.h, mesh.H) > kernel.delta * (1 + 1e-9):
        raise ValueError("mesh size must not exceed the horizon")
    ext = _extended_numbering(mesh, sets)
    ndof = len(sets.NI) + len(sets.NB)
    V = np.ascontiguousarray(mesh.vertices, dtype=float)
    T = np.ascontiguousarray(mesh.triangles, dtype=np.int64)
    nv = len(V)
    order = np.argsort(T.ravel(), kind="stable")
    node_tri = (order // 3).astype(np.int64)
    node_tri_ptr = np.concatenate([[0], np.cumsum(np.bincount(T.ravel(), minlength=nv))])
    arrays = _mesh_arrays(mesh)
    delta = kernel.delta
    indptr, indices = _pattern(T, ext, ndof, node_tri_ptr, node_tri, *arrays, delta)
    data = np.zeros(len(indices))
    C, area = _barycentric_coeffs(V, T)
    obary = np.ascontiguousarray(TRI_BARY[outer_degree, : TRI_NPTS[outer_degree]])
    ow = np.ascontiguousarray(TRI_W[outer_degree, : TRI_NPTS[outer_degree]])
    _assemble(V, T, mesh.region, ext, ndof, C, area, *arrays, delta, policy.with_caps,
              kernel.code, kernel_constant(kernel), obary, ow,
              effective_inner_degree(kernel, inner_degree), indptr, indices, data, code)
    K = sp.csr_matrix((data, indices, indptr), shape=(nv, nv))
    return K, ext, sets


def interpolate_collar_data(g, mesh, delta=None):
    """Nodal interpolant of the collar datum at the collar nodes.

    g takes coordinates and, when delta is given, the horizon as last argument.
    """
    if isinstance(mesh, Grid1D):
        coords = (mesh.x[mesh.node_sets().NC],)
    else:
        p = mesh.vertices[classify_nodes(mesh).NC]
        coords = (p[:, 0], p[:, 1])
    vals = g(*coords) if delta is None else g(*coords, delta)
    return np.asarray(vals, dtype=float) * np.ones_like(coords[0])


def load_f_part(mesh, problem, delta, sets, ext, ndof, degree=5):
    """int f phi_i over interior triangles."""
    inner = np.nonzero(mesh.region == INTERIOR)[0]
    pts, w, bary = outer_points(mesh, degree, inner)
    fv = problem.f(pts[..., 0], pts[..., 1], delta) * np.ones_like(w)
    contrib = np.einsum("tq,qk->tk", fv * w, bary)
    F = np.zeros(ndof)
    rows = ext[mesh.triangles[inner]]
    np.add.at(F, rows.ravel(), contrib.ravel())
    return F


def assemble_cdg_2d(mesh, kernel, policy, problem, outer_degree=5, inner_degree=5,
                    form=None):
    """Stiffness matrix on the unknowns and the load vector with collar data."""
    if problem.dimension != 2:
        raise ValueError("assemble_cdg_2d needs a two-dimensional problem")
    policy = as_policy(policy)
    K, ext, sets = stiffness_matrix(mesh, kernel, policy, outer_degree, inner_degree,
                                    form=form)
    ndof = len(sets.NI) + len(sets.NB)
    A = K[:ndof, :ndof].tocsr()
    KIC = K[:ndof, ndof:].tocsr()
    gc = interpolate_collar_data(problem.g, mesh, kernel.delta)
    F = load_f_part(mesh, problem, kernel.delta, sets, ext, ndof, outer_degree)
    system = SystemMatrix(A, KIC, sets.dofs, sets.NC, policy, outer_degree, inner_degree,
                          kernel.delta, mesh.h)
    return system, LoadVector(F, -(KIC @ gc), gc)


# ---------------------------------------------------------------------------
# one dimension

@njit(cache=True)
def _outer_breaks(a, b, c, d, delta, out):
    """Break points of [a, b] where the inner interval [x - delta, x + delta]
    crosses an end of [c, d]."""
    out[0] = a
    n = 1
    for p in (c - delta, c + delta, d - delta, d + delta):
        if a < p < b:
            out[n] = p
            n += 1
    out[n] = b
    n += 1
    out[:n] = np.sort(out[:n])
    return n


@njit(cache=True)
def _pair_1d(a, b, c, d, delta, code, gx, gw, TT, X, P):
    """Moments of one (outer, inner) element pair, split so each piece is smooth."""
    nq = len(gx)
    brk = np.empty(6)
    nb = _outer_breaks(a, b, c, d, delta, brk)
    TT[:, :] = 0.0
    X[:, :] = 0.0
    P[:, :] = 0.0
    hit = False
    for k in range(nb - 1):
        u0 = brk[k]
        u1 = brk[k + 1]
        if u1 <= u0:
            continue
        for q in range(nq):
            xx = u0 + (u1 - u0) * gx[q]
            wx = (u1 - u0) * gw[q]
            lx1 = (xx - a) / (b - a)
            lx0 = 1.0 - lx1
            lo = max(c, xx - delta)
            hi = min(d, xx + delta)
            if hi <= lo:
                continue
            for piece in range(2):
                if piece == 0:
                    p0 = lo
                    p1 = min(hi, xx)
                else:
                    p0 = max(lo, xx)
                    p1 = hi
                if p1 <= p0:
                    continue
                for r in range(nq):
                    y = p0 + (p1 - p0) * gx[r]
                    rho = abs(y - xx) / delta
                    w = wx * (p1 - p0) * gw[r] * (_shape(code, rho) if rho > 0 else 0.0)
                    ly1 = (y - c) / (d - c)
                    ly0 = 1.0 - ly1
                    hit = True
                    TT[0, 0] += w * lx0 * lx0
                    TT[0, 1] += w * lx0 * lx1
                    TT[1, 1] += w * lx1 * lx1
                    X[0, 0] += w * lx0 * ly0
                    X[0, 1] += w * lx0 * ly1
                    X[1, 0] += w * lx1 * ly0
                    X[1, 1] += w * lx1 * ly1
                    P[0, 0] += w * ly0 * ly0
                    P[0, 1] += w * ly0 * ly1
                    P[1, 1] += w * ly1 * ly1
    TT[1, 0] = TT[0, 1]
    P[1, 0] = P[0, 1]
    return hit


@njit(cache=True)
def _assemble_1d(x, E, region, ndof, delta, code, cst, gx, gw, rows, cols, vals):
    ne = E.shape[0]
    n = 0
    TT = np.empty((2, 2))
    X = np.empty((2, 2))
    P = np.empty((2, 2))
    for t in range(ne):
        a = x[E[t, 0]]
        b = x[E[t, 1]]
        for s in range(ne):
            if region[t] == COLLAR and region[s] == COLLAR:
                continue
            c = x[E[s, 0]]
            d = x[E[s, 1]]
            if c > b + delta or d < a - delta:
                continue
            if not _pair_1d(a, b, c, d, delta, code, gx, gw, TT, X, P):
                continue
            for i in range(2):
                for j in range(2):
                    entries = ((E[t, i], E[t, j], TT[i, j]), (E[s, i], E[s, j], P[i, j]),
                               (E[t, i], E[s, j], -X[i, j]), (E[s, j], E[t, i], -X[i, j]))
                    for e in entries:
                        if e[0] < ndof or e[1] < ndof:
                            rows[n] = e[0]
                            cols[n] = e[1]
                            vals[n] = cst * e[2]
                            n += 1
    return n


def stiffness_matrix_1d(grid, kernel, degree=5):
    """Full 1D stiffness matrix over node ids (unknowns first), minus the
    collar block."""
    sets = grid.node_sets()
    ndof = len(sets.NI) + len(sets.NB)
    nq = max(1, (degree + 2) // 2)
    gx = GL_X[nq, :nq].copy()
    gw = GL_W[nq, :nq].copy()
    ne = len(grid.elements)
    reach = int(np.ceil(kernel.delta / np.min(np.diff(grid.nodes)))) + 3
    cap = 16 * ne * (2 * reach + 2) + 16
    rows = np.empty(cap, dtype=np.int64)
    cols = np.empty(cap, dtype=np.int64)
    vals = np.empty(cap)
    n = _assemble_1d(grid.x, grid.elements, grid.region, ndof, kernel.delta,
                     kernel.code, kernel_constant(kernel), gx, gw, rows, cols, vals)
    nv = len(grid.x)
    K = sp.coo_matrix((vals[:n], (rows[:n], cols[:n])), shape=(nv, nv)).tocsr()
    return K, sets


def assemble_cdg_1d(grid, kernel, problem, degree=5):
    """One-dimensional analogue of assemble_cdg_2d on a Grid1D."""
    if problem.dimension != 1:
        raise ValueError("assemble_cdg_1d needs a one-dimensional problem")
    if kernel.d != 1:
        raise ValueError("assemble_cdg_1d needs a one-dimensional kernel")
    if grid.h > kernel.delta * (1 + 1e-9):
        raise ValueError("mesh size must not exceed the horizon")
    K, sets = stiffness_matrix_1d(grid, kernel, degree)
    ndof = len(sets.NI) + len(sets.NB)
    A = K[:ndof, :ndof].tocsr()
    KIC = K[:ndof, ndof:].tocsr()
    gc = interpolate_collar_data(problem.g, grid, kernel.delta)
    nq = max(1, (degree + 2) // 2)
    gx, gw = GL_X[nq, :nq], GL_W[nq, :nq]
    inner = grid.elements[grid.region == INTERIOR]
    a = grid.x[inner[:, 0]][:, None]
    b = grid.x[inner[:, 1]][:, None]
    xq = a + (b - a) * gx
    wq = (b - a) * gw
    fv = problem.f(xq, kernel.delta) * np.ones_like(wq)
    F = np.zeros(ndof)
    np.add.at(F, inner[:, 0], np.sum(fv * wq * (1 - gx), axis=1))
    np.add.at(F, inner[:, 1], np.sum(fv * wq * gx, axis=1))
    system = SystemMatrix(A, KIC, sets.dofs, sets.NC, NeighborhoodPolicy.EXACT_BALL,
                          degree, degree, kernel.delta, grid.h)
    return system, LoadVector(F, -(KIC @ gc), gc)
