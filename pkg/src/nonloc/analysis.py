"""Linear solve, error norms and kernel moment diagnostics."""
from dataclasses import dataclass, field
from math import cos, log, pi, sin, tan

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from numba import njit

from .assembly import (_barycentric_coeffs, _fully_inside, _inner_points, _mesh_arrays,
                       _outer_breaks, _shape, kernel_constant, outer_points)
from .geometry import (GL_W, GL_X, MAX_CAPS, MAX_POLY, SCRATCH, TRI_BARY, TRI_NPTS,
                       TRI_W, _clip, _duffy_fill, _point_in_triangle, _region_fill,
                       as_policy)
from .kernels import lambda_order, moment_functions, phi_prime
from .mesh import COLLAR, INTERIOR, Grid1D, _query, classify_nodes


@dataclass
class SolveReport:
    x: np.ndarray
    iterations: int
    residual: float


def cg_solve(A, b, tol=1e-10, maxiter=None):
    """Jacobi-preconditioned conjugate gradients.

    Raises RuntimeError when the relative residual does not reach tol within
    20 * dim iterations, which for these SPD systems points at an assembly
    defect.
    """
    A = sp.csr_matrix(A)
    b = np.asarray(b, dtype=float)
    n = len(b)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return SolveReport(np.zeros(n), 0, 0.0)
    if maxiter is None:
        maxiter = 20 * n
    diag = A.diagonal()
    if np.any(diag <= 0):
        raise ValueError("matrix has a non-positive diagonal entry")
    M = spla.LinearOperator((n, n), matvec=lambda r: r / diag)
    count = [0]

    def tick(_):
        count[0] += 1

    x = np.zeros(n)
    # the recursive residual may drift from the true one; restart until the
    # true residual meets the tolerance
    for _ in range(5):
        x, info = spla.cg(A, b, x0=x, rtol=tol, atol=0.0, maxiter=maxiter - count[0],
                          M=M, callback=tick)
        res = np.linalg.norm(b - A @ x) / bnorm
        if res <= tol or count[0] >= maxiter:
            break
    if res > tol:
        raise RuntimeError(f"CG did not converge: relative residual {res:.3e} after "
                           f"{count[0]} iterations (assembly defect?)")
    return SolveReport(x, count[0], float(res))


# ---------------------------------------------------------------------------
# energy norm

@njit
def _energy_2d(V, T, C, area, origin, size, nx, ny, start, items, centroid, radius,
               rmax, delta, with_caps, code, obary, ow, inner_degree, U, uref,
               tA, use_tables):
    nt = T.shape[0]
    nq = len(ow)
    cand = np.empty(nt, dtype=np.int64)
    pts = np.empty((SCRATCH, 2))
    wts = np.empty(SCRATCH)
    poly = np.empty((MAX_POLY, 2))
    chord = np.empty(MAX_POLY, dtype=np.bool_)
    caps = np.empty((MAX_CAPS, 4))
    tri = np.empty((3, 2))
    xq = np.empty((nq, 2))
    ex = np.empty(nq)
    r2 = delta * delta * (1.0 + 2e-12)
    total = 0.0
    for t in range(nt):
        for q in range(nq):
            px = 0.0
            py = 0.0
            uh = 0.0
            for k in range(3):
                px += obary[q, k] * V[T[t, k], 0]
                py += obary[q, k] * V[T[t, k], 1]
                uh += obary[q, k] * U[T[t, k]]
            xq[q, 0] = px
            xq[q, 1] = py
            ex[q] = uref(px, py) - uh
        m = _query(origin, size, nx, ny, start, items, centroid, radius, rmax,
                   centroid[t, 0], centroid[t, 1], delta + radius[t], cand)
        for b in range(m):
            s = cand[b]
            for k in range(3):
                tri[k, 0] = V[T[s, k], 0]
                tri[k, 1] = V[T[s, k], 1]
            for q in range(nq):
                wx = area[t] * ow[q]
                e0 = ex[q]
                if use_tables and _fully_inside(xq[q, 0], xq[q, 1], tri, r2):
                    total += wx * (tA[s, 0] - 2.0 * e0 * tA[s, 1] + e0 * e0 * area[s])
                    continue
                n = _inner_points(xq[q, 0], xq[q, 1], s, tri, delta, with_caps, code,
                                  inner_degree, pts, wts, poly, chord, caps)
                acc = 0.0
                for k in range(n):
                    y0 = pts[k, 0]
                    y1 = pts[k, 1]
                    l0 = C[s, 0, 0] + C[s, 0, 1] * y0 + C[s, 0, 2] * y1
                    l1 = C[s, 1, 0] + C[s, 1, 1] * y0 + C[s, 1, 2] * y1
                    l2 = 1.0 - l0 - l1
                    ey = uref(y0, y1) - (l0 * U[T[s, 0]] + l1 * U[T[s, 1]] + l2 * U[T[s, 2]])
                    acc += wts[k] * (ey - e0) ** 2
                total += wx * acc
    return total


def _inner_tables(mesh, u_ref, U, degree):
    """Per-triangle sums of w e and w e^2 with the inner triangle rule."""
    pts, w, bary = outer_points(mesh, degree)
    uh = np.einsum("qk,tk->tq", bary, U[mesh.triangles])
    e = u_ref(pts[..., 0], pts[..., 1]) * np.ones_like(w) - uh
    return np.column_stack([np.sum(w * e * e, axis=1), np.sum(w * e, axis=1)])


def _zero_ref(*args):
    return 0.0


_ZERO = []


def _zero_field():
    # one dispatcher, so the energy kernels compile once for it
    if not _ZERO:
        _ZERO.append(njit(_zero_ref))
    return _ZERO[0]


def error_energy(u_h, u_ref, mesh, kernel, policy, outer_degree=5, inner_degree=5):
    """Energy norm of u_ref - u_h over the extended domain.

    u_h is a nodal vector over all mesh nodes (collar data included), u_ref a
    field compilable by numba (or a ProblemSpec). The double integral uses the
    same region decompositions as the stiffness assembly, so for the polygon
    policy it is the norm induced by the polygonal kernel.
    """
    from .assembly import ProblemSpec
    if isinstance(u_ref, ProblemSpec):
        u_ref = u_ref.compiled_u_ref
    elif u_ref is None:
        u_ref = _zero_field()
    elif not hasattr(u_ref, "py_func"):
        u_ref = njit(u_ref)
    U = np.asarray(u_h, dtype=float)
    if isinstance(mesh, Grid1D):
        return _error_energy_1d(U, u_ref, mesh, kernel, inner_degree)
    policy = as_policy(policy)
    V = np.ascontiguousarray(mesh.vertices)
    T = np.ascontiguousarray(mesh.triangles)
    C, area = _barycentric_coeffs(V, T)
    use_tables = kernel.code == 0
    tA = _inner_tables(mesh, u_ref.py_func, U, inner_degree) if use_tables else np.zeros((1, 2))
    obary = np.ascontiguousarray(TRI_BARY[outer_degree, : TRI_NPTS[outer_degree]])
    ow = np.ascontiguousarray(TRI_W[outer_degree, : TRI_NPTS[outer_degree]])
    total = _energy_2d(V, T, C, area, *_mesh_arrays(mesh), kernel.delta, policy.with_caps,
                       kernel.code, obary, ow, inner_degree, U, u_ref, tA, use_tables)
    return float(np.sqrt(max(total, 0.0) * kernel_constant(kernel)))


def nodal_interpolant(u_ref, mesh):
    """Values of u_ref at every mesh node (collar nodes included)."""
    if isinstance(mesh, Grid1D):
        return _ref_values(u_ref, mesh.x)
    return _ref_values(u_ref, mesh.vertices[:, 0], mesh.vertices[:, 1])


def error_energy_interp(u_h, u_ref, mesh, kernel, policy, outer_degree=5, inner_degree=5):
    """Energy norm of I_h u_ref - u_h, with I_h the nodal interpolant.

    Both are finite element functions, so this is the discrete error measure
    e^T K e; it leaves out the interpolation error u_ref - I_h u_ref that
    error_energy includes.
    """
    e = nodal_interpolant(u_ref, mesh) - np.asarray(u_h, dtype=float)
    return error_energy(e, None, mesh, kernel, policy, outer_degree, inner_degree)


@njit
def _energy_1d(x, E, delta, code, gx, gw, U, uref):
    ne = E.shape[0]
    nq = len(gx)
    brk = np.empty(6)
    total = 0.0
    for t in range(ne):
        a = x[E[t, 0]]
        b = x[E[t, 1]]
        for s in range(ne):
            c = x[E[s, 0]]
            d = x[E[s, 1]]
            if c > b + delta or d < a - delta:
                continue
            nb = _outer_breaks(a, b, c, d, delta, brk)
            for k in range(nb - 1):
                u0 = brk[k]
                u1 = brk[k + 1]
                if u1 <= u0:
                    continue
                for q in range(nq):
                    xx = u0 + (u1 - u0) * gx[q]
                    wx = (u1 - u0) * gw[q]
                    lx1 = (xx - a) / (b - a)
                    e0 = uref(xx) - ((1.0 - lx1) * U[E[t, 0]] + lx1 * U[E[t, 1]])
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
                            w = (p1 - p0) * gw[r] * (_shape(code, rho) if rho > 0 else 0.0)
                            ly1 = (y - c) / (d - c)
                            ey = uref(y) - ((1.0 - ly1) * U[E[s, 0]] + ly1 * U[E[s, 1]])
                            total += wx * w * (ey - e0) ** 2
    return total


def _error_energy_1d(U, u_ref, grid, kernel, degree):
    nq = max(1, (degree + 2) // 2) + 1
    gx = GL_X[nq, :nq].copy()
    gw = GL_W[nq, :nq].copy()
    total = _energy_1d(grid.x, grid.elements, kernel.delta, kernel.code, gx, gw, U, u_ref)
    return float(np.sqrt(max(total, 0.0) * kernel_constant(kernel)))


# ---------------------------------------------------------------------------
# L2 and nodal errors

def _ref_values(u_ref, *coords):
    from .assembly import ProblemSpec
    f = u_ref.u_ref if isinstance(u_ref, ProblemSpec) else u_ref
    return np.asarray(f(*coords), dtype=float) * np.ones_like(coords[0])


def error_l2(u_h, u_ref, mesh, degree=4):
    """L2 norm of u_ref - u_h over the unit square (interior elements)."""
    U = np.asarray(u_h, dtype=float)
    if isinstance(mesh, Grid1D):
        nq = max(1, (degree + 2) // 2)
        gx, gw = GL_X[nq, :nq], GL_W[nq, :nq]
        el = mesh.elements[mesh.region == INTERIOR]
        a = mesh.x[el[:, 0]][:, None]
        b = mesh.x[el[:, 1]][:, None]
        xq = a + (b - a) * gx
        uh = U[el[:, 0]][:, None] * (1 - gx) + U[el[:, 1]][:, None] * gx
        e = _ref_values(u_ref, xq) - uh
        return float(np.sqrt(np.sum((b - a) * gw * e * e)))
    inner = np.nonzero(mesh.region == INTERIOR)[0]
    pts, w, bary = outer_points(mesh, degree, inner)
    uh = np.einsum("qk,tk->tq", bary, U[mesh.triangles[inner]])
    e = _ref_values(u_ref, pts[..., 0], pts[..., 1]) - uh
    return float(np.sqrt(np.sum(w * e * e)))


def error_max_nodes(u_h, u_ref, mesh):
    """Largest nodal error over interior and boundary nodes."""
    U = np.asarray(u_h, dtype=float)
    if isinstance(mesh, Grid1D):
        dofs = mesh.node_sets().dofs
        ref = _ref_values(u_ref, mesh.x[dofs])
    else:
        dofs = classify_nodes(mesh).dofs
        p = mesh.vertices[dofs]
        ref = _ref_values(u_ref, p[:, 0], p[:, 1])
    return float(np.max(np.abs(ref - U[dofs])))


# ---------------------------------------------------------------------------
# kernel moments

FAMILIES = ("ball", "nocaps-raw", "nocaps-symmetrized", "reflected-symmetric")


def _family(name):
    key = str(name).lower().replace("_", "-")
    aliases = {"nocapsraw": "nocaps-raw", "nocapssymmetrized": "nocaps-symmetrized",
               "reflectedsymmetric": "reflected-symmetric"}
    key = aliases.get(key.replace("-", ""), key)
    if key not in FAMILIES:
        raise ValueError(f"unknown moment family {name!r}")
    return key


@dataclass
class MomentReport:
    x: np.ndarray
    family: str
    first: np.ndarray  # sigma^{i,1}
    second: np.ndarray  # sigma^{ii,2}
    cross: float  # sigma^{12,2}
    n_vertices: int  # vertices of the inscribed polygon
    r_hat: float  # inradius of the polygon about x over delta
    clipped: bool = False
    approximate: bool = False
    warnings: list = field(default_factory=list)

    @property
    def defect(self):
        return 1.0 - self.second


def _star_points(x, poly, degree):
    """Duffy rule on a convex polygon fanned from x (x inside the polygon)."""
    k = len(poly)
    size = 64 * k + 64
    pts = np.empty((size, 2))
    wts = np.empty(size)
    n = 0
    for i in range(k):
        j = (i + 1) % k
        n = _duffy_fill(x[0], x[1], poly[i, 0], poly[i, 1], poly[j, 0], poly[j, 1],
                        degree, pts, wts, n)
    return pts[:n].copy(), wts[:n].copy()


def _moments_from_points(x, pts, wts, kernel):
    z = pts - x
    rho = np.hypot(z[:, 0], z[:, 1]) / kernel.delta
    with np.errstate(divide="ignore"):
        g = np.where(rho > 0, kernel.profile(rho), 0.0) * kernel.delta ** -(kernel.d + 2)
    w = wts * g
    first = np.array([np.dot(w, z[:, 0]), np.dot(w, z[:, 1])])
    second = np.array([np.dot(w, z[:, 0] ** 2), np.dot(w, z[:, 1] ** 2)])
    return first, second, float(np.dot(w, z[:, 0] * z[:, 1]))


def _region_quadrature(x, mesh, delta, with_caps, degree, star_all=True):
    """Quadrature points of B_delta(x) (or its polygon) over the mesh."""
    tris = mesh.index.query(np.asarray(x, dtype=float), delta)
    pts_all, w_all = [], []
    pts = np.empty((SCRATCH, 2))
    wts = np.empty(SCRATCH)
    poly = np.empty((MAX_POLY, 2))
    chord = np.empty(MAX_POLY, dtype=np.bool_)
    caps = np.empty((MAX_CAPS, 4))
    crossings = []
    area_total = 0.0
    for t in tris:
        tri = np.ascontiguousarray(mesh.vertices[mesh.triangles[t]])
        star = star_all and _point_in_triangle(x[0], x[1], tri, 1e-12)
        n, status = _region_fill(x[0], x[1], delta, tri, with_caps, star, degree,
                                 pts, wts, poly, chord, caps)
        if n:
            pts_all.append(pts[:n].copy())
            w_all.append(wts[:n].copy())
            area_total += wts[:n].sum()
        npoly, ncaps, status = _clip(x[0], x[1], delta, tri, poly, chord, caps)
        if status == 2:
            crossings.extend(caps[k, :2].copy() for k in range(ncaps))
            crossings.extend(caps[k, 2:].copy() for k in range(ncaps))
    if pts_all:
        return np.concatenate(pts_all), np.concatenate(w_all), crossings
    return np.empty((0, 2)), np.empty(0), crossings


def inscribed_polygon(x, mesh, delta):
    """Global inscribed polygon of B_delta(x): the circle/mesh-edge crossings
    in angular order."""
    x = np.asarray(x, dtype=float)
    _, _, crossings = _region_quadrature(x, mesh, delta, False, 1, star_all=False)
    if not crossings:
        return np.empty((0, 2))
    pts = np.array(crossings)
    ang = np.arctan2(pts[:, 1] - x[1], pts[:, 0] - x[0])
    order = np.argsort(ang)
    pts, ang = pts[order], ang[order]
    keep = np.ones(len(pts), dtype=bool)
    keep[1:] = np.diff(ang) > 1e-10
    if len(pts) > 1 and ang[-1] - ang[0] > 2 * pi - 1e-10:
        keep[-1] = False
    return pts[keep]


def polygon_inradius(x, poly):
    """Distance from x to the nearest edge line of a convex polygon."""
    k = len(poly)
    d = np.inf
    for i in range(k):
        a, b = poly[i], poly[(i + 1) % k]
        e = b - a
        d = min(d, abs(e[0] * (x[1] - a[1]) - e[1] * (x[0] - a[0])) / np.hypot(*e))
    return d


def clip_convex(subject, clip):
    """Sutherland-Hodgman clipping of a convex polygon by a convex polygon,
    both counterclockwise."""
    out = [np.asarray(p, dtype=float) for p in subject]
    k = len(clip)
    for i in range(k):
        a, b = clip[i], clip[(i + 1) % k]
        inp, out = out, []
        if not inp:
            break

        def side(p):
            return (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])

        for j in range(len(inp)):
            p, q = inp[j], inp[(j + 1) % len(inp)]
            sp_, sq = side(p), side(q)
            if sp_ >= 0:
                out.append(p)
            if (sp_ >= 0) != (sq >= 0):
                t = sp_ / (sp_ - sq)
                out.append(p + t * (q - p))
    return np.array(out).reshape(-1, 2)


def sigma_moments(x, mesh, kernel, family="ball", degree=7):
    """Kernel moments sigma^{i,1}, sigma^{ii,2}, sigma^{12,2} at x.

    ball integrates over B_delta(x); nocaps-raw over its inscribed polygon
    (the indicator of the polygon alone); nocaps-symmetrized averages the raw
    moments with those of the point-reflected polygon, which stands in for the
    companion set of the symmetrized kernel and is flagged approximate;
    reflected-symmetric integrates over the polygon intersected with its
    point reflection through x.
    """
    fam = _family(family)
    x = np.asarray(x, dtype=float)
    delta = kernel.delta
    lo = mesh.vertices.min(axis=0)
    hi = mesh.vertices.max(axis=0)
    clipped = bool(np.any(x - delta < lo - 1e-12) or np.any(x + delta > hi + 1e-12))
    poly = inscribed_polygon(x, mesh, delta)
    r_hat = polygon_inradius(x, poly) / delta if len(poly) >= 3 else 0.0
    if fam == "reflected-symmetric":
        # a point reflection is a rotation by pi, so orientation is kept
        sym = clip_convex(poly, 2 * x - poly) if len(poly) >= 3 else poly
        if len(sym) >= 3:
            pts, wts = _star_points(x, sym, degree)
        else:
            pts, wts = np.empty((0, 2)), np.empty(0)
    else:
        pts, wts, _ = _region_quadrature(x, mesh, delta, fam == "ball", degree)
    first, second, cross = _moments_from_points(x, pts, wts, kernel)
    approximate = False
    if fam == "nocaps-symmetrized":
        # the reflected polygon flips odd moments and keeps even ones
        first = np.zeros(2)
        approximate = True
    report = MomentReport(x, fam, first, second, cross, len(poly), r_hat, clipped, approximate)
    if clipped:
        report.warnings.append("B_delta(x) is not contained in the extended domain")
    return report


def regular_polygon(N, radius=1.0, center=(0.0, 0.0), phase=0.0):
    k = np.arange(N)
    a = phase + 2 * pi * k / N
    return np.column_stack([center[0] + radius * np.cos(a), center[1] + radius * np.sin(a)])


def polygon_moments(poly, kernel, x=None, degree=7):
    """Moments of the kernel centred at x over a convex polygon containing x."""
    x = np.zeros(2) if x is None else np.asarray(x, dtype=float)
    pts, wts = _star_points(x, np.asarray(poly, dtype=float), degree)
    return _moments_from_points(x, pts, wts, kernel)


def sigma_l1(s):
    return s / 2 + sin(2 * s) / 4 - cos(s) * log(tan(s / 2 + pi / 4))


def sigma_l2(s):
    return 5 / 8 * sin(2 * s) - s / 4 * cos(2 * s) - cos(s) * log(tan(s / 2 + pi / 4))


def sigma_lower_bound(N, kernel):
    """Lower bound for 1 - sigma^i over inscribed polygons with at most N sides."""
    if N < 3:
        raise ValueError("N must be at least 3")
    lam = lambda_order(kernel)
    t = np.linspace(cos(pi / N), 1.0, 1000)
    if lam == 2:
        return float(np.min(phi_prime(kernel, t))) * sigma_l1(pi / N) / pi
    step = 1e-6
    lo = np.maximum(t - step, 0.0)
    hi = np.minimum(t + step, 1.0)
    d2 = (phi_prime(kernel, hi) - phi_prime(kernel, lo)) / (hi - lo)
    return float(np.min(np.abs(d2))) * sigma_l2(pi / N) / pi


def coercivity_probe(x, mesh, kernel, x_star=None, degree=7):
    """Apply the symmetric-support polygonal operator to q(y) = |y - x*|^2 at x.

    Returns (value, 4 Phi(r_hat)) where r_hat is the inradius ratio of the
    inscribed polygon about x. The symmetric-support kernel averages the
    polygon and its point reflection.
    """
    x = np.asarray(x, dtype=float)
    x_star = np.zeros(2) if x_star is None else np.asarray(x_star, dtype=float)
    delta = kernel.delta
    poly = inscribed_polygon(x, mesh, delta)
    r_hat = polygon_inradius(x, poly) / delta

    def q(p):
        return np.sum((p - x_star) ** 2, axis=1)

    value = 0.0
    for piece in (poly, 2 * x - poly):
        pts, wts = _star_points(x, piece, degree)
        rho = np.hypot(*(pts - x).T) / delta
        with np.errstate(divide="ignore"):
            g = np.where(rho > 0, kernel.profile(rho), 0.0) * delta ** -(kernel.d + 2)
        value += 0.5 * 2.0 * np.sum(wts * g * (q(pts) - q(x[None, :])))
    return float(value), 4.0 * moment_functions(kernel).phi(r_hat)
