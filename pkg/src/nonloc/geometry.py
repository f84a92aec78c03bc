"""Disc-triangle intersections and the quadrature rules that integrate them.

The intersection of a closed disc B(c, R) with a triangle T is convex. It is
returned as one straight-sided convex polygon, whose vertices are the triangle
vertices inside the disc and the boundary crossings in counterclockwise order,
plus one circular cap per arc of the circle running inside T. Dropping the caps
gives the chord-clipped region used by the "nocaps" neighborhood.

The compiled helpers (prefixed with an underscore) write quadrature points
into caller-provided buffers so the assembly loops can call them without
allocating.
"""
from dataclasses import dataclass, field
from enum import Enum
from math import atan2, ceil, cos, pi, sin, sqrt

import numpy as np
from numba import njit

EPS_GEO = 1e-12
MAX_POLY = 16
MAX_CAPS = 8
SCRATCH = 4096
MAX_ARC = 0.25 * pi  # caps spanning more than this are split


class NeighborhoodPolicy(Enum):
    EXACT_BALL = "exactcaps"
    NO_CAPS = "nocaps"

    @property
    def with_caps(self):
        return self is NeighborhoodPolicy.EXACT_BALL


def as_policy(value):
    if isinstance(value, NeighborhoodPolicy):
        return value
    key = str(value).lower().replace("_", "").replace("-", "")
    if key in ("exactcaps", "exact", "exactball", "ball"):
        return NeighborhoodPolicy.EXACT_BALL
    if key in ("nocaps", "polygon"):
        return NeighborhoodPolicy.NO_CAPS
    raise ValueError(f"unknown neighborhood policy {value!r}")


# ---------------------------------------------------------------------------
# triangle rules, stored as barycentric points with weights summing to one

def _orbit3(a, w):
    b = 1.0 - 2.0 * a
    return [(a, a, b), (a, b, a), (b, a, a)], [w] * 3


def _orbit6(a, b, w):
    c = 1.0 - a - b
    pts = [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)]
    return pts, [w] * 6


def _rule(*orbits):
    pts, wts = [], []
    for p, w in orbits:
        pts += p
        wts += w
    return np.array(pts), np.array(wts)


_TRI_RULES = {
    1: _rule(([(1 / 3, 1 / 3, 1 / 3)], [1.0])),
    2: _rule(([(0.5, 0.5, 0.0), (0.0, 0.5, 0.5), (0.5, 0.0, 0.5)], [1 / 3] * 3)),
    3: _rule(_orbit6(0.659027622374092, 0.231933368553031, 1 / 6)),
    4: _rule(_orbit3(0.445948490915965, 0.223381589678011),
             _orbit3(0.091576213509771, 0.109951743655322)),
    5: _rule(([(1 / 3, 1 / 3, 1 / 3)], [0.225]),
             _orbit3(0.470142064105115, 0.132394152788506),
             _orbit3(0.101286507323456, 0.125939180544827)),
    6: _rule(_orbit3(0.063089014491502, 0.050844906370207),
             _orbit3(0.249286745170910, 0.116786275726379),
             _orbit6(0.053145049844817, 0.310352451033784, 0.082851075618374)),
    7: _rule(_orbit3(0.06225197682323052, 0.04817734207004629),
             _orbit3(0.4690477187234375, 0.03634571241306157),
             _orbit3(0.2408246497328882, 0.12841013961581343),
             _orbit6(0.6673515019965451, 0.2878174155130014, 0.06020006961720603)),
}

# padded table so compiled code can pick a rule by degree
TRI_NPTS = np.array([0] + [len(_TRI_RULES[k][1]) for k in range(1, 8)], dtype=np.int64)
TRI_BARY = np.zeros((8, 15, 3))
TRI_W = np.zeros((8, 15))
for _k, (_b, _w) in _TRI_RULES.items():
    TRI_BARY[_k, : len(_w)] = _b
    TRI_W[_k, : len(_w)] = _w / _w.sum()

# Gauss-Legendre nodes on [0, 1], indexed by point count
GL_MAX = 24
GL_X = np.zeros((GL_MAX + 1, GL_MAX))
GL_W = np.zeros((GL_MAX + 1, GL_MAX))
for _n in range(1, GL_MAX + 1):
    _x, _w = np.polynomial.legendre.leggauss(_n)
    GL_X[_n, :_n] = 0.5 * (_x + 1.0)
    GL_W[_n, :_n] = 0.5 * _w


@dataclass
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    degree: int

    def integrate(self, f):
        if len(self.weights) == 0:
            return 0.0
        return float(np.dot(self.weights, f(self.points[:, 0], self.points[:, 1])))


def triangle_rule(degree):
    """Symmetric rule on the reference triangle (0,0), (1,0), (0,1)."""
    if degree not in _TRI_RULES:
        raise ValueError(f"triangle rules exist for degrees 1..7, got {degree}")
    bary, w = _TRI_RULES[degree]
    pts = bary[:, 1:3].copy()
    return QuadratureRule(pts, 0.5 * w / w.sum(), degree)


# ---------------------------------------------------------------------------
# compiled kernels

@njit(cache=True)
def _cap_counts(degree):
    return degree // 2 + 1, degree // 2 + 5


@njit(cache=True)
def _tri_fill(ax, ay, bx, by, cx, cy, degree, pts, wts, n):
    area = 0.5 * abs((bx - ax) * (cy - ay) - (cx - ax) * (by - ay))
    if area == 0.0:
        return n
    for q in range(TRI_NPTS[degree]):
        l0 = TRI_BARY[degree, q, 0]
        l1 = TRI_BARY[degree, q, 1]
        l2 = TRI_BARY[degree, q, 2]
        pts[n, 0] = l0 * ax + l1 * bx + l2 * cx
        pts[n, 1] = l0 * ay + l1 * by + l2 * cy
        wts[n] = area * TRI_W[degree, q]
        n += 1
    return n


@njit(cache=True)
def _poly_fill(poly, npoly, degree, pts, wts, n):
    """Fan-triangulate a convex polygon from its vertex centroid."""
    if npoly < 3:
        return n
    gx = 0.0
    gy = 0.0
    for i in range(npoly):
        gx += poly[i, 0]
        gy += poly[i, 1]
    gx /= npoly
    gy /= npoly
    for i in range(npoly):
        j = (i + 1) % npoly
        n = _tri_fill(gx, gy, poly[i, 0], poly[i, 1], poly[j, 0], poly[j, 1],
                      degree, pts, wts, n)
    return n


@njit(cache=True)
def _ccw_span(a0, a1):
    s = a1 - a0
    while s <= 0.0:
        s += 2.0 * pi
    while s > 2.0 * pi:
        s -= 2.0 * pi
    return s


@njit(cache=True)
def _small_cap_fill(cx, cy, R, amid, phi0, degree, pts, wts, n):
    """Cap with half-angle phi0 whose arc midpoint lies in direction amid.

    Points are c + R cos(phi) n + R sin(phi) tau t with phi in [0, phi0] and
    tau in [-1, 1]; the area element is R^2 sin^2(phi).
    """
    nt, nphi = _cap_counts(degree)
    nx = cos(amid)
    ny = sin(amid)
    tx = -ny
    ty = nx
    for i in range(nphi):
        phi = phi0 * GL_X[nphi, i]
        wphi = phi0 * GL_W[nphi, i]
        sp = sin(phi)
        cp = cos(phi)
        for j in range(nt):
            tau = 2.0 * GL_X[nt, j] - 1.0
            wt = 2.0 * GL_W[nt, j]
            pts[n, 0] = cx + R * (cp * nx + sp * tau * tx)
            pts[n, 1] = cy + R * (cp * ny + sp * tau * ty)
            wts[n] = R * R * sp * sp * wphi * wt
            n += 1
    return n


@njit(cache=True)
def _cap_fill(cx, cy, R, px, py, qx, qy, degree, pts, wts, n):
    """Cap bounded by chord PQ and the counterclockwise arc from P to Q."""
    if (px - qx) ** 2 + (py - qy) ** 2 <= (EPS_GEO * R) ** 2:
        return n
    a0 = atan2(py - cy, px - cx)
    span = _ccw_span(a0, atan2(qy - cy, qx - cx))
    k = int(ceil(span / MAX_ARC))
    step = span / k
    if k > 1:
        # inner polygon on the subdivision points, then k small caps
        gx = 0.0
        gy = 0.0
        for i in range(k + 1):
            gx += cx + R * cos(a0 + i * step)
            gy += cy + R * sin(a0 + i * step)
        gx /= k + 1
        gy /= k + 1
        for i in range(k + 1):
            b0 = a0 + i * step
            b1 = a0 + ((i + 1) % (k + 1)) * step
            n = _tri_fill(gx, gy, cx + R * cos(b0), cy + R * sin(b0),
                          cx + R * cos(b1), cy + R * sin(b1), degree, pts, wts, n)
    for i in range(k):
        n = _small_cap_fill(cx, cy, R, a0 + (i + 0.5) * step, 0.5 * step,
                            degree, pts, wts, n)
    return n


@njit(cache=True)
def _duffy_fill(xx, xy, ax, ay, bx, by, degree, pts, wts, n):
    """Collapsed tensor rule on triangle (x, a, b) with the collapse at x."""
    jac = abs((ax - xx) * (by - xy) - (bx - xx) * (ay - xy))
    if jac == 0.0:
        return n
    nu = degree // 2 + 2
    nv = degree // 2 + 2
    for i in range(nu):
        u = GL_X[nu, i]
        for j in range(nv):
            v = GL_X[nv, j]
            ex = (1.0 - v) * (ax - xx) + v * (bx - xx)
            ey = (1.0 - v) * (ay - xy) + v * (by - xy)
            pts[n, 0] = xx + u * ex
            pts[n, 1] = xy + u * ey
            wts[n] = jac * u * GL_W[nu, i] * GL_W[nv, j]
            n += 1
    return n


@njit(cache=True)
def _sector_fill(cx, cy, R, a0, span, degree, pts, wts, n):
    """Polar rule on the sector of B(c, R) between angles a0 and a0 + span."""
    if span <= 0.0:
        return n
    k = int(ceil(span / MAX_ARC))
    step = span / k
    nr = degree // 2 + 2
    na = degree // 2 + 4
    for s in range(k):
        for i in range(na):
            a = a0 + step * (s + GL_X[na, i])
            ca = cos(a)
            sa = sin(a)
            for j in range(nr):
                r = R * GL_X[nr, j]
                pts[n, 0] = cx + r * ca
                pts[n, 1] = cy + r * sa
                wts[n] = r * R * GL_W[nr, j] * step * GL_W[na, i]
                n += 1
    return n


@njit(cache=True)
def _point_in_triangle(px, py, tri, tol):
    """True when p lies in the closed triangle (orientation independent)."""
    ax = tri[0, 0]
    ay = tri[0, 1]
    bx = tri[1, 0]
    by = tri[1, 1]
    cx = tri[2, 0]
    cy = tri[2, 1]
    d1 = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
    d2 = (cx - bx) * (py - by) - (cy - by) * (px - bx)
    d3 = (ax - cx) * (py - cy) - (ay - cy) * (px - cx)
    area2 = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    t = tol * abs(area2)
    if area2 < 0:
        d1 = -d1
        d2 = -d2
        d3 = -d3
    return d1 >= -t and d2 >= -t and d3 >= -t


@njit(cache=True)
def _clip(cx, cy, R, tri, poly, chord, caps):
    """Intersect the closed disc B(c, R) with a triangle.

    Writes the convex polygon into poly (counterclockwise), marks in chord[i]
    whether polygon edge i -> i+1 is a chord of the circle, and stores each
    cap's chord endpoints (exit point, next entry point) in caps.

    Returns (npoly, ncaps, status) with status 0 = empty, 1 = the whole
    triangle, 2 = a proper intersection, 3 = the whole disc (then poly is an
    inscribed square with four caps).
    """
    tol = EPS_GEO * R
    xmin = min(tri[0, 0], min(tri[1, 0], tri[2, 0]))
    xmax = max(tri[0, 0], max(tri[1, 0], tri[2, 0]))
    ymin = min(tri[0, 1], min(tri[1, 1], tri[2, 1]))
    ymax = max(tri[0, 1], max(tri[1, 1], tri[2, 1]))
    if xmin > cx + R + tol or xmax < cx - R - tol or ymin > cy + R + tol or ymax < cy - R - tol:
        return 0, 0, 0

    # counterclockwise vertex order
    vx = np.empty(3)
    vy = np.empty(3)
    orient = (tri[1, 0] - tri[0, 0]) * (tri[2, 1] - tri[0, 1]) - \
        (tri[1, 1] - tri[0, 1]) * (tri[2, 0] - tri[0, 0])
    order = (0, 1, 2) if orient > 0 else (0, 2, 1)
    for k in range(3):
        vx[k] = tri[order[k], 0]
        vy[k] = tri[order[k], 1]

    rin = (R + tol) ** 2
    inside = np.empty(3, dtype=np.bool_)
    nin = 0
    for k in range(3):
        inside[k] = (vx[k] - cx) ** 2 + (vy[k] - cy) ** 2 <= rin
        if inside[k]:
            nin += 1
    if nin == 3:
        for k in range(3):
            poly[k, 0] = vx[k]
            poly[k, 1] = vy[k]
            chord[k] = False
        return 3, 0, 1

    # walk the boundary, emitting inside vertices and crossings
    px = np.empty(MAX_POLY)
    py = np.empty(MAX_POLY)
    is_exit = np.zeros(MAX_POLY, dtype=np.bool_)
    m = 0
    for k in range(3):
        j = (k + 1) % 3
        if inside[k]:
            px[m] = vx[k]
            py[m] = vy[k]
            is_exit[m] = False
            m += 1
        dx = vx[j] - vx[k]
        dy = vy[j] - vy[k]
        fx = vx[k] - cx
        fy = vy[k] - cy
        a = dx * dx + dy * dy
        bh = dx * fx + dy * fy
        cc = fx * fx + fy * fy - R * R
        disc = bh * bh - a * cc
        if inside[k] == inside[j]:
            # disc / a = R^2 - dist(c, line)^2; tangency counts as no crossing
            if inside[k] or disc <= 2.0 * R * tol * a:
                continue
        if disc <= 0.0:
            # a tolerance-inside vertex just off the circle: closest point
            t1 = -bh / a
            t2 = t1
        else:
            sq = sqrt(disc)
            q = -(bh + sq) if bh >= 0.0 else -(bh - sq)
            t1 = q / a
            t2 = cc / q if q != 0.0 else -t1
            if t1 > t2:
                t1, t2 = t2, t1
        if inside[k] and not inside[j]:
            t = min(max(t2, 0.0), 1.0)
            px[m] = vx[k] + t * dx
            py[m] = vy[k] + t * dy
            is_exit[m] = True
            m += 1
        elif inside[j] and not inside[k]:
            t = min(max(t1, 0.0), 1.0)
            px[m] = vx[k] + t * dx
            py[m] = vy[k] + t * dy
            is_exit[m] = False
            m += 1
        elif not inside[k] and not inside[j]:
            if t1 > 0.0 and t2 < 1.0:
                px[m] = vx[k] + t1 * dx
                py[m] = vy[k] + t1 * dy
                is_exit[m] = False
                m += 1
                px[m] = vx[k] + t2 * dx
                py[m] = vy[k] + t2 * dy
                is_exit[m] = True
                m += 1

    if m == 0:
        # either disjoint or the disc lies inside the triangle
        if not _point_in_triangle(cx, cy, tri, 0.0):
            return 0, 0, 0
        for k in range(3):
            j = (k + 1) % 3
            dx = vx[j] - vx[k]
            dy = vy[j] - vy[k]
            dist = ((cx - vx[k]) * dy - (cy - vy[k]) * dx) / sqrt(dx * dx + dy * dy)
            if abs(dist) < R - tol:
                return 0, 0, 0
        for k in range(4):
            poly[k, 0] = cx + R * cos(0.5 * pi * k)
            poly[k, 1] = cy + R * sin(0.5 * pi * k)
            chord[k] = True
            caps[k, 0] = poly[k, 0]
            caps[k, 1] = poly[k, 1]
            caps[k, 2] = cx + R * cos(0.5 * pi * (k + 1))
            caps[k, 3] = cy + R * sin(0.5 * pi * (k + 1))
        return 4, 4, 3

    # merge near-coincident neighbours (crossings at vertices on the circle)
    merge = 64.0 * tol
    npoly = 0
    for i in range(m):
        if npoly > 0 and abs(px[i] - poly[npoly - 1, 0]) <= merge and \
                abs(py[i] - poly[npoly - 1, 1]) <= merge:
            chord[npoly - 1] = chord[npoly - 1] or is_exit[i]
            continue
        poly[npoly, 0] = px[i]
        poly[npoly, 1] = py[i]
        chord[npoly] = is_exit[i]
        npoly += 1
    while npoly > 1 and abs(poly[npoly - 1, 0] - poly[0, 0]) <= merge and \
            abs(poly[npoly - 1, 1] - poly[0, 1]) <= merge:
        chord[0] = chord[0] or chord[npoly - 1]
        npoly -= 1
    if npoly < 2:
        return 0, 0, 0

    ncaps = 0
    for i in range(npoly):
        if chord[i]:
            j = (i + 1) % npoly
            caps[ncaps, 0] = poly[i, 0]
            caps[ncaps, 1] = poly[i, 1]
            caps[ncaps, 2] = poly[j, 0]
            caps[ncaps, 3] = poly[j, 1]
            ncaps += 1
    return npoly, ncaps, 2


@njit(cache=True)
def _region_fill(cx, cy, R, tri, with_caps, star, degree, pts, wts,
                 poly, chord, caps):
    """Quadrature points for B(c, R) intersected with tri.

    With star=True the region is split into pieces sharing the vertex c
    (Duffy triangles and polar sectors), which keeps the density smooth for
    kernels singular at the centre. Only valid when c lies in the triangle.
    Returns (npts, status).
    """
    npoly, ncaps, status = _clip(cx, cy, R, tri, poly, chord, caps)
    n = 0
    if status == 0:
        return 0, 0
    if status == 3 and not with_caps:
        return 0, 3
    if npoly < 3 and not with_caps:
        return 0, status
    if star:
        for i in range(npoly):
            j = (i + 1) % npoly
            if chord[i] and with_caps:
                a0 = atan2(poly[i, 1] - cy, poly[i, 0] - cx)
                span = _ccw_span(a0, atan2(poly[j, 1] - cy, poly[j, 0] - cx))
                n = _sector_fill(cx, cy, R, a0, span, degree, pts, wts, n)
            else:
                n = _duffy_fill(cx, cy, poly[i, 0], poly[i, 1], poly[j, 0], poly[j, 1],
                                degree, pts, wts, n)
        return n, status
    n = _poly_fill(poly, npoly, degree, pts, wts, n)
    if with_caps:
        for k in range(ncaps):
            n = _cap_fill(cx, cy, R, caps[k, 0], caps[k, 1], caps[k, 2], caps[k, 3],
                          degree, pts, wts, n)
    return n, status


def scratch_buffers():
    """Work arrays for _region_fill."""
    return (np.empty((SCRATCH, 2)), np.empty(SCRATCH), np.empty((MAX_POLY, 2)),
            np.empty(MAX_POLY, dtype=np.bool_), np.empty((MAX_CAPS, 4)))


# ---------------------------------------------------------------------------
# Python-level interface

@dataclass
class CircularCap:
    """Region between the chord p -> q and the counterclockwise arc p -> q."""
    p: np.ndarray
    q: np.ndarray
    center: np.ndarray
    radius: float

    @property
    def half_angle(self):
        a0 = atan2(self.p[1] - self.center[1], self.p[0] - self.center[0])
        a1 = atan2(self.q[1] - self.center[1], self.q[0] - self.center[0])
        if np.allclose(self.p, self.q, rtol=0.0, atol=EPS_GEO * self.radius):
            return 0.0
        return 0.5 * _ccw_span(a0, a1)

    @property
    def area(self):
        u = 2.0 * self.half_angle
        if u < 1e-2:
            # u - sin(u) without cancellation
            excess = u ** 3 / 6.0 - u ** 5 / 120.0 + u ** 7 / 5040.0 - u ** 9 / 362880.0
        else:
            excess = u - sin(u)
        return 0.5 * self.radius ** 2 * excess


@dataclass
class RegionDecomposition:
    pieces: list = field(default_factory=list)
    caps: list = field(default_factory=list)

    @property
    def empty(self):
        return not self.pieces and not self.caps

    def area(self):
        return sum(polygon_area(p) for p in self.pieces) + sum(c.area for c in self.caps)


def polygon_area(poly):
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _check_triangle(tri):
    tri = np.asarray(tri, dtype=float).reshape(3, 2)
    e = tri[[1, 2, 0]] - tri
    longest = float(np.max(np.sum(e * e, axis=1)))
    area2 = abs(e[0, 0] * e[1, 1] - e[0, 1] * e[1, 0])
    if not area2 > 2.0 * EPS_GEO * longest:
        raise ValueError("degenerate triangle")
    return tri


def clip_ball_triangle(center, radius, triangle, policy=NeighborhoodPolicy.EXACT_BALL):
    """Decompose B(center, radius) intersected with a triangle.

    ExactBall returns the straight-sided piece plus its circular caps; NoCaps
    returns the piece alone, i.e. the arcs replaced by their chords. A disc
    inside the triangle meets no edge, so NoCaps returns nothing there (this
    cannot happen on meshes with h < radius).
    """
    policy = as_policy(policy)
    tri = _check_triangle(triangle)
    if not radius > 0:
        raise ValueError("radius must be positive")
    cx, cy = float(center[0]), float(center[1])
    poly = np.empty((MAX_POLY, 2))
    chord = np.empty(MAX_POLY, dtype=np.bool_)
    caps = np.empty((MAX_CAPS, 4))
    npoly, ncaps, status = _clip(cx, cy, float(radius), tri, poly, chord, caps)
    out = RegionDecomposition()
    if status == 0 or (status == 3 and not policy.with_caps):
        return out
    if npoly >= 3:
        out.pieces.append(poly[:npoly].copy())
    if policy.with_caps:
        c = np.array([cx, cy])
        for k in range(ncaps):
            out.caps.append(CircularCap(caps[k, :2].copy(), caps[k, 2:].copy(), c, float(radius)))
    return out


def cap_rule(cap, degree):
    """Tensor rule over a circular cap, exact for polynomials up to degree."""
    if not 1 <= degree <= 7:
        raise ValueError(f"cap rules exist for degrees 1..7, got {degree}")
    pts = np.empty((SCRATCH, 2))
    wts = np.empty(SCRATCH)
    n = _cap_fill(float(cap.center[0]), float(cap.center[1]), float(cap.radius),
                  float(cap.p[0]), float(cap.p[1]), float(cap.q[0]), float(cap.q[1]),
                  degree, pts, wts, 0)
    return QuadratureRule(pts[:n].copy(), wts[:n].copy(), degree)


def polygon_rule(poly, degree):
    pts = np.empty((SCRATCH, 2))
    wts = np.empty(SCRATCH)
    poly = np.ascontiguousarray(poly, dtype=float)
    n = _poly_fill(poly, len(poly), degree, pts, wts, 0)
    return QuadratureRule(pts[:n].copy(), wts[:n].copy(), degree)


def integrate_region(decomp, f, degree=5):
    """Integrate f(x, y) (vectorized) over a region decomposition."""
    total = 0.0
    for piece in decomp.pieces:
        total += polygon_rule(piece, degree).integrate(f)
    for cap in decomp.caps:
        total += cap_rule(cap, degree).integrate(f)
    return total
