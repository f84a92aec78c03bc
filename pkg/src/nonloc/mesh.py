"""Meshes of the unit square with a sharp-cornered interaction collar.

Node numbering follows the doubled-boundary convention: vertices of the
interior region come first (strictly interior nodes, then nodes on the unit
square's boundary), followed by every vertex of the collar region. Points on
the boundary of the unit square therefore appear twice, once per region, so
the piecewise linear space may jump across that boundary.
"""
from dataclasses import dataclass, field
from math import ceil

import numpy as np
from numba import njit

INTERIOR = 0
COLLAR = 1

_ROUND = 1e-9


def _cells(length, h):
    """Number of cells of size at most h covering length."""
    return max(1, int(ceil(length / h - _ROUND)))


@dataclass
class SpatialIndex:
    """Uniform bucket grid; each triangle is filed under its centroid."""
    origin: np.ndarray
    size: float
    shape: tuple
    start: np.ndarray
    items: np.ndarray
    centroid: np.ndarray
    radius: np.ndarray
    rmax: float

    @classmethod
    def build(cls, vertices, triangles, size):
        corners = vertices[triangles]
        centroid = corners.mean(axis=1)
        radius = np.sqrt(np.max(np.sum((corners - centroid[:, None]) ** 2, axis=2), axis=1))
        lo = vertices.min(axis=0)
        hi = vertices.max(axis=0)
        shape = tuple(np.maximum(1, np.ceil((hi - lo) / size).astype(int)))
        ij = np.clip(((centroid - lo) / size).astype(int), 0, np.array(shape) - 1)
        key = ij[:, 0] * shape[1] + ij[:, 1]
        order = np.argsort(key, kind="stable")
        counts = np.bincount(key, minlength=shape[0] * shape[1])
        start = np.concatenate([[0], np.cumsum(counts)])
        return cls(lo, float(size), shape, start, order.astype(np.int64),
                   centroid, radius, float(radius.max()))

    def query(self, x, r):
        buf = np.empty(len(self.items), dtype=np.int64)
        n = _query(self.origin, self.size, self.shape[0], self.shape[1], self.start,
                   self.items, self.centroid, self.radius, self.rmax,
                   float(x[0]), float(x[1]), float(r), buf)
        return np.sort(buf[:n])


@njit(cache=True)
def _query(origin, size, nx, ny, start, items, centroid, radius, rmax, x, y, r, out):
    """Triangles whose bounding circle meets B((x, y), r)."""
    reach = r + rmax
    i0 = max(0, int(np.floor((x - reach - origin[0]) / size)))
    i1 = min(nx - 1, int(np.floor((x + reach - origin[0]) / size)))
    j0 = max(0, int(np.floor((y - reach - origin[1]) / size)))
    j1 = min(ny - 1, int(np.floor((y + reach - origin[1]) / size)))
    n = 0
    for i in range(i0, i1 + 1):
        for j in range(j0, j1 + 1):
            b = i * ny + j
            for k in range(start[b], start[b + 1]):
                t = items[k]
                lim = r + radius[t]
                dx = centroid[t, 0] - x
                dy = centroid[t, 1] - y
                if dx * dx + dy * dy <= lim * lim * (1.0 + 1e-12):
                    out[n] = t
                    n += 1
    return n


@dataclass
class NodeSets:
    NI: np.ndarray
    NB: np.ndarray
    NC: np.ndarray

    @property
    def n1(self):
        return len(self.NI)

    @property
    def n2(self):
        return len(self.NB)

    @property
    def dofs(self):
        return np.concatenate([self.NI, self.NB])


@dataclass
class Mesh2D:
    vertices: np.ndarray
    triangles: np.ndarray
    region: np.ndarray
    h: float
    H: float
    delta: float
    consistent: bool = True
    index: SpatialIndex = field(default=None, repr=False)

    def __post_init__(self):
        if self.index is None:
            size = max(self.h, self.H, self.delta / 8.0)
            self.index = SpatialIndex.build(self.vertices, self.triangles, size)

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_triangles(self):
        return len(self.triangles)

    def areas(self):
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


def _on_unit_boundary(p, tol=1e-12):
    x, y = p[:, 0], p[:, 1]
    return (np.abs(x) < tol) | (np.abs(x - 1) < tol) | (np.abs(y) < tol) | (np.abs(y - 1) < tol)


def _grid_triangles(xs, ys, keep):
    """Split the kept cells of a tensor grid into two counterclockwise triangles
    along the (1, 0)-(0, 1) diagonal.

    Returns the triangles in terms of flat grid-point ids (i * len(ys) + j).
    """
    ny = len(ys)
    tris = []
    for i, j in zip(*np.nonzero(keep)):
        p00 = i * ny + j
        p10 = (i + 1) * ny + j
        p01 = i * ny + j + 1
        p11 = (i + 1) * ny + j + 1
        tris.append((p00, p10, p01))
        tris.append((p10, p11, p01))
    return np.array(tris, dtype=np.int64).reshape(-1, 3)


def _collar_axis(delta, hc, inner):
    """Coordinates of a collar grid line family: [-delta, 0], inner, [1, 1 + delta]."""
    nc = _cells(delta, hc)
    left = np.linspace(-delta, 0.0, nc + 1)[:-1]
    right = np.linspace(1.0, 1.0 + delta, nc + 1)[1:]
    return np.concatenate([left, inner, right]), nc


def _assemble_regions(xi, xc, delta, h, H, consistent):
    """Combine an interior tensor grid xi x xi and a collar grid xc x xc."""
    n = len(xi) - 1
    gi = np.stack(np.meshgrid(xi, xi, indexing="ij"), axis=-1).reshape(-1, 2)
    ti = _grid_triangles(xi, xi, np.ones((n, n), dtype=bool))

    m = len(xc) - 1
    mid = 0.5 * (xc[1:] + xc[:-1])
    inside = (mid > 0.0) & (mid < 1.0)
    keep = ~(inside[:, None] & inside[None, :])
    gc = np.stack(np.meshgrid(xc, xc, indexing="ij"), axis=-1).reshape(-1, 2)
    tc = _grid_triangles(xc, xc, keep)

    # interior vertices: strictly inside first, then on the boundary
    bnd = _on_unit_boundary(gi)
    order_i = np.concatenate([np.nonzero(~bnd)[0], np.nonzero(bnd)[0]])
    used_c = np.unique(tc)
    new_i = np.full(len(gi), -1, dtype=np.int64)
    new_i[order_i] = np.arange(len(order_i))
    new_c = np.full(len(gc), -1, dtype=np.int64)
    new_c[used_c] = len(order_i) + np.arange(len(used_c))

    vertices = np.concatenate([gi[order_i], gc[used_c]])
    triangles = np.concatenate([new_i[ti], new_c[tc]])
    region = np.concatenate([np.full(len(ti), INTERIOR, dtype=np.int8),
                             np.full(len(tc), COLLAR, dtype=np.int8)])
    return Mesh2D(vertices, triangles, region, h, H, delta, consistent)


def build_consistent_mesh(h, delta, structured=True, seed=0):
    """Uniform right-triangle mesh of [-delta, 1 + delta]^2.

    The unit square is split into ceil(1/h) cells per direction and each collar
    strip into ceil(delta/h) cells, so the actual spacings never exceed h.
    h = delta is accepted (one collar cell). With structured=False the
    strictly interior vertices are moved by at most 0.2 h in a random direction
    (seeded), keeping the connectivity, which stays valid for that amplitude.
    """
    if not (h > 0 and delta > 0):
        raise ValueError("h and delta must be positive")
    if h > delta * (1.0 + _ROUND):
        raise ValueError(f"mesh size h={h} exceeds the horizon delta={delta}")
    n = _cells(1.0, h)
    xi = np.linspace(0.0, 1.0, n + 1)
    xc, nc = _collar_axis(delta, h, xi)
    mesh = _assemble_regions(xi, xc, delta, 1.0 / n, delta / nc, True)
    if not structured:
        rng = np.random.default_rng(seed)
        sets = classify_nodes(mesh)
        k = len(sets.NI)
        r = 0.2 * mesh.h * np.sqrt(rng.uniform(size=k))
        a = rng.uniform(0.0, 2.0 * np.pi, size=k)
        vertices = mesh.vertices.copy()
        vertices[sets.NI] += np.column_stack([r * np.cos(a), r * np.sin(a)])
        mesh = Mesh2D(vertices, mesh.triangles, mesh.region, mesh.h, mesh.H, delta, True)
    return mesh


def build_nonconsistent_mesh(h, H, delta):
    """Interior mesh of size h and an independently generated collar of size H."""
    if not (h > 0 and H > 0 and delta > 0):
        raise ValueError("h, H and delta must be positive")
    if max(h, H) >= delta:
        raise ValueError("mesh sizes must be smaller than the horizon")
    n = _cells(1.0, h)
    xi = np.linspace(0.0, 1.0, n + 1)
    m = _cells(1.0, H)
    xc, nc = _collar_axis(delta, H, np.linspace(0.0, 1.0, m + 1))
    return _assemble_regions(xi, xc, delta, 1.0 / n, max(1.0 / m, delta / nc),
                             n == m)


def classify_nodes(mesh):
    """Split vertices into interior (NI), boundary (NB) and collar (NC) sets."""
    interior_nodes = np.unique(mesh.triangles[mesh.region == INTERIOR])
    collar_nodes = np.unique(mesh.triangles[mesh.region == COLLAR])
    bnd = _on_unit_boundary(mesh.vertices[interior_nodes])
    return NodeSets(interior_nodes[~bnd], interior_nodes[bnd], collar_nodes)


def elements_within(mesh, x, delta):
    """Indices of triangles whose bounding circle meets B(x, delta)."""
    return mesh.index.query(np.asarray(x, dtype=float), delta)


def export_mesh(mesh, path):
    """Write "v x y" and "t i j k region" lines."""
    with open(path, "w") as fh:
        for x, y in mesh.vertices:
            fh.write(f"v {x:.17g} {y:.17g}\n")
        for (i, j, k), r in zip(mesh.triangles, mesh.region):
            fh.write(f"t {i} {j} {k} {'interior' if r == INTERIOR else 'collar'}\n")


def read_mesh(path, h, delta):
    vertices, triangles, region = [], [], []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                vertices.append((float(parts[1]), float(parts[2])))
            elif parts[0] == "t":
                triangles.append(tuple(int(p) for p in parts[1:4]))
                region.append(INTERIOR if parts[4] == "interior" else COLLAR)
    return Mesh2D(np.array(vertices), np.array(triangles, dtype=np.int64),
                  np.array(region, dtype=np.int8), h, h, delta)


# ---------------------------------------------------------------------------
# one dimension

@dataclass
class Grid1D:
    """Elements of [-delta, 1 + delta] with the two points 0 and 1 doubled.

    x holds node coordinates by node id (NI, then NB = {0, 1}, then the collar
    nodes); elements holds (left, right) node ids.
    """
    x: np.ndarray
    elements: np.ndarray
    region: np.ndarray
    n1: int
    h: float
    delta: float
    perturb: float
    seed: int

    @property
    def nodes(self):
        """Distinct node positions in increasing order."""
        return np.unique(self.x)

    @property
    def interior_nodes(self):
        """Nodes of the interior region [0, 1] in increasing order."""
        ids = np.unique(self.elements[self.region == INTERIOR])
        return np.sort(self.x[ids])

    def node_sets(self):
        n_in = self.n1 - 1
        return NodeSets(np.arange(n_in), np.arange(n_in, n_in + 2),
                        np.arange(n_in + 2, len(self.x)))


def build_grid_1d(h, delta, perturb=0.0, seed=0):
    """Randomly perturbed uniform grid on [0, 1] with uniform collar grids.

    Interior nodes are i h + eps_i with eps_i uniform on [-perturb h, perturb h];
    the end points 0 and 1 are not moved.
    """
    if not (h > 0 and delta > 0):
        raise ValueError("h and delta must be positive")
    if h > delta * (1.0 + _ROUND):
        raise ValueError("mesh size must not exceed the horizon")
    if not 0.0 <= perturb <= 0.2:
        raise ValueError("perturbation amplitude must lie in [0, 0.2]")
    n1 = _cells(1.0, h)
    hu = 1.0 / n1
    rng = np.random.default_rng(seed)
    eps = rng.uniform(-perturb * hu, perturb * hu, size=n1 - 1)
    inner = np.arange(1, n1) * hu + eps
    nc = _cells(delta, h)
    left = np.linspace(-delta, 0.0, nc + 1)
    right = np.linspace(1.0, 1.0 + delta, nc + 1)
    x = np.concatenate([inner, [0.0, 1.0], left, right])

    n_in = n1 - 1
    i0, i1 = n_in, n_in + 1
    chain = np.concatenate([[i0], np.arange(n_in), [i1]])
    lc = n_in + 2 + np.arange(nc + 1)
    rc = n_in + 3 + nc + np.arange(nc + 1)
    elements = np.concatenate([
        np.column_stack([chain[:-1], chain[1:]]),
        np.column_stack([lc[:-1], lc[1:]]),
        np.column_stack([rc[:-1], rc[1:]]),
    ]).astype(np.int64)
    region = np.concatenate([np.full(n1, INTERIOR), np.full(2 * nc, COLLAR)]).astype(np.int8)
    return Grid1D(x, elements, region, n1, hu, float(delta), float(perturb), int(seed))
